use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "sceneforge",
    version,
    about = "Plan, render and evaluate noisy reverberant speech datasets"
)]
pub struct Cli {
    /// Catalog config (JSON). Relative roots resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Dataset seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Re-run from a run_config.json written by an earlier run. --out and
    /// --workers may still be given; everything else comes from the file.
    #[arg(long, global = true, conflicts_with = "config")]
    pub replay: Option<PathBuf>,

    /// Overrides relative catalog roots.
    #[arg(long, global = true, env = "SCENEFORGE_DATA_ROOT")]
    pub data_root: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Index the configured corpora into catalog.jsonl.
    Scan(ScanArgs),
    /// Draw scene recipes into manifest.jsonl.
    Plan(PlanArgs),
    /// Render a manifest to audio.
    Render(RenderArgs),
    /// Corpus tables and repetition statistics.
    Stats(StatsArgs),
    /// Score enhanced files against a rendered dataset.
    Eval(EvalArgs),
    /// Epochs per dataset size under a constant update budget.
    Schedule(ScheduleArgs),
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Emit the built-in reference catalog (metadata only) instead of
    /// scanning files.
    #[arg(long)]
    pub reference: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightingArg {
    InverseLength,
    Uniform,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitModeArg {
    FromZero,
    FromOnset,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Catalog written by `scan`.
    #[arg(long)]
    pub catalog: PathBuf,
    /// Target speech duration in hours.
    #[arg(long)]
    pub hours: f64,
    /// Which pools and corpus weighting to draw from.
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    /// Sampler settings (JSON); individual flags below override it.
    #[arg(long)]
    pub sampler: Option<PathBuf>,
    /// Lower end of the uniform SNR range (dB).
    #[arg(long, allow_hyphen_values = true)]
    pub snr_min: Option<f64>,
    /// Upper end of the uniform SNR range (dB).
    #[arg(long, allow_hyphen_values = true)]
    pub snr_max: Option<f64>,
    /// Early/late split point of each BRIR (ms).
    #[arg(long)]
    pub boundary_ms: Option<f64>,
    /// Where the boundary is measured from.
    #[arg(long, value_enum)]
    pub split_mode: Option<SplitModeArg>,
    /// Training-split corpus weighting; val and test always use uniform.
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    F32,
    Pcm16,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Manifest written by `plan`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Catalog the manifest was planned from.
    #[arg(long)]
    pub catalog: PathBuf,
    /// Sample format of the written WAV files.
    #[arg(long, value_enum, default_value_t = FormatArg::F32)]
    pub format: FormatArg,
    /// Mixture peak level below full scale (dB).
    #[arg(long, default_value_t = 1.0)]
    pub headroom_db: f64,
    /// Skip writing interferer files (disables --verify).
    #[arg(long)]
    pub no_interferer: bool,
    /// Re-read the output and check x = y + n and the SNRs.
    #[arg(long, conflicts_with = "no_interferer")]
    pub verify: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CountingArg {
    All,
    Later,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Catalog written by `scan`.
    #[arg(long)]
    pub catalog: PathBuf,
    /// Adds repetition statistics for this manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also report the leading part of the manifest at these sizes (hours).
    #[arg(long, value_delimiter = ',')]
    pub prefix_hours: Vec<f64>,
    /// Count every occurrence of a repeated utterance, or only the repeats.
    #[arg(long, value_enum, default_value_t = CountingArg::All)]
    pub counting: CountingArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SnrKindArg {
    Snr,
    SiSnr,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset directory written by `render`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of enhanced files named like the dataset mixtures.
    #[arg(long)]
    pub enhanced: PathBuf,
    /// Plain or scale-invariant SNR.
    #[arg(long, value_enum, default_value_t = SnrKindArg::Snr)]
    pub snr_kind: SnrKindArg,
    /// Trim pairs of unequal length to the shorter one.
    #[arg(long)]
    pub trim_to_min: bool,
    /// Exit 0 even when enhanced files are missing.
    #[arg(long)]
    pub allow_missing: bool,
    /// External PESQ command with {ref}, {deg} and {rate} placeholders.
    #[arg(long)]
    pub pesq_cmd: Option<String>,
    /// Concurrent PESQ processes.
    #[arg(long, default_value_t = 1)]
    pub pesq_jobs: usize,
    /// Also write metrics.csv.
    #[arg(long)]
    pub csv: bool,
    /// Also write metrics.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    /// Dataset sizes in hours.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hours: Vec<f64>,
    /// Epoch-hours held constant across sizes.
    #[arg(long, default_value_t = sceneforge_core::schedule::DEFAULT_BUDGET_HOURS)]
    pub budget: f64,
}
