//! Resolved run configurations and the commands that execute them.
//!
//! Flags are first resolved into a [`RunConfig`] with absolute paths; the
//! command then runs from that value alone, which is what makes `--replay`
//! reproduce a run exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sceneforge_core::catalog::reference::reference_catalog;
use sceneforge_core::catalog::{
    brir_stats, corpus_stats, noise_stats, scan, Catalog, CatalogConfig, PoolAssignment, SplitConfig,
};
use sceneforge_core::dsp::SplitMode;
use sceneforge_core::metrics::{evaluate_pairs, EvalOptions, PesqHook, SnrKind};
use sceneforge_core::renderer::{build_dataset, verify_dataset, AssetCache, FileLoader, RenderOptions};
use sceneforge_core::sampler::{
    plan_dataset, repetition_stats, CorpusWeighting, DatasetManifest, DatasetSplit, RepeatCounting, SamplerConfig,
};
use sceneforge_core::schedule::epochs_for;
use sceneforge_core::wav::SampleFormat;
use sceneforge_core::Error;

use crate::args::*;
use crate::exit;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Scan {
        catalog_config: Option<PathBuf>,
        data_root: Option<PathBuf>,
        reference: bool,
    },
    Plan {
        catalog: PathBuf,
        hours: f64,
        split: DatasetSplit,
        pools: SplitConfig,
        sampler: SamplerConfig,
    },
    Render {
        manifest: PathBuf,
        catalog: PathBuf,
        options: RenderOptions,
        verify: bool,
    },
    Stats {
        catalog: PathBuf,
        manifest: Option<PathBuf>,
        prefix_hours: Vec<f64>,
        counting: RepeatCounting,
    },
    Eval {
        dataset: PathBuf,
        enhanced: PathBuf,
        options: EvalOptions,
        csv: bool,
        svg: bool,
    },
    Schedule {
        hours: Vec<f64>,
        budget: f64,
    },
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit::code_for(&e),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: exit::USAGE,
        message: message.into(),
    }
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(p).map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Turns parsed flags into a self-contained run configuration.
pub fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let cmd = cli
        .command
        .as_ref()
        .ok_or_else(|| usage("no command given (see --help)"))?;
    let config_path = cli.config.as_deref().map(absolute).transpose()?;
    let command = match cmd {
        Cmd::Scan(a) => {
            if !a.reference && config_path.is_none() {
                return Err(usage("scan needs --config (or --reference)"));
            }
            Command::Scan {
                catalog_config: if a.reference { None } else { config_path },
                data_root: cli.data_root.as_deref().map(absolute).transpose()?,
                reference: a.reference,
            }
        }
        Cmd::Plan(a) => {
            let pools = match &config_path {
                Some(p) => CatalogConfig::load(p)?.split,
                None => SplitConfig::default(),
            };
            let mut sampler = match &a.sampler {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
                }
                None => SamplerConfig::default(),
            };
            if let Some(v) = a.snr_min {
                sampler.snr_range[0] = v;
            }
            if let Some(v) = a.snr_max {
                sampler.snr_range[1] = v;
            }
            if let Some(v) = a.boundary_ms {
                sampler.boundary_ms = v;
            }
            if let Some(m) = a.split_mode {
                sampler.split_mode = match m {
                    SplitModeArg::FromZero => SplitMode::FromZero,
                    SplitModeArg::FromOnset => SplitMode::FromOnset,
                };
            }
            if let Some(w) = a.weighting {
                sampler.corpus_weighting = match w {
                    WeightingArg::InverseLength => CorpusWeighting::InverseAvgLength,
                    WeightingArg::Uniform => CorpusWeighting::Uniform,
                };
            }
            let split = match a.split {
                SplitArg::Train => DatasetSplit::Train,
                SplitArg::Val => DatasetSplit::Val,
                SplitArg::Test => DatasetSplit::Test,
            };
            let sampler = split.adjust_config(&sampler);
            sampler.validate()?;
            if !(a.hours > 0.0 && a.hours.is_finite()) {
                return Err(usage(format!("--hours must be positive, got {}", a.hours)));
            }
            Command::Plan {
                catalog: absolute(&a.catalog)?,
                hours: a.hours,
                split,
                pools,
                sampler,
            }
        }
        Cmd::Render(a) => Command::Render {
            manifest: absolute(&a.manifest)?,
            catalog: absolute(&a.catalog)?,
            options: RenderOptions {
                headroom_db: a.headroom_db,
                format: match a.format {
                    FormatArg::F32 => SampleFormat::Float32,
                    FormatArg::Pcm16 => SampleFormat::Pcm16,
                },
                write_interferer: !a.no_interferer,
                ..RenderOptions::default()
            },
            verify: a.verify,
        },
        Cmd::Stats(a) => Command::Stats {
            catalog: absolute(&a.catalog)?,
            manifest: a.manifest.as_deref().map(absolute).transpose()?,
            prefix_hours: a.prefix_hours.clone(),
            counting: match a.counting {
                CountingArg::All => RepeatCounting::AllOccurrences,
                CountingArg::Later => RepeatCounting::LaterOccurrences,
            },
        },
        Cmd::Eval(a) => Command::Eval {
            dataset: absolute(&a.dataset)?,
            enhanced: absolute(&a.enhanced)?,
            options: EvalOptions {
                snr_kind: match a.snr_kind {
                    SnrKindArg::Snr => SnrKind::Snr,
                    SnrKindArg::SiSnr => SnrKind::SiSnr,
                },
                trim_to_min: a.trim_to_min,
                allow_missing: a.allow_missing,
                pesq: a.pesq_cmd.as_ref().map(|c| PesqHook {
                    command: c.clone(),
                    max_concurrent: a.pesq_jobs.max(1),
                }),
                ..EvalOptions::default()
            },
            csv: a.csv,
            svg: a.svg,
        },
        Cmd::Schedule(a) => Command::Schedule {
            hours: a.hours.clone(),
            budget: a.budget,
        },
    };
    Ok(RunConfig {
        seed: cli.seed,
        workers: cli.workers.unwrap_or_else(default_workers).max(1),
        out: cli.out.as_deref().map(absolute).transpose()?,
        command,
    })
}

pub fn load_replay(path: &Path, cli: &Cli) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut rc: RunConfig = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(out) = &cli.out {
        rc.out = Some(absolute(out)?);
    }
    if let Some(w) = cli.workers {
        rc.workers = w.max(1);
    }
    Ok(rc)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| {
        Failure::from(Error::Io {
            path: path.to_owned(),
            source: e,
        })
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write(path, &text)
}

fn out_dir(rc: &RunConfig) -> Result<&Path, Failure> {
    let out = rc
        .out
        .as_deref()
        .ok_or_else(|| usage("--out is required for this command"))?;
    fs::create_dir_all(out).map_err(|e| {
        Failure::from(Error::Io {
            path: out.to_owned(),
            source: e,
        })
    })?;
    Ok(out)
}

/// Executes a resolved run and returns the process exit code.
pub fn execute(rc: &RunConfig) -> Result<i32, Failure> {
    if let Command::Schedule { hours, budget } = &rc.command {
        return schedule(rc, hours, *budget);
    }
    let out = out_dir(rc)?;
    write_json(&out.join(RUN_CONFIG_FILE), rc)?;
    match &rc.command {
        Command::Scan {
            catalog_config,
            data_root,
            reference,
        } => cmd_scan(out, catalog_config.as_deref(), data_root.as_deref(), *reference),
        Command::Plan {
            catalog,
            hours,
            split,
            pools,
            sampler,
        } => cmd_plan(out, catalog, *hours, *split, pools, sampler, rc.seed),
        Command::Render {
            manifest,
            catalog,
            options,
            verify,
        } => cmd_render(out, manifest, catalog, options, *verify, rc.workers),
        Command::Stats {
            catalog,
            manifest,
            prefix_hours,
            counting,
        } => cmd_stats(out, catalog, manifest.as_deref(), prefix_hours, *counting),
        Command::Eval {
            dataset,
            enhanced,
            options,
            csv,
            svg,
        } => cmd_eval(out, dataset, enhanced, options, *csv, *svg, rc.workers),
        Command::Schedule { .. } => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
struct ScanSummary {
    speech: usize,
    noise: usize,
    brirs: usize,
    warnings: Vec<String>,
}

fn cmd_scan(out: &Path, config: Option<&Path>, data_root: Option<&Path>, reference: bool) -> Result<i32, Failure> {
    let (catalog, warnings) = if reference {
        (reference_catalog(), Vec::new())
    } else {
        let path = config.ok_or_else(|| usage("scan needs --config"))?;
        let cfg = CatalogConfig::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let report = scan(&cfg, base, data_root)?;
        (report.catalog, report.warnings)
    };
    write(&out.join("catalog.jsonl"), &catalog.to_jsonl())?;
    let summary = ScanSummary {
        speech: catalog.speech.len(),
        noise: catalog.noise.len(),
        brirs: catalog.brirs.len(),
        warnings,
    };
    log::info!(
        "catalog: {} utterances, {} noise files, {} BRIRs, {} skipped",
        summary.speech,
        summary.noise,
        summary.brirs,
        summary.warnings.len()
    );
    write_json(&out.join("scan_report.json"), &summary)?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct PlanSummary {
    split: DatasetSplit,
    target_hours: f64,
    scenes: usize,
    total_duration_s: f64,
    dataset_seed: u64,
}

fn cmd_plan(
    out: &Path,
    catalog: &Path,
    hours: f64,
    split: DatasetSplit,
    pools: &SplitConfig,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<i32, Failure> {
    let catalog = Catalog::load(catalog)?;
    let (train, test) = PoolAssignment::derive(&catalog, pools)?;
    let seed = split.effective_seed(seed);
    let manifest = plan_dataset(hours, &catalog, split.pools(&train, &test), sampler, seed, split)?;
    manifest.save(&out.join("manifest.jsonl"))?;
    let summary = PlanSummary {
        split,
        target_hours: hours,
        scenes: manifest.scenes.len(),
        total_duration_s: manifest.header.total_duration_s,
        dataset_seed: seed,
    };
    log::info!(
        "planned {} scenes, {:.1} s of speech",
        summary.scenes,
        summary.total_duration_s
    );
    write_json(&out.join("plan_summary.json"), &summary)?;
    Ok(exit::OK)
}

fn cmd_render(
    out: &Path,
    manifest: &Path,
    catalog: &Path,
    options: &RenderOptions,
    verify: bool,
    workers: usize,
) -> Result<i32, Failure> {
    let manifest = DatasetManifest::load(manifest)?;
    let catalog = Catalog::load(catalog)?;
    let cache = AssetCache::new(FileLoader, options.cache_capacity);
    let report = build_dataset(&manifest, &catalog, &cache, out, workers, options)?;
    log::info!(
        "rendered {} scenes ({:.1} s), {} failed",
        report.scene_count,
        report.total_duration_s,
        report.failures.len()
    );
    for f in &report.failures {
        eprintln!("scene {}: {}", f.scene_id, f.error);
    }
    if verify {
        let v = verify_dataset(out, None)?;
        write_json(&out.join("verify.json"), &v)?;
        for f in &v.flagged {
            eprintln!("verify: scene {}: {}", f.scene_id, f.reason);
        }
        if !v.passed() {
            return Ok(exit::VERIFY_FAILED);
        }
    }
    Ok(if report.failures.is_empty() {
        exit::OK
    } else {
        exit::SCENE_FAILURES
    })
}

#[derive(Serialize)]
struct RepetitionRow {
    hours: f64,
    scenes: usize,
    per_corpus_percent: std::collections::BTreeMap<String, f64>,
    total_percent: f64,
}

#[derive(Serialize)]
struct StatsReport {
    corpora: std::collections::BTreeMap<String, sceneforge_core::catalog::CorpusStats>,
    noise: std::collections::BTreeMap<String, sceneforge_core::catalog::NoiseStats>,
    brirs: std::collections::BTreeMap<String, sceneforge_core::catalog::BrirStats>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    repetition: Vec<RepetitionRow>,
}

fn cmd_stats(
    out: &Path,
    catalog: &Path,
    manifest: Option<&Path>,
    prefix_hours: &[f64],
    counting: RepeatCounting,
) -> Result<i32, Failure> {
    let catalog = Catalog::load(catalog)?;
    let mut repetition = Vec::new();
    if let Some(path) = manifest {
        let full = DatasetManifest::load(path)?;
        let mut views = Vec::new();
        for &h in prefix_hours {
            views.push(full.prefix_for_hours(&catalog, h)?);
        }
        views.push(full);
        for m in &views {
            let r = repetition_stats(m, &catalog, counting)?;
            repetition.push(RepetitionRow {
                hours: m.header.total_duration_s / 3600.0,
                scenes: m.scenes.len(),
                per_corpus_percent: r.per_corpus,
                total_percent: r.total,
            });
        }
    } else if !prefix_hours.is_empty() {
        return Err(usage("--prefix-hours needs --manifest"));
    }
    let report = StatsReport {
        corpora: corpus_stats(&catalog),
        noise: noise_stats(&catalog),
        brirs: brir_stats(&catalog),
        repetition,
    };
    write_json(&out.join("stats.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(exit::OK)
}

fn cmd_eval(
    out: &Path,
    dataset: &Path,
    enhanced: &Path,
    options: &EvalOptions,
    csv: bool,
    svg: bool,
    workers: usize,
) -> Result<i32, Failure> {
    let options = EvalOptions {
        workers,
        ..options.clone()
    };
    let report = evaluate_pairs(dataset, enhanced, &options)?;
    write_json(&out.join("metrics.json"), &report)?;
    if csv {
        write(&out.join("metrics.csv"), &report.to_csv())?;
    }
    if svg {
        write(&out.join("metrics.svg"), &report.to_svg())?;
    }
    for id in &report.missing {
        eprintln!("missing enhanced file for scene {id}");
    }
    for f in &report.failures {
        eprintln!("scene {}: {}", f.scene_id, f.error);
    }
    for s in report.per_scene.iter().filter(|s| s.pesq_error.is_some()) {
        eprintln!(
            "scene {}: PESQ: {}",
            s.scene_id,
            s.pesq_error.as_deref().unwrap_or_default()
        );
    }
    if let (Some(s), Some(e)) = (report.aggregate.delta_snr_db, report.aggregate.delta_estoi) {
        log::info!(
            "{} scenes: delta SNR {:.3} dB (sd {:.3}), delta ESTOI {:.4} (sd {:.4})",
            report.aggregate.scene_count,
            s.mean,
            s.std,
            e.mean,
            e.std
        );
    }
    if !report.missing.is_empty() && !options.allow_missing {
        return Ok(exit::MISSING_FILES);
    }
    Ok(if report.failures.is_empty() {
        exit::OK
    } else {
        exit::SCENE_FAILURES
    })
}

#[derive(Serialize)]
struct ScheduleRow {
    hours: f64,
    epochs: u64,
}

fn schedule(rc: &RunConfig, hours: &[f64], budget: f64) -> Result<i32, Failure> {
    let rows = hours
        .iter()
        .map(|&h| {
            Ok(ScheduleRow {
                hours: h,
                epochs: epochs_for(h, budget)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let text = serde_json::to_string_pretty(&rows).map_err(Error::from)?;
    println!("{text}");
    if rc.out.is_some() {
        let out = out_dir(rc)?;
        write_json(&out.join(RUN_CONFIG_FILE), rc)?;
        write(&out.join("schedule.json"), &(text + "\n"))?;
    }
    Ok(exit::OK)
}
