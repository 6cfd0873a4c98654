//! Turns scene recipes into audio and writes datasets.
//!
//! Per scene, at the output rate:
//! `y_ear = s * h_s^early`, `n_ear = s * h_s^late + sum_i n_i * h_i`,
//! both ears averaged, the whole interferer scaled to the requested SNR,
//! `x = y + n`, then one common peak gain for `(x, y, n)`.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioBuffer, Brir};
use crate::catalog::Catalog;
use crate::dsp::{self, SplitMode};
use crate::error::{Error, Result};
use crate::resample::resample;
use crate::sampler::{DatasetManifest, SceneSpec};
use crate::wav::{self, SampleFormat};

pub const OUTPUT_RATE: u32 = 16000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub rate: u32,
    pub headroom_db: f64,
    pub split_mode: SplitMode,
    pub format: SampleFormat,
    pub write_interferer: bool,
    /// Decoded assets kept in memory.
    pub cache_capacity: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            rate: OUTPUT_RATE,
            headroom_db: 1.0,
            split_mode: SplitMode::FromZero,
            format: SampleFormat::Float32,
            write_interferer: true,
            cache_capacity: 256,
        }
    }
}

/// Where decoded assets come from.
pub trait AssetLoader: Send + Sync {
    fn load(&self, path: &str) -> Result<AudioBuffer>;
}

/// Reads WAV files from disk.
#[derive(Debug, Default, Clone, Copy)]
pub struct FileLoader;

impl AssetLoader for FileLoader {
    fn load(&self, path: &str) -> Result<AudioBuffer> {
        wav::read(Path::new(path))
    }
}

/// Serves buffers registered in memory, keyed by catalog path.
#[derive(Debug, Default, Clone)]
pub struct MemoryLoader {
    pub assets: HashMap<String, AudioBuffer>,
}

impl AssetLoader for MemoryLoader {
    fn load(&self, path: &str) -> Result<AudioBuffer> {
        self.assets
            .get(path)
            .cloned()
            .ok_or_else(|| Error::Resolution(format!("no in-memory asset {path}")))
    }
}

struct Lru {
    map: HashMap<(String, u32), Arc<AudioBuffer>>,
    order: VecDeque<(String, u32)>,
}

/// Thread-safe LRU cache of assets resampled to a given rate.
pub struct AssetCache<L> {
    loader: L,
    capacity: usize,
    inner: Mutex<Lru>,
}

impl<L: AssetLoader> AssetCache<L> {
    pub fn new(loader: L, capacity: usize) -> Self {
        Self {
            loader,
            capacity: capacity.max(1),
            inner: Mutex::new(Lru {
                map: HashMap::new(),
                order: VecDeque::new(),
            }),
        }
    }

    pub fn get(&self, path: &str, rate: u32) -> Result<Arc<AudioBuffer>> {
        let key = (path.to_owned(), rate);
        {
            let mut lru = self.inner.lock().expect("asset cache poisoned");
            if let Some(buf) = lru.map.get(&key).cloned() {
                if let Some(pos) = lru.order.iter().position(|k| k == &key) {
                    lru.order.remove(pos);
                }
                lru.order.push_back(key);
                return Ok(buf);
            }
        }
        // Decode outside the lock; a concurrent duplicate load is harmless.
        let raw = self.loader.load(path)?;
        let buf = Arc::new(resample(&raw, rate)?);
        let mut lru = self.inner.lock().expect("asset cache poisoned");
        if !lru.map.contains_key(&key) {
            lru.map.insert(key.clone(), buf.clone());
            lru.order.push_back(key);
            while lru.order.len() > self.capacity {
                if let Some(old) = lru.order.pop_front() {
                    lru.map.remove(&old);
                }
            }
        }
        Ok(buf)
    }
}

/// Audio for one scene, all mono at the output rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub mixture: AudioBuffer,
    pub target: AudioBuffer,
    pub interferer: AudioBuffer,
    /// Gain applied to the interferer to reach the requested SNR.
    pub applied_gain: f64,
    /// Common peak-normalisation gain applied to all three signals.
    pub normalization_gain: f64,
    pub realized_snr_db: f64,
    /// Relative L2 distance between the mixture convolved with the unsplit
    /// speech BRIR and the sum of target and unscaled interferer.
    pub linearity_error: f64,
}

fn to_mono(buf: &AudioBuffer) -> Vec<f64> {
    if buf.num_channels() == 1 {
        return buf.samples().to_vec();
    }
    let k = buf.num_channels() as f64;
    (0..buf.len())
        .map(|i| buf.channels().iter().map(|c| c[i]).sum::<f64>() / k)
        .collect()
}

fn relative_l2(reference: &[f64], other: &[f64]) -> f64 {
    let num: f64 = reference.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|a| a * a).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

fn load_brir<L: AssetLoader>(
    catalog: &Catalog,
    assets: &AssetCache<L>,
    id: &str,
    path: &str,
    rate: u32,
) -> Result<Brir> {
    let item = catalog
        .find_brir(id, path)
        .ok_or_else(|| Error::Resolution(format!("BRIR {id}:{path} not in catalog")))?;
    let buf = assets.get(path, rate)?;
    if buf.num_channels() != 2 {
        return Err(Error::InvalidArgument(format!(
            "BRIR {path} has {} channels",
            buf.num_channels()
        )));
    }
    Brir::new(
        buf.channel(0).to_vec(),
        buf.channel(1).to_vec(),
        rate,
        item.room_id.clone(),
        item.azimuth_deg,
    )
}

/// Renders one scene. Errors carry the scene id.
pub fn render_scene<L: AssetLoader>(
    spec: &SceneSpec,
    catalog: &Catalog,
    assets: &AssetCache<L>,
    opts: &RenderOptions,
) -> Result<RenderedScene> {
    render_inner(spec, catalog, assets, opts).map_err(|e| e.in_scene(spec.scene_id))
}

fn render_inner<L: AssetLoader>(
    spec: &SceneSpec,
    catalog: &Catalog,
    assets: &AssetCache<L>,
    opts: &RenderOptions,
) -> Result<RenderedScene> {
    let rate = opts.rate;
    if spec.noise_refs.len() != spec.noise_brirs.len() || spec.noise_refs.is_empty() {
        return Err(Error::Manifest(format!(
            "{} noise segments but {} noise BRIRs",
            spec.noise_refs.len(),
            spec.noise_brirs.len()
        )));
    }
    let sp = &spec.speech_ref;
    catalog
        .find_speech(&sp.id, &sp.path)
        .ok_or_else(|| Error::Resolution(format!("utterance {}:{} not in catalog", sp.id, sp.path)))?;
    let speech = to_mono(&*assets.get(&sp.path, rate)?);
    let len = speech.len();
    if len == 0 {
        return Err(Error::DegenerateSignal("empty utterance".into()));
    }

    let mut noises = Vec::with_capacity(spec.noise_refs.len());
    for seg in &spec.noise_refs {
        catalog
            .find_noise(&seg.id, &seg.path)
            .ok_or_else(|| Error::Resolution(format!("noise {}:{} not in catalog", seg.id, seg.path)))?;
        let full = to_mono(&*assets.get(&seg.path, rate)?);
        if full.len() < len {
            return Err(Error::InvalidArgument(format!(
                "noise {} ({} samples) shorter than utterance ({len})",
                seg.path,
                full.len()
            )));
        }
        let start = ((seg.start_s * rate as f64).round().max(0.0) as usize).min(full.len() - len);
        noises.push(full[start..start + len].to_vec());
    }

    let speech_brir = load_brir(catalog, assets, &spec.speech_brir.id, &spec.speech_brir.path, rate)?;
    let noise_brirs = spec
        .noise_brirs
        .iter()
        .map(|r| load_brir(catalog, assets, &r.id, &r.path, rate))
        .collect::<Result<Vec<_>>>()?;
    let split = dsp::split_ir(&speech_brir, spec.boundary_ms, opts.split_mode)?;

    let mut target_ears = Vec::with_capacity(2);
    let mut interferer_ears = Vec::with_capacity(2);
    let mut direct_ears = Vec::with_capacity(2);
    for ear in 0..2 {
        let early = dsp::convolve_truncated(&speech, split.early.ears()[ear]);
        let late = dsp::convolve_truncated(&speech, split.late.ears()[ear]);
        let full = dsp::convolve_truncated(&speech, speech_brir.ears()[ear]);
        let mut noise_sum = vec![0.0; len];
        for (n, h) in noises.iter().zip(&noise_brirs) {
            for (acc, v) in noise_sum.iter_mut().zip(dsp::convolve_truncated(n, h.ears()[ear])) {
                *acc += v;
            }
        }
        interferer_ears.push(late.iter().zip(&noise_sum).map(|(a, b)| a + b).collect::<Vec<_>>());
        direct_ears.push(full.iter().zip(&noise_sum).map(|(a, b)| a + b).collect::<Vec<_>>());
        target_ears.push(early);
    }
    let stereo = |mut ears: Vec<Vec<f64>>| {
        let right = ears.pop().expect("two ears");
        let left = ears.pop().expect("two ears");
        AudioBuffer::stereo(left, right, rate)
    };
    let target = dsp::downmix(&stereo(target_ears)?)?;
    let interferer = dsp::downmix(&stereo(interferer_ears)?)?;
    let direct = dsp::downmix(&stereo(direct_ears)?)?;
    let unscaled_sum = dsp::mix(&target, &interferer, 1.0)?;
    let linearity_error = relative_l2(direct.samples(), unscaled_sum.samples());

    let gain = dsp::gain_for_snr(&target, &interferer, spec.snr_db)?;
    let interferer = interferer.scaled(gain);
    let mixture = dsp::mix(&target, &interferer, 1.0)?;
    let (mut scaled, norm) = dsp::peak_normalize(&[mixture, target, interferer], opts.headroom_db)?;
    let interferer = scaled.pop().expect("three buffers");
    let target = scaled.pop().expect("three buffers");
    let mixture = scaled.pop().expect("three buffers");
    let realized_snr_db = dsp::energy_ratio_db(&target, &interferer);
    Ok(RenderedScene {
        mixture,
        target,
        interferer,
        applied_gain: gain,
        normalization_gain: norm,
        realized_snr_db,
        linearity_error,
    })
}

// ---------------------------------------------------------------------------
// Datasets on disk

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const AUDIO_DIR: &str = "audio";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Mixture,
    Target,
    Interferer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Mixture => "mixture",
            Role::Target => "target",
            Role::Interferer => "interferer",
        }
    }
}

pub fn audio_file_name(scene_id: u64, role: Role) -> String {
    format!("{scene_id:06}_{}.wav", role.as_str())
}

pub fn audio_path(out_dir: &Path, scene_id: u64, role: Role) -> PathBuf {
    out_dir.join(AUDIO_DIR).join(audio_file_name(scene_id, role))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: u64,
    pub duration_s: f64,
    pub snr_db: f64,
    pub realized_snr_db: f64,
    pub applied_gain: f64,
    pub normalization_gain: f64,
    pub linearity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFailure {
    pub scene_id: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub scene_count: usize,
    pub total_duration_s: f64,
    pub options: RenderOptions,
    pub scenes: Vec<SceneRecord>,
    pub failures: Vec<SceneFailure>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn build_scene<L: AssetLoader>(
    spec: &SceneSpec,
    catalog: &Catalog,
    assets: &AssetCache<L>,
    opts: &RenderOptions,
    out_dir: &Path,
) -> Result<SceneRecord> {
    let r = render_scene(spec, catalog, assets, opts)?;
    let write = |role, buf: &AudioBuffer| {
        wav::write(&audio_path(out_dir, spec.scene_id, role), buf, opts.format).map_err(|e| e.in_scene(spec.scene_id))
    };
    write(Role::Mixture, &r.mixture)?;
    write(Role::Target, &r.target)?;
    if opts.write_interferer {
        write(Role::Interferer, &r.interferer)?;
    }
    Ok(SceneRecord {
        scene_id: spec.scene_id,
        duration_s: r.mixture.duration_s(),
        snr_db: spec.snr_db,
        realized_snr_db: r.realized_snr_db,
        applied_gain: r.applied_gain,
        normalization_gain: r.normalization_gain,
        linearity_error: r.linearity_error,
    })
}

/// Renders every scene with `workers` threads and writes the dataset
/// directory. Scene failures are collected in the report, not raised.
pub fn build_dataset<L: AssetLoader>(
    manifest: &DatasetManifest,
    catalog: &Catalog,
    assets: &AssetCache<L>,
    out_dir: &Path,
    workers: usize,
    opts: &RenderOptions,
) -> Result<BuildReport> {
    create_dir(&out_dir.join(AUDIO_DIR))?;
    write_atomic(&out_dir.join(MANIFEST_FILE), manifest.to_jsonl().as_bytes())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<SceneRecord>> = pool.install(|| {
        manifest
            .scenes
            .par_iter()
            .map(|s| build_scene(s, catalog, assets, opts, out_dir))
            .collect()
    });
    let mut scenes = Vec::new();
    let mut failures = Vec::new();
    for (spec, outcome) in manifest.scenes.iter().zip(outcomes) {
        match outcome {
            Ok(rec) => scenes.push(rec),
            Err(e) => failures.push(SceneFailure {
                scene_id: spec.scene_id,
                error: e.root().to_string(),
            }),
        }
    }
    let report = BuildReport {
        scene_count: scenes.len(),
        total_duration_s: scenes.iter().map(|s| s.duration_s).sum(),
        options: opts.clone(),
        scenes,
        failures,
    };
    let text = serde_json::to_string_pretty(&report)?;
    write_atomic(&out_dir.join(REPORT_FILE), text.as_bytes())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub linearity: f64,
    pub snr_db: f64,
}

impl Tolerances {
    pub fn for_format(format: SampleFormat) -> Self {
        match format {
            SampleFormat::Float32 => Self {
                linearity: 1e-6,
                snr_db: 0.01,
            },
            // 16-bit quantisation of three independently rounded files.
            SampleFormat::Pcm16 => Self {
                linearity: 1e-2,
                snr_db: 0.05,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedScene {
    pub scene_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenes_checked: usize,
    pub max_linearity_error: f64,
    pub max_snr_deviation_db: f64,
    pub tolerances: Tolerances,
    pub flagged: Vec<FlaggedScene>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Re-reads a built dataset and checks `x = y + n` and the realised SNR of
/// every scene against its manifest entry.
pub fn verify_dataset(out_dir: &Path, tolerances: Option<Tolerances>) -> Result<VerificationReport> {
    let manifest = DatasetManifest::load(&out_dir.join(MANIFEST_FILE))?;
    let report_path = out_dir.join(REPORT_FILE);
    let report: BuildReport =
        serde_json::from_str(&fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?)?;
    let tol = tolerances.unwrap_or_else(|| Tolerances::for_format(report.options.format));
    let failed: std::collections::HashSet<u64> = report.failures.iter().map(|f| f.scene_id).collect();

    let checks: Vec<(u64, Result<(f64, f64)>)> = manifest
        .scenes
        .par_iter()
        .filter(|s| !failed.contains(&s.scene_id))
        .map(|s| {
            let res = (|| {
                let x = wav::read(&audio_path(out_dir, s.scene_id, Role::Mixture))?;
                let y = wav::read(&audio_path(out_dir, s.scene_id, Role::Target))?;
                let n = wav::read(&audio_path(out_dir, s.scene_id, Role::Interferer))?;
                let sum = dsp::mix(&y, &n, 1.0)?;
                let lin = relative_l2(x.samples(), sum.samples());
                let snr = dsp::energy_ratio_db(&y, &n);
                let dev = (snr - s.snr_db).abs();
                Ok((lin, if dev.is_nan() { f64::INFINITY } else { dev }))
            })();
            (s.scene_id, res)
        })
        .collect();

    let mut out = VerificationReport {
        scenes_checked: checks.len(),
        max_linearity_error: 0.0,
        max_snr_deviation_db: 0.0,
        tolerances: tol,
        flagged: Vec::new(),
    };
    for (scene_id, res) in checks {
        match res {
            Ok((lin, dev)) => {
                out.max_linearity_error = out.max_linearity_error.max(lin);
                out.max_snr_deviation_db = out.max_snr_deviation_db.max(dev);
                let mut reasons = Vec::new();
                if !(lin <= tol.linearity) {
                    reasons.push(format!("x != y + n (relative error {lin:.3e})"));
                }
                if !(dev <= tol.snr_db) {
                    reasons.push(format!("SNR off by {dev:.4} dB"));
                }
                if !reasons.is_empty() {
                    out.flagged.push(FlaggedScene {
                        scene_id,
                        reason: reasons.join("; "),
                    });
                }
            }
            Err(e) => out.flagged.push(FlaggedScene {
                scene_id,
                reason: e.root().to_string(),
            }),
        }
    }
    Ok(out)
}
