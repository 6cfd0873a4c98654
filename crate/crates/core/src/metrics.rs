//! Intrusive evaluation: reference SNR, SI-SNR, ESTOI and an external PESQ
//! hook, plus dataset-level comparison of enhanced outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Condvar, Mutex};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::renderer::{audio_file_name, audio_path, Role, MANIFEST_FILE};
use crate::resample::resample;
use crate::sampler::DatasetManifest;
use crate::wav;

pub const SNR_CAP_DB: f64 = 120.0;
const EPS: f64 = f64::EPSILON;

fn check_pair(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<()> {
    estimate.require_mono("estimate")?;
    reference.require_mono("reference")?;
    if estimate.len() != reference.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: estimate {} vs reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    if estimate.rate() != reference.rate() {
        return Err(Error::InvalidArgument(format!(
            "rate mismatch: estimate {} vs reference {}",
            estimate.rate(),
            reference.rate()
        )));
    }
    Ok(())
}

fn capped_ratio_db(signal_energy: f64, error_energy: f64, reference_energy: f64) -> f64 {
    let db = 10.0 * (signal_energy / (error_energy + 1e-12 * reference_energy)).log10();
    db.min(SNR_CAP_DB)
}

/// `10 log10(sum ref^2 / (sum (est - ref)^2 + eps))` with `eps` relative to
/// the reference energy, capped at +120 dB.
pub fn snr_db(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    check_pair(estimate, reference)?;
    let e_ref = reference.energy();
    if e_ref == 0.0 {
        return Err(Error::DegenerateSignal("reference has zero energy".into()));
    }
    let err: f64 = estimate
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(e, r)| (e - r) * (e - r))
        .sum();
    Ok(capped_ratio_db(e_ref, err, e_ref))
}

/// Scale-invariant SNR: the estimate is first projected onto the reference.
pub fn si_snr_db(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    check_pair(estimate, reference)?;
    let e_ref = reference.energy();
    if e_ref == 0.0 {
        return Err(Error::DegenerateSignal("reference has zero energy".into()));
    }
    let dot: f64 = estimate
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(e, r)| e * r)
        .sum();
    let alpha = dot / e_ref;
    let (mut sig, mut err) = (0.0, 0.0);
    for (e, r) in estimate.samples().iter().zip(reference.samples()) {
        let t = alpha * r;
        sig += t * t;
        err += (e - t) * (e - t);
    }
    if sig == 0.0 {
        return Ok(-SNR_CAP_DB);
    }
    Ok(capped_ratio_db(sig, err, e_ref).max(-SNR_CAP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrKind {
    #[default]
    Snr,
    SiSnr,
}

impl std::str::FromStr for SnrKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(Self::Snr),
            "si-snr" => Ok(Self::SiSnr),
            other => Err(Error::Config(format!("unknown SNR kind {other:?}"))),
        }
    }
}

pub fn snr_of(kind: SnrKind, estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    match kind {
        SnrKind::Snr => snr_db(estimate, reference),
        SnrKind::SiSnr => si_snr_db(estimate, reference),
    }
}

/// `snr(enhanced, target) - snr(mixture, target)`.
pub fn delta_snr(mixture: &AudioBuffer, enhanced: &AudioBuffer, target: &AudioBuffer) -> Result<f64> {
    Ok(snr_db(enhanced, target)? - snr_db(mixture, target)?)
}

// ---------------------------------------------------------------------------
// ESTOI

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstoiConfig {
    pub rate: u32,
    pub frame_len: usize,
    pub fft_len: usize,
    pub num_bands: usize,
    pub min_freq_hz: f64,
    pub segment_frames: usize,
    pub dyn_range_db: f64,
    pub min_duration_s: f64,
}

impl Default for EstoiConfig {
    fn default() -> Self {
        Self {
            rate: 10000,
            frame_len: 256,
            fft_len: 512,
            num_bands: 15,
            min_freq_hz: 150.0,
            segment_frames: 30,
            dyn_range_db: 40.0,
            min_duration_s: 0.5,
        }
    }
}

impl EstoiConfig {
    fn hop(&self) -> usize {
        self.frame_len / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate == 0
            || self.frame_len < 2
            || self.fft_len < self.frame_len
            || self.num_bands == 0
            || self.segment_frames == 0
            || !(self.min_freq_hz > 0.0)
            || !(self.dyn_range_db > 0.0)
        {
            return Err(Error::Config(format!("invalid ESTOI configuration {self:?}")));
        }
        Ok(())
    }
}

/// Symmetric Hann window without the zero end points.
pub fn hann(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize, frame_len: usize, hop: usize) -> impl Iterator<Item = usize> {
    // Matches the reference implementation, which stops one frame short.
    (0..len.saturating_sub(frame_len)).step_by(hop)
}

/// Drops frames of `reference` more than `dyn_range_db` below its loudest
/// frame, applying the same mask to `estimate`, and overlap-adds the rest.
pub fn remove_silent_frames(
    estimate: &[f64],
    reference: &[f64],
    dyn_range_db: f64,
    frame_len: usize,
    hop: usize,
) -> (Vec<f64>, Vec<f64>) {
    let w = hann(frame_len);
    let starts: Vec<usize> = frame_starts(reference.len(), frame_len, hop).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let norm = reference[s..s + frame_len]
                .iter()
                .zip(&w)
                .map(|(x, w)| (x * w) * (x * w))
                .sum::<f64>()
                .sqrt();
            20.0 * (norm + EPS).log10()
        })
        .collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| max - dyn_range_db - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    let out_len = if kept.is_empty() {
        0
    } else {
        (kept.len() - 1) * hop + frame_len
    };
    let mut est = vec![0.0; out_len];
    let mut re = vec![0.0; out_len];
    for (k, &s) in kept.iter().enumerate() {
        let o = k * hop;
        for j in 0..frame_len {
            est[o + j] += w[j] * estimate[s + j];
            re[o + j] += w[j] * reference[s + j];
        }
    }
    (est, re)
}

/// Power spectrogram, one row per frame, bins `0..=fft_len/2`.
fn power_spectrogram(x: &[f64], frame_len: usize, fft_len: usize, hop: usize) -> Vec<Vec<f64>> {
    let w = hann(frame_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    frame_starts(x.len(), frame_len, hop)
        .map(|s| {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for j in 0..frame_len {
                buf[j].re = w[j] * x[s + j];
            }
            fft.process(&mut buf);
            buf[..=fft_len / 2].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect()
}

/// One-third-octave bands as inclusive-exclusive FFT bin ranges, edges
/// snapped to the nearest bin.
pub fn third_octave_bands(rate: u32, fft_len: usize, num_bands: usize, min_freq_hz: f64) -> Vec<(usize, usize)> {
    let bins = fft_len / 2 + 1;
    let nearest = |f: f64| {
        let step = rate as f64 / fft_len as f64;
        (0..bins)
            .min_by(|&a, &b| {
                let da = (a as f64 * step - f).powi(2);
                let db = (b as f64 * step - f).powi(2);
                da.partial_cmp(&db).expect("finite")
            })
            .expect("non-empty")
    };
    (0..num_bands)
        .map(|k| {
            let k = k as f64;
            let lo = min_freq_hz * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = min_freq_hz * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

fn band_envelopes(spec: &[Vec<f64>], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    // [band][frame]
    bands
        .iter()
        .map(|&(lo, hi)| {
            spec.iter()
                .map(|frame| frame[lo..hi].iter().sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// Normalises each band row over time, then each frame column over bands.
fn normalize_segment(seg: &mut [Vec<f64>]) {
    for row in seg.iter_mut() {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        row.iter_mut().for_each(|v| *v -= mean);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
        row.iter_mut().for_each(|v| *v /= norm);
    }
    let bands = seg.len();
    for t in 0..seg[0].len() {
        let mean = seg.iter().map(|r| r[t]).sum::<f64>() / bands as f64;
        seg.iter_mut().for_each(|r| r[t] -= mean);
        let norm = seg.iter().map(|r| r[t] * r[t]).sum::<f64>().sqrt() + EPS;
        seg.iter_mut().for_each(|r| r[t] /= norm);
    }
}

/// Extended short-time objective intelligibility of `estimate` against
/// `reference`, with the canonical constants.
pub fn estoi(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    estoi_with(estimate, reference, &EstoiConfig::default())
}

pub fn estoi_with(estimate: &AudioBuffer, reference: &AudioBuffer, cfg: &EstoiConfig) -> Result<f64> {
    cfg.validate()?;
    check_pair(estimate, reference)?;
    if reference.duration_s() < cfg.min_duration_s {
        return Err(Error::InvalidArgument(format!(
            "{:.3} s is too short for ESTOI (minimum {} s)",
            reference.duration_s(),
            cfg.min_duration_s
        )));
    }
    if reference.energy() == 0.0 {
        return Err(Error::DegenerateSignal("ESTOI reference is silent".into()));
    }
    let est = resample(estimate, cfg.rate)?;
    let re = resample(reference, cfg.rate)?;
    let hop = cfg.hop();
    let (est, re) = remove_silent_frames(est.samples(), re.samples(), cfg.dyn_range_db, cfg.frame_len, hop);
    let bands = third_octave_bands(cfg.rate, cfg.fft_len, cfg.num_bands, cfg.min_freq_hz);
    let x = band_envelopes(&power_spectrogram(&re, cfg.frame_len, cfg.fft_len, hop), &bands);
    let y = band_envelopes(&power_spectrogram(&est, cfg.frame_len, cfg.fft_len, hop), &bands);
    let frames = x[0].len();
    let n = cfg.segment_frames;
    if frames < n {
        return Err(Error::InvalidArgument(format!(
            "{frames} active frames after silence removal, need at least {n}"
        )));
    }
    let mut total = 0.0;
    for m in n..=frames {
        let mut xs: Vec<Vec<f64>> = x.iter().map(|r| r[m - n..m].to_vec()).collect();
        let mut ys: Vec<Vec<f64>> = y.iter().map(|r| r[m - n..m].to_vec()).collect();
        normalize_segment(&mut xs);
        normalize_segment(&mut ys);
        let dot: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
            .sum();
        total += dot / n as f64;
    }
    Ok(total / (frames - n + 1) as f64)
}

// ---------------------------------------------------------------------------
// External PESQ

/// Runs an external PESQ tool. The template is split on whitespace and
/// `{ref}`, `{deg}` and `{rate}` are substituted in each argument; the last
/// number printed on stdout is taken as the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesqHook {
    pub command: String,
    pub max_concurrent: usize,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().expect("semaphore poisoned");
            while *free == 0 {
                free = self.cv.wait(free).expect("semaphore poisoned");
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().expect("semaphore poisoned") += 1;
        self.cv.notify_one();
        out
    }
}

/// Last floating-point number in `text`.
pub fn parse_last_score(text: &str) -> Option<f64> {
    let re = regex::Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").expect("static regex");
    re.find_iter(text).filter_map(|m| m.as_str().parse().ok()).last()
}

impl PesqHook {
    pub fn run(&self, reference: &Path, degraded: &Path, rate: u32) -> Result<f64> {
        let args: Vec<String> = self
            .command
            .split_whitespace()
            .map(|a| {
                a.replace("{ref}", &reference.display().to_string())
                    .replace("{deg}", &degraded.display().to_string())
                    .replace("{rate}", &rate.to_string())
            })
            .collect();
        let (prog, rest) = args
            .split_first()
            .ok_or_else(|| Error::Config("empty PESQ command".into()))?;
        let out = Command::new(prog)
            .args(rest)
            .output()
            .map_err(|e| Error::External(format!("{prog}: {e}")))?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        if !out.status.success() {
            return Err(Error::External(format!(
                "{prog} exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        parse_last_score(&stdout)
            .ok_or_else(|| Error::External(format!("no score in output of {prog}: {:?}", stdout.trim())))
    }
}

// ---------------------------------------------------------------------------
// Dataset evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub snr_kind: SnrKind,
    pub trim_to_min: bool,
    pub allow_missing: bool,
    pub estoi: EstoiConfig,
    pub pesq: Option<PesqHook>,
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            snr_kind: SnrKind::Snr,
            trim_to_min: false,
            allow_missing: false,
            estoi: EstoiConfig::default(),
            pesq: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: u64,
    pub snr_mixture_db: f64,
    pub snr_enhanced_db: f64,
    pub delta_snr_db: f64,
    pub estoi_mixture: f64,
    pub estoi_enhanced: f64,
    pub delta_estoi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq_mixture: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq_enhanced: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_pesq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq_error: Option<String>,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scene_count: usize,
    pub delta_snr_db: Option<Summary>,
    pub delta_estoi: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_pesq: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub scene_id: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub snr_kind: SnrKind,
    pub per_scene: Vec<SceneMetrics>,
    pub aggregate: Aggregate,
    /// Scenes whose enhanced file was not found.
    pub missing: Vec<u64>,
    pub failures: Vec<EvalFailure>,
}

impl MetricReport {
    pub fn from_scenes(
        snr_kind: SnrKind,
        per_scene: Vec<SceneMetrics>,
        missing: Vec<u64>,
        failures: Vec<EvalFailure>,
    ) -> Self {
        let col = |f: fn(&SceneMetrics) -> Option<f64>| per_scene.iter().filter_map(f).collect::<Vec<_>>();
        let aggregate = Aggregate {
            scene_count: per_scene.len(),
            delta_snr_db: Summary::of(&col(|s| Some(s.delta_snr_db))),
            delta_estoi: Summary::of(&col(|s| Some(s.delta_estoi))),
            delta_pesq: Summary::of(&col(|s| s.delta_pesq)),
        };
        Self {
            snr_kind,
            per_scene,
            aggregate,
            missing,
            failures,
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(
            "scene_id,snr_mixture_db,snr_enhanced_db,delta_snr_db,estoi_mixture,estoi_enhanced,delta_estoi,pesq_mixture,pesq_enhanced,delta_pesq\n",
        );
        for s in &self.per_scene {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.scene_id,
                s.snr_mixture_db,
                s.snr_enhanced_db,
                s.delta_snr_db,
                s.estoi_mixture,
                s.estoi_enhanced,
                s.delta_estoi,
                opt(s.pesq_mixture),
                opt(s.pesq_enhanced),
                opt(s.delta_pesq)
            );
        }
        out
    }

    /// Per-scene improvement bars, one panel per metric.
    pub fn to_svg(&self) -> String {
        let mut panels: Vec<(&str, Vec<f64>)> = vec![
            (
                "delta SNR (dB)",
                self.per_scene.iter().map(|s| s.delta_snr_db).collect(),
            ),
            ("delta ESTOI", self.per_scene.iter().map(|s| s.delta_estoi).collect()),
        ];
        if self.aggregate.delta_pesq.is_some() {
            panels.push((
                "delta PESQ",
                self.per_scene.iter().filter_map(|s| s.delta_pesq).collect(),
            ));
        }
        let (w, h, pad) = (640.0, 180.0, 30.0);
        let mut svg = format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="12">"#,
            h * panels.len() as f64
        );
        for (p, (title, values)) in panels.iter().enumerate() {
            let top = p as f64 * h;
            let lim = values.iter().fold(1e-9f64, |m, v| m.max(v.abs()));
            let zero = top + h / 2.0;
            let scale = (h / 2.0 - pad) / lim;
            let bar = (w - 2.0 * pad) / values.len().max(1) as f64;
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let _ = write!(
                svg,
                r#"<text x="{pad}" y="{}">{title}: mean {mean:.4}</text><line x1="{pad}" x2="{}" y1="{zero}" y2="{zero}" stroke="black"/>"#,
                top + 16.0,
                w - pad
            );
            for (i, v) in values.iter().enumerate() {
                let bh = (v * scale).abs();
                let y = if *v >= 0.0 { zero - bh } else { zero };
                let _ = write!(
                    svg,
                    r##"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{bh:.2}" fill="#4a7"/>"##,
                    pad + i as f64 * bar,
                    (bar * 0.8).max(0.5)
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn read_mono(path: &Path) -> Result<AudioBuffer> {
    let buf = wav::read(path)?;
    buf.require_mono(&path.display().to_string())?;
    Ok(buf)
}

fn trim(buf: &AudioBuffer, len: usize) -> Result<AudioBuffer> {
    AudioBuffer::mono(buf.samples()[..len].to_vec(), buf.rate())
}

fn evaluate_scene(
    id: u64,
    dataset_dir: &Path,
    enhanced_path: &Path,
    opts: &EvalOptions,
    pesq_gate: &Semaphore,
) -> Result<SceneMetrics> {
    let mix_path = audio_path(dataset_dir, id, Role::Mixture);
    let tgt_path = audio_path(dataset_dir, id, Role::Target);
    let mut mix = read_mono(&mix_path)?;
    let mut tgt = read_mono(&tgt_path)?;
    let mut enh = read_mono(enhanced_path)?;
    if enh.len() != tgt.len() || mix.len() != tgt.len() {
        if !opts.trim_to_min {
            return Err(Error::InvalidArgument(format!(
                "length mismatch: mixture {}, target {}, enhanced {}",
                mix.len(),
                tgt.len(),
                enh.len()
            )));
        }
        let n = mix.len().min(tgt.len()).min(enh.len());
        mix = trim(&mix, n)?;
        tgt = trim(&tgt, n)?;
        enh = trim(&enh, n)?;
    }
    let snr_mixture_db = snr_of(opts.snr_kind, &mix, &tgt)?;
    let snr_enhanced_db = snr_of(opts.snr_kind, &enh, &tgt)?;
    let estoi_mixture = estoi_with(&mix, &tgt, &opts.estoi)?;
    let estoi_enhanced = estoi_with(&enh, &tgt, &opts.estoi)?;
    let mut m = SceneMetrics {
        scene_id: id,
        snr_mixture_db,
        snr_enhanced_db,
        delta_snr_db: snr_enhanced_db - snr_mixture_db,
        estoi_mixture,
        estoi_enhanced,
        delta_estoi: estoi_enhanced - estoi_mixture,
        pesq_mixture: None,
        pesq_enhanced: None,
        delta_pesq: None,
        pesq_error: None,
    };
    if let Some(hook) = &opts.pesq {
        let rate = tgt.rate();
        let scores = pesq_gate.run(|| {
            Ok::<_, Error>((
                hook.run(&tgt_path, &mix_path, rate)?,
                hook.run(&tgt_path, enhanced_path, rate)?,
            ))
        });
        match scores {
            Ok((a, b)) => {
                m.pesq_mixture = Some(a);
                m.pesq_enhanced = Some(b);
                m.delta_pesq = Some(b - a);
            }
            Err(e) => m.pesq_error = Some(e.to_string()),
        }
    }
    Ok(m)
}

/// Compares enhanced files (named like the dataset's mixtures) against the
/// dataset targets. Missing files are listed in the report; callers decide
/// whether that is fatal via `allow_missing`.
pub fn evaluate_pairs(dataset_dir: &Path, enhanced_dir: &Path, opts: &EvalOptions) -> Result<MetricReport> {
    opts.estoi.validate()?;
    let manifest = DatasetManifest::load(&dataset_dir.join(MANIFEST_FILE))?;
    let mut missing = Vec::new();
    let mut jobs: Vec<(u64, PathBuf)> = Vec::new();
    for s in &manifest.scenes {
        let p = enhanced_dir.join(audio_file_name(s.scene_id, Role::Mixture));
        if p.is_file() {
            jobs.push((s.scene_id, p));
        } else {
            missing.push(s.scene_id);
        }
    }
    let gate = Semaphore::new(opts.pesq.as_ref().map_or(1, |p| p.max_concurrent));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(u64, Result<SceneMetrics>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(id, p)| (*id, evaluate_scene(*id, dataset_dir, p, opts, &gate)))
            .collect()
    });
    let mut per_scene = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(m) => per_scene.push(m),
            Err(e) => failures.push(EvalFailure {
                scene_id: id,
                error: e.to_string(),
            }),
        }
    }
    Ok(MetricReport::from_scenes(opts.snr_kind, per_scene, missing, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(v: Vec<f64>) -> AudioBuffer {
        AudioBuffer::mono(v, 16000).unwrap()
    }

    #[test]
    fn snr_identity_hits_cap() {
        let r = mono(vec![0.5, -0.25, 1.0]);
        assert_eq!(snr_db(&r, &r).unwrap(), SNR_CAP_DB);
    }

    #[test]
    fn snr_of_doubled_reference_is_zero() {
        let r = mono(vec![0.5, -0.25, 1.0, 0.1]);
        let est = r.scaled(2.0);
        assert!(snr_db(&est, &r).unwrap().abs() < 1e-9);
    }

    #[test]
    fn snr_with_orthogonal_noise_at_equal_energy_is_zero() {
        let r = mono(vec![1.0, 1.0, 0.0, 0.0]);
        let est = mono(vec![1.0, 1.0, 1.0, -1.0]);
        assert!(snr_db(&est, &r).unwrap().abs() < 1e-9);
    }

    #[test]
    fn zero_reference_is_degenerate() {
        let r = mono(vec![0.0; 4]);
        assert!(matches!(snr_db(&r, &r), Err(Error::DegenerateSignal(_))));
    }

    #[test]
    fn si_snr_ignores_scale() {
        let r = mono(vec![0.5, -0.25, 1.0, 0.1]);
        let est = mono(vec![1.1, -0.4, 2.0, 0.3]);
        let a = si_snr_db(&est, &r).unwrap();
        let b = si_snr_db(&est.scaled(7.0), &r).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn band_edges_match_reference_layout() {
        let b = third_octave_bands(10000, 512, 15, 150.0);
        assert_eq!(b.len(), 15);
        // 150 Hz band: edges 133.6 and 168.4 Hz snap to bins 7 and 9.
        assert_eq!(b[0], (7, 9));
        assert!(b.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(b[14].1 <= 257);
    }

    #[test]
    fn hann_is_symmetric_and_nonzero() {
        let w = hann(256);
        assert!(w[0] > 0.0);
        for i in 0..128 {
            assert!((w[i] - w[255 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn last_score_is_parsed() {
        assert_eq!(parse_last_score("MOS-LQO: 3.21\nP.862 prediction: 2.5e0"), Some(2.5));
        assert_eq!(parse_last_score("none"), None);
    }

    #[test]
    fn short_input_is_rejected() {
        let x = mono(crate::synth::speech_like(0.3, 16000, 1));
        assert!(matches!(estoi(&x, &x), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn summary_uses_population_std() {
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
    }
}
