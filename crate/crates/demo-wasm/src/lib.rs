//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string, so the page needs no generated TypeScript types and the same
//! functions run natively in tests. Errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use sceneforge_core::audio::AudioBuffer;
use sceneforge_core::catalog::reference::reference_catalog;
use sceneforge_core::catalog::{Catalog, PoolAssignment, SplitConfig};
use sceneforge_core::dsp::{self, SplitMode};
use sceneforge_core::metrics::{estoi, snr_db};
use sceneforge_core::sampler::{plan_dataset, repetition_stats, DatasetSplit, RepeatCounting, SamplerConfig};
use sceneforge_core::synth::{self, BrirShape};
use sceneforge_core::Result;

const RATE: u32 = 16000;
/// Points per plotted curve.
const PLOT_POINTS: usize = 400;

fn respond<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

/// Peak-per-bucket envelope for plotting long signals.
fn envelope(x: &[f64], points: usize) -> Vec<f64> {
    let step = x.len().div_ceil(points).max(1);
    x.chunks(step)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect()
}

#[derive(Serialize)]
struct SplitView {
    rate: u32,
    boundary_index: usize,
    early_energy_share: f64,
    /// Left-ear envelopes in dB relative to the IR peak.
    early_db: Vec<f64>,
    late_db: Vec<f64>,
    bucket_ms: f64,
}

fn to_db(env: &[f64], peak: f64) -> Vec<f64> {
    env.iter().map(|v| (20.0 * (v / peak).log10()).max(-80.0)).collect()
}

/// Synthesises a BRIR and cuts it at `boundary_ms`.
#[wasm_bindgen]
pub fn ir_split(rt60_s: f64, boundary_ms: f64, azimuth_deg: f64, seed: u32) -> String {
    respond((|| {
        let shape = BrirShape {
            length_s: (rt60_s * 1.2).clamp(0.1, 2.0),
            rt60_s,
            ..Default::default()
        };
        let brir = synth::synthetic_brir(RATE, azimuth_deg, shape, "demo", seed as u64)?;
        let split = dsp::split_ir(&brir, boundary_ms, SplitMode::FromZero)?;
        let peak = brir.left.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        let early = envelope(&split.early.left, PLOT_POINTS);
        let late = envelope(&split.late.left, PLOT_POINTS);
        let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let e = energy(&split.early.left) + energy(&split.early.right);
        let l = energy(&split.late.left) + energy(&split.late.right);
        let step = brir.len().div_ceil(PLOT_POINTS).max(1);
        Ok(SplitView {
            rate: RATE,
            boundary_index: split.boundary_index,
            early_energy_share: e / (e + l),
            early_db: to_db(&early, peak),
            late_db: to_db(&late, peak),
            bucket_ms: 1000.0 * step as f64 / RATE as f64,
        })
    })())
}

#[derive(Serialize)]
struct MixView {
    snr_db: f64,
    realized_snr_db: f64,
    mixture_snr_db: f64,
    estoi: f64,
    mixture: Vec<f64>,
    target: Vec<f64>,
}

/// Renders a two-second scene (speech plus one noise source in a synthetic
/// room) at the requested SNR and scores the mixture against the target.
#[wasm_bindgen]
pub fn snr_mix(snr: f64, rt60_s: f64, seed: u32) -> String {
    respond((|| {
        let seed = seed as u64;
        let speech = synth::speech_like(2.0, RATE, seed);
        let noise = synth::white_noise(speech.len(), 0.2, seed + 1);
        let shape = BrirShape {
            length_s: (rt60_s * 1.2).clamp(0.1, 2.0),
            rt60_s,
            ..Default::default()
        };
        let hs = synth::synthetic_brir(RATE, 0.0, shape, "demo", seed + 2)?;
        let hn = synth::synthetic_brir(RATE, 60.0, shape, "demo", seed + 3)?;
        let split = dsp::split_ir(&hs, 50.0, SplitMode::FromZero)?;
        let ear = |x: &[f64], h: &[f64]| dsp::convolve_truncated(x, h);
        let mut y = Vec::new();
        let mut n = Vec::new();
        for e in 0..2 {
            y.push(ear(&speech, split.early.ears()[e]));
            let late = ear(&speech, split.late.ears()[e]);
            let nz = ear(&noise, hn.ears()[e]);
            n.push(late.iter().zip(&nz).map(|(a, b)| a + b).collect::<Vec<_>>());
        }
        let stereo = |mut v: Vec<Vec<f64>>| {
            let r = v.pop().unwrap_or_default();
            let l = v.pop().unwrap_or_default();
            AudioBuffer::stereo(l, r, RATE)
        };
        let y = dsp::downmix(&stereo(y)?)?;
        let n = dsp::downmix(&stereo(n)?)?;
        let g = dsp::gain_for_snr(&y, &n, snr)?;
        let x = dsp::mix(&y, &n, g)?;
        let n = n.scaled(g);
        Ok(MixView {
            snr_db: snr,
            realized_snr_db: dsp::energy_ratio_db(&y, &n),
            mixture_snr_db: snr_db(&x, &y)?,
            estoi: estoi(&x, &y)?,
            mixture: envelope(x.samples(), PLOT_POINTS),
            target: envelope(y.samples(), PLOT_POINTS),
        })
    })())
}

#[derive(Serialize)]
struct RepetitionPoint {
    hours: f64,
    total_percent: f64,
    per_corpus_percent: std::collections::BTreeMap<String, f64>,
}

thread_local! {
    static REFERENCE: std::cell::OnceCell<(Catalog, PoolAssignment)> = const { std::cell::OnceCell::new() };
}

/// Share of mixture duration using repeated utterances as a training plan
/// over the reference corpora grows to `max_hours`.
#[wasm_bindgen]
pub fn repetition_curve(max_hours: f64, points: u32, seed: u32) -> String {
    respond(REFERENCE.with(|cell| {
        let (catalog, train) = cell.get_or_init(|| {
            let c = reference_catalog();
            let (train, _) = PoolAssignment::derive(&c, &SplitConfig::default()).expect("reference pools");
            (c, train)
        });
        let full = plan_dataset(
            max_hours,
            catalog,
            train,
            &SamplerConfig::default(),
            seed as u64,
            DatasetSplit::Train,
        )?;
        let points = points.clamp(1, 50);
        (1..=points)
            .map(|i| {
                let h = max_hours * i as f64 / points as f64;
                let m = full.prefix_for_hours(catalog, h)?;
                let r = repetition_stats(&m, catalog, RepeatCounting::AllOccurrences)?;
                Ok(RepetitionPoint {
                    hours: h,
                    total_percent: r.total,
                    per_corpus_percent: r.per_corpus,
                })
            })
            .collect::<Result<Vec<_>>>()
    }))
}
