#![allow(dead_code)]

use sceneforge_core::audio::AudioBuffer;
use sceneforge_core::catalog::{BrirItem, Catalog, NoiseItem, PoolAssignment, SpeechItem, SplitConfig};
use sceneforge_core::renderer::MemoryLoader;
use sceneforge_core::synth::{self, BrirShape};

pub const RATE: u32 = 16000;

/// A small catalog held entirely in memory: 2 s utterances, 10 s noise
/// files and two rooms of synthetic BRIRs no longer than `brir_len_s`.
pub struct MemoryWorld {
    pub catalog: Catalog,
    pub loader: MemoryLoader,
    pub train: PoolAssignment,
    pub test: PoolAssignment,
}

pub fn memory_world(brir_len_s: f64, seed: u64) -> MemoryWorld {
    let mut loader = MemoryLoader::default();
    let mut speech = Vec::new();
    for i in 0..10 {
        let path = format!("speech/u{i}.wav");
        let s = synth::speech_like(2.0, RATE, seed * 100 + i);
        loader.assets.insert(path.clone(), AudioBuffer::mono(s, RATE).unwrap());
        speech.push(SpeechItem {
            path,
            corpus_id: if i % 2 == 0 { "even".into() } else { "odd".into() },
            speaker_id: format!("spk{}", i % 3),
            duration_s: 2.0,
        });
    }
    let mut noise = Vec::new();
    for i in 0..4 {
        let path = format!("noise/n{i}.wav");
        let n = synth::white_noise(10 * RATE as usize, 0.1 + 0.05 * i as f64, seed * 100 + 50 + i);
        loader.assets.insert(path.clone(), AudioBuffer::mono(n, RATE).unwrap());
        noise.push(NoiseItem {
            path,
            database_id: if i < 2 { "white".into() } else { "grey".into() },
            noise_type: format!("t{i}"),
            duration_s: 10.0,
        });
    }
    let mut brirs = Vec::new();
    for room in 0..2 {
        for k in 0..12 {
            let az = -90.0 + 180.0 * k as f64 / 11.0;
            let path = format!("brir/r{room}/a{k:02}.wav");
            let shape = BrirShape {
                length_s: brir_len_s,
                rt60_s: 0.3 + 0.2 * room as f64,
                ..Default::default()
            };
            let b = synth::synthetic_brir(RATE, az, shape, &format!("r{room}"), seed * 1000 + room * 100 + k).unwrap();
            loader.assets.insert(path.clone(), b.to_buffer());
            brirs.push(BrirItem {
                path,
                database_id: "syn".into(),
                room_id: format!("r{room}"),
                azimuth_deg: az,
                index_in_room: 0,
                duration_s: brir_len_s,
            });
        }
    }
    let catalog = Catalog::from_items(speech, noise, brirs).unwrap();
    let (train, test) = PoolAssignment::derive(&catalog, &SplitConfig::default()).unwrap();
    MemoryWorld {
        catalog,
        loader,
        train,
        test,
    }
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Plain O(n m) convolution truncated to the signal length.
pub fn naive_convolve(signal: &[f64], ir: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (k, &h) in ir.iter().enumerate().take(i + 1) {
            acc += h * signal[i - k];
        }
        out[i] = acc;
    }
    out
}
