//! Synthetic signals and on-disk fixture trees.
//!
//! The generators stand in for real corpora: a harmonic, syllable-modulated
//! "speech" signal, white noise, and binaural impulse responses with a
//! direct path, interaural time and level differences, sparse early
//! reflections and an exponentially decaying diffuse tail.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::{AudioBuffer, Brir};
use crate::catalog::{AssetKind, CatalogConfig, CatalogEntry, SplitConfig};
use crate::error::{Error, Result};
use crate::seed;
use crate::wav::{self, SampleFormat};

use std::f64::consts::PI;

/// Voiced, syllable-rate modulated harmonic complex with short pauses.
pub fn speech_like(duration_s: f64, rate: u32, seed_value: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_value);
    let n = (duration_s * rate as f64).round() as usize;
    let fs = rate as f64;
    let f0_base = rng.gen_range(100.0..220.0);
    let syllable_hz = rng.gen_range(3.0..5.5);
    let formants = [
        rng.gen_range(400.0..800.0),
        rng.gen_range(1000.0..1800.0),
        rng.gen_range(2200.0..3000.0),
    ];
    let mut phase = 0.0_f64;
    let mut syl_phase = rng.gen_range(0.0..2.0 * PI);
    let mut out = Vec::with_capacity(n);
    let harmonics = 30;
    let mut amps = vec![0.0; harmonics];
    for i in 0..n {
        let t = i as f64 / fs;
        let f0 = f0_base * (1.0 + 0.15 * (2.0 * PI * 0.7 * t).sin() + 0.05 * (2.0 * PI * 2.3 * t).sin());
        phase += 2.0 * PI * f0 / fs;
        syl_phase += 2.0 * PI * syllable_hz / fs;
        // Formant positions drift with the syllable so the spectrum varies.
        let drift = 1.0 + 0.2 * (syl_phase * 0.5).sin();
        if i % 64 == 0 {
            for (k, a) in amps.iter_mut().enumerate() {
                let fk = f0 * (k + 1) as f64;
                if fk >= 0.45 * fs {
                    *a = 0.0;
                    continue;
                }
                *a = formants
                    .iter()
                    .map(|&fm| {
                        let d = (fk - fm * drift) / (0.15 * fm);
                        (-d * d).exp()
                    })
                    .sum::<f64>()
                    / (k + 1) as f64
                    + 0.02 / (k + 1) as f64;
            }
        }
        let voiced: f64 = amps
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * phase).sin())
            .sum();
        let env = syl_phase.sin().max(0.0).powf(1.5);
        // A pause roughly every 1.3 s.
        let gate = if (t * 0.77).fract() > 0.85 { 0.0 } else { 1.0 };
        out.push(0.3 * voiced * env * gate);
    }
    out
}

pub fn white_noise(n: usize, amplitude: f64, seed_value: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            amplitude * z
        })
        .collect::<Vec<f64>>()
}

/// Parameters of a synthetic BRIR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrirShape {
    pub length_s: f64,
    pub rt60_s: f64,
    /// Propagation delay of the direct path.
    pub delay_ms: f64,
    pub n_reflections: usize,
}

impl Default for BrirShape {
    fn default() -> Self {
        Self {
            length_s: 0.4,
            rt60_s: 0.5,
            delay_ms: 3.0,
            n_reflections: 8,
        }
    }
}

pub fn synthetic_brir(rate: u32, azimuth_deg: f64, shape: BrirShape, room_id: &str, seed_value: u64) -> Result<Brir> {
    let mut rng = seed::rng(seed_value);
    let fs = rate as f64;
    let n = ((shape.length_s * fs).round() as usize).max(1);
    let mut ears = [vec![0.0; n], vec![0.0; n]];
    let az = azimuth_deg.to_radians();
    let itd_s = 0.0007 * az.sin();
    let ild = 10f64.powf(-6.0 * az.sin().abs() / 20.0);
    let base = shape.delay_ms / 1000.0;
    // Positive azimuth: source on the right.
    let (left_delay, right_delay) = if itd_s >= 0.0 {
        (base + itd_s, base)
    } else {
        (base, base - itd_s)
    };
    let (left_gain, right_gain) = if az.sin() >= 0.0 { (ild, 1.0) } else { (1.0, ild) };
    for (ear, (d, g)) in ears
        .iter_mut()
        .zip([(left_delay, left_gain), (right_delay, right_gain)])
    {
        let idx = (d * fs).round() as usize;
        if idx < n {
            ear[idx] += g;
        }
    }
    let decay = 6.9 / shape.rt60_s.max(1e-3);
    for _ in 0..shape.n_reflections {
        let t = base + rng.gen_range(0.002..0.045);
        let g = rng.gen_range(0.15..0.5) * (-decay * t).exp() * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        for ear in ears.iter_mut() {
            let jitter = rng.gen_range(0.0..0.0008);
            let idx = ((t + jitter) * fs).round() as usize;
            if idx < n {
                ear[idx] += g;
            }
        }
    }
    let tail_start = base + 0.005;
    for ear in ears.iter_mut() {
        for (i, s) in ear.iter_mut().enumerate() {
            let t = i as f64 / fs;
            if t >= tail_start {
                let w: f64 = StandardNormal.sample(&mut rng);
                *s += 0.05 * w * (-decay * (t - base)).exp();
            }
        }
    }
    let [left, right] = ears;
    Brir::new(left, right, rate, room_id, azimuth_deg)
}

// ---------------------------------------------------------------------------
// Fixture trees

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFixture {
    pub id: String,
    pub speakers: usize,
    pub utterances: usize,
    pub min_s: f64,
    pub max_s: f64,
    pub rate: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFixture {
    pub id: String,
    pub files: usize,
    pub duration_s: f64,
    pub rate: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrirFixture {
    pub id: String,
    pub rooms: usize,
    pub per_room: usize,
    pub rate: u32,
    pub shape: BrirShape,
}

/// Layout of a synthetic asset tree.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub corpora: Vec<CorpusFixture>,
    pub noise: Vec<NoiseFixture>,
    pub brirs: Vec<BrirFixture>,
    pub seed: u64,
}

impl Default for FixtureSpec {
    /// Two small corpora (one at 32 kHz to exercise resampling), two noise
    /// databases and two BRIR databases.
    fn default() -> Self {
        let shape = BrirShape {
            length_s: 0.25,
            ..Default::default()
        };
        Self {
            corpora: vec![
                CorpusFixture {
                    id: "alpha".into(),
                    speakers: 3,
                    utterances: 12,
                    min_s: 0.8,
                    max_s: 2.0,
                    rate: 16000,
                },
                CorpusFixture {
                    id: "beta".into(),
                    speakers: 2,
                    utterances: 8,
                    min_s: 1.0,
                    max_s: 3.0,
                    rate: 32000,
                },
            ],
            noise: vec![
                NoiseFixture {
                    id: "hum".into(),
                    files: 2,
                    duration_s: 20.0,
                    rate: 16000,
                },
                NoiseFixture {
                    id: "babble".into(),
                    files: 2,
                    duration_s: 12.0,
                    rate: 16000,
                },
            ],
            brirs: vec![
                BrirFixture {
                    id: "hall".into(),
                    rooms: 2,
                    per_room: 9,
                    rate: 16000,
                    shape,
                },
                BrirFixture {
                    id: "booth".into(),
                    rooms: 1,
                    per_room: 11,
                    rate: 48000,
                    shape: BrirShape { rt60_s: 0.25, ..shape },
                },
            ],
            seed: 1,
        }
    }
}

pub const SPEECH_PATTERN: &str = r"^(?P<speaker>[^/]+)/[^/]+\.wav$";
pub const NOISE_PATTERN: &str = r"^(?P<type>[^/]+)\.wav$";
pub const BRIR_PATTERN: &str = r"^(?P<room>[^/]+)/az(?P<azimuth>[-+]?\d+(\.\d+)?)\.wav$";

fn write_file(path: &Path, buffer: &AudioBuffer) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    wav::write(path, buffer, SampleFormat::Float32)
}

/// Writes the asset tree under `dir` and returns a catalog config whose
/// roots are relative to `dir`.
pub fn write_fixture_tree(dir: &Path, spec: &FixtureSpec) -> Result<CatalogConfig> {
    let mut entries = Vec::new();
    for (ci, c) in spec.corpora.iter().enumerate() {
        let root = PathBuf::from("speech").join(&c.id);
        for u in 0..c.utterances {
            let frac = if c.utterances > 1 {
                u as f64 / (c.utterances - 1) as f64
            } else {
                0.0
            };
            let dur = c.min_s + (c.max_s - c.min_s) * frac;
            let s = seed::derive(spec.seed, (ci as u64) << 32 | u as u64);
            let buf = AudioBuffer::mono(speech_like(dur, c.rate, s), c.rate)?;
            let path = dir
                .join(&root)
                .join(format!("spk{:02}", u % c.speakers))
                .join(format!("utt{u:04}.wav"));
            write_file(&path, &buf)?;
        }
        entries.push(CatalogEntry {
            id: c.id.clone(),
            kind: AssetKind::Speech,
            root,
            include: vec!["**/*.wav".into()],
            pattern: Some(SPEECH_PATTERN.into()),
        });
    }
    for (ni, nf) in spec.noise.iter().enumerate() {
        let root = PathBuf::from("noise").join(&nf.id);
        for f in 0..nf.files {
            let n = (nf.duration_s * nf.rate as f64).round() as usize;
            let s = seed::derive(spec.seed ^ 0x4E4F_4953, (ni as u64) << 32 | f as u64);
            let buf = AudioBuffer::mono(white_noise(n, 0.1, s), nf.rate)?;
            write_file(&dir.join(&root).join(format!("type{f:02}.wav")), &buf)?;
        }
        entries.push(CatalogEntry {
            id: nf.id.clone(),
            kind: AssetKind::Noise,
            root,
            include: vec!["*.wav".into()],
            pattern: Some(NOISE_PATTERN.into()),
        });
    }
    for (bi, bf) in spec.brirs.iter().enumerate() {
        let root = PathBuf::from("brir").join(&bf.id);
        for r in 0..bf.rooms {
            let room = format!("room{r}");
            for k in 0..bf.per_room {
                let az = if bf.per_room > 1 {
                    -90.0 + 180.0 * k as f64 / (bf.per_room - 1) as f64
                } else {
                    0.0
                };
                let az = az.round();
                let s = seed::derive(spec.seed ^ 0x4252_4952, (bi as u64) << 40 | (r as u64) << 20 | k as u64);
                let brir = synthetic_brir(bf.rate, az, bf.shape, &room, s)?;
                let path = dir.join(&root).join(&room).join(format!("az{az:+04}.wav"));
                write_file(&path, &brir.to_buffer())?;
            }
        }
        entries.push(CatalogEntry {
            id: bf.id.clone(),
            kind: AssetKind::Brir,
            root,
            include: vec!["**/*.wav".into()],
            pattern: Some(BRIR_PATTERN.into()),
        });
    }
    Ok(CatalogConfig {
        entries,
        split: SplitConfig::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(speech_like(0.3, 16000, 5), speech_like(0.3, 16000, 5));
        assert_ne!(speech_like(0.3, 16000, 5), speech_like(0.3, 16000, 6));
        let a = synthetic_brir(16000, 30.0, BrirShape::default(), "r", 1).unwrap();
        assert_eq!(a, synthetic_brir(16000, 30.0, BrirShape::default(), "r", 1).unwrap());
    }

    #[test]
    fn brir_has_interaural_cues() {
        let b = synthetic_brir(16000, 60.0, BrirShape::default(), "r", 2).unwrap();
        let first = |ch: &[f64]| ch.iter().position(|v| v.abs() > 0.1).unwrap();
        // Source on the right: right ear first and louder.
        assert!(first(&b.right) < first(&b.left));
        let peak = |ch: &[f64]| ch.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(peak(&b.right) > peak(&b.left));
    }

    #[test]
    fn speech_is_bounded_and_non_silent() {
        let s = speech_like(2.0, 16000, 3);
        let peak = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(peak > 0.01 && peak < 1.0, "{peak}");
    }
}
