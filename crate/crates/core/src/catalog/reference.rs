//! Metadata-only catalog with the published corpus, noise and BRIR
//! database sizes. Durations are synthetic but reproduce each corpus's
//! utterance count, total hours, and min/max length, so sampling and
//! repetition statistics can be studied without any audio.

use super::{BrirItem, Catalog, NoiseItem, SpeechItem};

/// (id, speakers, utterances, hours, min length s, max length s)
pub const SPEECH_CORPORA: [(&str, usize, usize, f64, f64, f64); 5] = [
    ("timit", 630, 6300, 5.4, 0.9, 7.8),
    ("libri", 251, 28539, 100.6, 1.4, 24.5),
    ("wsj", 131, 34738, 69.5, 0.9, 44.8),
    ("clarity", 40, 11352, 8.9, 1.2, 7.7),
    ("vctk", 110, 44455, 41.6, 1.2, 16.6),
];

/// Published average utterance lengths in seconds, same order as
/// [`SPEECH_CORPORA`].
pub const SPEECH_AVG_LEN_S: [f64; 5] = [3.1, 12.7, 7.2, 2.8, 3.4];

/// (id, noise types, hours)
pub const NOISE_DATABASES: [(&str, usize, f64); 5] = [
    ("tau", 10, 40.0),
    ("noisex", 15, 1.0),
    ("icra", 10, 1.1),
    ("demand", 18, 1.5),
    ("arte", 13, 0.5),
];

/// (id, rooms, BRIRs, azimuths cover the full circle)
pub const BRIR_DATABASES: [(&str, usize, usize, bool); 5] = [
    ("surrey", 4, 148, false),
    ("ash", 35, 538, true),
    ("bras", 4, 180, false),
    ("catt", 11, 407, false),
    ("avil", 4, 96, false),
];

const BRIR_LENGTH_S: f64 = 0.5;

/// `n` durations spanning exactly `[min, max]` with mean `mean`, shaped as
/// `min + (max - min) * u^gamma` on a uniform grid `u`.
pub fn shaped_durations(n: usize, mean: f64, min: f64, max: f64) -> Vec<f64> {
    assert!(n >= 2 && min < mean && mean < max);
    let grid_mean =
        |gamma: f64| -> f64 { (0..n).map(|i| (i as f64 / (n - 1) as f64).powf(gamma)).sum::<f64>() / n as f64 };
    let target = (mean - min) / (max - min);
    let (mut lo, mut hi) = (1e-3_f64, 200.0_f64);
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if grid_mean(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = (lo * hi).sqrt();
    (0..n)
        .map(|i| min + (max - min) * (i as f64 / (n - 1) as f64).powf(gamma))
        .collect()
}

fn speech_items() -> Vec<SpeechItem> {
    let mut out = Vec::new();
    for (id, speakers, n, hours, min, max) in SPEECH_CORPORA {
        let durs = shaped_durations(n, hours * 3600.0 / n as f64, min, max);
        for (i, d) in durs.into_iter().enumerate() {
            let spk = i % speakers;
            out.push(SpeechItem {
                path: format!("{id}/s{spk:04}/u{i:06}.wav"),
                corpus_id: id.to_owned(),
                speaker_id: format!("s{spk:04}"),
                duration_s: d,
            });
        }
    }
    out
}

fn noise_items() -> Vec<NoiseItem> {
    let mut out = Vec::new();
    for (id, types, hours) in NOISE_DATABASES {
        let d = hours * 3600.0 / types as f64;
        for t in 0..types {
            out.push(NoiseItem {
                path: format!("{id}/type{t:02}.wav"),
                database_id: id.to_owned(),
                noise_type: format!("type{t:02}"),
                duration_s: d,
            });
        }
    }
    out
}

fn brir_items() -> Vec<BrirItem> {
    let mut out = Vec::new();
    for (id, rooms, total, full_circle) in BRIR_DATABASES {
        for r in 0..rooms {
            let n = total / rooms + usize::from(r < total % rooms);
            for k in 0..n {
                let az = if full_circle {
                    -180.0 + 360.0 * k as f64 / n as f64
                } else {
                    -90.0 + 180.0 * k as f64 / (n - 1) as f64
                };
                let az = (az * 100.0).round() / 100.0;
                out.push(BrirItem {
                    path: format!("{id}/room{r:02}/az{k:03}.wav"),
                    database_id: id.to_owned(),
                    room_id: format!("room{r:02}"),
                    azimuth_deg: az,
                    index_in_room: k,
                    duration_s: BRIR_LENGTH_S,
                });
            }
        }
    }
    out
}

/// The full reference catalog (about 125k speech items).
pub fn reference_catalog() -> Catalog {
    Catalog::from_items(speech_items(), noise_items(), brir_items()).expect("reference catalog is well-formed")
}
