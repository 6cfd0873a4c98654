//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Kaiser window shape parameter.
pub const KAISER_BETA: f64 = 14.0;
/// Anti-aliasing cutoff as a fraction of the lower Nyquist frequency.
pub const CUTOFF_FRACTION: f64 = 0.9;
/// Sinc zero crossings on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 64.0;
/// Largest interpolation factor for which the phase table is precomputed.
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

struct Kernel {
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    half_width: f64,
    /// Taps per phase; input offsets run from `1 - reach` to `reach`.
    reach: i64,
    norm: f64,
}

impl Kernel {
    fn new(from: u32, to: u32) -> Self {
        let ratio = (to as f64 / from as f64).min(1.0);
        let cutoff = 0.5 * CUTOFF_FRACTION * ratio;
        let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
        Self {
            cutoff,
            half_width,
            reach: half_width.ceil() as i64,
            norm: bessel_i0(KAISER_BETA),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let x = t / self.half_width;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let arg = 2.0 * self.cutoff * t;
        let sinc = if arg == 0.0 {
            1.0
        } else {
            let pa = std::f64::consts::PI * arg;
            pa.sin() / pa
        };
        let window = bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / self.norm;
        2.0 * self.cutoff * sinc * window
    }

    /// Taps for fractional position `frac` in [0, 1), normalised to unit DC gain.
    fn phase(&self, frac: f64) -> Vec<f64> {
        let mut taps: Vec<f64> = (1 - self.reach..=self.reach)
            .map(|j| self.eval(frac - j as f64))
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }
}

/// Number of output samples for `len` input samples, rounded half up.
pub fn output_len(len: usize, from: u32, to: u32) -> usize {
    let num = 2 * len as u128 * to as u128 + from as u128;
    (num / (2 * from as u128)) as usize
}

fn resample_channel(
    input: &[f64],
    kernel: &Kernel,
    table: Option<&[Vec<f64>]>,
    up: u64,
    down: u64,
    out_len: usize,
) -> Vec<f64> {
    let reach = kernel.reach;
    let n_in = input.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    let mut scratch: Vec<f64>;
    for n in 0..out_len as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let taps: &[f64] = match table {
            Some(t) => &t[phase as usize],
            None => {
                scratch = kernel.phase(phase as f64 / up as f64);
                &scratch
            }
        };
        let first = base + 1 - reach;
        let lo = (-first).max(0) as usize;
        let hi = ((n_in - first).min(taps.len() as i64)).max(0) as usize;
        let mut acc = 0.0;
        for (j, &h) in taps.iter().enumerate().take(hi).skip(lo) {
            acc += h * input[(first + j as i64) as usize];
        }
        out.push(acc);
    }
    out
}

/// Resamples every channel of `buffer` to `to_rate`.
pub fn resample(buffer: &AudioBuffer, to_rate: u32) -> Result<AudioBuffer> {
    if to_rate == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    let from = buffer.rate();
    if from == to_rate {
        return Ok(buffer.clone());
    }
    let g = gcd(from as u64, to_rate as u64);
    let up = to_rate as u64 / g;
    let down = from as u64 / g;
    let kernel = Kernel::new(from, to_rate);
    let table: Option<Vec<Vec<f64>>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|p| kernel.phase(p as f64 / up as f64)).collect());
    let out_len = output_len(buffer.len(), from, to_rate);
    let channels = buffer
        .channels()
        .iter()
        .map(|ch| resample_channel(ch, &kernel, table.as_deref(), up, down, out_len))
        .collect();
    AudioBuffer::new(channels, to_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Amplitude of a known-frequency sinusoid by least squares on the
    /// interior of the signal.
    fn tone_amplitude(x: &[f64], freq: f64, rate: f64, skip: usize) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / rate;
        let (mut ss, mut sc, mut cc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &v) in x.iter().enumerate().skip(skip).take(x.len() - 2 * skip) {
            let (s, c) = (w * i as f64).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            xs += v * s;
            xc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs * cc - xc * sc) / det;
        let b = (xc * ss - xs * sc) / det;
        (a * a + b * b).sqrt()
    }

    fn tone(freq: f64, rate: u32, secs: f64) -> AudioBuffer {
        let n = (rate as f64 * secs) as usize;
        let w = 2.0 * std::f64::consts::PI * freq / rate as f64;
        AudioBuffer::mono((0..n).map(|i| (w * i as f64).sin()).collect(), rate).unwrap()
    }

    #[test]
    fn same_rate_is_identity() {
        let b = tone(440.0, 16000, 0.1);
        assert_eq!(resample(&b, 16000).unwrap(), b);
    }

    #[test]
    fn output_length_rounds() {
        assert_eq!(output_len(32000, 32000, 16000), 16000);
        assert_eq!(output_len(3, 2, 1), 2);
        assert_eq!(output_len(44101, 44100, 16000), 16000);
        let b = AudioBuffer::mono(vec![0.0; 441], 44100).unwrap();
        assert_eq!(resample(&b, 16000).unwrap().len(), 160);
    }

    #[test]
    fn downsampled_sine_keeps_amplitude() {
        let out = resample(&tone(1000.0, 32000, 1.0), 16000).unwrap();
        assert_eq!(out.rate(), 16000);
        let amp = tone_amplitude(out.samples(), 1000.0, 16000.0, 400);
        assert!((20.0 * amp.log10()).abs() < 0.1, "amplitude {amp}");
    }

    #[test]
    fn dc_is_preserved() {
        for (from, to) in [(32000, 16000), (16000, 10000), (44100, 16000), (8000, 16000)] {
            let b = AudioBuffer::mono(vec![1.0; from as usize], from).unwrap();
            let out = resample(&b, to).unwrap();
            let edge = out.len() / 5;
            for &v in &out.samples()[edge..out.len() - edge] {
                assert!((v - 1.0).abs() < 1e-3, "{from}->{to}: {v}");
            }
        }
    }

    #[test]
    fn passband_is_flat() {
        // 48 kHz -> 16 kHz; lower Nyquist 8 kHz.
        for f in [100.0, 1000.0, 3000.0, 5000.0, 6400.0] {
            let out = resample(&tone(f, 48000, 0.5), 16000).unwrap();
            let amp = tone_amplitude(out.samples(), f, 16000.0, 800);
            assert!((20.0 * amp.log10()).abs() < 0.1, "{f} Hz: {amp}");
        }
    }

    #[test]
    fn stopband_is_attenuated() {
        // 7.8 kHz at 48 kHz lies above the 7.2 kHz cutoff for a 16 kHz output.
        let out = resample(&tone(7900.0, 48000, 0.5), 16000).unwrap();
        let amp = tone_amplitude(out.samples(), 7900.0, 16000.0, 800);
        assert!(20.0 * amp.log10() < -60.0, "{amp}");
    }

    #[test]
    fn large_phase_count_uses_direct_kernel() {
        // 16001/16000 has no small common factor, so no phase table.
        let b = tone(500.0, 16000, 0.2);
        let out = resample(&b, 16001).unwrap();
        let amp = tone_amplitude(out.samples(), 500.0, 16001.0, 400);
        assert!((20.0 * amp.log10()).abs() < 0.1);
    }
}
