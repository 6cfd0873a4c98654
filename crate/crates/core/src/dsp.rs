//! The binaural signal model: convolution, early/late impulse-response
//! splitting, downmixing, SNR-controlled gain and mixing.
//!
//! Every function here is pure; nothing holds state between calls.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioBuffer, Brir};
use crate::error::{Error, Result};

/// Below this many multiply-adds the direct form is faster than FFT.
const DIRECT_CONV_MAX_WORK: usize = 1 << 15;

/// Linear convolution of a single-channel signal with one IR channel,
/// truncated to the signal length. Leading IR delay is preserved and the
/// reverberant tail past the end of the signal is discarded.
pub fn convolve(signal: &AudioBuffer, ir: &[f64]) -> Result<AudioBuffer> {
    signal.require_mono("convolution input")?;
    if signal.is_empty() || ir.is_empty() {
        return Err(Error::InvalidArgument(
            "convolution needs a non-empty signal and impulse response".into(),
        ));
    }
    AudioBuffer::mono(convolve_truncated(signal.samples(), ir), signal.rate())
}

/// Slice-level convolution used by [`convolve`]; picks the direct or FFT
/// route by problem size. Both inputs must be non-empty.
/// Leading and trailing zero taps are stripped first, which matters for the
/// split early/late responses.
pub fn convolve_truncated(signal: &[f64], ir: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let lead = ir.iter().position(|&h| h != 0.0).unwrap_or(ir.len()).min(n);
    let end = ir.iter().rposition(|&h| h != 0.0).map_or(0, |i| i + 1);
    if lead >= end || lead >= n {
        return vec![0.0; n];
    }
    let ir = &ir[lead..end];
    let sig = &signal[..n - lead];
    let taps = ir.len().min(sig.len());
    let body = if taps.saturating_mul(sig.len()) <= DIRECT_CONV_MAX_WORK || taps <= 16 {
        convolve_direct(sig, ir)
    } else {
        convolve_fft(sig, ir)
    };
    let mut out = vec![0.0; lead];
    out.extend(body);
    out
}

/// Time-domain convolution, truncated to `signal.len()`.
pub fn convolve_direct(signal: &[f64], ir: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let taps = &ir[..ir.len().min(n)];
    let mut out = vec![0.0; n];
    for (k, &h) in taps.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        for (o, &s) in out[k..].iter_mut().zip(signal) {
            *o += h * s;
        }
    }
    out
}

/// Overlap-add FFT convolution, truncated to `signal.len()`.
pub fn convolve_fft(signal: &[f64], ir: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 || ir.is_empty() {
        return vec![0.0; n];
    }
    // Taps at or past the signal length cannot reach the truncated output.
    let taps = &ir[..ir.len().min(n)];
    let m = taps.len();
    let full = n + m - 1;
    let fft_len = (4 * m).max(1024).next_power_of_two().min(full.next_power_of_two());
    let block = fft_len - m + 1;

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);

    let mut spectrum: Vec<Complex<f64>> = taps
        .iter()
        .map(|&h| Complex::new(h, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    forward.process(&mut spectrum);

    let scale = 1.0 / fft_len as f64;
    let mut out = vec![0.0; n];
    let mut work = vec![Complex::new(0.0, 0.0); fft_len];
    for start in (0..n).step_by(block) {
        let chunk = &signal[start..(start + block).min(n)];
        work.iter_mut().for_each(|w| *w = Complex::new(0.0, 0.0));
        for (w, &s) in work.iter_mut().zip(chunk) {
            w.re = s;
        }
        forward.process(&mut work);
        for (w, h) in work.iter_mut().zip(&spectrum) {
            *w *= h;
        }
        inverse.process(&mut work);
        let end = (start + chunk.len() + m - 1).min(n);
        for (o, w) in out[start..end].iter_mut().zip(&work) {
            *o += w.re * scale;
        }
    }
    out
}

/// Where the reflection boundary is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Boundary counted from IR sample 0.
    #[default]
    FromZero,
    /// Boundary counted from the first sample within 20 dB of the
    /// channel-pair peak.
    FromOnset,
}

/// An impulse response cut into early and late parts.
#[derive(Debug, Clone, PartialEq)]
pub struct IrSplit {
    pub early: Brir,
    pub late: Brir,
    pub boundary_ms: f64,
    /// Absolute sample index of the cut, onset offset included.
    pub boundary_index: usize,
}

/// Onset threshold relative to the channel-pair peak (-20 dB).
const ONSET_RELATIVE_LEVEL: f64 = 0.1;

/// First index where either ear exceeds -20 dB relative to the joint peak.
pub fn onset_index(ir: &Brir) -> usize {
    let peak = ir.left.iter().chain(&ir.right).fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return 0;
    }
    let threshold = peak * ONSET_RELATIVE_LEVEL;
    ir.left
        .iter()
        .zip(&ir.right)
        .position(|(l, r)| l.abs() > threshold || r.abs() > threshold)
        .unwrap_or(0)
}

/// Sample index of a boundary given in milliseconds.
pub fn boundary_index(boundary_ms: f64, rate: u32) -> usize {
    (boundary_ms / 1000.0 * rate as f64).round() as usize
}

/// Splits both ears of `ir` at the reflection boundary. Early keeps samples
/// before the boundary index, late keeps the rest; their sum is the input.
pub fn split_ir(ir: &Brir, boundary_ms: f64, mode: SplitMode) -> Result<IrSplit> {
    if !(boundary_ms >= 0.0 && boundary_ms.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "reflection boundary must be finite and >= 0 ms, got {boundary_ms}"
        )));
    }
    let offset = match mode {
        SplitMode::FromZero => 0,
        SplitMode::FromOnset => onset_index(ir),
    };
    let k = boundary_index(boundary_ms, ir.rate).saturating_add(offset);
    let cut = |ch: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let k = k.min(ch.len());
        let mut early = ch.to_vec();
        let mut late = ch.to_vec();
        early[k..].iter_mut().for_each(|s| *s = 0.0);
        late[..k].iter_mut().for_each(|s| *s = 0.0);
        (early, late)
    };
    let (el, ll) = cut(&ir.left);
    let (er, lr) = cut(&ir.right);
    Ok(IrSplit {
        early: ir.with_channels(el, er),
        late: ir.with_channels(ll, lr),
        boundary_ms,
        boundary_index: k,
    })
}

/// Average of the left and right channels.
pub fn downmix(stereo: &AudioBuffer) -> Result<AudioBuffer> {
    if stereo.num_channels() != 2 {
        return Err(Error::InvalidArgument(format!(
            "downmix expects 2 channels, got {}",
            stereo.num_channels()
        )));
    }
    let out = stereo
        .channel(0)
        .iter()
        .zip(stereo.channel(1))
        .map(|(l, r)| (l + r) / 2.0)
        .collect();
    AudioBuffer::mono(out, stereo.rate())
}

/// Gain to apply to `interferer` so that the target-to-interferer energy
/// ratio equals `snr_db`.
pub fn gain_for_snr(target: &AudioBuffer, interferer: &AudioBuffer, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("SNR must be finite, got {snr_db}")));
    }
    let et = target.energy();
    let ei = interferer.energy();
    if et <= 0.0 {
        return Err(Error::DegenerateSignal("target has zero energy".into()));
    }
    if ei <= 0.0 {
        return Err(Error::DegenerateSignal("interferer has zero energy".into()));
    }
    Ok((et / (ei * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Energy ratio of two signals in dB.
pub fn energy_ratio_db(target: &AudioBuffer, interferer: &AudioBuffer) -> f64 {
    10.0 * (target.energy() / interferer.energy()).log10()
}

/// `target + gain * interferer`, sample by sample.
pub fn mix(target: &AudioBuffer, interferer: &AudioBuffer, gain: f64) -> Result<AudioBuffer> {
    if target.len() != interferer.len()
        || target.num_channels() != interferer.num_channels()
        || target.rate() != interferer.rate()
    {
        return Err(Error::InvalidArgument(format!(
            "cannot mix {}x{} @ {} Hz with {}x{} @ {} Hz",
            target.num_channels(),
            target.len(),
            target.rate(),
            interferer.num_channels(),
            interferer.len(),
            interferer.rate()
        )));
    }
    let channels = target
        .channels()
        .iter()
        .zip(interferer.channels())
        .map(|(t, i)| t.iter().zip(i).map(|(a, b)| a + gain * b).collect())
        .collect();
    AudioBuffer::new(channels, target.rate())
}

/// Scales all buffers by one common gain so the joint absolute peak lands at
/// `-headroom_db` dBFS. Returns the scaled buffers and the gain.
pub fn peak_normalize(buffers: &[AudioBuffer], headroom_db: f64) -> Result<(Vec<AudioBuffer>, f64)> {
    let peak = buffers.iter().fold(0.0_f64, |m, b| m.max(b.peak()));
    if peak <= 0.0 {
        return Err(Error::DegenerateSignal("all buffers are silent".into()));
    }
    let gain = 10f64.powf(-headroom_db / 20.0) / peak;
    Ok((buffers.iter().map(|b| b.scaled(gain)).collect(), gain))
}
