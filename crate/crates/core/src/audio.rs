//! Sampled audio containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled multi-channel audio. Channels always have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    channels: Vec<Vec<f64>>,
    rate: u32,
}

impl AudioBuffer {
    pub fn new(channels: Vec<Vec<f64>>, rate: u32) -> Result<Self> {
        if rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::InvalidArgument("audio needs at least one channel".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidArgument("channels differ in length".into()));
        }
        if channels.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(Self { channels, rate })
    }

    pub fn mono(samples: Vec<f64>, rate: u32) -> Result<Self> {
        Self::new(vec![samples], rate)
    }

    pub fn stereo(left: Vec<f64>, right: Vec<f64>, rate: u32) -> Result<Self> {
        Self::new(vec![left, right], rate)
    }

    pub fn rate(&self) -> u32 {
        self.rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate as f64
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Samples of a single-channel buffer.
    pub fn samples(&self) -> &[f64] {
        &self.channels[0]
    }

    /// Sum of squares over all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().flatten().map(|s| s * s).sum()
    }

    pub fn peak(&self) -> f64 {
        self.channels.iter().flatten().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|s| s * gain).collect())
                .collect(),
            rate: self.rate,
        }
    }

    pub(crate) fn require_mono(&self, what: &str) -> Result<()> {
        if self.num_channels() != 1 {
            return Err(Error::InvalidArgument(format!(
                "{what} must be single-channel, got {} channels",
                self.num_channels()
            )));
        }
        Ok(())
    }
}

/// A binaural room impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brir {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub rate: u32,
    pub room_id: String,
    pub azimuth_deg: f64,
}

impl Brir {
    pub fn new(
        left: Vec<f64>,
        right: Vec<f64>,
        rate: u32,
        room_id: impl Into<String>,
        azimuth_deg: f64,
    ) -> Result<Self> {
        if left.is_empty() || left.len() != right.len() {
            return Err(Error::InvalidArgument(format!(
                "BRIR channels must be non-empty and equal length ({} vs {})",
                left.len(),
                right.len()
            )));
        }
        if rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if !(-180.0..=180.0).contains(&azimuth_deg) {
            return Err(Error::InvalidArgument(format!(
                "azimuth {azimuth_deg} outside [-180, 180]"
            )));
        }
        Ok(Self {
            left,
            right,
            rate,
            room_id: room_id.into(),
            azimuth_deg,
        })
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn ears(&self) -> [&[f64]; 2] {
        [&self.left, &self.right]
    }

    /// Both ears as a two-channel buffer.
    pub fn to_buffer(&self) -> AudioBuffer {
        AudioBuffer {
            channels: vec![self.left.clone(), self.right.clone()],
            rate: self.rate,
        }
    }

    pub(crate) fn with_channels(&self, left: Vec<f64>, right: Vec<f64>) -> Self {
        Self {
            left,
            right,
            rate: self.rate,
            room_id: self.room_id.clone(),
            azimuth_deg: self.azimuth_deg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        assert!(AudioBuffer::new(vec![vec![0.0; 3], vec![0.0; 2]], 16000).is_err());
        assert!(AudioBuffer::mono(vec![0.0], 0).is_err());
        assert!(AudioBuffer::mono(vec![f64::NAN], 16000).is_err());
    }

    #[test]
    fn brir_invariants() {
        assert!(Brir::new(vec![], vec![], 16000, "r", 0.0).is_err());
        assert!(Brir::new(vec![1.0], vec![1.0, 0.0], 16000, "r", 0.0).is_err());
        assert!(Brir::new(vec![1.0], vec![1.0], 16000, "r", 200.0).is_err());
        let b = Brir::new(vec![1.0, 0.5], vec![0.5, 1.0], 16000, "r", -30.0).unwrap();
        assert_eq!(b.to_buffer().num_channels(), 2);
    }
}
