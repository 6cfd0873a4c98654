//! RIFF/WAVE input and output.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    /// IEEE float, 32 bit.
    #[default]
    Float32,
    /// Signed integer PCM, 16 bit.
    Pcm16,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float32" | "f32" => Ok(Self::Float32),
            "pcm16" | "i16" => Ok(Self::Pcm16),
            other => Err(Error::Config(format!("unknown sample format {other:?}"))),
        }
    }
}

/// Header facts needed by catalog scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavInfo {
    pub rate: u32,
    pub channels: u16,
    pub frames: u64,
}

impl WavInfo {
    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.rate as f64
    }
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    match source {
        hound::Error::IoError(e) => Error::io(path, e),
        source => Error::Wav {
            path: path.to_path_buf(),
            source,
        },
    }
}

/// Reads only the header.
pub fn probe(path: &Path) -> Result<WavInfo> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.sample_rate == 0 || spec.channels == 0 {
        return Err(Error::InvalidArgument(format!(
            "{}: header declares zero rate or channels",
            path.display()
        )));
    }
    Ok(WavInfo {
        rate: spec.sample_rate,
        channels: spec.channels,
        frames: reader.duration() as u64,
    })
}

/// Decodes a whole file into de-interleaved channels scaled to [-1, 1].
pub fn read(path: &Path) -> Result<AudioBuffer> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::InvalidArgument(format!("{}: no channels", path.display())));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
        }
    }
    .map_err(|e| wav_err(path, e))?;
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, &s) in channels.iter_mut().zip(frame) {
            ch.push(s);
        }
    }
    AudioBuffer::new(channels, spec.sample_rate).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes `buffer` to `path` through a temporary file renamed into place.
pub fn write(path: &Path, buffer: &AudioBuffer, format: SampleFormat) -> Result<()> {
    let (bits, sample_format) = match format {
        SampleFormat::Float32 => (32, hound::SampleFormat::Float),
        SampleFormat::Pcm16 => (16, hound::SampleFormat::Int),
    };
    let spec = hound::WavSpec {
        channels: buffer.num_channels() as u16,
        sample_rate: buffer.rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let tmp = temp_path(path);
    let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(|e| wav_err(&tmp, e))?;
    for i in 0..buffer.len() {
        for ch in buffer.channels() {
            let s = ch[i];
            let res = match format {
                SampleFormat::Float32 => writer.write_sample(s as f32),
                SampleFormat::Pcm16 => writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16),
            };
            res.map_err(|e| wav_err(&tmp, e))?;
        }
    }
    writer.finalize().map_err(|e| wav_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
