//! WAV input and output with samples normalized to `[-1, 1]`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use log::warn;

use crate::error::{Error, Result};

/// Lowest sample rate the pipeline accepts.
pub const MIN_SAMPLE_RATE: u32 = 8_000;

const PCM16_SCALE: f64 = 32_768.0;

/// Mono audio with normalized samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    /// Wraps samples after checking the sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::InvalidInput(format!(
                "sample rate {sample_rate} Hz is below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Length in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.sample_rate)
    }
}

/// Outcome of [`write_wav`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteSummary {
    /// Samples that fell outside `[-1, 1]` and were clamped.
    pub clipped: usize,
}

/// Reads a 16-bit PCM or 32-bit float WAV file; stereo is averaged to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();

    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            message: format!("{} channels (mono or stereo expected)", spec.channels),
        });
    }
    if spec.sample_rate < MIN_SAMPLE_RATE {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            message: format!("sample rate {} Hz below {MIN_SAMPLE_RATE} Hz", spec.sample_rate),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (format, bits) => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                message: format!("{bits}-bit {format:?} samples (16-bit PCM or 32-bit float expected)"),
            })
        }
    };

    let channels = usize::from(spec.channels);
    let mut clamped = 0usize;
    let samples = interleaved
        .chunks(channels)
        .map(|frame| {
            let mean = frame.iter().sum::<f64>() / frame.len() as f64;
            if mean.abs() > 1.0 {
                clamped += 1;
            }
            mean.clamp(-1.0, 1.0)
        })
        .collect();
    if clamped > 0 {
        warn!("{}: clamped {clamped} samples outside [-1, 1]", path.display());
    }

    Ok(AudioBuffer {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Writes a mono 16-bit PCM WAV file, hard-clipping samples outside `[-1, 1]`.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<WriteSummary> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer =
        WavWriter::new(std::io::BufWriter::new(file), spec).map_err(|e| wav_error(path, e))?;

    let mut summary = WriteSummary::default();
    for &sample in &buffer.samples {
        let (word, clipped) = quantize(sample);
        if clipped {
            summary.clipped += 1;
        }
        writer.write_sample(word).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))?;

    if summary.clipped > 0 {
        warn!("{}: clipped {} samples", path.display(), summary.clipped);
    }
    Ok(summary)
}

/// Maps a normalized sample to a PCM word; the flag reports clipping.
fn quantize(sample: f64) -> (i16, bool) {
    let clipped = !(-1.0..=1.0).contains(&sample);
    let scaled = (sample.clamp(-1.0, 1.0) * PCM16_SCALE).round();
    (scaled.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16, clipped)
}

fn wav_error(path: &Path, err: hound::Error) -> Error {
    match err {
        // The file is already open, so a failed read means the data ran out
        // (hound reports short reads as `Other`). Only genuine device
        // errors stay I/O errors.
        hound::Error::IoError(e)
            if !matches!(e.kind(), std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::Other) =>
        {
            Error::io(path, e)
        }
        hound::Error::Unsupported => Error::UnsupportedFormat {
            path: path.into(),
            message: "codec not supported".into(),
        },
        other => Error::WavParse {
            path: path.into(),
            message: other.to_string(),
        },
    }
}
