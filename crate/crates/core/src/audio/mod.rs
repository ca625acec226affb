//! Mono PCM buffers, WAV I/O, resampling, time reversal and log-mel features.

mod mel;
mod resample;
mod wav;

pub use mel::{
    mel_reversal_relation, mel_spectrogram, read_mels, write_mels, MelConfig, MelExtractor,
    MelReversalReport, MelSpectrogram,
};
pub use resample::resample;
pub use wav::{read_wav, wav_duration, write_wav};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported format ({chunk} chunk): {detail}")]
    Format {
        path: PathBuf,
        chunk: &'static str,
        detail: String,
    },
    #[error("invalid audio: {0}")]
    Invalid(String),
    #[error("invalid mel config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Mono float PCM with its sampling rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::Invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }
}

/// `out[i] = in[len - 1 - i]`; rate and length unchanged.
pub fn reverse_audio(buf: &AudioBuffer) -> AudioBuffer {
    let mut samples = buf.samples.clone();
    samples.reverse();
    AudioBuffer {
        samples,
        sample_rate: buf.sample_rate,
    }
}
