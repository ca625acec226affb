use std::io::Seek;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioBuffer, AudioError, Result};

const PCM16_SCALE: f32 = 32768.0;

fn map_err(path: &Path, err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.to_path_buf(),
            source,
        },
        hound::Error::FormatError(detail) => AudioError::Format {
            path: path.to_path_buf(),
            chunk: "RIFF",
            detail: detail.to_string(),
        },
        other => AudioError::Format {
            path: path.to_path_buf(),
            chunk: "fmt ",
            detail: other.to_string(),
        },
    }
}

fn open(path: &Path) -> Result<WavReader<std::io::BufReader<std::fs::File>>> {
    let reader = WavReader::open(path).map_err(|e| map_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::Format {
            path: path.to_path_buf(),
            chunk: "fmt ",
            detail: format!("channels={} unsupported", spec.channels),
        });
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) | (SampleFormat::Float, 32) => Ok(reader),
        (fmt, bits) => Err(AudioError::Format {
            path: path.to_path_buf(),
            chunk: "fmt ",
            detail: format!("{fmt:?} {bits}-bit samples unsupported (PCM16 or float32 only)"),
        }),
    }
}

/// Reads a mono PCM16 or float32 WAV file. PCM16 is scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let spec = reader.spec();
    let samples: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_err(path, e))?,
        SampleFormat::Int => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_err(path, e))?,
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes the buffer as a float32 mono WAV file.
pub fn write_wav(buf: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_err(path, e))?;
    for &s in buf.samples() {
        writer.write_sample(s).map_err(|e| map_err(path, e))?;
    }
    writer.finalize().map_err(|e| map_err(path, e))
}

/// Duration in seconds from the header alone.
pub fn wav_duration(path: impl AsRef<Path>) -> Result<f64> {
    let path = path.as_ref();
    let reader = open(path)?;
    let spec = reader.spec();
    let frames = reader.duration();
    let io_err = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let data_offset = reader.into_inner().stream_position().map_err(io_err)?;
    let file_len = std::fs::metadata(path).map_err(io_err)?.len();
    let declared = frames as u64 * spec.bits_per_sample as u64 / 8;
    if file_len < data_offset + declared {
        return Err(io_err(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "data chunk shorter than declared",
        )));
    }
    Ok(frames as f64 / spec.sample_rate as f64)
}
