//! Log-mel front-end: reflect-padded centered STFT with a periodic Hann
//! window, Slaney-style area-normalized mel filterbank, natural log with floor.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{reverse_audio, AudioBuffer, AudioError, Result};

pub const MELS_MAGIC: &[u8; 4] = b"MELS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub win_length: usize,
    pub hop_length: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            win_length: 1024,
            hop_length: 256,
            n_fft: 1024,
            n_mels: 80,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-5,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(AudioError::Config(m.to_string()));
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive");
        }
        if self.win_length == 0 || self.win_length > self.n_fft {
            return fail("win_length must be in 1..=n_fft");
        }
        if self.hop_length == 0 {
            return fail("hop_length must be >= 1");
        }
        if self.n_mels == 0 {
            return fail("n_mels must be >= 1");
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= self.sample_rate as f64 / 2.0)
        {
            return fail("need 0 <= fmin < fmax <= sample_rate / 2");
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail("log_floor must be a positive finite number");
        }
        Ok(())
    }

    /// Frames produced for `len` samples under center padding.
    pub fn n_frames(&self, len: usize) -> usize {
        len / self.hop_length + 1
    }
}

/// Log-mel matrix, row-major `[n_mels][n_frames]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub n_mels: usize,
    pub n_frames: usize,
    pub values: Vec<f32>,
    pub config: MelConfig,
}

impl MelSpectrogram {
    pub fn get(&self, mel: usize, frame: usize) -> f32 {
        self.values[mel * self.n_frames + frame]
    }

    pub fn row(&self, mel: usize) -> &[f32] {
        &self.values[mel * self.n_frames..(mel + 1) * self.n_frames]
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= MIN_LOG_HZ {
        min_log_mel + (hz / MIN_LOG_HZ).ln() / logstep
    } else {
        hz / F_SP
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= min_log_mel {
        MIN_LOG_HZ * (logstep * (mel - min_log_mel)).exp()
    } else {
        F_SP * mel
    }
}

/// `n_mels x (n_fft/2 + 1)` triangular filters, each scaled by
/// `2 / (f_right - f_left)`.
fn filterbank(cfg: &MelConfig) -> Vec<Vec<f64>> {
    let n_bins = cfg.n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64)
        .collect();
    (0..cfg.n_mels)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (right - left);
            bin_hz
                .iter()
                .map(|&f| {
                    let rising = (f - left) / (center - left);
                    let falling = (right - f) / (right - center);
                    rising.min(falling).max(0.0) * norm
                })
                .collect()
        })
        .collect()
}

fn reflect_index(i: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let m = i.rem_euclid(period);
    if m >= len as i64 {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Precomputed window, filterbank and FFT plan for one [`MelConfig`].
pub struct MelExtractor {
    config: MelConfig,
    window: Vec<f64>,
    filters: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MelExtractor {
    pub fn new(config: MelConfig) -> Result<Self> {
        config.validate()?;
        let offset = (config.n_fft - config.win_length) / 2;
        let mut window = vec![0.0; config.n_fft];
        for i in 0..config.win_length {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / config.win_length as f64;
            window[offset + i] = 0.5 - 0.5 * phase.cos();
        }
        let filters = filterbank(&config);
        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(Self {
            config,
            window,
            filters,
            fft,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    pub fn compute(&self, buf: &AudioBuffer) -> Result<MelSpectrogram> {
        let cfg = &self.config;
        if buf.sample_rate() != cfg.sample_rate {
            return Err(AudioError::Invalid(format!(
                "sample rate {} does not match mel config rate {}",
                buf.sample_rate(),
                cfg.sample_rate
            )));
        }
        if buf.is_empty() {
            return Err(AudioError::Invalid("cannot extract mels from an empty buffer".into()));
        }
        let x = buf.samples();
        let n_frames = cfg.n_frames(x.len());
        let n_bins = cfg.n_fft / 2 + 1;
        let pad = (cfg.n_fft / 2) as i64;
        let floor_ln = cfg.log_floor.ln();

        let mut values = vec![0.0f32; cfg.n_mels * n_frames];
        let mut frame = vec![Complex::new(0.0, 0.0); cfg.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0f64; n_bins];
        for t in 0..n_frames {
            let start = (t * cfg.hop_length) as i64 - pad;
            for (m, slot) in frame.iter_mut().enumerate() {
                let w = self.window[m];
                let s = if w == 0.0 {
                    0.0
                } else {
                    x[reflect_index(start + m as i64, x.len())] as f64 * w
                };
                *slot = Complex::new(s, 0.0);
            }
            self.fft.process_with_scratch(&mut frame, &mut scratch);
            for (p, c) in power.iter_mut().zip(&frame) {
                *p = c.norm_sqr();
            }
            for (m, filter) in self.filters.iter().enumerate() {
                let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                values[m * n_frames + t] = if energy > cfg.log_floor {
                    energy.ln() as f32
                } else {
                    floor_ln as f32
                };
            }
        }
        Ok(MelSpectrogram {
            n_mels: cfg.n_mels,
            n_frames,
            values,
            config: cfg.clone(),
        })
    }
}

pub fn mel_spectrogram(buf: &AudioBuffer, cfg: &MelConfig) -> Result<MelSpectrogram> {
    MelExtractor::new(cfg.clone())?.compute(buf)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MelReversalReport {
    /// Prefix length actually compared; frame centers of the forward and
    /// reversed signals coincide only when `(len - 1)` is a multiple of hop.
    pub samples_used: usize,
    pub n_frames: usize,
    pub boundary_frames: usize,
    pub interior_frames: usize,
    pub max_deviation: Option<f64>,
    pub note: Option<String>,
}

/// Compares `mel(reverse(x))` with the frame-reversed `mel(x)` over interior
/// frames, skipping `ceil(win_length / hop_length)` frames at each end.
pub fn mel_reversal_relation(buf: &AudioBuffer, cfg: &MelConfig) -> Result<MelReversalReport> {
    let extractor = MelExtractor::new(cfg.clone())?;
    let hop = cfg.hop_length;
    let boundary = cfg.win_length.div_ceil(hop);
    if buf.is_empty() {
        return Ok(MelReversalReport {
            samples_used: 0,
            n_frames: 0,
            boundary_frames: boundary,
            interior_frames: 0,
            max_deviation: None,
            note: Some("no interior frames".into()),
        });
    }
    let used = (buf.len() - 1) / hop * hop + 1;
    let trimmed = AudioBuffer::new(buf.samples()[..used].to_vec(), buf.sample_rate())?;
    let forward = extractor.compute(&trimmed)?;
    let backward = extractor.compute(&reverse_audio(&trimmed))?;
    // frame t of the reversed signal is centered on frame (last - t) of the original
    let last = (used - 1) / hop;
    let interior: Vec<usize> = (boundary..=last.saturating_sub(boundary))
        .filter(|&t| t + boundary <= last)
        .collect();
    if interior.is_empty() {
        return Ok(MelReversalReport {
            samples_used: used,
            n_frames: forward.n_frames,
            boundary_frames: boundary,
            interior_frames: 0,
            max_deviation: None,
            note: Some("no interior frames".into()),
        });
    }
    let mut max_dev = 0.0f64;
    for m in 0..forward.n_mels {
        for &t in &interior {
            let d = (backward.get(m, t) as f64 - forward.get(m, last - t) as f64).abs();
            max_dev = max_dev.max(d);
        }
    }
    Ok(MelReversalReport {
        samples_used: used,
        n_frames: forward.n_frames,
        boundary_frames: boundary,
        interior_frames: interior.len(),
        max_deviation: Some(max_dev),
        note: None,
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the MELS container and a `<path>.json` sidecar holding the config.
pub fn write_mels(mel: &MelSpectrogram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::with_capacity(16 + 4 * mel.values.len());
    bytes.extend_from_slice(MELS_MAGIC);
    bytes.extend_from_slice(&(mel.n_mels as u32).to_le_bytes());
    bytes.extend_from_slice(&(mel.n_frames as u32).to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    for v in &mel.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    let sidecar = serde_json::to_string_pretty(&mel.config).expect("config serializes");
    std::fs::write(sidecar_path(path), sidecar + "\n").map_err(io)
}

pub fn read_mels(path: impl AsRef<Path>) -> Result<MelSpectrogram> {
    let path = path.as_ref();
    let io = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let format = |detail: String| AudioError::Format {
        path: path.to_path_buf(),
        chunk: "MELS",
        detail,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() < 16 || &bytes[..4] != MELS_MAGIC {
        return Err(format("missing MELS header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (n_mels, n_frames) = (word(4), word(8));
    let payload = &bytes[16..];
    if payload.len() != 4 * n_mels * n_frames {
        return Err(format(format!(
            "header declares {n_mels}x{n_frames} values but payload holds {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let sidecar = std::fs::read_to_string(sidecar_path(path)).map_err(io)?;
    let config: MelConfig =
        serde_json::from_str(&sidecar).map_err(|e| format(format!("sidecar: {e}")))?;
    Ok(MelSpectrogram {
        n_mels,
        n_frames,
        values,
        config,
    })
}
