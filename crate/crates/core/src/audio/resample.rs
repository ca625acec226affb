//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.

use super::{AudioBuffer, AudioError, Result};

/// Kernel half-width in zero crossings of the cutoff sinc.
const ZERO_CROSSINGS: f64 = 32.0;
/// Kaiser beta; gives roughly 87 dB of stopband rejection.
const KAISER_BETA: f64 = 8.6;
/// Above this many phases the kernel is evaluated per output sample instead
/// of being tabulated.
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    cutoff: f64,
    half_width: usize,
    i0_beta: f64,
}

impl Kernel {
    fn eval(&self, x: f64) -> f64 {
        let r = x / self.half_width as f64;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let arg = std::f64::consts::PI * self.cutoff * x;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        self.cutoff * sinc * window
    }

    /// Taps for one fractional phase, normalized to unit DC gain.
    fn taps(&self, frac: f64, out: &mut [f64]) {
        let n = out.len();
        for (k, tap) in out.iter_mut().enumerate() {
            *tap = self.eval(frac + (self.half_width as f64 - 1.0) - k as f64);
        }
        let sum: f64 = out.iter().sum();
        if sum.abs() > f64::EPSILON {
            out.iter_mut().for_each(|t| *t /= sum);
        }
        debug_assert_eq!(n, 2 * self.half_width);
    }
}

/// Converts `buf` to `target_rate`. The output has
/// `round(len * target_rate / rate)` samples; the anti-aliasing cutoff sits at
/// the lower of the two Nyquist frequencies.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(AudioError::Invalid("target rate must be positive".into()));
    }
    let in_rate = buf.sample_rate() as u64;
    let out_rate = target_rate as u64;
    if in_rate == out_rate {
        return Ok(buf.clone());
    }
    let g = gcd(in_rate, out_rate);
    let (up, down) = (out_rate / g, in_rate / g);
    let cutoff = (up as f64 / down as f64).min(1.0);
    let half_width = (ZERO_CROSSINGS / cutoff).ceil() as usize;
    let kernel = Kernel {
        cutoff,
        half_width,
        i0_beta: bessel_i0(KAISER_BETA),
    };

    let input = buf.samples();
    let n_in = input.len() as u64;
    let n_out = ((2 * n_in as u128 * up as u128 + down as u128) / (2 * down as u128)) as usize;
    let width = 2 * half_width;

    let table: Option<Vec<f64>> = (up <= MAX_TABLE_PHASES).then(|| {
        let mut t = vec![0.0; up as usize * width];
        for (phase, row) in t.chunks_mut(width).enumerate() {
            kernel.taps(phase as f64 / up as f64, row);
        }
        t
    });
    let mut scratch = vec![0.0; width];

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let pos = n as u128 * down as u128;
        let base = (pos / up as u128) as i64;
        let phase = (pos % up as u128) as u64;
        let taps: &[f64] = match &table {
            Some(t) => &t[phase as usize * width..(phase as usize + 1) * width],
            None => {
                kernel.taps(phase as f64 / up as f64, &mut scratch);
                &scratch
            }
        };
        let first = base + 1 - half_width as i64;
        let mut acc = 0.0f64;
        for (k, &tap) in taps.iter().enumerate() {
            let j = first + k as i64;
            if j >= 0 && (j as u64) < n_in {
                acc += tap * input[j as usize] as f64;
            }
        }
        out.push(acc as f32);
    }
    AudioBuffer::new(out, target_rate)
}
