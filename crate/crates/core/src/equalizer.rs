//! MMSE time-domain equalization trained on a known training symbol.
//!
//! Coefficients `w` (length `taps`) are chosen so that
//! `y[n] = sum_k w[k] · r[n + offset − k]` matches the known training
//! waveform `s[n]`. The received window therefore carries
//! `taps − 1 − offset` samples before the symbol and `offset` after it.
//! The Wiener normal equations use biased autocorrelation estimates, which
//! makes them symmetric Toeplitz; they are solved by Levinson recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{dot, forward_fft};
use rustfft::num_complex::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Regularization {
    /// Ridge term relative to the zero-lag autocorrelation.
    Relative(f64),
    /// Ridge term equal to the in-band noise power inferred from the
    /// received window's out-of-band (4–8 kHz) energy.
    NoiseEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualizerConfig {
    pub taps: usize,
    pub offset: usize,
    pub regularization: Regularization,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            taps: 240,
            offset: 80,
            regularization: Regularization::NoiseEstimate,
        }
    }
}

/// Always added on top of the configured ridge so the recursion stays stable.
const RIDGE_FLOOR: f64 = 1e-6;

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 || self.offset >= self.taps {
            return Err(Error::InvalidConfig(format!(
                "equalizer needs taps >= 1 and offset < taps (taps {}, offset {})",
                self.taps, self.offset
            )));
        }
        if let Regularization::Relative(r) = self.regularization {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidConfig(format!("ridge {r} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Samples needed before the symbol start.
    pub fn lead(&self) -> usize {
        self.taps - 1 - self.offset
    }

    /// Samples needed after the symbol end.
    pub fn tail(&self) -> usize {
        self.offset
    }
}

/// Estimate coefficients from a received training window.
///
/// `received` is either exactly `known.len()` samples (an isolated symbol,
/// zero-extended on both sides) or `known.len() + taps − 1` samples that
/// already include the lead and tail context.
pub fn estimate(received: &[f64], known: &[f64], cfg: &EqualizerConfig) -> Result<Vec<f64>> {
    estimate_with(received, known, cfg, 0.0)
}

fn estimate_with(received: &[f64], known: &[f64], cfg: &EqualizerConfig, fs_hint: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let window = with_context(received, known.len(), cfg)?;
    let taps = cfg.taps;
    let lead = cfg.lead();

    let n = window.len() as f64;
    let autocorr: Vec<f64> = (0..taps)
        .map(|k| dot(&window[..window.len().saturating_sub(k)], &window[k.min(window.len())..]) / n)
        .collect();
    // p[k] = sum_n s[n] · r[n + offset − k]; window index of r[m] is m + lead.
    let cross: Vec<f64> = (0..taps)
        .map(|k| {
            let start = lead + cfg.offset - k;
            dot(known, &window[start..start + known.len()]) / n
        })
        .collect();

    if autocorr[0] <= 0.0 {
        return Err(Error::IllConditioned);
    }
    let ridge = match cfg.regularization {
        Regularization::Relative(r) => r * autocorr[0],
        Regularization::NoiseEstimate => {
            let fs = if fs_hint > 0.0 { fs_hint } else { 48_000.0 };
            in_band_noise_estimate(received, fs)
        }
    } + RIDGE_FLOOR * autocorr[0];

    let mut toeplitz = autocorr;
    toeplitz[0] += ridge;
    levinson(&toeplitz, &cross)
}

/// Like [`estimate`], with the sample rate used by the noise estimator.
pub fn estimate_at_rate(received: &[f64], known: &[f64], cfg: &EqualizerConfig, fs_hz: f64) -> Result<Vec<f64>> {
    estimate_with(received, known, cfg, fs_hz)
}

fn with_context<'a>(received: &'a [f64], ns: usize, cfg: &EqualizerConfig) -> Result<std::borrow::Cow<'a, [f64]>> {
    let full = ns + cfg.taps - 1;
    if received.len() == full {
        Ok(std::borrow::Cow::Borrowed(received))
    } else if received.len() == ns {
        let mut padded = vec![0.0; cfg.lead()];
        padded.extend_from_slice(received);
        padded.resize(full, 0.0);
        Ok(std::borrow::Cow::Owned(padded))
    } else {
        Err(Error::WrongLength {
            what: "received training window",
            expected: full,
            actual: received.len(),
        })
    }
}

/// Per-sample noise power in the 1.5–3.5 kHz band, assuming the noise is
/// white and extrapolating from the 4–8 kHz band where no signal lives.
fn in_band_noise_estimate(x: &[f64], fs_hz: f64) -> f64 {
    let n = x.len().next_power_of_two();
    let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    spec.resize(n, Complex::default());
    forward_fft(n).process(&mut spec);
    let bin_hz = fs_hz / n as f64;
    let (lo, hi) = ((4000.0 / bin_hz).ceil() as usize, (8000.0 / bin_hz).floor() as usize);
    if hi <= lo || hi >= n / 2 {
        return 0.0;
    }
    let mean_bin_energy = spec[lo..=hi].iter().map(|c| c.norm_sqr()).sum::<f64>() / (hi - lo + 1) as f64;
    // A white sequence of variance v has E|X[k]|^2 = v · len over n bins.
    let variance = mean_bin_energy / x.len() as f64;
    variance * 2000.0 / (fs_hz / 2.0)
}

/// Solve `T x = y` for symmetric Toeplitz `T` with first row `t`.
pub fn levinson(t: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = t.len();
    if y.len() != n {
        return Err(Error::WrongLength {
            what: "Toeplitz right-hand side",
            expected: n,
            actual: y.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if t[0] <= 0.0 || !t[0].is_finite() {
        return Err(Error::IllConditioned);
    }
    // Forward vector f solves T_k f = e_0; for symmetric T the backward
    // vector is its reverse.
    let mut f = vec![1.0 / t[0]];
    let mut x = vec![y[0] / t[0]];
    for k in 1..n {
        let ef: f64 = (0..k).map(|i| t[k - i] * f[i]).sum();
        let denom = 1.0 - ef * ef;
        if denom.abs() < 1e-14 || !denom.is_finite() {
            return Err(Error::IllConditioned);
        }
        let mut next = vec![0.0; k + 1];
        for i in 0..=k {
            let fi = if i < k { f[i] } else { 0.0 };
            let bi = if i > 0 { f[k - i] } else { 0.0 };
            next[i] = (fi - ef * bi) / denom;
        }
        f = next;
        let ex: f64 = (0..k).map(|i| t[k - i] * x[i]).sum();
        let scale = y[k] - ex;
        x.push(0.0);
        // Backward vector is `f` reversed.
        for i in 0..=k {
            x[i] += scale * f[k - i];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned);
    }
    Ok(x)
}

/// Valid-mode convolution: returns `window.len() − taps + 1` samples with
/// `out[n] = sum_k w[k] · window[n + taps − 1 − k]`.
pub fn apply(w: &[f64], window: &[f64]) -> Result<Vec<f64>> {
    if w.is_empty() || window.len() < w.len() {
        return Err(Error::WrongLength {
            what: "equalizer input window",
            expected: w.len().max(1),
            actual: window.len(),
        });
    }
    let taps = w.len();
    let reversed: Vec<f64> = w.iter().rev().copied().collect();
    Ok((0..=window.len() - taps)
        .map(|n| dot(&reversed, &window[n..n + taps]))
        .collect())
}

/// Coefficients that pass the symbol through unchanged.
pub fn identity(cfg: &EqualizerConfig) -> Vec<f64> {
    let mut w = vec![0.0; cfg.taps];
    w[cfg.offset] = 1.0;
    w
}
