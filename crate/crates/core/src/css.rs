//! Chirp-spread-spectrum modulation and de-chirp demodulation.
//!
//! Symbol `v` is the base up-chirp with its starting frequency advanced by
//! `v · bw / 2^sf`; the sweep wraps back to `f0` when it reaches `f0 + bw`.
//! The receiver multiplies the real window by the conjugate analytic base
//! chirp. The pre-wrap part of symbol `v` then lands on DFT bin `v` and the
//! post-wrap part on bin `v - 2^sf` (mod `ns`); with phase-continuous chirps
//! the two bins are coherent, so each candidate is scored by the magnitude
//! of their sum.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::signal::{forward_fft, ModemParams, SampleBuffer};

/// Below this peak-to-mean ratio a decision is considered unreliable.
pub const LOW_CONFIDENCE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChirpDirection {
    Up,
    Down,
}

/// A validated sequence of symbol values, each below `2^sf`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolStream(Vec<u16>);

impl SymbolStream {
    pub fn new(values: Vec<u16>, params: &ModemParams) -> Result<Self> {
        check_symbols(&values, params)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u16] {
        &self.0
    }

    pub fn into_values(self) -> Vec<u16> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_symbols(values: &[u16], params: &ModemParams) -> Result<()> {
    let limit = params.num_symbols();
    match values.iter().find(|&&v| u32::from(v) >= limit) {
        Some(&v) => Err(Error::SymbolOutOfRange {
            value: u32::from(v),
            limit,
        }),
        None => Ok(()),
    }
}

/// Phase in cycles (fractional part only) of symbol `v` at sample `n`.
fn symbol_cycles(params: &ModemParams, v: u32, n: usize) -> f64 {
    let t = n as f64 / params.fs_hz();
    let k = params.chirp_rate();
    let offset = f64::from(v) * params.symbol_spacing_hz();
    let wrap_t = (params.bw_hz() - offset) / k;
    let mut cycles = (params.f0_hz() + offset) * t + 0.5 * k * t * t;
    if t >= wrap_t {
        cycles -= params.bw_hz() * t;
    }
    cycles.rem_euclid(1.0)
}

pub fn base_chirp(params: &ModemParams, direction: ChirpDirection) -> SampleBuffer {
    let k = params.chirp_rate();
    let top = params.f0_hz() + params.bw_hz();
    let samples = (0..params.ns())
        .map(|n| match direction {
            ChirpDirection::Up => (TAU * symbol_cycles(params, 0, n)).cos(),
            ChirpDirection::Down => {
                let t = n as f64 / params.fs_hz();
                (TAU * (top * t - 0.5 * k * t * t).rem_euclid(1.0)).cos()
            }
        })
        .collect();
    SampleBuffer::new(samples, params.fs_hz()).expect("chirp samples are finite")
}

pub fn modulate(params: &ModemParams, symbols: &[u16]) -> Result<SampleBuffer> {
    CssModem::new(*params).modulate(symbols)
}

/// A hard decision plus its peak-to-mean confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demodulated {
    pub symbol: u16,
    pub confidence: f64,
}

impl Demodulated {
    pub fn is_low_confidence(&self) -> bool {
        self.confidence < LOW_CONFIDENCE
    }
}

pub fn demodulate(params: &ModemParams, window: &[f64]) -> Result<Demodulated> {
    CssModem::new(*params).demodulate(window)
}

/// Modulator/demodulator with the reference chirp and FFT plan cached.
#[derive(Clone)]
pub struct CssModem {
    params: ModemParams,
    dechirp: Vec<Complex<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CssModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CssModem").field("params", &self.params).finish()
    }
}

impl CssModem {
    pub fn new(params: ModemParams) -> Self {
        let dechirp = (0..params.ns())
            .map(|n| Complex::from_polar(1.0, -TAU * symbol_cycles(&params, 0, n)))
            .collect();
        Self {
            params,
            dechirp,
            fft: forward_fft(params.ns()),
        }
    }

    pub fn params(&self) -> &ModemParams {
        &self.params
    }

    /// One symbol's waveform, `ns` samples.
    pub fn symbol_waveform(&self, v: u16) -> Vec<f64> {
        (0..self.params.ns())
            .map(|n| (TAU * symbol_cycles(&self.params, u32::from(v), n)).cos())
            .collect()
    }

    pub fn modulate(&self, symbols: &[u16]) -> Result<SampleBuffer> {
        check_symbols(symbols, &self.params)?;
        let mut samples = Vec::with_capacity(symbols.len() * self.params.ns());
        for &v in symbols {
            samples.extend(self.symbol_waveform(v));
        }
        SampleBuffer::new(samples, self.params.fs_hz())
    }

    /// Per-candidate de-chirp magnitudes, one per symbol value.
    pub fn candidate_scores(&self, window: &[f64]) -> Result<Vec<f64>> {
        let ns = self.params.ns();
        if window.len() != ns {
            return Err(Error::WrongLength {
                what: "demodulation window",
                expected: ns,
                actual: window.len(),
            });
        }
        let mut spec: Vec<Complex<f64>> = window
            .iter()
            .zip(&self.dechirp)
            .map(|(&x, &r)| r * x)
            .collect();
        self.fft.process(&mut spec);
        let m = self.params.num_symbols() as usize;
        Ok((0..m)
            .map(|v| (spec[v] + spec[(v + ns - m) % ns]).norm())
            .collect())
    }

    pub fn demodulate(&self, window: &[f64]) -> Result<Demodulated> {
        let scores = self.candidate_scores(window)?;
        let (best, peak) = scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let confidence = if mean > 0.0 { peak / mean } else { 1.0 };
        Ok(Demodulated {
            symbol: best as u16,
            confidence,
        })
    }

    /// Demodulate consecutive `ns`-sample windows.
    pub fn demodulate_all(&self, signal: &[f64]) -> Result<Vec<Demodulated>> {
        signal
            .chunks(self.params.ns())
            .map(|w| self.demodulate(w))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn params() -> ModemParams {
        ModemParams::default()
    }

    /// White noise whose power inside the chirp band is `signal_power / snr`.
    fn awgn_in_band(x: &[f64], snr_db: f64, seed: u64) -> Vec<f64> {
        let p = params();
        let sig = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let in_band_fraction = p.bw_hz() / (p.fs_hz() / 2.0);
        let var = sig / 10f64.powf(snr_db / 10.0) / in_band_fraction;
        let normal = Normal::new(0.0, var.sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        x.iter().map(|v| v + normal.sample(&mut rng)).collect()
    }

    #[test]
    fn base_chirp_length_and_amplitude() {
        let up = base_chirp(&params(), ChirpDirection::Up);
        assert_eq!(up.len(), 768);
        let peak = up.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 1.0 && peak > 0.99);
    }

    #[test]
    fn up_chirp_dechirps_to_single_bin() {
        let p = params();
        let modem = CssModem::new(p);
        let scores = modem.candidate_scores(base_chirp(&p, ChirpDirection::Up).samples()).unwrap();
        let peak = scores[0];
        assert!(scores[1..].iter().all(|&s| s < 0.1 * peak), "{scores:?}");
    }

    #[test]
    fn down_chirp_sweeps_downward() {
        let p = params();
        let down = base_chirp(&p, ChirpDirection::Down);
        // Time-reversing a down-chirp gives an up-chirp up to a phase offset,
        // so its envelope correlates strongly with the base up-chirp.
        let up = base_chirp(&p, ChirpDirection::Up);
        let early = zero_crossings(&down.samples()[..200]);
        let late = zero_crossings(&down.samples()[568..]);
        assert!(early > late, "{early} vs {late}");
        assert!(zero_crossings(&up.samples()[..200]) < zero_crossings(&up.samples()[568..]));
    }

    fn zero_crossings(x: &[f64]) -> usize {
        x.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    }

    #[test]
    fn chirp_energy_stays_in_band() {
        // Zero-padded DFT of a single symbol; energy outside [1.4, 3.6] kHz.
        let p = params();
        for v in [0u16, 7, 31] {
            let x = CssModem::new(p).symbol_waveform(v);
            let n = 8192;
            let mut spec: Vec<Complex<f64>> = x.iter().map(|&s| Complex::new(s, 0.0)).collect();
            spec.resize(n, Complex::default());
            forward_fft(n).process(&mut spec);
            let mut inside = 0.0;
            let mut total = 0.0;
            for (k, c) in spec.iter().enumerate().take(n / 2) {
                let f = k as f64 * p.fs_hz() / n as f64;
                let e = c.norm_sqr();
                total += e;
                if (1400.0..=3600.0).contains(&f) {
                    inside += e;
                }
            }
            assert!(1.0 - inside / total < 0.05, "v={v}: {}", 1.0 - inside / total);
        }
    }

    #[test]
    fn modulate_shapes() {
        let p = params();
        assert!(modulate(&p, &[]).unwrap().is_empty());
        let zero = modulate(&p, &[0]).unwrap();
        assert_eq!(zero.samples(), base_chirp(&p, ChirpDirection::Up).samples());
        assert_eq!(modulate(&p, &[1, 2, 3]).unwrap().len(), 3 * 768);
        assert!(matches!(modulate(&p, &[32]), Err(Error::SymbolOutOfRange { value: 32, limit: 32 })));
    }

    #[test]
    fn exhaustive_noiseless_round_trip() {
        let p = params();
        let modem = CssModem::new(p);
        for v in 0..32u16 {
            let d = modem.demodulate(&modem.symbol_waveform(v)).unwrap();
            assert_eq!(d.symbol, v);
            assert!(!d.is_low_confidence(), "v={v} conf={}", d.confidence);
        }
    }

    #[test]
    fn multi_symbol_round_trip_is_phase_continuous() {
        let p = params();
        let symbols: Vec<u16> = (0..64).map(|i| (i * 7 % 32) as u16).collect();
        let sig = modulate(&p, &symbols).unwrap();
        // Phase continuity: no sample-to-sample jump larger than the maximum
        // per-sample change of a 3.5 kHz sinusoid.
        let max_step = TAU * 3500.0 / p.fs_hz() * 1.01;
        assert!(sig.samples().windows(2).all(|w| (w[1] - w[0]).abs() <= max_step));
        let out: Vec<u16> = CssModem::new(p)
            .demodulate_all(sig.samples())
            .unwrap()
            .iter()
            .map(|d| d.symbol)
            .collect();
        assert_eq!(out, symbols);
    }

    #[test]
    fn zero_window_is_low_confidence() {
        let d = demodulate(&params(), &[0.0; 768]).unwrap();
        assert!((d.confidence - 1.0).abs() < 1e-12);
        assert!(d.is_low_confidence());
    }

    #[test]
    fn wrong_window_length_rejected() {
        assert!(matches!(
            demodulate(&params(), &[0.0; 767]),
            Err(Error::WrongLength { expected: 768, actual: 767, .. })
        ));
    }

    #[test]
    fn symbol_seven_survives_zero_db() {
        let p = params();
        let modem = CssModem::new(p);
        let clean = modem.symbol_waveform(7);
        let hits = (0..100)
            .filter(|&seed| modem.demodulate(&awgn_in_band(&clean, 0.0, seed)).unwrap().symbol == 7)
            .count();
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn positive_gain_does_not_change_decisions() {
        let p = params();
        let modem = CssModem::new(p);
        let noisy = awgn_in_band(&modem.symbol_waveform(19), -6.0, 3);
        let scaled: Vec<f64> = noisy.iter().map(|v| v * 0.37).collect();
        assert_eq!(modem.demodulate(&noisy).unwrap().symbol, modem.demodulate(&scaled).unwrap().symbol);
    }
}
