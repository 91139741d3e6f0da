//! Signal primitives shared by every stage of the modem: the modulation
//! constants, the sample buffer, normalized cross-correlation, fractional
//! resampling, FFT band filtering and 16-bit WAV I/O.

use std::cell::RefCell;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulation constants. `ns` and `ts_s` are derived and always consistent
/// with the stored fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModemParams", into = "RawModemParams")]
pub struct ModemParams {
    sf: u32,
    bw_hz: f64,
    fs_hz: f64,
    f0_hz: f64,
    ns: usize,
}

#[derive(Serialize, Deserialize)]
struct RawModemParams {
    sf: u32,
    bw_hz: f64,
    fs_hz: f64,
    f0_hz: f64,
}

impl TryFrom<RawModemParams> for ModemParams {
    type Error = Error;

    fn try_from(raw: RawModemParams) -> Result<Self> {
        ModemParams::new(raw.sf, raw.bw_hz, raw.fs_hz, raw.f0_hz)
    }
}

impl From<ModemParams> for RawModemParams {
    fn from(p: ModemParams) -> Self {
        RawModemParams {
            sf: p.sf,
            bw_hz: p.bw_hz,
            fs_hz: p.fs_hz,
            f0_hz: p.f0_hz,
        }
    }
}

impl ModemParams {
    pub fn new(sf: u32, bw_hz: f64, fs_hz: f64, f0_hz: f64) -> Result<Self> {
        if !(1..=12).contains(&sf) {
            return Err(Error::InvalidParams(format!("spreading factor {sf} outside 1..=12")));
        }
        if !(bw_hz.is_finite() && bw_hz > 0.0 && fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidParams("bandwidth and sample rate must be positive".into()));
        }
        if !(f0_hz.is_finite() && f0_hz >= 0.0) {
            return Err(Error::InvalidParams(format!("band start {f0_hz} Hz must be >= 0")));
        }
        if f0_hz + bw_hz > fs_hz / 2.0 {
            return Err(Error::InvalidParams(format!(
                "band [{f0_hz}, {}] Hz exceeds Nyquist ({} Hz)",
                f0_hz + bw_hz,
                fs_hz / 2.0
            )));
        }
        let exact = fs_hz * f64::from(1u32 << sf) / bw_hz;
        let ns = exact.round();
        if (exact - ns).abs() > 1e-9 * exact.max(1.0) || ns < 1.0 {
            return Err(Error::InvalidParams(format!(
                "samples per symbol {exact} is not an integer"
            )));
        }
        Ok(Self {
            sf,
            bw_hz,
            fs_hz,
            f0_hz,
            ns: ns as usize,
        })
    }

    pub fn sf(&self) -> u32 {
        self.sf
    }

    pub fn bw_hz(&self) -> f64 {
        self.bw_hz
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn f0_hz(&self) -> f64 {
        self.f0_hz
    }

    /// Samples per symbol.
    pub fn ns(&self) -> usize {
        self.ns
    }

    /// Symbol duration `2^sf / bw`.
    pub fn ts_s(&self) -> f64 {
        f64::from(self.num_symbols()) / self.bw_hz
    }

    /// Alphabet size `2^sf`.
    pub fn num_symbols(&self) -> u32 {
        1 << self.sf
    }

    /// Frequency step between adjacent symbol values.
    pub fn symbol_spacing_hz(&self) -> f64 {
        self.bw_hz / f64::from(self.num_symbols())
    }

    /// Raw bit rate before coding.
    pub fn data_rate_bps(&self) -> f64 {
        f64::from(self.sf) / self.ts_s()
    }

    /// Chirp rate in Hz per second.
    pub fn chirp_rate(&self) -> f64 {
        self.bw_hz / self.ts_s()
    }
}

impl Default for ModemParams {
    fn default() -> Self {
        Self::new(5, 2000.0, 48_000.0, 1500.0).expect("default modem parameters are valid")
    }
}

/// Real-valued audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    fs_hz: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, fs_hz: f64) -> Result<Self> {
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidParams(format!("sample rate {fs_hz} must be positive")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self { samples, fs_hz })
    }

    pub fn zeros(len: usize, fs_hz: f64) -> Self {
        Self {
            samples: vec![0.0; len],
            fs_hz,
        }
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_hz
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn append(&mut self, other: &SampleBuffer) -> Result<()> {
        check_rates(self.fs_hz, other.fs_hz)?;
        self.samples.extend_from_slice(&other.samples);
        Ok(())
    }

    /// Surround the buffer with `lead` and `tail` zero samples.
    pub fn padded(&self, lead: usize, tail: usize) -> SampleBuffer {
        let mut samples = vec![0.0; lead];
        samples.extend_from_slice(&self.samples);
        samples.resize(lead + self.samples.len() + tail, 0.0);
        SampleBuffer {
            samples,
            fs_hz: self.fs_hz,
        }
    }
}

fn check_rates(a: f64, b: f64) -> Result<()> {
    if a != b {
        return Err(Error::SampleRateMismatch { a, b });
    }
    Ok(())
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// How [`cross_correlate_with`] evaluates the correlation numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMethod {
    /// Direct O(len(a)·len(b)) summation.
    Direct,
    /// FFT-based; identical up to rounding.
    #[default]
    Fft,
}

/// Normalized cross-correlation of template `b` sliding over `a`.
///
/// `out[k] = <a[k..k+len(b)], b> / (‖a[k..k+len(b)]‖·‖b‖)` for every lag
/// `k` in `0..=len(a)-len(b)`; a perfect match scores 1.0.
pub fn cross_correlate(a: &SampleBuffer, b: &SampleBuffer) -> Result<Vec<f64>> {
    cross_correlate_with(a, b, CorrelationMethod::default())
}

pub fn cross_correlate_with(
    a: &SampleBuffer,
    b: &SampleBuffer,
    method: CorrelationMethod,
) -> Result<Vec<f64>> {
    check_rates(a.fs_hz, b.fs_hz)?;
    normalized_xcorr(&a.samples, &b.samples, method)
}

/// Slice form of [`cross_correlate_with`].
pub fn normalized_xcorr(a: &[f64], b: &[f64], method: CorrelationMethod) -> Result<Vec<f64>> {
    if b.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    if a.len() < b.len() {
        return Err(Error::TemplateTooLong {
            template: b.len(),
            signal: a.len(),
        });
    }
    let lags = a.len() - b.len() + 1;
    let numer = match method {
        CorrelationMethod::Direct => (0..lags).map(|k| dot(&a[k..k + b.len()], b)).collect(),
        CorrelationMethod::Fft => fft_xcorr(a, b),
    };
    let template_energy = dot(b, b);
    let mut prefix = Vec::with_capacity(a.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in a {
        acc += v * v;
        prefix.push(acc);
    }
    Ok(numer
        .into_iter()
        .enumerate()
        .map(|(k, num): (usize, f64)| {
            let window = (prefix[k + b.len()] - prefix[k]).max(0.0);
            let denom = (window * template_energy).sqrt();
            if denom <= f64::EPSILON * template_energy.max(1e-300) {
                0.0
            } else {
                (num / denom).clamp(-1.0, 1.0)
            }
        })
        .collect())
}

/// Normalized correlation at a single lag, zero when the window leaves `a`.
pub fn correlation_at(a: &[f64], b: &[f64], lag: i64) -> f64 {
    if lag < 0 || lag as usize + b.len() > a.len() {
        return 0.0;
    }
    let window = &a[lag as usize..lag as usize + b.len()];
    let denom = (dot(window, window) * dot(b, b)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        dot(window, b) / denom
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Un-normalized correlation numerator `sum_i a[k+i] b[i]` for all valid lags.
fn fft_xcorr(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = (a.len() + b.len()).next_power_of_two();
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fa.resize(n, Complex::default());
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fb.resize(n, Complex::default());
    let fwd = forward_fft(n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y.conj();
    }
    inverse_fft(n).process(&mut fa);
    let scale = 1.0 / n as f64;
    (0..=a.len() - b.len()).map(|k| fa[k].re * scale).collect()
}

/// Uniformly resample `src_len` source samples starting at the fractional
/// index `src_start` into `dst_len` samples. Endpoints are inclusive: output
/// `j` reads position `src_start + j·(src_len−1)/(dst_len−1)`.
pub fn resample_linear(
    buf: &SampleBuffer,
    src_start: f64,
    src_len: f64,
    dst_len: usize,
) -> Result<SampleBuffer> {
    let samples = resample_span(&buf.samples, src_start, src_len, dst_len)?;
    Ok(SampleBuffer {
        samples,
        fs_hz: buf.fs_hz,
    })
}

pub fn resample_span(x: &[f64], src_start: f64, src_len: f64, dst_len: usize) -> Result<Vec<f64>> {
    let out_of_range = || Error::SpanOutOfRange {
        start: src_start,
        len: src_len,
        buffer: x.len(),
    };
    if dst_len == 0 {
        return Err(Error::InvalidParams("destination length must be >= 1".into()));
    }
    if !(src_start.is_finite() && src_len.is_finite()) || src_start < 0.0 || src_len < 1.0 {
        return Err(out_of_range());
    }
    if src_start + src_len > x.len() as f64 + 1e-9 {
        return Err(out_of_range());
    }
    let step = if dst_len > 1 {
        (src_len - 1.0) / (dst_len - 1) as f64
    } else {
        0.0
    };
    let last = (x.len() - 1) as f64;
    Ok((0..dst_len)
        .map(|j| interpolate(x, (src_start + j as f64 * step).min(last)))
        .collect())
}

/// Linear interpolation at a fractional index; zero outside the buffer.
pub fn interpolate(x: &[f64], pos: f64) -> f64 {
    if !(pos >= 0.0) || pos > (x.len() as f64 - 1.0) {
        return 0.0;
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if frac == 0.0 || i + 1 >= x.len() {
        x[i]
    } else {
        x[i] * (1.0 - frac) + x[i + 1] * frac
    }
}

/// Zero-phase FFT filter: multiplies the spectrum by `gain(f_hz)`.
pub(crate) fn filter_fft(x: &[f64], fs_hz: f64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    // Padding to twice the length keeps circular wrap-around out of the result.
    let n = (2 * x.len()).next_power_of_two();
    let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    spec.resize(n, Complex::default());
    forward_fft(n).process(&mut spec);
    for (k, bin) in spec.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs_hz / n as f64;
        *bin *= gain(f);
    }
    inverse_fft(n).process(&mut spec);
    let scale = 1.0 / n as f64;
    spec[..x.len()].iter().map(|c| c.re * scale).collect()
}

/// Zero-phase band-pass with raised-cosine skirts of width `skirt_hz`.
pub fn bandpass(x: &[f64], fs_hz: f64, lo_hz: f64, hi_hz: f64, skirt_hz: f64) -> Vec<f64> {
    filter_fft(x, fs_hz, |f| band_gain(f, lo_hz, hi_hz, skirt_hz))
}

fn band_gain(f: f64, lo: f64, hi: f64, skirt: f64) -> f64 {
    let edge = |d: f64| {
        if d >= skirt {
            1.0
        } else if d <= 0.0 {
            0.0
        } else {
            0.5 - 0.5 * (std::f64::consts::PI * d / skirt).cos()
        }
    };
    if f < lo || f > hi {
        0.0
    } else {
        edge(f - lo).min(edge(hi - f))
    }
}

/// Mean per-sample power of `x` restricted to `[lo_hz, hi_hz]`.
pub fn band_power(x: &[f64], fs_hz: f64, lo_hz: f64, hi_hz: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len().next_power_of_two();
    let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    spec.resize(n, Complex::default());
    forward_fft(n).process(&mut spec);
    let energy: f64 = spec
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = (*k).min(n - k) as f64 * fs_hz / n as f64;
            f >= lo_hz && f <= hi_hz
        })
        .map(|(_, c)| c.norm_sqr())
        .sum();
    // Parseval: sum |X|^2 = n * sum x^2 over the padded length.
    energy / n as f64 / x.len() as f64
}

/// Write mono 16-bit PCM. Amplitudes are scaled by 32767 and saturated.
pub fn write_wav(path: impl AsRef<Path>, buf: &SampleBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.fs_hz.round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &buf.samples {
        writer.write_sample(to_pcm16(s))?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<SampleBuffer> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Format(format!(
            "expected mono 16-bit PCM, got {} channel(s) at {} bits",
            spec.channels, spec.bits_per_sample
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32767.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    SampleBuffer::new(samples, f64::from(spec.sample_rate))
}

pub(crate) fn to_pcm16(s: f64) -> i16 {
    (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16
}
