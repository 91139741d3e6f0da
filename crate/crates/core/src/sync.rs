//! Packet detection and per-group timing recovery.
//!
//! Timing is tracked from the training symbol at the head of every group.
//! Each training symbol is searched for only within `±delta` samples of where
//! the previous one predicts it, and the resulting drift sequence is smoothed
//! and step-limited before the groups are resampled onto nominal time.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet::FramePlan;
use crate::signal::{
    bandpass, interpolate, normalized_xcorr, resample_span, CorrelationMethod, SampleBuffer,
};

/// Receiver variants used in the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    /// Raw detections are used directly, searched over a wide window.
    #[serde(rename = "wo_sb")]
    WithoutSmoothBound,
    /// Nominal timestamps; equalization still runs per group.
    #[serde(rename = "wo_sync")]
    WithoutSync,
    /// Equalizer trained on the first group only, nominal timestamps.
    OneEqual,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::WithoutSmoothBound,
        Ablation::WithoutSync,
        Ablation::OneEqual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::WithoutSmoothBound => "wo_sb",
            Ablation::WithoutSync => "wo_sync",
            Ablation::OneEqual => "one_equal",
        }
    }

    /// `base` with this variant's flags applied.
    pub fn configure(self, base: SyncConfig) -> SyncConfig {
        let mut cfg = SyncConfig {
            disable_sync: false,
            disable_smooth_bound: false,
            equalize_once: false,
            ..base
        };
        match self {
            Ablation::Full => {}
            Ablation::WithoutSmoothBound => cfg.disable_smooth_bound = true,
            Ablation::WithoutSync => cfg.disable_sync = true,
            Ablation::OneEqual => {
                cfg.disable_sync = true;
                cfg.equalize_once = true;
            }
        }
        cfg
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s || (s == "wo_s+b" && *a == Ablation::WithoutSmoothBound))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    /// Search half-width and per-group step bound, in samples.
    pub delta: usize,
    pub ma_window: usize,
    pub disable_sync: bool,
    pub disable_smooth_bound: bool,
    pub equalize_once: bool,
    /// Refine timing with a training template stretched by the Doppler
    /// factor estimated from a first pass.
    pub compensate_dilation: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            delta: 40,
            ma_window: 5,
            disable_sync: false,
            disable_smooth_bound: false,
            equalize_once: false,
            compensate_dilation: true,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ma_window == 0 {
            return Err(Error::InvalidConfig("ma_window must be >= 1".into()));
        }
        Ok(())
    }

    pub fn for_ablation(ablation: Ablation) -> Self {
        ablation.configure(Self::default())
    }
}

/// Per-group timing record. Drifts are in samples relative to the nominal
/// training-symbol start; `timestamps` are absolute fractional indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DriftTrace {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub bounded: Vec<f64>,
    pub timestamps: Vec<f64>,
}

impl DriftTrace {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn max_step(&self) -> f64 {
        self.bounded
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `group,raw,smoothed,bounded`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "raw", "smoothed", "bounded"])?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                self.raw[i].to_string(),
                self.smoothed[i].to_string(),
                self.bounded[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pass band used for timing decisions.
pub const TIMING_BAND_HZ: (f64, f64) = (1400.0, 3600.0);
const TIMING_SKIRT_HZ: f64 = 200.0;

/// Band-limit a received signal to the modem band for timing searches.
pub fn timing_filter(x: &[f64], fs_hz: f64) -> Vec<f64> {
    bandpass(x, fs_hz, TIMING_BAND_HZ.0, TIMING_BAND_HZ.1, TIMING_SKIRT_HZ)
}

/// Result of a preamble search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub start: usize,
    /// Time dilation of the best-matching preamble template.
    pub alpha: f64,
    /// Normalized correlation at the detected lag.
    pub score: f64,
}

/// Largest time dilation the preamble search covers, and its grid step.
pub const DETECT_MAX_DILATION: f64 = 0.015;
const DETECT_DILATION_STEP: f64 = 0.0025;

/// Start of the first preamble whose normalized correlation reaches
/// `threshold`. The signal is band-limited first; once a lag crosses the
/// threshold, the strongest lag within one preamble length of it is taken so
/// that partial-overlap sidelobes do not win.
pub fn detect_preamble(signal: &SampleBuffer, plan: &FramePlan, threshold: f64) -> Option<usize> {
    detect_preamble_with(signal, plan, threshold, CorrelationMethod::Fft).map(|d| d.start)
}

/// [`detect_preamble`] with a selectable correlation method and the full
/// detection record.
///
/// Motion stretches the preamble enough to decorrelate it from the nominal
/// template, so a bank of dilated templates is searched. The search runs on
/// a decimated copy of the band-limited signal and the winner is refined at
/// full rate.
pub fn detect_preamble_with(
    signal: &SampleBuffer,
    plan: &FramePlan,
    threshold: f64,
    method: CorrelationMethod,
) -> Option<Detection> {
    if signal.fs_hz() != plan.params().fs_hz() {
        return None;
    }
    let filtered = timing_filter(signal.samples(), signal.fs_hz());
    detect_in_filtered(&filtered, plan, threshold, method)
}

pub(crate) fn detect_in_filtered(
    filtered: &[f64],
    plan: &FramePlan,
    threshold: f64,
    method: CorrelationMethod,
) -> Option<Detection> {
    let fs = plan.params().fs_hz();
    let step = ((fs / (2.0 * TIMING_BAND_HZ.1)).floor() as usize).max(1);
    let preamble = timing_filter(plan.preamble().samples(), fs);
    let steps = (DETECT_MAX_DILATION / DETECT_DILATION_STEP).round() as i64;
    let bank: Vec<(f64, Vec<f64>)> = (-steps..=steps)
        .map(|i| {
            let alpha = i as f64 * DETECT_DILATION_STEP;
            (alpha, dilate(&preamble, alpha))
        })
        .collect();

    let coarse: Vec<f64> = filtered.iter().step_by(step).copied().collect();
    let floor = energy_floor(&coarse, preamble.len().div_ceil(step));
    // Best score over the bank at every coarse lag.
    let mut best: Vec<(f64, usize)> = Vec::new();
    for (b, (_, tpl)) in bank.iter().enumerate() {
        let tpl: Vec<f64> = tpl.iter().step_by(step).copied().collect();
        let Ok(corr) = normalized_xcorr(&coarse, &tpl, method) else {
            continue;
        };
        if best.len() < corr.len() {
            best.resize(corr.len(), (f64::NEG_INFINITY, 0));
        }
        for (k, c) in corr.into_iter().enumerate() {
            if c > best[k].0 && floor(k) {
                best[k] = (c, b);
            }
        }
    }
    let first = (0..best.len()).find(|&k| best[k].0 >= threshold)?;
    let end = (first + preamble.len().div_ceil(step)).min(best.len());
    let peak = (first..end).fold(first, |m, k| if best[k].0 > best[m].0 { k } else { m });

    // Full-rate refinement over every template around the coarse peak: the
    // coarse grid can straddle the true lag and favour a neighbouring stretch.
    let centre = (peak * step) as i64;
    let mut winner: Option<Detection> = None;
    for (alpha, tpl) in &bank {
        for lag in (centre - step as i64).max(0)..=centre + step as i64 {
            let c = crate::signal::correlation_at(filtered, tpl, lag);
            if winner.map_or(true, |w| c > w.score) {
                winner = Some(Detection {
                    start: lag as usize,
                    alpha: *alpha,
                    score: c,
                });
            }
        }
    }
    winner
}

/// Predicate rejecting windows that carry only numerical residue next to
/// real signal.
fn energy_floor(x: &[f64], len: usize) -> impl Fn(usize) -> bool {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
        prefix.push(acc);
    }
    let windows = x.len().saturating_sub(len) + 1;
    let max_energy = (0..windows)
        .filter(|k| k + len <= x.len())
        .map(|k| prefix[k + len] - prefix[k])
        .fold(0.0, f64::max);
    let n = x.len();
    move |k: usize| k + len <= n && max_energy > 0.0 && prefix[k + len] - prefix[k] > 1e-9 * max_energy
}

/// The captured packet window: `len` samples from `start`, zero-filled past
/// the end of the signal.
pub fn capture_window(signal: &SampleBuffer, start: usize, len: usize) -> SampleBuffer {
    let mut out = vec![0.0; len];
    let src = signal.samples();
    if start < src.len() {
        let n = len.min(src.len() - start);
        out[..n].copy_from_slice(&src[start..start + n]);
    }
    SampleBuffer::new(out, signal.fs_hz()).expect("samples copied from a valid buffer")
}

/// Capture length for a packet of `groups` groups: the packet plus a margin
/// of one group.
pub fn capture_len(plan: &FramePlan, groups: usize) -> usize {
    plan.preamble().len() + (groups + 1) * plan.group_len()
}

/// Nominal start of group `i`'s training symbol.
pub fn expected_start(plan: &FramePlan, packet_start: f64, i: usize) -> f64 {
    packet_start + (plan.preamble().len() + i * plan.group_len()) as f64
}

/// Raw drift of every training symbol. `signal` should be band-limited
/// (see [`timing_filter`]).
///
/// Returns [`Error::Truncated`] with the drifts found so far when a search
/// window runs past the end of the signal.
pub fn locate_training_symbols(
    signal: &[f64],
    packet_start: usize,
    plan: &FramePlan,
    cfg: &SyncConfig,
    groups: usize,
) -> Result<Vec<f64>> {
    locate_training_symbols_from(signal, packet_start, 0.0, plan, cfg, groups)
}

/// [`locate_training_symbols`] with an initial time-dilation estimate,
/// typically [`Detection::alpha`].
///
/// The first pass stretches the training template by the dilation implied by
/// the most recent detections; the second repeats the search with a
/// template stretched by a centred estimate over neighbouring groups. A chirp
/// correlated against an unstretched copy peaks early or late in proportion
/// to the stretch, so this removes a bias that would otherwise reach tens of
/// samples under fast motion.
pub fn locate_training_symbols_from(
    signal: &[f64],
    packet_start: usize,
    initial_alpha: f64,
    plan: &FramePlan,
    cfg: &SyncConfig,
    groups: usize,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.disable_sync {
        return Ok(vec![0.0; groups]);
    }
    let half = if cfg.disable_smooth_bound {
        plan.params().ns() / 2
    } else {
        cfg.delta
    };
    let training = plan.training().samples();
    let group_len = plan.group_len() as f64;
    if !cfg.compensate_dilation {
        return track(signal, packet_start, plan, groups, half, |_, _| training.to_vec());
    }
    let first = track(signal, packet_start, plan, groups, half, |i, raw| {
        let alpha = if i >= 3 {
            line_slope(&raw[i - 3..i]) / group_len
        } else {
            initial_alpha
        };
        dilate(training, alpha)
    });
    let raw = match first {
        Ok(raw) => raw,
        Err(Error::Truncated { partial_raw, .. }) if partial_raw.is_empty() => {
            return Err(Error::Truncated { partial_raw, groups })
        }
        Err(Error::Truncated { partial_raw, .. }) => partial_raw,
        Err(e) => return Err(e),
    };
    let rates: Vec<f64> = if raw.len() < 3 {
        vec![initial_alpha; raw.len()]
    } else {
        local_dilation(&raw, group_len)
    };
    track(signal, packet_start, plan, groups, half, |i, _| {
        dilate(training, rates[i.min(rates.len() - 1)])
    })
}

/// Sequential bounded search; `template(i, raw_so_far)` gives the waveform
/// for group `i`.
fn track(
    signal: &[f64],
    packet_start: usize,
    plan: &FramePlan,
    groups: usize,
    half: usize,
    template: impl Fn(usize, &[f64]) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let group_len = plan.group_len() as i64;
    let mut raw = Vec::with_capacity(groups);
    let mut center = (packet_start + plan.preamble().len()) as i64;
    for i in 0..groups {
        let tpl = template(i, &raw);
        let lo = center - half as i64;
        let hi = center + half as i64;
        if lo < 0 || hi as usize + tpl.len() > signal.len() {
            return Err(Error::Truncated {
                partial_raw: raw,
                groups,
            });
        }
        let span = &signal[lo as usize..hi as usize + tpl.len()];
        let corr = normalized_xcorr(span, &tpl, CorrelationMethod::Direct)?;
        let mut best = 0;
        for (k, c) in corr.iter().enumerate() {
            if *c > corr[best] {
                best = k;
            }
        }
        let found = lo + best as i64;
        raw.push(found as f64 - expected_start(plan, packet_start as f64, i));
        center = found + group_len;
    }
    Ok(raw)
}

/// Least-squares slope of `y` against its index.
fn line_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = y.iter().enumerate().map(|(i, v)| (i as f64 - mx) * (v - my)).sum();
    let sxx: f64 = (0..y.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-group time dilation from the drift slope over up to five
/// neighbouring groups.
fn local_dilation(raw: &[f64], group_len: f64) -> Vec<f64> {
    let n = raw.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            line_slope(&raw[lo..=hi]) / group_len
        })
        .collect()
}

/// `x` as it would arrive under time dilation `1 + alpha`.
fn dilate(x: &[f64], alpha: f64) -> Vec<f64> {
    if alpha == 0.0 {
        return x.to_vec();
    }
    let len = ((x.len() as f64) * (1.0 + alpha)).round().max(1.0) as usize;
    (0..len).map(|m| interpolate(x, m as f64 / (1.0 + alpha))).collect()
}

/// Centered moving average of width `window`; near the ends the window
/// shrinks symmetrically so a straight line passes through unchanged.
pub fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let half = window.saturating_sub(1) / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            x[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect()
}

/// Clamp each step to `±delta`, starting from `|b[0]| <= delta`.
pub fn bound_steps(x: &[f64], delta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(x.len());
    for &v in x {
        let prev = out.last().copied().unwrap_or(0.0);
        out.push(v.clamp(prev - delta, prev + delta));
    }
    out
}

/// Smooth and bound a raw drift sequence into a full trace.
pub fn smooth_and_bound(raw: &[f64], cfg: &SyncConfig, plan: &FramePlan, packet_start: f64) -> DriftTrace {
    let (smoothed, bounded) = if cfg.disable_smooth_bound || cfg.disable_sync {
        (raw.to_vec(), raw.to_vec())
    } else {
        let smoothed = moving_average(raw, cfg.ma_window.max(1));
        let bounded = bound_steps(&smoothed, cfg.delta as f64);
        (smoothed, bounded)
    };
    let timestamps = bounded
        .iter()
        .enumerate()
        .map(|(i, b)| expected_start(plan, packet_start, i) + b)
        .collect();
    DriftTrace {
        raw: raw.to_vec(),
        smoothed,
        bounded,
        timestamps,
    }
}

/// Sample spacing per nominal sample for each group: the distance to the
/// next training symbol divided by the nominal group length. The last group
/// reuses the previous spacing; a lone timestamp gets nominal spacing.
pub fn group_scales(timestamps: &[f64], plan: &FramePlan) -> Result<Vec<f64>> {
    if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonIncreasingTimestamps);
    }
    let group_len = plan.group_len() as f64;
    let mut scales: Vec<f64> = timestamps.windows(2).map(|w| (w[1] - w[0]) / group_len).collect();
    let last = scales.last().copied().unwrap_or(1.0);
    if !timestamps.is_empty() {
        scales.push(last);
    }
    Ok(scales)
}

/// Data-symbol windows, each resampled to exactly `ns` samples.
///
/// Group `i` spans `[t[i], t[i+1])`; it is cut into `N + 1` equal fractional
/// sub-spans and sub-spans `1..=N` are resampled.
pub fn extract_data_symbols(signal: &SampleBuffer, timestamps: &[f64], plan: &FramePlan) -> Result<Vec<SampleBuffer>> {
    let scales = group_scales(timestamps, plan)?;
    let ns = plan.params().ns();
    let mut out = Vec::with_capacity(timestamps.len() * plan.n_data_per_group());
    for (t, scale) in timestamps.iter().zip(scales) {
        let sub = ns as f64 * scale;
        for j in 1..=plan.n_data_per_group() {
            let samples = resample_span(signal.samples(), t + j as f64 * sub, sub, ns)?;
            out.push(SampleBuffer::new(samples, signal.fs_hz())?);
        }
    }
    Ok(out)
}

/// One group resampled onto nominal time with `lead` samples of context
/// before the training symbol and `tail` after the last data symbol.
/// Positions outside the signal read as zero.
pub fn extract_group(
    signal: &[f64],
    timestamp: f64,
    scale: f64,
    plan: &FramePlan,
    lead: usize,
    tail: usize,
) -> Vec<f64> {
    let len = lead + plan.group_len() + tail;
    (0..len)
        .map(|m| interpolate(signal, timestamp + (m as f64 - lead as f64) * scale))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::CssModem;
    use crate::packet::build_packet;
    use crate::signal::ModemParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn packet(groups: usize, seed: u64) -> (FramePlan, Vec<u16>, SampleBuffer) {
        let plan = FramePlan::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols: Vec<u16> = (0..groups * 3).map(|_| rng.gen_range(0..32)).collect();
        let (pkt, _) = build_packet(&plan, &symbols).unwrap();
        (plan, symbols, pkt)
    }

    /// Clean packet placed at `start` under a delay that grows by `rate`
    /// samples per sample: received[n] = tx[(n - start) / (1 + rate)].
    fn stretched(tx: &[f64], start: usize, rate: f64, tail: usize) -> Vec<f64> {
        let len = start + (tx.len() as f64 * (1.0 + rate)).ceil() as usize + tail;
        (0..len)
            .map(|n| {
                let pos = (n as f64 - start as f64) / (1.0 + rate);
                interpolate(tx, pos)
            })
            .collect()
    }

    fn add_noise(x: &mut [f64], sigma: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        for v in x {
            *v += normal.sample(&mut rng);
        }
    }

    #[test]
    fn ablation_names_round_trip() {
        for a in Ablation::ALL {
            assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
        }
        assert_eq!("wo_s+b".parse::<Ablation>().unwrap(), Ablation::WithoutSmoothBound);
        assert!("bogus".parse::<Ablation>().is_err());
        let cfg = SyncConfig::for_ablation(Ablation::OneEqual);
        assert!(cfg.disable_sync && cfg.equalize_once);
        assert!(SyncConfig { ma_window: 0, ..SyncConfig::default() }.validate().is_err());
    }

    #[test]
    fn detects_preamble_at_zero() {
        let (plan, _, pkt) = packet(2, 1);
        assert_eq!(detect_preamble(&pkt, &plan, 0.5), Some(0));
        assert_eq!(detect_preamble_with(&pkt, &plan, 0.5, CorrelationMethod::Direct).map(|d| d.start), Some(0));
    }

    #[test]
    fn detects_preamble_under_noise() {
        let (plan, _, pkt) = packet(1, 2);
        let fs = plan.params().fs_hz();
        let in_band = 2000.0 / (fs / 2.0);
        let signal_power = plan.preamble().rms().powi(2);
        let sigma = (signal_power / in_band).sqrt();
        let mut hits = 0;
        for seed in 0..100 {
            let mut x = vec![0.0; 5000];
            x.extend_from_slice(pkt.samples());
            x.extend(vec![0.0; 2000]);
            add_noise(&mut x, sigma, seed);
            let buf = SampleBuffer::new(x, fs).unwrap();
            if let Some(k) = detect_preamble(&buf, &plan, 0.5) {
                if k.abs_diff(5000) <= 2 {
                    hits += 1;
                }
            }
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn noise_only_gives_no_detection() {
        let (plan, _, pkt) = packet(3, 3);
        let mut misses = 0;
        for seed in 0..100 {
            let mut x = vec![0.0; pkt.len()];
            add_noise(&mut x, 1.0, 1000 + seed);
            let buf = SampleBuffer::new(x, 48_000.0).unwrap();
            if detect_preamble(&buf, &plan, 0.5).is_none() {
                misses += 1;
            }
        }
        assert!(misses >= 99, "{misses}/100");
        let silent = SampleBuffer::zeros(pkt.len(), 48_000.0);
        assert_eq!(detect_preamble(&silent, &plan, 0.5), None);
    }

    #[test]
    fn capture_window_zero_fills() {
        let buf = SampleBuffer::new(vec![1.0, 2.0, 3.0], 48_000.0).unwrap();
        assert_eq!(capture_window(&buf, 1, 4).samples(), &[2.0, 3.0, 0.0, 0.0]);
        assert_eq!(capture_window(&buf, 5, 2).samples(), &[0.0, 0.0]);
    }

    #[test]
    fn aligned_signal_has_zero_drift() {
        let (plan, _, pkt) = packet(10, 4);
        let mut x = pkt.into_samples();
        x.extend(vec![0.0; 4000]);
        let filtered = timing_filter(&x, 48_000.0);
        let raw = locate_training_symbols(&filtered, 0, &plan, &SyncConfig::default(), 10).unwrap();
        assert_eq!(raw, vec![0.0; 10]);
        let nominal = SyncConfig::for_ablation(Ablation::WithoutSync);
        assert_eq!(locate_training_symbols(&filtered, 0, &plan, &nominal, 10).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn truncated_packet_reports_partial_drift() {
        let (plan, _, pkt) = packet(6, 5);
        let cut = &pkt.samples()[..plan.preamble().len() + 3 * plan.group_len()];
        match locate_training_symbols(cut, 0, &plan, &SyncConfig::default(), 6) {
            Err(Error::Truncated { partial_raw, groups }) => {
                assert_eq!(groups, 6);
                assert_eq!(partial_raw.len(), 3);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn raw_drift_tracks_a_stretch() {
        // Total drift of about 40 samples across the packet.
        let groups = 30;
        let (plan, _, pkt) = packet(groups, 6);
        let rate = 40.0 / (groups as f64 * plan.group_len() as f64);
        let start = 1000;
        let rx = stretched(pkt.samples(), start, rate, 4000);
        let filtered = timing_filter(&rx, 48_000.0);
        let raw = locate_training_symbols(&filtered, start, &plan, &SyncConfig::default(), groups).unwrap();
        for (i, r) in raw.iter().enumerate() {
            let truth = (plan.preamble().len() + i * plan.group_len()) as f64 * rate;
            assert!((r - truth).abs() <= 3.0, "group {i}: {r} vs {truth}");
        }
    }

    #[test]
    fn fast_drift_timestamps_within_three_samples() {
        for per_group in [-40.0, -25.0, 10.0, 25.0, 40.0] {
            let groups = 24;
            let (plan, _, pkt) = packet(groups, 7);
            let rate = per_group / plan.group_len() as f64;
            let start = 2000;
            let rx = stretched(pkt.samples(), start, rate, 6000);
            let filtered = timing_filter(&rx, 48_000.0);
            // The preamble estimate is what the receiver would anchor to.
            let buf = SampleBuffer::new(rx.clone(), 48_000.0).unwrap();
            let det = detect_preamble_with(&buf, &plan, 0.5, CorrelationMethod::Fft).unwrap();
            assert!(det.start.abs_diff(start) <= 2, "{per_group}/group: preamble at {}", det.start);
            let cfg = SyncConfig::default();
            let raw = locate_training_symbols_from(&filtered, det.start, det.alpha, &plan, &cfg, groups).unwrap();
            let trace = smooth_and_bound(&raw, &cfg, &plan, det.start as f64);
            for (i, t) in trace.timestamps.iter().enumerate() {
                let truth = start as f64 + (plan.preamble().len() + i * plan.group_len()) as f64 * (1.0 + rate);
                assert!((t - truth).abs() <= 3.0, "{per_group}/group, group {i}: {t} vs {truth}");
            }
            assert!(trace.max_step() <= 40.0);
        }
    }

    #[test]
    fn corrupted_training_symbol_is_repaired() {
        let groups = 12;
        let (plan, _, pkt) = packet(groups, 8);
        let mut x = pkt.into_samples();
        x.extend(vec![0.0; 4000]);
        let bad = plan.preamble().len() + 5 * plan.group_len();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.7).unwrap();
        for v in &mut x[bad..bad + 768] {
            *v = normal.sample(&mut rng);
        }
        let filtered = timing_filter(&x, 48_000.0);
        let cfg = SyncConfig::default();
        let raw = locate_training_symbols(&filtered, 0, &plan, &cfg, groups).unwrap();
        let trace = smooth_and_bound(&raw, &cfg, &plan, 0.0);
        let worst_raw = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = trace.bounded.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= worst_raw);
        assert!(worst <= worst_raw / 5.0 + 1.0, "raw {raw:?} bounded {:?}", trace.bounded);
    }

    #[test]
    fn smoothing_examples() {
        let plan = FramePlan::default();
        let cfg = SyncConfig::default();
        let zeros = smooth_and_bound(&[0.0; 8], &cfg, &plan, 0.0);
        assert_eq!(zeros.bounded, vec![0.0; 8]);

        let mut spike = vec![0.0; 11];
        spike[5] = 200.0;
        let t = smooth_and_bound(&spike, &cfg, &plan, 0.0);
        assert!(t.bounded[5].abs() <= 40.0);
        assert!(t.max_step() <= 40.0);

        let ramp: Vec<f64> = (0..20).map(|i| 10.0 * i as f64).collect();
        let t = smooth_and_bound(&ramp, &cfg, &plan, 0.0);
        for (b, r) in t.bounded.iter().zip(&ramp) {
            assert!((b - r).abs() < 1e-9);
        }
        assert!((t.timestamps[3] - (3072.0 + 3.0 * 3072.0 + 30.0)).abs() < 1e-9);

        let off = SyncConfig::for_ablation(Ablation::WithoutSmoothBound);
        assert_eq!(smooth_and_bound(&spike, &off, &plan, 0.0).bounded, spike);
    }

    #[test]
    fn moving_average_edges_shrink() {
        assert_eq!(moving_average(&[3.0, 0.0, 0.0, 0.0, 6.0], 5), vec![3.0, 1.0, 1.8, 2.0, 6.0]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
        assert!(moving_average(&[], 5).is_empty());
    }

    #[test]
    fn drift_csv_columns() {
        let plan = FramePlan::default();
        let t = smooth_and_bound(&[0.0, 2.0, 4.0], &SyncConfig::default(), &plan, 0.0);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("group,raw,smoothed,bounded"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn extraction_matches_transmitter_without_drift() {
        let groups = 5;
        let (plan, _, pkt) = packet(groups, 10);
        let mut padded = pkt.samples().to_vec();
        padded.extend(vec![0.0; 3072]);
        let buf = SampleBuffer::new(padded, 48_000.0).unwrap();
        let stamps: Vec<f64> = (0..groups).map(|i| expected_start(&plan, 0.0, i)).collect();
        let windows = extract_data_symbols(&buf, &stamps, &plan).unwrap();
        assert_eq!(windows.len(), groups * 3);
        for g in 0..groups {
            for j in 0..3 {
                let s = stamps[g] as usize + (j + 1) * 768;
                assert_eq!(windows[g * 3 + j].samples(), &pkt.samples()[s..s + 768]);
            }
        }
        let lone = extract_data_symbols(&buf, &stamps[..1], &plan).unwrap();
        assert_eq!(lone.len(), 3);
        assert!(matches!(
            extract_data_symbols(&buf, &[5000.0, 4000.0], &plan),
            Err(Error::NonIncreasingTimestamps)
        ));
    }

    fn symbol_errors(windows: &[SampleBuffer], symbols: &[u16]) -> usize {
        let modem = CssModem::new(ModemParams::default());
        windows
            .iter()
            .zip(symbols)
            .filter(|(w, s)| modem.demodulate(w.samples()).unwrap().symbol != **s)
            .count()
    }

    #[test]
    fn dilation_is_undone_by_resampling() {
        let groups = 30;
        let (plan, symbols, pkt) = packet(groups, 12);
        let rate = 0.005;
        let rx = stretched(pkt.samples(), 0, rate, 4000);
        let mut noisy = rx.clone();
        add_noise(&mut noisy, 0.3, 13);
        let buf = SampleBuffer::new(noisy, 48_000.0).unwrap();
        let truth: Vec<f64> = (0..groups)
            .map(|i| (plan.preamble().len() + i * plan.group_len()) as f64 * (1.0 + rate))
            .collect();
        let fixed = extract_data_symbols(&buf, &truth, &plan).unwrap();
        assert_eq!(symbol_errors(&fixed, &symbols), 0);

        // Same timestamps, but windows cut at nominal length.
        let modem_len = plan.params().ns();
        let naive: Vec<SampleBuffer> = truth
            .iter()
            .flat_map(|t| {
                (1..=3).map(move |j| {
                    let s = t.round() as usize + j * modem_len;
                    s..s + modem_len
                })
            })
            .map(|r| SampleBuffer::new(buf.samples()[r].to_vec(), 48_000.0).unwrap())
            .collect();
        assert!(symbol_errors(&naive, &symbols) > 0);
    }

    #[test]
    fn extract_group_is_nominal_slice_without_drift() {
        let (plan, _, pkt) = packet(3, 14);
        let x = pkt.samples();
        let t = expected_start(&plan, 0.0, 1);
        let g = extract_group(x, t, 1.0, &plan, 159, 80);
        assert_eq!(g.len(), 159 + 3072 + 80);
        let s = t as usize - 159;
        assert_eq!(&g[..], &x[s..s + g.len()]);
    }
}
