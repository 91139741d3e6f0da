//! Seeded underwater channel simulator.
//!
//! Impairments are applied in a fixed order: motion-induced time-varying
//! delay, a tapped delay line for multipath, a zero-phase frequency response,
//! then additive noise scaled to an in-band SNR. All preset magnitudes are
//! calibration choices for desk-scale experiments, not measured values.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{band_power, bandpass, filter_fft, interpolate, SampleBuffer};

pub const PROFILE_VERSION: u32 = 1;

/// Band over which SNR is defined.
pub const SNR_BAND_HZ: (f64, f64) = (1500.0, 3500.0);

/// Samples per symbol group at the default framing; used to express drift
/// budgets in samples per group.
pub const DEFAULT_GROUP_LEN: usize = 3072;

/// One multipath arrival. The delay may wander sinusoidally, which rotates
/// the arrival's phase against the others and produces fading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    pub gain: f64,
    #[serde(default)]
    pub wander_s: f64,
    #[serde(default)]
    pub wander_hz: f64,
}

impl Tap {
    pub fn fixed(delay_s: f64, gain: f64) -> Self {
        Self {
            delay_s,
            gain,
            wander_s: 0.0,
            wander_hz: 0.0,
        }
    }

    pub fn wandering(delay_s: f64, gain: f64, wander_s: f64, wander_hz: f64) -> Self {
        Self {
            delay_s,
            gain,
            wander_s,
            wander_hz,
        }
    }

    fn max_delay_s(&self) -> f64 {
        self.delay_s + self.wander_s.abs()
    }
}

/// Magnitude response point; the response is linear in dB between points
/// and held flat beyond the ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub freq_hz: f64,
    pub gain_db: f64,
}

/// Points for a response that is flat to `corner_hz` and then falls by
/// `db_per_octave`, sampled every quarter octave up to `max_hz`.
pub fn rolloff_response(corner_hz: f64, db_per_octave: f64, max_hz: f64) -> Vec<ResponsePoint> {
    let mut points = vec![
        ResponsePoint {
            freq_hz: 0.0,
            gain_db: 0.0,
        },
        ResponsePoint {
            freq_hz: corner_hz,
            gain_db: 0.0,
        },
    ];
    let mut octave = 0.25;
    while corner_hz * 2f64.powf(octave) <= max_hz {
        points.push(ResponsePoint {
            freq_hz: corner_hz * 2f64.powf(octave),
            gain_db: -db_per_octave * octave,
        });
        octave += 0.25;
    }
    points
}

fn response_gain(points: &[ResponsePoint], f: f64) -> f64 {
    let db = match points {
        [] => 0.0,
        [only] => only.gain_db,
        _ => {
            if f <= points[0].freq_hz {
                points[0].gain_db
            } else if let Some(w) = points.windows(2).find(|w| f <= w[1].freq_hz) {
                let t = (f - w[0].freq_hz) / (w[1].freq_hz - w[0].freq_hz);
                w[0].gain_db + t * (w[1].gain_db - w[0].gain_db)
            } else {
                points[points.len() - 1].gain_db
            }
        }
    };
    10f64.powf(db / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    /// Mean arrivals per second.
    pub rate_hz: f64,
    pub duration_s: f64,
    /// Burst in-band level relative to the base noise.
    pub level_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// In-band SNR; `None` disables noise.
    pub snr_db: Option<f64>,
    /// Extra level below `shelf_hz`, in dB.
    #[serde(default)]
    pub low_shelf_db: f64,
    #[serde(default = "default_shelf_hz")]
    pub shelf_hz: f64,
    #[serde(default)]
    pub burst: Option<BurstSpec>,
}

fn default_shelf_hz() -> f64 {
    1000.0
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            snr_db: None,
            low_shelf_db: 0.0,
            shelf_hz: 1000.0,
            burst: None,
        }
    }

    /// White noise with the low-frequency shelf.
    pub fn ambient(snr_db: f64) -> Self {
        Self {
            snr_db: Some(snr_db),
            low_shelf_db: 12.0,
            shelf_hz: 1000.0,
            burst: None,
        }
    }

    /// Plain white noise.
    pub fn white(snr_db: f64) -> Self {
        Self {
            low_shelf_db: 0.0,
            ..Self::ambient(snr_db)
        }
    }
}

/// Relative delay trajectory τ(t) between sender and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    None,
    /// τ(t) = rate · t.
    Linear { rate: f64 },
    /// Piecewise-linear τ(t). Each segment draws a new slope from a random
    /// walk that is pulled back towards zero delay and limited to `max_rate`
    /// in magnitude; `excursion_s` sets the scale of the pull.
    RandomWalk {
        max_rate: f64,
        segment_s: f64,
        excursion_s: f64,
    },
}

impl Motion {
    pub fn max_rate(&self) -> f64 {
        match *self {
            Motion::None => 0.0,
            Motion::Linear { rate } => rate.abs(),
            Motion::RandomWalk { max_rate, .. } => max_rate.abs(),
        }
    }

    /// Delay in seconds at each of `len` sample instants.
    pub fn trajectory(&self, len: usize, fs_hz: f64, seed: u64) -> Vec<f64> {
        match *self {
            Motion::None => vec![0.0; len],
            Motion::Linear { rate } => (0..len).map(|n| rate * n as f64 / fs_hz).collect(),
            Motion::RandomWalk {
                max_rate,
                segment_s,
                excursion_s,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let seg = ((segment_s * fs_hz).round() as usize).max(1);
                let step = Normal::new(0.0, 0.5 * max_rate).expect("finite scale");
                let mut rate = 0.0f64;
                let mut tau = 0.0f64;
                let mut out = Vec::with_capacity(len);
                for n in 0..len {
                    if n % seg == 0 {
                        let pull = if excursion_s > 0.0 {
                            -tau / excursion_s * max_rate
                        } else {
                            0.0
                        };
                        rate = (0.5 * rate + 0.5 * pull + step.sample(&mut rng)).clamp(-max_rate, max_rate);
                    }
                    out.push(tau);
                    tau += rate / fs_hz;
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub version: u32,
    pub name: String,
    pub taps: Vec<Tap>,
    /// Empty means flat.
    #[serde(default)]
    pub freq_response: Vec<ResponsePoint>,
    pub noise: NoiseSpec,
    pub motion: Motion,
    /// Largest drift the motion may cause per symbol group, in samples.
    pub drift_budget: f64,
    pub seed: u64,
}

impl ChannelProfile {
    pub fn ideal() -> Self {
        Self {
            version: PROFILE_VERSION,
            name: "ideal".into(),
            taps: vec![Tap::fixed(0.0, 1.0)],
            freq_response: Vec::new(),
            noise: NoiseSpec::none(),
            motion: Motion::None,
            drift_budget: 40.0,
            seed: 0,
        }
    }

    /// Direct path plus one echo, flat response, white noise.
    pub fn two_tap(delay_s: f64, gain: f64, snr_db: f64) -> Self {
        Self {
            name: "two_tap".into(),
            taps: vec![Tap::fixed(0.0, 1.0), Tap::fixed(delay_s, gain)],
            noise: NoiseSpec::white(snr_db),
            ..Self::ideal()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        if self.noise.snr_db.is_none() {
            self.noise = NoiseSpec::ambient(snr_db);
        } else {
            self.noise.snr_db = Some(snr_db);
        }
        self
    }

    pub fn validate(&self, fs_hz: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if self.version != PROFILE_VERSION {
            return bad(format!("unsupported profile version {}", self.version));
        }
        if self.taps.is_empty() {
            return bad("at least one tap is required".into());
        }
        for t in &self.taps {
            let finite = [t.delay_s, t.gain, t.wander_s, t.wander_hz].iter().all(|v| v.is_finite());
            if !finite || t.delay_s < 0.0 || t.wander_hz < 0.0 {
                return bad(format!("invalid tap {t:?}"));
            }
        }
        for p in &self.freq_response {
            if !(p.freq_hz.is_finite() && p.gain_db.is_finite() && p.freq_hz >= 0.0) {
                return bad(format!("invalid response point {p:?}"));
            }
        }
        if self.freq_response.windows(2).any(|w| w[1].freq_hz <= w[0].freq_hz) {
            return bad("response frequencies must increase".into());
        }
        if let Some(snr) = self.noise.snr_db {
            if !snr.is_finite() {
                return bad("SNR must be finite".into());
            }
        }
        if !(self.noise.low_shelf_db.is_finite() && self.noise.shelf_hz > 0.0) {
            return bad("invalid noise shelf".into());
        }
        if let Some(b) = self.noise.burst {
            if !(b.rate_hz >= 0.0 && b.duration_s > 0.0 && b.level_db.is_finite()) {
                return bad(format!("invalid burst {b:?}"));
            }
        }
        let rate = self.motion.max_rate();
        if !rate.is_finite() {
            return bad("motion rate must be finite".into());
        }
        if let Motion::RandomWalk {
            segment_s,
            excursion_s,
            ..
        } = self.motion
        {
            if !(segment_s > 0.0 && excursion_s >= 0.0 && excursion_s.is_finite()) {
                return bad("random walk needs segment_s > 0 and excursion_s >= 0".into());
            }
        }
        let per_group = rate * DEFAULT_GROUP_LEN as f64;
        if !(self.drift_budget >= 0.0) || per_group > self.drift_budget + 1e-9 {
            return bad(format!(
                "motion drifts up to {per_group:.1} samples per group, over the budget of {}",
                self.drift_budget
            ));
        }
        if fs_hz <= 0.0 {
            return bad("sample rate must be positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let profile: Self = toml::from_str(text)?;
        if profile.version != PROFILE_VERSION {
            return Err(Error::InvalidProfile(format!(
                "unsupported profile version {}",
                profile.version
            )));
        }
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

pub const PRESET_NAMES: [&str; 6] = ["ideal", "two_tap", "static_near", "static_far", "mobile_moderate", "mobile_intense"];

/// Named calibration profiles.
pub fn preset(name: &str) -> Result<ChannelProfile> {
    let response = rolloff_response(3500.0, 12.0, 24_000.0);
    let base = ChannelProfile {
        freq_response: response,
        ..ChannelProfile::ideal()
    };
    let profile = match name {
        "ideal" => ChannelProfile::ideal(),
        // Strong single echo, no roll-off: isolates multipath for equalizer checks.
        "two_tap" => ChannelProfile {
            noise: NoiseSpec::ambient(15.0),
            ..ChannelProfile::two_tap(0.003, 0.9, 15.0)
        },
        "static_near" => ChannelProfile {
            name: name.into(),
            taps: vec![Tap::fixed(0.0, 1.0), Tap::fixed(0.0015, 0.3)],
            noise: NoiseSpec::ambient(12.0),
            ..base
        },
        "static_far" => ChannelProfile {
            name: name.into(),
            taps: vec![
                Tap::fixed(0.0, 1.0),
                Tap::fixed(0.003, 0.5),
                Tap::fixed(0.007, 0.3),
            ],
            noise: NoiseSpec::ambient(3.0),
            ..base
        },
        "mobile_moderate" => ChannelProfile {
            name: name.into(),
            taps: vec![
                Tap::fixed(0.0, 1.0),
                Tap::wandering(0.0008, 0.5, 0.0004, 0.7),
                Tap::wandering(0.003, 0.4, 0.0005, 0.4),
            ],
            noise: NoiseSpec::ambient(10.0),
            motion: Motion::RandomWalk {
                max_rate: 20.0 / DEFAULT_GROUP_LEN as f64,
                segment_s: 0.25,
                excursion_s: 0.003,
            },
            drift_budget: 20.0,
            ..base
        },
        "mobile_intense" => ChannelProfile {
            name: name.into(),
            taps: vec![
                Tap::fixed(0.0, 1.0),
                Tap::wandering(0.0006, 0.7, 0.0005, 1.1),
                Tap::wandering(0.002, 0.6, 0.0006, 0.6),
                Tap::wandering(0.0045, 0.3, 0.0008, 0.3),
            ],
            noise: NoiseSpec {
                burst: Some(BurstSpec {
                    rate_hz: 1.0,
                    duration_s: 0.08,
                    level_db: 6.0,
                }),
                ..NoiseSpec::ambient(8.0)
            },
            motion: Motion::RandomWalk {
                max_rate: 40.0 / DEFAULT_GROUP_LEN as f64,
                segment_s: 0.2,
                excursion_s: 0.004,
            },
            drift_budget: 40.0,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(profile)
}

/// Independent sub-stream seeds so adding one impairment does not reshuffle
/// the randomness of another.
fn substream(seed: u64, stream: u64) -> u64 {
    crate::seeds::splitmix64(seed ^ crate::seeds::splitmix64(stream))
}

/// Run `signal` through the channel. Deterministic for a given profile seed.
///
/// The output is extended by the largest delay so no arrival is cut off; for
/// the ideal profile it is the input, sample for sample.
pub fn apply_channel(signal: &SampleBuffer, profile: &ChannelProfile) -> Result<SampleBuffer> {
    let fs = signal.fs_hz();
    profile.validate(fs)?;
    let x = signal.samples();
    if x.is_empty() {
        return Ok(signal.clone());
    }

    // Motion: y(t) = x(t − τ(t)).
    let moved = match profile.motion {
        Motion::None => x.to_vec(),
        motion => {
            let tau_max = motion.max_rate() * x.len() as f64 / fs * 1.5 + 1.0 / fs;
            let len = x.len() + (tau_max * fs).ceil() as usize;
            let tau = motion.trajectory(len, fs, substream(profile.seed, 1));
            (0..len).map(|n| interpolate(x, n as f64 - tau[n] * fs)).collect()
        }
    };

    // Multipath.
    let max_delay = profile.taps.iter().map(Tap::max_delay_s).fold(0.0, f64::max);
    let len = moved.len() + (max_delay * fs).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(profile.seed, 2));
    let mut out = vec![0.0; len];
    for tap in &profile.taps {
        if tap.gain == 0.0 {
            continue;
        }
        if tap.wander_s == 0.0 || tap.wander_hz == 0.0 {
            let d = tap.delay_s * fs;
            if d.fract() == 0.0 {
                let d = d as usize;
                for (o, v) in out[d..].iter_mut().zip(&moved) {
                    *o += tap.gain * v;
                }
            } else {
                for (n, o) in out.iter_mut().enumerate() {
                    *o += tap.gain * interpolate(&moved, n as f64 - d);
                }
            }
        } else {
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let w = std::f64::consts::TAU * tap.wander_hz / fs;
            // The delay moves within [delay, delay + wander].
            for (n, o) in out.iter_mut().enumerate() {
                let d = (tap.delay_s + tap.wander_s * (1.0 + (w * n as f64 + phase).sin()) / 2.0) * fs;
                *o += tap.gain * interpolate(&moved, n as f64 - d);
            }
        }
    }

    if !profile.freq_response.is_empty() {
        let points = &profile.freq_response;
        out = filter_fft(&out, fs, |f| response_gain(points, f));
    }

    if let Some(snr_db) = profile.noise.snr_db {
        add_noise(&mut out, fs, &profile.noise, snr_db, substream(profile.seed, 3))?;
    }
    SampleBuffer::new(out, fs)
}

/// In-band power of `x` over its active span, the part between the first and
/// last sample that is not negligible.
pub fn active_band_power(x: &[f64], fs_hz: f64) -> f64 {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let thr = peak * 1e-6;
    let first = x.iter().position(|v| v.abs() > thr).unwrap_or(0);
    let last = x.iter().rposition(|v| v.abs() > thr).unwrap_or(x.len() - 1);
    band_power(&x[first..=last], fs_hz, SNR_BAND_HZ.0, SNR_BAND_HZ.1)
}

fn add_noise(out: &mut [f64], fs: f64, spec: &NoiseSpec, snr_db: f64, seed: u64) -> Result<()> {
    let signal_power = active_band_power(out, fs);
    if signal_power == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..out.len()).map(|_| normal.sample(&mut rng)).collect();
    let shelf = 10f64.powf(spec.low_shelf_db / 20.0);
    let shaped = if spec.low_shelf_db == 0.0 {
        white
    } else {
        // Smooth half-octave transition into the shelf.
        let edge = spec.shelf_hz;
        filter_fft(&white, fs, |f| {
            if f <= edge / 2f64.sqrt() {
                shelf
            } else if f >= edge * 2f64.sqrt() {
                1.0
            } else {
                let t = (f / edge).log2() + 0.5;
                shelf + (1.0 - shelf) * (0.5 - 0.5 * (std::f64::consts::PI * t).cos())
            }
        })
    };
    let noise_power = band_power(&shaped, fs, SNR_BAND_HZ.0, SNR_BAND_HZ.1);
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let scale = (target / noise_power).sqrt();
    for (o, n) in out.iter_mut().zip(&shaped) {
        *o += scale * n;
    }

    if let Some(burst) = spec.burst {
        if burst.rate_hz > 0.0 {
            add_bursts(out, fs, &burst, target, &mut rng);
        }
    }
    Ok(())
}

/// Gated 1–4 kHz noise bursts with Poisson arrivals and Hann envelopes.
fn add_bursts(out: &mut [f64], fs: f64, burst: &BurstSpec, base_power: f64, rng: &mut ChaCha8Rng) {
    let gaps = Exp::new(burst.rate_hz).expect("positive rate");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let len = ((burst.duration_s * fs).round() as usize).max(2);
    let mut t = gaps.sample(rng);
    let total = out.len() as f64 / fs;
    while t < total {
        let start = (t * fs) as usize;
        let raw: Vec<f64> = (0..len).map(|_| normal.sample(rng)).collect();
        let band = bandpass(&raw, fs, 1000.0, 4000.0, 200.0);
        let power = band_power(&band, fs, SNR_BAND_HZ.0, SNR_BAND_HZ.1);
        let scale = if power > 0.0 {
            (base_power * 10f64.powf(burst.level_db / 10.0) / power).sqrt()
        } else {
            0.0
        };
        for (i, v) in band.iter().enumerate() {
            let Some(o) = out.get_mut(start + i) else { break };
            let hann = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (len - 1) as f64).cos();
            // Hann has mean square 3/8; compensate so the level refers to the burst body.
            *o += scale * hann * v / (3.0f64 / 8.0).sqrt();
        }
        t += burst.duration_s + gaps.sample(rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::{base_chirp, ChirpDirection};
    use crate::signal::ModemParams;

    fn chirps(n: usize) -> SampleBuffer {
        let params = ModemParams::default();
        let up = base_chirp(&params, ChirpDirection::Up);
        let mut out = SampleBuffer::zeros(0, 48_000.0);
        for _ in 0..n {
            out.append(&up).unwrap();
        }
        out
    }

    #[test]
    fn ideal_is_identity() {
        let x = chirps(4);
        let y = apply_channel(&x, &ChannelProfile::ideal()).unwrap();
        assert_eq!(y.samples(), x.samples());
        let y = apply_channel(&x, &preset("ideal").unwrap()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn echo_shows_secondary_peak() {
        // Aperiodic probe so the echo stands out in the correlation.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let probe: Vec<f64> = (0..4800).map(|_| normal.sample(&mut rng)).collect();
        let x = SampleBuffer::new(probe.clone(), 48_000.0).unwrap();
        let profile = ChannelProfile {
            taps: vec![Tap::fixed(0.0, 1.0), Tap::fixed(0.005, 0.5)],
            ..ChannelProfile::ideal()
        };
        let y = apply_channel(&x, &profile).unwrap();
        assert_eq!(y.len(), 4800 + 240);
        let corr = crate::signal::cross_correlate(&y, &SampleBuffer::new(probe.clone(), 48_000.0).unwrap()).unwrap();
        let raw: Vec<f64> = (0..=240).map(|k| crate::signal::dot(&y.samples()[k..k + 4800], &probe)).collect();
        assert!(corr[0] > corr[240]);
        let rel = raw[240] / raw[0];
        assert!((rel - 0.5).abs() < 0.05, "{rel}");
        let side = raw[1..240].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(side < raw[240] / 2.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let x = chirps(20);
        let p = preset("mobile_intense").unwrap().with_seed(9);
        let a = apply_channel(&x, &p).unwrap();
        let b = apply_channel(&x, &p).unwrap();
        assert_eq!(a, b);
        let c = apply_channel(&x, &p.clone().with_seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn energy_bound_without_noise() {
        let x = chirps(10);
        for name in PRESET_NAMES {
            let mut p = preset(name).unwrap();
            p.noise = NoiseSpec::none();
            let y = apply_channel(&x, &p).unwrap();
            let gains: f64 = p.taps.iter().map(|t| t.gain.abs()).sum();
            let max_resp = p.freq_response.iter().map(|r| 10f64.powf(r.gain_db / 20.0)).fold(1.0, f64::max);
            assert!(y.rms() <= x.rms() * gains * max_resp + 1e-12, "{name}");
        }
    }

    #[test]
    fn snr_is_in_band() {
        let x = chirps(40).padded(4800, 4800);
        let mut clean = ChannelProfile::ideal();
        clean.noise = NoiseSpec::ambient(10.0);
        let y = apply_channel(&x, &clean.with_seed(4)).unwrap();
        let noise: Vec<f64> = y.samples().iter().zip(x.samples()).map(|(a, b)| a - b).collect();
        let pn = band_power(&noise, 48_000.0, 1500.0, 3500.0);
        let ps = active_band_power(x.samples(), 48_000.0);
        let snr = 10.0 * (ps / pn).log10();
        assert!((snr - 10.0).abs() < 0.3, "{snr}");
        // Low-frequency shelf: more power per hertz below 1 kHz.
        let low = band_power(&noise, 48_000.0, 100.0, 600.0) / 500.0;
        let mid = band_power(&noise, 48_000.0, 2000.0, 3000.0) / 1000.0;
        let ratio_db = 10.0 * (low / mid).log10();
        assert!((ratio_db - 12.0).abs() < 1.5, "{ratio_db}");
    }

    #[test]
    fn rolloff_above_corner() {
        let p = rolloff_response(3500.0, 12.0, 24_000.0);
        assert!((response_gain(&p, 2000.0) - 1.0).abs() < 1e-12);
        assert!((20.0 * response_gain(&p, 7000.0).log10() + 12.0).abs() < 1e-9);
        assert!((20.0 * response_gain(&p, 14_000.0).log10() + 24.0).abs() < 1e-9);
    }

    #[test]
    fn linear_motion_stretches() {
        let x = chirps(8);
        let mut p = ChannelProfile::ideal();
        p.motion = Motion::Linear { rate: 0.01 };
        let y = apply_channel(&x, &p).unwrap();
        // y[n] = x[0.99 n]: the last input sample lands near 6143 / 0.99.
        let last = y.samples().iter().rposition(|v| v.abs() > 1e-12).unwrap();
        assert!((last as f64 - 6143.0 / 0.99).abs() <= 1.0, "{last}");
        assert!((y.samples()[1000] - interpolate(x.samples(), 990.0)).abs() < 1e-12);
    }

    #[test]
    fn random_walk_respects_rate() {
        let m = Motion::RandomWalk {
            max_rate: 0.01,
            segment_s: 0.1,
            excursion_s: 0.002,
        };
        let tau = m.trajectory(480_000, 48_000.0, 3);
        let max_step = tau.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_step * 48_000.0 <= 0.01 + 1e-12);
        assert_eq!(tau[0], 0.0);
        assert_eq!(tau, m.trajectory(480_000, 48_000.0, 3));
    }

    #[test]
    fn validation_rejects_bad_profiles() {
        let mut p = ChannelProfile::ideal();
        p.taps[0].gain = f64::NAN;
        assert!(apply_channel(&chirps(1), &p).is_err());
        let mut p = ChannelProfile::ideal();
        p.motion = Motion::Linear { rate: 0.02 };
        assert!(p.validate(48_000.0).is_err());
        let mut p = ChannelProfile::ideal();
        p.noise.snr_db = Some(f64::INFINITY);
        assert!(p.validate(48_000.0).is_err());
        assert!(matches!(preset("abyssal"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.validate(48_000.0).unwrap();
            assert_eq!(p.name, name);
            let text = p.to_toml().unwrap();
            assert!(text.contains("version = 1"));
            assert_eq!(ChannelProfile::from_toml(&text).unwrap(), p);
        }
        let moderate = preset("mobile_moderate").unwrap();
        assert!(moderate.motion.max_rate() * 3072.0 <= 20.0 + 1e-9);
        let intense = preset("mobile_intense").unwrap();
        assert!(intense.motion.max_rate() * 3072.0 <= 40.0 + 1e-9);
    }

    #[test]
    fn newer_versions_are_rejected() {
        let text = ChannelProfile::ideal().to_toml().unwrap().replace("version = 1", "version = 2");
        assert!(ChannelProfile::from_toml(&text).is_err());
    }
}
