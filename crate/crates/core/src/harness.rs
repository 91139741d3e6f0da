//! End-to-end trials, parameter sweeps and CSV reports.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_channel, preset, ChannelProfile};
use crate::coding::{decode_payload, encode_payload, BitStream};
use crate::config::{ExperimentConfig, PayloadSpec};
use crate::error::{Error, Result};
use crate::packet::{build_packet, frame_geometry, FramePlan};
use crate::receiver::{Receiver, Reception};
use crate::seeds::{splitmix64, trial_seed};
use crate::signal::SampleBuffer;
use crate::sync::{Ablation, DriftTrace};
use crate::tokens::{ier, pack_tokens, perturb, unpack_tokens_lossy, CodecConfig, PerturbSpec, TokenSequence};
use crate::vq::{fit_codebook, synthetic_scene, training_patches, vq_decode, vq_encode, Codebook, GrayImage};

/// Outcome of one trial. Rates are `None` when the preamble was missed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub seed: u64,
    pub profile: String,
    pub detected: bool,
    pub ber: Option<f64>,
    /// Over payload-carrying data symbols; training and padding excluded.
    pub ser: Option<f64>,
    pub ier: Option<f64>,
    pub mse: Option<f64>,
    pub corrected_count: usize,
    #[serde(skip)]
    pub trace: DriftTrace,
}

/// A prepared experiment: configuration, framing, receiver and (for image
/// payloads) the fitted codebook.
pub struct Experiment {
    cfg: ExperimentConfig,
    plan: FramePlan,
    receiver: Receiver,
    codebook: Option<Arc<Codebook>>,
}

/// Stream ids mixed into the trial seed so each random component is
/// independent.
const STREAM_PAYLOAD: u64 = 0x70;
const STREAM_CHANNEL: u64 = 0xC4;
const STREAM_PERTURB: u64 = 0x9E;

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let codebook = match cfg.payload {
            PayloadSpec::Image {
                size,
                patch,
                k_codebook,
                training_scenes,
            } => {
                // Training scenes come from a seed range disjoint from trials.
                let patches = training_patches(training_scenes, size, patch, splitmix64(cfg.seed) | 1 << 63)?;
                Some(Arc::new(fit_codebook(&patches, k_codebook, cfg.seed, crate::vq::DEFAULT_MAX_ITER)?.0))
            }
            _ => None,
        };
        Self::with_codebook(cfg, codebook)
    }

    /// Reuse an already fitted codebook.
    pub fn with_codebook(cfg: ExperimentConfig, codebook: Option<Arc<Codebook>>) -> Result<Self> {
        cfg.validate()?;
        let plan = cfg.plan()?;
        let receiver = Receiver::new(plan.clone(), cfg.receiver)?;
        Ok(Self {
            cfg,
            plan,
            receiver,
            codebook,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn codebook(&self) -> Option<&Arc<Codebook>> {
        self.codebook.as_ref()
    }

    /// Transmit, pass through `profile` and receive one packet.
    pub fn run(&self, profile: &ChannelProfile, seed: u64) -> Result<TrialMetrics> {
        let payload = self.payload(seed)?;
        let sf = self.plan.params().sf();
        let symbols = encode_payload(&payload.bits, sf);
        let geometry = frame_geometry(payload.bits.len(), &self.plan);
        let (packet, _) = build_packet(&self.plan, &symbols)?;

        let fs = self.plan.params().fs_hz();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ STREAM_CHANNEL));
        let t = self.cfg.timing;
        let jitter = if t.lead_jitter_s > 0.0 { rng.gen_range(0.0..t.lead_jitter_s) } else { 0.0 };
        let lead = ((t.lead_silence_s + jitter) * fs).round() as usize;
        let tail = (t.tail_silence_s * fs).round() as usize;
        let tx = packet.padded(lead, tail);
        let channel = profile.clone().with_seed(rng.gen());
        let rx_signal = apply_channel(&tx, &channel)?;

        let reception = self.receiver.receive(&rx_signal, geometry.groups)?;
        self.score(&payload, &symbols, reception, &channel.name, seed)
    }

    /// Receive-side scoring of a recording against the payload for `seed`.
    pub fn score_recording(&self, signal: &SampleBuffer, seed: u64, profile: &str) -> Result<TrialMetrics> {
        let payload = self.payload(seed)?;
        let symbols = encode_payload(&payload.bits, self.plan.params().sf());
        let geometry = frame_geometry(payload.bits.len(), &self.plan);
        let reception = self.receiver.receive(signal, geometry.groups)?;
        self.score(&payload, &symbols, reception, profile, seed)
    }

    /// The payload a trial with `seed` transmits.
    pub fn payload(&self, seed: u64) -> Result<Payload> {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ STREAM_PAYLOAD));
        match self.cfg.payload {
            PayloadSpec::Bits { bits } => Ok(Payload {
                bits: BitStream::new((0..bits).map(|_| rng.gen_range(0..2)).collect())?,
                tokens: None,
                image: None,
            }),
            PayloadSpec::Tokens { m_tokens, k_codebook } => {
                let codec = CodecConfig::new(m_tokens, k_codebook)?;
                let tokens = TokenSequence::random(&codec, &mut rng);
                Ok(Payload {
                    bits: pack_tokens(&tokens, &codec)?,
                    tokens: Some((tokens, codec)),
                    image: None,
                })
            }
            PayloadSpec::Image { size, .. } => {
                let book = self.codebook.as_ref().ok_or_else(|| Error::InvalidConfig("image payload needs a codebook".into()))?;
                let image = synthetic_scene(size, rng.gen());
                let tokens = vq_encode(&image, book)?;
                let codec = CodecConfig::new(tokens.len(), book.k() as u32)?;
                Ok(Payload {
                    bits: pack_tokens(&tokens, &codec)?,
                    tokens: Some((tokens, codec)),
                    image: Some(image),
                })
            }
        }
    }

    fn score(&self, payload: &Payload, sent: &[u16], rx: Reception, profile: &str, seed: u64) -> Result<TrialMetrics> {
        let base = TrialMetrics {
            seed,
            profile: profile.to_string(),
            detected: rx.detected(),
            ber: None,
            ser: None,
            ier: None,
            mse: None,
            corrected_count: 0,
            trace: rx.trace.clone(),
        };
        if !rx.detected() {
            return Ok(base);
        }
        // Slots lost to truncation count as errors.
        let mut got = rx.symbol_values();
        got.resize(sent.len().max(got.len()), 0);
        got.truncate(sent.len());
        let missing = sent.len().saturating_sub(rx.symbols.len());
        let wrong = sent.iter().zip(&got).filter(|(a, b)| a != b).count();
        let ser = if sent.is_empty() {
            0.0
        } else {
            (wrong.max(missing)) as f64 / sent.len() as f64
        };
        let sf = self.plan.params().sf();
        let (bits, corrected) = decode_payload(&got, payload.bits.len(), sf)?;
        let ber = payload.bits.hamming_distance(&bits) as f64 / payload.bits.len().max(1) as f64;

        let (mut ier_value, mut mse) = (None, None);
        if let Some((tokens, codec)) = &payload.tokens {
            let mut received = unpack_tokens_lossy(&bits, codec)?;
            if let Some(p) = self.cfg.perturb_p {
                received = perturb(&received, &PerturbSpec::new(p), codec.k_codebook, splitmix64(seed ^ STREAM_PERTURB))?.0;
            }
            ier_value = Some(ier(tokens, &received)?);
            if let (Some(image), Some(book)) = (&payload.image, &self.codebook) {
                let decoded = vq_decode(&received, book, image.width(), image.height())?;
                mse = Some(image.mse(&decoded)?);
            }
        }
        Ok(TrialMetrics {
            ber: Some(ber),
            ser: Some(ser),
            ier: ier_value,
            mse,
            corrected_count: corrected,
            ..base
        })
    }
}

/// What a trial sends.
#[derive(Debug, Clone)]
pub struct Payload {
    pub bits: BitStream,
    pub tokens: Option<(TokenSequence, CodecConfig)>,
    pub image: Option<GrayImage>,
}

/// One trial with the profile from the configuration.
pub fn run_e2e(cfg: &ExperimentConfig, seed: u64) -> Result<TrialMetrics> {
    let profile = cfg.channel.resolve()?;
    Experiment::new(cfg.clone())?.run(&profile, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Snr,
    NDataPerGroup,
    Mobility,
    Ablation,
    P,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::NDataPerGroup => "n_data_per_group",
            SweepAxis::Mobility => "mobility",
            SweepAxis::Ablation => "ablation",
            SweepAxis::P => "p",
        }
    }

    /// Configuration and profile for one grid value.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<(ExperimentConfig, ChannelProfile)> {
        let mut cfg = base.clone();
        let mut profile = base.channel.resolve()?;
        let bad = |what: &str| Error::InvalidConfig(format!("bad {what} grid value `{value}`"));
        match self {
            SweepAxis::Snr => profile = profile.with_snr(value.parse().map_err(|_| bad("snr"))?),
            SweepAxis::NDataPerGroup => cfg.frame.n_data_per_group = value.parse().map_err(|_| bad("N"))?,
            SweepAxis::Mobility => {
                profile = preset(value)?;
                if let Some(snr) = base.channel.snr_db {
                    profile = profile.with_snr(snr);
                }
            }
            SweepAxis::Ablation => cfg.receiver.sync = value.parse::<Ablation>()?.configure(cfg.receiver.sync),
            SweepAxis::P => cfg.perturb_p = Some(value.parse().map_err(|_| bad("p"))?),
        }
        cfg.validate()?;
        Ok((cfg, profile))
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepAxis::Snr,
            SweepAxis::NDataPerGroup,
            SweepAxis::Mobility,
            SweepAxis::Ablation,
            SweepAxis::P,
        ]
        .into_iter()
        .find(|a| a.name() == s || (s == "n" && *a == SweepAxis::NDataPerGroup))
        .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    /// Give every cell the same trial seeds, so cells differ only in the
    /// swept parameter (common random numbers).
    pub paired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub cell: usize,
    pub value: String,
    pub trial: usize,
    pub metrics: TrialMetrics,
}

/// Median and interquartile range; `None` when no trial produced the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub value: String,
    pub trials: usize,
    pub detection_rate: f64,
    pub ber: Option<Spread>,
    pub ser: Option<Spread>,
    pub ier: Option<Spread>,
    pub mse: Option<Spread>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub experiment: String,
    pub axis: SweepAxis,
    pub rows: Vec<TrialRow>,
    pub cells: Vec<CellSummary>,
}

impl SweepTable {
    pub fn cell(&self, value: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.value == value)
    }
}

/// Full-factorial sweep along one axis. Trials run in parallel; rows come
/// back ordered by (cell, trial). Seeds follow [`trial_seed`].
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    grid: &[String],
    trials: usize,
    seed: u64,
    opts: SweepOptions,
) -> Result<SweepTable> {
    if grid.is_empty() || trials == 0 {
        return Err(Error::InvalidConfig("sweep needs a nonempty grid and trials >= 1".into()));
    }
    let shared_book = Experiment::new(base.clone())?.codebook;
    let cells: Vec<(Experiment, ChannelProfile)> = grid
        .iter()
        .map(|v| {
            let (cfg, profile) = axis.apply(base, v)?;
            Ok((Experiment::with_codebook(cfg, shared_book.clone())?, profile))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let cell_index = if opts.paired { 0 } else { c as u64 };
            let s = trial_seed(seed, cell_index, t as u64);
            let (exp, profile) = &cells[c];
            Ok(TrialRow {
                cell: c,
                value: grid[c].clone(),
                trial: t,
                metrics: exp.run(profile, s)?,
            })
        })
        .collect::<Result<_>>()?;
    let summaries = grid
        .iter()
        .enumerate()
        .map(|(c, v)| summarize(c, v, rows.iter().filter(|r| r.cell == c).map(|r| &r.metrics)))
        .collect();
    Ok(SweepTable {
        experiment: base.name.clone(),
        axis,
        rows,
        cells: summaries,
    })
}

pub fn summarize<'a>(cell: usize, value: &str, metrics: impl Iterator<Item = &'a TrialMetrics>) -> CellSummary {
    let all: Vec<&TrialMetrics> = metrics.collect();
    let spread = |f: fn(&TrialMetrics) -> Option<f64>| {
        let v: Vec<f64> = all.iter().filter_map(|m| f(m)).collect();
        median_iqr(&v)
    };
    CellSummary {
        cell,
        value: value.to_string(),
        trials: all.len(),
        detection_rate: if all.is_empty() {
            0.0
        } else {
            all.iter().filter(|m| m.detected).count() as f64 / all.len() as f64
        },
        ber: spread(|m| m.ber),
        ser: spread(|m| m.ser),
        ier: spread(|m| m.ier),
        mse: spread(|m| m.mse),
    }
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    median_iqr(values).map(|s| s.median)
}

pub fn median_iqr(values: &[f64]) -> Option<Spread> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Spread {
        median: quantile(&v, 0.5),
        iqr: quantile(&v, 0.75) - quantile(&v, 0.25),
    })
}

pub const CSV_HEADER: [&str; 15] = [
    "kind", "cell", "value", "trial", "seed", "profile", "detected", "ber", "ser", "ier", "mse", "corrected", "n",
    "median_ser", "iqr_ser",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write the sweep as CSV: one `trial` row per (cell, trial) followed by one
/// `aggregate` row per cell. Aggregate rows put medians in the metric columns
/// and the SER spread in the last two columns. Output depends only on the
/// table, so identical seeds give identical bytes.
pub fn write_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &table.rows {
        let m = &r.metrics;
        w.write_record([
            "trial".to_string(),
            r.cell.to_string(),
            r.value.clone(),
            r.trial.to_string(),
            m.seed.to_string(),
            m.profile.clone(),
            m.detected.to_string(),
            opt(m.ber),
            opt(m.ser),
            opt(m.ier),
            opt(m.mse),
            m.corrected_count.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for c in &table.cells {
        let med = |s: Option<Spread>| opt(s.map(|s| s.median));
        w.write_record([
            "aggregate".to_string(),
            c.cell.to_string(),
            c.value.clone(),
            String::new(),
            String::new(),
            String::new(),
            c.detection_rate.to_string(),
            med(c.ber),
            med(c.ser),
            med(c.ier),
            med(c.mse),
            String::new(),
            c.trials.to_string(),
            med(c.ser),
            opt(c.ser.map(|s| s.iqr)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full per-metric spreads, one row per cell.
pub fn write_summary_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cell",
        "value",
        "trials",
        "detection_rate",
        "ber_median",
        "ber_iqr",
        "ser_median",
        "ser_iqr",
        "ier_median",
        "ier_iqr",
        "mse_median",
        "mse_iqr",
    ])?;
    for c in &table.cells {
        let mut rec = vec![c.cell.to_string(), c.value.clone(), c.trials.to_string(), c.detection_rate.to_string()];
        for s in [c.ber, c.ser, c.ier, c.mse] {
            rec.push(opt(s.map(|s| s.median)));
            rec.push(opt(s.map(|s| s.iqr)));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `<experiment>_<axis>_<unix seconds>.csv` inside `dir`.
pub fn report_path(dir: &Path, experiment: &str, axis: &str) -> PathBuf {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    dir.join(format!("{experiment}_{axis}_{stamp}.csv"))
}

/// Write every table to `dir` and return the file paths.
pub fn emit_report(tables: &[SweepTable], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    tables
        .iter()
        .map(|t| {
            let path = report_path(dir, &t.experiment, t.axis.name());
            write_csv(t, std::fs::File::create(&path)?)?;
            Ok(path)
        })
        .collect()
}
