//! Receive chain: detect → track → resample groups → equalize → demodulate.

use serde::{Deserialize, Serialize};

use crate::css::{CssModem, Demodulated};
use crate::equalizer::{self, EqualizerConfig};
use crate::error::{Error, Result};
use crate::packet::FramePlan;
use crate::signal::{CorrelationMethod, SampleBuffer};
use crate::sync::{
    detect_in_filtered, extract_group, group_scales, locate_training_symbols_from, smooth_and_bound,
    timing_filter, Detection, DriftTrace, SyncConfig,
};

/// When equalizer coefficients are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerMode {
    /// From every group's own training symbol.
    #[default]
    PerGroup,
    /// From the first group only, reused for the rest.
    Once,
    /// No equalization.
    Off,
}

impl std::str::FromStr for EqualizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_group" => Ok(EqualizerMode::PerGroup),
            "once" => Ok(EqualizerMode::Once),
            "off" => Ok(EqualizerMode::Off),
            _ => Err(Error::InvalidConfig(format!("unknown equalizer mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverConfig {
    pub detect_threshold: f64,
    pub sync: SyncConfig,
    pub equalizer: EqualizerConfig,
    /// Overridden to [`EqualizerMode::Once`] when `sync.equalize_once` is set.
    pub equalizer_mode: EqualizerMode,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            detect_threshold: 0.5,
            sync: SyncConfig::default(),
            equalizer: EqualizerConfig::default(),
            equalizer_mode: EqualizerMode::PerGroup,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.detect_threshold > 0.0 && self.detect_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "detection threshold {} must lie in (0, 1]",
                self.detect_threshold
            )));
        }
        self.sync.validate()?;
        self.equalizer.validate()
    }

    pub fn effective_mode(&self) -> EqualizerMode {
        if self.sync.equalize_once && self.equalizer_mode != EqualizerMode::Off {
            EqualizerMode::Once
        } else {
            self.equalizer_mode
        }
    }
}

/// Everything the receiver learned about one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub detection: Option<Detection>,
    pub trace: DriftTrace,
    /// Decisions for every data slot of the groups that were recovered.
    pub symbols: Vec<Demodulated>,
    pub groups_expected: usize,
    pub truncated: bool,
}

impl Reception {
    pub fn detected(&self) -> bool {
        self.detection.is_some()
    }

    pub fn symbol_values(&self) -> Vec<u16> {
        self.symbols.iter().map(|d| d.symbol).collect()
    }
}

pub struct Receiver {
    plan: FramePlan,
    modem: CssModem,
    cfg: ReceiverConfig,
}

impl Receiver {
    pub fn new(plan: FramePlan, cfg: ReceiverConfig) -> Result<Self> {
        cfg.validate()?;
        let modem = CssModem::new(*plan.params());
        Ok(Self { plan, modem, cfg })
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.cfg
    }

    /// Receive a packet of `groups` symbol groups from `signal`.
    pub fn receive(&self, signal: &SampleBuffer, groups: usize) -> Result<Reception> {
        let fs = self.plan.params().fs_hz();
        if signal.fs_hz() != fs {
            return Err(Error::SampleRateMismatch { a: signal.fs_hz(), b: fs });
        }
        let filtered = timing_filter(signal.samples(), fs);
        let Some(detection) = detect_in_filtered(&filtered, &self.plan, self.cfg.detect_threshold, CorrelationMethod::Fft)
        else {
            return Ok(Reception {
                detection: None,
                trace: DriftTrace::default(),
                symbols: Vec::new(),
                groups_expected: groups,
                truncated: false,
            });
        };
        self.receive_from(signal, &filtered, detection, groups)
    }

    /// Receive with a known detection; `filtered` is the timing-band copy of
    /// `signal`.
    pub fn receive_from(
        &self,
        signal: &SampleBuffer,
        filtered: &[f64],
        detection: Detection,
        groups: usize,
    ) -> Result<Reception> {
        let sync = &self.cfg.sync;
        let (raw, truncated) =
            match locate_training_symbols_from(filtered, detection.start, detection.alpha, &self.plan, sync, groups) {
                Ok(raw) => (raw, false),
                Err(Error::Truncated { partial_raw, .. }) => (partial_raw, true),
                Err(e) => return Err(e),
            };
        let trace = smooth_and_bound(&raw, sync, &self.plan, detection.start as f64);
        let scales = if sync.disable_sync {
            vec![1.0; trace.timestamps.len()]
        } else if trace.timestamps.len() == 1 {
            vec![1.0 + detection.alpha]
        } else {
            group_scales(&trace.timestamps, &self.plan)?
        };

        let ns = self.plan.params().ns();
        let eq = self.cfg.equalizer;
        let (lead, tail) = (eq.lead(), eq.tail());
        let window = ns + eq.taps - 1;
        let mode = self.cfg.effective_mode();
        let known = self.plan.training().samples();
        let mut shared: Option<Vec<f64>> = None;
        let mut symbols = Vec::with_capacity(trace.timestamps.len() * self.plan.n_data_per_group());
        for (t, scale) in trace.timestamps.iter().zip(&scales) {
            let g = extract_group(signal.samples(), *t, *scale, &self.plan, lead, tail);
            let w = match mode {
                EqualizerMode::Off => None,
                EqualizerMode::PerGroup => Some(self.estimate(&g[..window], known)),
                EqualizerMode::Once => Some(
                    shared
                        .get_or_insert_with(|| self.estimate(&g[..window], known))
                        .clone(),
                ),
            };
            for j in 1..=self.plan.n_data_per_group() {
                let start = j * ns;
                let decided = match &w {
                    Some(w) => {
                        let y = equalizer::apply(w, &g[start..start + window])?;
                        self.modem.demodulate(&y)?
                    }
                    None => self.modem.demodulate(&g[start + lead..start + lead + ns])?,
                };
                symbols.push(decided);
            }
        }
        Ok(Reception {
            detection: Some(detection),
            trace,
            symbols,
            groups_expected: groups,
            truncated,
        })
    }

    fn estimate(&self, received: &[f64], known: &[f64]) -> Vec<f64> {
        let fs = self.plan.params().fs_hz();
        equalizer::estimate_at_rate(received, known, &self.cfg.equalizer, fs)
            .unwrap_or_else(|_| equalizer::identity(&self.cfg.equalizer))
    }
}
