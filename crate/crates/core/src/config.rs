//! Versioned experiment configuration, stored as TOML.
//!
//! ```toml
//! version = 1
//! name = "default"
//! seed = 1
//!
//! [modem]
//! sf = 5
//! bw_hz = 2000.0
//! fs_hz = 48000.0
//! f0_hz = 1500.0
//!
//! [frame]
//! n_data_per_group = 3
//!
//! [receiver]
//! detect_threshold = 0.5
//! equalizer_mode = "per_group"
//!
//! [payload]
//! kind = "tokens"
//! m_tokens = 64
//! k_codebook = 4096
//!
//! [channel]
//! preset = "mobile_moderate"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{preset, ChannelProfile};
use crate::error::{Error, Result};
use crate::packet::{FramePlan, DEFAULT_DATA_PER_GROUP};
use crate::receiver::ReceiverConfig;
use crate::signal::ModemParams;
use crate::tokens::CodecConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub n_data_per_group: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_data_per_group: DEFAULT_DATA_PER_GROUP,
        }
    }
}

/// What each trial transmits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayloadSpec {
    /// Uniform random bits.
    Bits { bits: usize },
    /// Uniform random tokens, packed at `ceil(log2 K)` bits each.
    Tokens { m_tokens: usize, k_codebook: u32 },
    /// A synthetic scene tokenized by a k-means patch codebook fitted on
    /// `training_scenes` other scenes.
    Image {
        size: usize,
        patch: usize,
        k_codebook: usize,
        training_scenes: usize,
    },
}

impl Default for PayloadSpec {
    fn default() -> Self {
        let c = CodecConfig::default();
        PayloadSpec::Tokens {
            m_tokens: c.m_tokens,
            k_codebook: c.k_codebook,
        }
    }
}

impl PayloadSpec {
    pub fn codec(&self) -> Option<CodecConfig> {
        match *self {
            PayloadSpec::Bits { .. } => None,
            PayloadSpec::Tokens { m_tokens, k_codebook } => Some(CodecConfig { m_tokens, k_codebook }),
            PayloadSpec::Image {
                size, patch, k_codebook, ..
            } => Some(CodecConfig {
                m_tokens: (size / patch.max(1)).pow(2),
                k_codebook: k_codebook as u32,
            }),
        }
    }

    pub fn payload_bits(&self) -> usize {
        match *self {
            PayloadSpec::Bits { bits } => bits,
            _ => self.codec().map_or(0, |c| c.payload_bits()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PayloadSpec::Bits { bits } if bits == 0 => Err(Error::InvalidConfig("payload needs at least one bit".into())),
            PayloadSpec::Bits { .. } => Ok(()),
            PayloadSpec::Tokens { .. } => self.codec().expect("token payload").validate(),
            PayloadSpec::Image {
                size,
                patch,
                k_codebook,
                training_scenes,
            } => {
                if patch == 0 || size == 0 || size % patch != 0 {
                    return Err(Error::InvalidConfig(format!("image size {size} must be a multiple of patch {patch}")));
                }
                let available = training_scenes * (size / patch).pow(2);
                if k_codebook < 2 || available < k_codebook {
                    return Err(Error::InvalidConfig(format!(
                        "{training_scenes} training scenes give {available} patches, fewer than k = {k_codebook}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Either a named preset or an inline profile; `snr_db` overrides the
/// chosen profile's SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ChannelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ChannelProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl ChannelSection {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.into()),
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<ChannelProfile> {
        let profile = match (&self.preset, &self.profile) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("channel: give either a preset or a profile, not both".into()))
            }
            (Some(name), None) => preset(name)?,
            (None, Some(p)) => p.clone(),
            (None, None) => ChannelProfile::ideal(),
        };
        Ok(match self.snr_db {
            Some(snr) => profile.with_snr(snr),
            None => profile,
        })
    }
}

/// Silence around the packet in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub lead_silence_s: f64,
    /// Extra lead drawn uniformly from `[0, lead_jitter_s)` per trial.
    pub lead_jitter_s: f64,
    pub tail_silence_s: f64,
}

impl Default for RunTiming {
    fn default() -> Self {
        Self {
            lead_silence_s: 0.25,
            lead_jitter_s: 0.05,
            tail_silence_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub modem: ModemParams,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub payload: PayloadSpec,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub timing: RunTiming,
    /// Token perturbation bound applied to received tokens, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_p: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            name: "default".into(),
            seed: 1,
            modem: ModemParams::default(),
            frame: FrameConfig::default(),
            receiver: ReceiverConfig::default(),
            payload: PayloadSpec::default(),
            channel: ChannelSection::preset("ideal"),
            timing: RunTiming::default(),
            perturb_p: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported config version {}", self.version)));
        }
        self.plan()?;
        self.receiver.validate()?;
        self.payload.validate()?;
        let t = self.timing;
        if !(t.lead_silence_s >= 0.0 && t.lead_jitter_s >= 0.0 && t.tail_silence_s >= 0.0) {
            return Err(Error::InvalidConfig("silence durations must be >= 0".into()));
        }
        if let Some(p) = self.perturb_p {
            let codec = self
                .payload
                .codec()
                .ok_or_else(|| Error::InvalidConfig("perturbation needs a token payload".into()))?;
            crate::tokens::PerturbSpec::new(p).validate(codec.m_tokens)?;
        }
        self.channel.resolve()?.validate(self.modem.fs_hz())
    }

    pub fn plan(&self) -> Result<FramePlan> {
        FramePlan::new(self.modem, self.frame.n_data_per_group)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert!(text.starts_with("version = 1"));
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn doc_example_parses() {
        let text = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.channel.resolve().unwrap().name, "mobile_moderate");
        assert_eq!(cfg.payload.payload_bits(), 768);
    }

    #[test]
    fn inconsistent_configs_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.frame.n_data_per_group = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.channel = ChannelSection {
            preset: Some("ideal".into()),
            profile: Some(ChannelProfile::ideal()),
            snr_db: None,
        };
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.payload = PayloadSpec::Bits { bits: 100 };
        cfg.perturb_p = Some(3);
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.payload = PayloadSpec::Image {
            size: 64,
            patch: 8,
            k_codebook: 256,
            training_scenes: 2,
        };
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::from_toml("version = 2").is_err());
    }

    #[test]
    fn snr_override_applies() {
        let section = ChannelSection {
            snr_db: Some(4.0),
            ..ChannelSection::preset("static_near")
        };
        assert_eq!(section.resolve().unwrap().noise.snr_db, Some(4.0));
    }
}
