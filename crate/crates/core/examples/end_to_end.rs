//! One packet of 64 tokens through each channel preset.

use uwmodem::channel::PRESET_NAMES;
use uwmodem::config::{ChannelSection, ExperimentConfig};
use uwmodem::harness::{run_e2e, TrialMetrics};

pub fn run_example() -> uwmodem::Result<Vec<TrialMetrics>> {
    let mut out = Vec::new();
    for name in PRESET_NAMES {
        let cfg = ExperimentConfig {
            channel: ChannelSection::preset(name),
            ..ExperimentConfig::default()
        };
        let m = run_e2e(&cfg, 42)?;
        let f = |v: Option<f64>| v.map_or("miss".to_string(), |v| format!("{v:.4}"));
        println!(
            "{name:>16}: SER {} BER {} IER {} corrected {}",
            f(m.ser),
            f(m.ber),
            f(m.ier),
            m.corrected_count
        );
        out.push(m);
    }
    Ok(out)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
