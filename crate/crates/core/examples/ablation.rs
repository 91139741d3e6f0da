//! Switch off receiver stages one at a time on the roughest preset.

use uwmodem::config::{ChannelSection, ExperimentConfig};
use uwmodem::harness::{sweep, SweepAxis, SweepOptions};
use uwmodem::sync::Ablation;

/// Returns median SER per ablation, in `Ablation::ALL` order.
pub fn run_example(trials: usize) -> uwmodem::Result<Vec<f64>> {
    let cfg = ExperimentConfig {
        name: "ablation".into(),
        channel: ChannelSection::preset("mobile_intense"),
        ..ExperimentConfig::default()
    };
    let grid: Vec<String> = Ablation::ALL.iter().map(|a| a.name().to_string()).collect();
    let table = sweep(&cfg, SweepAxis::Ablation, &grid, trials, 3, SweepOptions { paired: true })?;
    let mut medians = Vec::new();
    for c in &table.cells {
        let ser = c.ser.map_or(f64::NAN, |s| s.median);
        println!("{:>10}: median SER {ser:.4} (IQR {:.4}), detected {:.0}%", c.value, c.ser.map_or(f64::NAN, |s| s.iqr), 100.0 * c.detection_rate);
        medians.push(ser);
    }
    Ok(medians)
}

fn main() -> uwmodem::Result<()> {
    let trials = std::env::args().nth(1).map_or(Ok(20), |s| s.parse()).unwrap_or(20);
    run_example(trials).map(|_| ())
}
