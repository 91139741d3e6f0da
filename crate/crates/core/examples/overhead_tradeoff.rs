//! Fewer training symbols cost less airtime but track a moving channel
//! worse. Writes the sweep as a CSV report.

use std::path::{Path, PathBuf};

use uwmodem::config::{ChannelSection, ExperimentConfig};
use uwmodem::harness::{emit_report, sweep, SweepAxis, SweepOptions};
use uwmodem::packet::overhead_ratio;

/// Returns the report path and median SER for N = 1, 3, 7, 15.
pub fn run_example(trials: usize, dir: &Path) -> uwmodem::Result<(PathBuf, Vec<f64>)> {
    let cfg = ExperimentConfig {
        name: "overhead".into(),
        channel: ChannelSection::preset("mobile_intense"),
        ..ExperimentConfig::default()
    };
    let grid: Vec<String> = ["1", "3", "7", "15"].iter().map(|s| s.to_string()).collect();
    let table = sweep(&cfg, SweepAxis::NDataPerGroup, &grid, trials, 3, SweepOptions { paired: true })?;
    let mut sers = Vec::new();
    for c in &table.cells {
        let n: usize = c.value.parse().expect("grid is numeric");
        let ser = c.ser.map_or(f64::NAN, |s| s.median);
        println!("N = {n:>2}: overhead {:.4}, median SER {ser:.4}", overhead_ratio(n)?);
        sers.push(ser);
    }
    let path = emit_report(&[table], dir)?.remove(0);
    println!("report: {}", path.display());
    Ok((path, sers))
}

fn main() -> uwmodem::Result<()> {
    let trials = std::env::args().nth(1).map_or(Ok(20), |s| s.parse()).unwrap_or(20);
    run_example(trials, Path::new("reports")).map(|_| ())
}
