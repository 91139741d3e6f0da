//! Frame geometry and training overhead for a 768-bit payload.

use uwmodem::packet::{frame_geometry, overhead_ratio, FrameGeometry, FramePlan};
use uwmodem::signal::ModemParams;

/// Returns the geometry at the default of 3 data symbols per group.
pub fn run_example() -> uwmodem::Result<FrameGeometry> {
    println!("{:>3} {:>7} {:>7} {:>8} {:>9} {:>9}", "N", "groups", "symbols", "airtime", "overhead", "bit/s");
    let mut default = None;
    for n in [1, 3, 7, 15] {
        let plan = FramePlan::new(ModemParams::default(), n)?;
        let g = frame_geometry(768, &plan);
        println!(
            "{n:>3} {:>7} {:>7} {:>7.3}s {:>9.4} {:>9.1}",
            g.groups,
            g.total_symbols,
            g.airtime_s,
            overhead_ratio(n)?,
            768.0 / g.total_airtime_s()
        );
        if n == 3 {
            default = Some(g);
        }
    }
    Ok(default.expect("N = 3 is in the list"))
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
