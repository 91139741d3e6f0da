//! Modulate every symbol value and demodulate it back.

use uwmodem::css::CssModem;
use uwmodem::signal::ModemParams;

/// Returns how many of the 2^SF symbols came back correctly.
pub fn run_example() -> uwmodem::Result<usize> {
    let params = ModemParams::default();
    let modem = CssModem::new(params);
    println!(
        "SF {} BW {} Hz fs {} Hz: {} samples per symbol, {:.1} bit/s",
        params.sf(),
        params.bw_hz(),
        params.fs_hz(),
        params.ns(),
        params.data_rate_bps()
    );
    let values: Vec<u16> = (0..params.num_symbols() as u16).collect();
    let signal = modem.modulate(&values)?;
    let decisions = modem.demodulate_all(signal.samples())?;
    let mut correct = 0;
    for (v, d) in values.iter().zip(&decisions) {
        if d.symbol == *v {
            correct += 1;
        }
        println!("sent {v:>2} got {:>2} confidence {:.1}", d.symbol, d.confidence);
    }
    println!("{correct}/{} correct", values.len());
    Ok(correct)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
