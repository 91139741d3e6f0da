//! Undo a strong echo with the training-symbol Wiener equalizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwmodem::channel::{apply_channel, preset};
use uwmodem::css::CssModem;
use uwmodem::equalizer::{apply, estimate, EqualizerConfig};
use uwmodem::packet::FramePlan;
use uwmodem::signal::SampleBuffer;

/// Returns (symbol errors without, with equalization) over a stream of
/// random symbols that follows one training symbol.
pub fn run_example() -> uwmodem::Result<(usize, usize)> {
    let plan = FramePlan::default();
    let ns = plan.params().ns();
    let modem = CssModem::new(*plan.params());
    let cfg = EqualizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let symbols: Vec<u16> = (0..400).map(|_| rng.gen_range(0..32)).collect();

    let mut stream = plan.training().samples().to_vec();
    stream.extend_from_slice(modem.modulate(&symbols)?.samples());
    let tx = SampleBuffer::new(stream, plan.params().fs_hz())?.padded(cfg.lead(), ns);
    let profile = preset("two_tap")?.with_seed(4);
    println!("{} echo taps, {:?} dB in-band SNR", profile.taps.len() - 1, profile.noise.snr_db);
    let rx = apply_channel(&tx, &profile)?.into_samples();

    // Window of symbol k (k = 0 is the training symbol) with equalizer context.
    let window = |k: usize| &rx[k * ns..(k + 1) * ns + cfg.taps - 1];
    let w = estimate(window(0), plan.training().samples(), &cfg)?;

    let (mut raw_errors, mut eq_errors) = (0, 0);
    for (i, &v) in symbols.iter().enumerate() {
        let win = window(i + 1);
        if modem.demodulate(&win[cfg.lead()..cfg.lead() + ns])?.symbol != v {
            raw_errors += 1;
        }
        if modem.demodulate(&apply(&w, win)?)?.symbol != v {
            eq_errors += 1;
        }
    }
    println!("symbol errors over {}: {raw_errors} unequalized, {eq_errors} equalized", symbols.len());
    Ok((raw_errors, eq_errors))
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
