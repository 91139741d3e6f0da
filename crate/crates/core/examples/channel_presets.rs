//! Named channel presets: what each one does to a burst of chirps, and the
//! TOML form they share with experiment configs.

use uwmodem::channel::{active_band_power, apply_channel, preset, ChannelProfile, PRESET_NAMES};
use uwmodem::css::CssModem;
use uwmodem::signal::ModemParams;

/// Returns the number of presets whose TOML form round-trips.
pub fn run_example() -> uwmodem::Result<usize> {
    let modem = CssModem::new(ModemParams::default());
    let burst = modem.modulate(&[0, 8, 16, 24, 31, 5, 12, 19])?.padded(2000, 2000);
    let fs = burst.fs_hz();
    let reference = active_band_power(burst.samples(), fs);
    let mut round_trips = 0;
    for name in PRESET_NAMES {
        let profile = preset(name)?.with_seed(3);
        let out = apply_channel(&burst, &profile)?;
        let gain_db = 10.0 * (active_band_power(out.samples(), fs) / reference).log10();
        println!(
            "{name:>16}: {} taps, snr {:>5}, max drift {:>4.1} samples/group, in-band level {gain_db:+.1} dB",
            profile.taps.len(),
            profile.noise.snr_db.map_or("none".into(), |s| format!("{s} dB")),
            profile.motion.max_rate() * 3072.0,
        );
        if ChannelProfile::from_toml(&profile.to_toml()?)? == profile {
            round_trips += 1;
        }
    }
    println!("\n{}", preset("mobile_moderate")?.to_toml()?);
    Ok(round_trips)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
