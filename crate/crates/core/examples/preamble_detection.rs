//! Find a packet in 0 dB noise and report the timing error.

use uwmodem::channel::{apply_channel, ChannelProfile, NoiseSpec};
use uwmodem::packet::{build_packet, FramePlan};
use uwmodem::signal::CorrelationMethod;
use uwmodem::sync::detect_preamble_with;

/// Returns the detection offsets from the true start, one per trial.
pub fn run_example() -> uwmodem::Result<Vec<i64>> {
    let plan = FramePlan::default();
    let (packet, _) = build_packet(&plan, &[3, 17, 30, 9, 0, 21])?;
    let mut errors = Vec::new();
    for seed in 0..5u64 {
        let lead = 5000 + 731 * seed as usize;
        let profile = ChannelProfile {
            noise: NoiseSpec::white(0.0),
            seed,
            ..ChannelProfile::ideal()
        };
        let rx = apply_channel(&packet.padded(lead, 3000), &profile)?;
        match detect_preamble_with(&rx, &plan, 0.5, CorrelationMethod::Fft) {
            Some(d) => {
                let err = d.start as i64 - lead as i64;
                println!("seed {seed}: found at {} (error {err:+}), score {:.2}, dilation {:+.4}", d.start, d.score, d.alpha);
                errors.push(err);
            }
            None => println!("seed {seed}: missed"),
        }
    }
    Ok(errors)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
