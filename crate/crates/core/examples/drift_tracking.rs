//! Track training symbols while the transmitter closes in at a steady rate.

use uwmodem::channel::{apply_channel, ChannelProfile, Motion, NoiseSpec};
use uwmodem::packet::{build_packet, FramePlan};
use uwmodem::receiver::{Receiver, ReceiverConfig};

/// Returns the worst timestamp error in samples.
pub fn run_example() -> uwmodem::Result<f64> {
    let plan = FramePlan::default();
    let groups = 20;
    let symbols: Vec<u16> = (0..groups * 3).map(|i| (i * 7 % 32) as u16).collect();
    let (packet, _) = build_packet(&plan, &symbols)?;
    let lead = 4000;
    // 30 samples of extra delay per 3072-sample group.
    let rate = 30.0 / plan.group_len() as f64;
    let profile = ChannelProfile {
        motion: Motion::Linear { rate },
        noise: NoiseSpec::white(10.0),
        drift_budget: 40.0,
        seed: 1,
        ..ChannelProfile::ideal()
    };
    let rx = apply_channel(&packet.padded(lead, 6000), &profile)?;
    let reception = Receiver::new(plan.clone(), ReceiverConfig::default())?.receive(&rx, groups)?;
    let trace = &reception.trace;
    let mut worst = 0.0f64;
    println!("{:>5} {:>8} {:>8} {:>10}", "group", "raw", "bounded", "error");
    for (i, t) in trace.timestamps.iter().enumerate() {
        let truth = (lead + plan.preamble().len() + i * plan.group_len()) as f64 / (1.0 - rate);
        worst = worst.max((t - truth).abs());
        println!("{i:>5} {:>8.1} {:>8.1} {:>10.2}", trace.raw[i], trace.bounded[i], t - truth);
    }
    println!("worst error {worst:.2} samples, largest step {:.1}", trace.max_step());
    Ok(worst)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
