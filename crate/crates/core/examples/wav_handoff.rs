//! Transmitter and receiver exchanging WAV files, as with a real recording.

use uwmodem::channel::{apply_channel, preset};
use uwmodem::config::ExperimentConfig;
use uwmodem::harness::{Experiment, TrialMetrics};
use uwmodem::packet::build_packet;
use uwmodem::coding::encode_payload;
use uwmodem::signal::{read_wav, write_wav};

pub fn run_example() -> uwmodem::Result<TrialMetrics> {
    let cfg = ExperimentConfig::default();
    let seed = 8;
    let exp = Experiment::new(cfg.clone())?;
    let payload = exp.payload(seed)?;
    let (packet, _) = build_packet(exp.plan(), &encode_payload(&payload.bits, cfg.modem.sf()))?;

    let dir = tempfile::tempdir()?;
    let tx_path = dir.path().join("tx.wav");
    let rx_path = dir.path().join("rx.wav");
    write_wav(&tx_path, &packet.padded(12_000, 24_000))?;
    let recording = apply_channel(&read_wav(&tx_path)?, &preset("static_near")?.with_seed(seed))?;
    write_wav(&rx_path, &recording)?;

    let m = exp.score_recording(&read_wav(&rx_path)?, seed, "rx.wav")?;
    println!("{} -> {}: detected {}, SER {:?}, BER {:?}", tx_path.display(), rx_path.display(), m.detected, m.ser, m.ber);
    Ok(m)
}

fn main() -> uwmodem::Result<()> {
    run_example().map(|_| ())
}
