use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uwmodem::channel::{apply_channel, ChannelProfile};
use uwmodem::coding::encode_payload;
use uwmodem::config::{ChannelSection, ExperimentConfig};
use uwmodem::harness::{emit_report, sweep, write_summary_csv, Experiment, SweepOptions, TrialMetrics};
use uwmodem::packet::{build_packet, frame_geometry};
use uwmodem::signal::{read_wav, write_wav};
use uwmodem::Error;

/// Chirp modem simulator: encode, modulate, simulate a channel, receive,
/// and run sweeps.
#[derive(Parser)]
#[command(name = "uwmodem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel preset, overriding the config.
    #[arg(long)]
    preset: Option<String>,
    /// Channel profile file (TOML), overriding the config.
    #[arg(long, conflicts_with = "preset")]
    profile: Option<PathBuf>,
    /// In-band SNR in dB, overriding the channel's.
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Data symbols per training symbol.
    #[arg(long)]
    n_data: Option<usize>,
    /// Ablation: full, wo_sb, wo_sync or one_equal.
    #[arg(long)]
    ablation: Option<String>,
    /// Equalizer: per_group, once or off.
    #[arg(long)]
    equalizer: Option<String>,
}

impl Common {
    fn load(&self) -> uwmodem::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(name) = &self.preset {
            cfg.channel = ChannelSection::preset(name);
        }
        if let Some(p) = &self.profile {
            cfg.channel = ChannelSection {
                profile: Some(ChannelProfile::load(p)?),
                ..ChannelSection::default()
            };
        }
        if let Some(snr) = self.snr {
            cfg.channel.snr_db = Some(snr);
        }
        if let Some(n) = self.n_data {
            cfg.frame.n_data_per_group = n;
        }
        if let Some(a) = &self.ablation {
            cfg.receiver.sync = a.parse::<uwmodem::sync::Ablation>()?.configure(cfg.receiver.sync);
        }
        if let Some(e) = &self.equalizer {
            cfg.receiver.equalizer_mode = e.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the frame geometry and write the coded symbols, one per line.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write the transmitted packet, with lead and tail silence, as WAV.
    Modulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Pass a WAV recording through the configured channel.
    Channel {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Receive a WAV recording and score it against the seed's payload.
    Receive {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        input: PathBuf,
        /// Write the drift trace as CSV.
        #[arg(long)]
        drift_csv: Option<PathBuf>,
        #[command(flatten)]
        limits: Limits,
    },
    /// One end-to-end trial.
    E2e {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        drift_csv: Option<PathBuf>,
        #[command(flatten)]
        limits: Limits,
    },
    /// Sweep one axis and write a CSV report.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// snr, n_data_per_group, mobility, ablation or p.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        grid: Vec<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Reuse the same trial seeds in every cell.
        #[arg(long)]
        paired: bool,
        #[arg(long, short, default_value = "reports")]
        out: PathBuf,
        /// Fail when any cell's median SER exceeds this.
        #[arg(long)]
        max_median_ser: Option<f64>,
    },
    /// Summarize sweep CSVs: one line per cell.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Limits {
    /// Fail when BER exceeds this (a missed packet always fails).
    #[arg(long)]
    max_ber: Option<f64>,
    #[arg(long)]
    max_ser: Option<f64>,
}

impl Limits {
    fn violated(&self, m: &TrialMetrics) -> bool {
        let over = |v: Option<f64>, lim: Option<f64>| lim.is_some_and(|l| v.map_or(true, |v| v > l));
        over(m.ber, self.max_ber) || over(m.ser, self.max_ser)
    }
}

enum Failure {
    Threshold(String),
    Config(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn show(m: &TrialMetrics) {
    let f = |v: Option<f64>| v.map_or("null".to_string(), |v| format!("{v:.6}"));
    println!("profile   {}", m.profile);
    println!("seed      {}", m.seed);
    println!("detected  {}", m.detected);
    println!("ser       {}", f(m.ser));
    println!("ber       {}", f(m.ber));
    println!("ier       {}", f(m.ier));
    println!("mse       {}", f(m.mse));
    println!("corrected {}", m.corrected_count);
    println!("max step  {:.2}", m.trace.max_step());
}

fn write_trace(m: &TrialMetrics, path: &Option<PathBuf>) -> uwmodem::Result<()> {
    if let Some(p) = path {
        m.trace.write_csv(std::fs::File::create(p)?)?;
    }
    Ok(())
}

fn judge(m: &TrialMetrics, limits: &Limits) -> Result<(), Failure> {
    if limits.violated(m) {
        return Err(Failure::Threshold("trial exceeds the requested error limits".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Encode { common, out } => {
            let cfg = common.load()?;
            let exp = Experiment::new(cfg.clone())?;
            let payload = exp.payload(cfg.seed)?;
            let symbols = encode_payload(&payload.bits, cfg.modem.sf());
            let g = frame_geometry(payload.bits.len(), exp.plan());
            println!(
                "payload {} bits, {} codewords, {} blocks, {} data symbols, {} groups, {} on-air symbols, {:.3} s (+{:.3} s preamble)",
                g.payload_bits, g.codewords, g.blocks, g.data_symbols, g.groups, g.total_symbols, g.airtime_s, g.preamble_s
            );
            if let Some(p) = out {
                let text: String = symbols.iter().map(|s| format!("{s}\n")).collect();
                std::fs::write(p, text).map_err(Error::from)?;
            }
        }
        Command::Modulate { common, out } => {
            let cfg = common.load()?;
            let exp = Experiment::new(cfg.clone())?;
            let payload = exp.payload(cfg.seed)?;
            let (packet, _) = build_packet(exp.plan(), &encode_payload(&payload.bits, cfg.modem.sf()))?;
            let fs = cfg.modem.fs_hz();
            let t = cfg.timing;
            let tx = packet.padded((t.lead_silence_s * fs).round() as usize, (t.tail_silence_s * fs).round() as usize);
            write_wav(&out, &tx)?;
            println!("wrote {} samples ({:.3} s) to {}", tx.len(), tx.duration_s(), out.display());
        }
        Command::Channel { common, input, out } => {
            let cfg = common.load()?;
            let profile = cfg.channel.resolve()?.with_seed(cfg.seed);
            let y = apply_channel(&read_wav(&input)?, &profile)?;
            write_wav(&out, &y)?;
            println!("{} -> {} through {}", input.display(), out.display(), profile.name);
        }
        Command::Receive {
            common,
            input,
            drift_csv,
            limits,
        } => {
            let cfg = common.load()?;
            let exp = Experiment::new(cfg.clone())?;
            let name = input.file_name().map_or("recording".into(), |n| n.to_string_lossy().into_owned());
            let m = exp.score_recording(&read_wav(&input)?, cfg.seed, &name)?;
            show(&m);
            write_trace(&m, &drift_csv)?;
            judge(&m, &limits)?;
        }
        Command::E2e {
            common,
            drift_csv,
            limits,
        } => {
            let cfg = common.load()?;
            let m = Experiment::new(cfg.clone())?.run(&cfg.channel.resolve()?, cfg.seed)?;
            show(&m);
            write_trace(&m, &drift_csv)?;
            judge(&m, &limits)?;
        }
        Command::Sweep {
            common,
            axis,
            grid,
            trials,
            paired,
            out,
            max_median_ser,
        } => {
            let cfg = common.load()?;
            let table = sweep(&cfg, axis.parse()?, &grid, trials, cfg.seed, SweepOptions { paired })?;
            let paths = emit_report(std::slice::from_ref(&table), &out)?;
            write_summary_csv(&table, std::io::stdout())?;
            for p in &paths {
                eprintln!("wrote {}", p.display());
            }
            if let Some(limit) = max_median_ser {
                let bad: Vec<&str> = table
                    .cells
                    .iter()
                    .filter(|c| c.ser.map_or(true, |s| s.median > limit))
                    .map(|c| c.value.as_str())
                    .collect();
                if !bad.is_empty() {
                    return Err(Failure::Threshold(format!("median SER above {limit} for {bad:?}")));
                }
            }
        }
        Command::Report { inputs } => {
            for p in &inputs {
                report(p)?;
            }
        }
    }
    Ok(())
}

/// Print the aggregate rows of a sweep CSV.
fn report(path: &Path) -> uwmodem::Result<()> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{} has no `{name}` column", path.display())))
    };
    let (kind, value, det, ser, iqr, ber, ier, n) = (
        col("kind")?,
        col("value")?,
        col("detected")?,
        col("median_ser")?,
        col("iqr_ser")?,
        col("ber")?,
        col("ier")?,
        col("n")?,
    );
    println!("{}", path.display());
    println!("{:>16} {:>6} {:>9} {:>10} {:>10} {:>10} {:>10}", "value", "trials", "detected", "ser", "ser_iqr", "ber", "ier");
    for rec in reader.records() {
        let rec = rec?;
        if &rec[kind] != "aggregate" {
            continue;
        }
        println!(
            "{:>16} {:>6} {:>9} {:>10} {:>10} {:>10} {:>10}",
            &rec[value], &rec[n], &rec[det], &rec[ser], &rec[iqr], &rec[ber], &rec[ier]
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold(msg)) => {
            eprintln!("threshold violated: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
