use std::process::Command;

fn uwmodem(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_uwmodem")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn encode_reports_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("symbols.txt");
    let (code, stdout, _) = uwmodem(&["encode", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("91 groups") && stdout.contains("364 on-air symbols"), "{stdout}");
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 273);
}

#[test]
fn wav_pipeline_through_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.wav");
    let rx = dir.path().join("rx.wav");
    let drift = dir.path().join("drift.csv");
    let p = |x: &std::path::Path| x.to_str().unwrap().to_string();
    assert_eq!(uwmodem(&["modulate", "--seed", "3", "-o", &p(&tx)]).0, 0);
    assert_eq!(uwmodem(&["channel", "--preset", "static_near", "--seed", "3", "-i", &p(&tx), "-o", &p(&rx)]).0, 0);
    let (code, stdout, _) =
        uwmodem(&["receive", "--seed", "3", "-i", &p(&rx), "--drift-csv", &p(&drift), "--max-ber", "0"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("detected  true"));
    assert!(std::fs::read_to_string(drift).unwrap().starts_with("group,raw,smoothed,bounded"));
}

#[test]
fn threshold_violation_exits_one() {
    let (code, _, stderr) = uwmodem(&["e2e", "--preset", "static_far", "--snr", "-25", "--max-ber", "0"]);
    assert_eq!(code, 1, "{stderr}");
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(uwmodem(&["e2e", "--preset", "nowhere"]).0, 2);
    assert_eq!(uwmodem(&["e2e", "--n-data", "0"]).0, 2);
    assert_eq!(uwmodem(&["sweep", "--axis", "depth", "--grid", "1"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 9\nname = \"x\"\nseed = 1\n").unwrap();
    assert_eq!(uwmodem(&["e2e", "--config", bad.to_str().unwrap()]).0, 2);
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, stdout, _) = uwmodem(&["sweep", "--axis", "ablation", "--grid", "full,wo_sync", "--trials", "2", "-o", d]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("cell,value,trials"));
    let csv = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let name = csv.file_name().unwrap().to_str().unwrap().to_string();
    assert!(name.starts_with("default_ablation_"), "{name}");
    let (code, stdout, _) = uwmodem(&["report", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("wo_sync"));
    let (code, _, _) = uwmodem(&[
        "sweep", "--axis", "snr", "--grid", "-30", "--trials", "1", "--preset", "static_near", "--max-median-ser", "0.1", "-o", d,
    ]);
    assert_eq!(code, 1);
}
