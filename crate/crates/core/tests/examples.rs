//! Runs every example and checks what it reports.

#[allow(dead_code)]
#[path = "../examples/css_roundtrip.rs"]
mod css_roundtrip;
#[allow(dead_code)]
#[path = "../examples/channel_coding.rs"]
mod channel_coding;
#[allow(dead_code)]
#[path = "../examples/packet_layout.rs"]
mod packet_layout;
#[allow(dead_code)]
#[path = "../examples/preamble_detection.rs"]
mod preamble_detection;
#[allow(dead_code)]
#[path = "../examples/drift_tracking.rs"]
mod drift_tracking;
#[allow(dead_code)]
#[path = "../examples/equalization.rs"]
mod equalization;
#[allow(dead_code)]
#[path = "../examples/channel_presets.rs"]
mod channel_presets;
#[allow(dead_code)]
#[path = "../examples/token_vq.rs"]
mod token_vq;
#[allow(dead_code)]
#[path = "../examples/end_to_end.rs"]
mod end_to_end;
#[allow(dead_code)]
#[path = "../examples/ablation.rs"]
mod ablation;
#[allow(dead_code)]
#[path = "../examples/overhead_tradeoff.rs"]
mod overhead_tradeoff;
#[allow(dead_code)]
#[path = "../examples/wav_handoff.rs"]
mod wav_handoff;

#[test]
fn css_roundtrip_is_exact() {
    assert_eq!(css_roundtrip::run_example().unwrap(), 32);
}

#[test]
fn channel_coding_repairs_one_symbol_per_block() {
    let (ok, corrected) = channel_coding::run_example().unwrap();
    assert!(ok);
    assert!(corrected > 0);
}

#[test]
fn packet_layout_default_geometry() {
    let g = packet_layout::run_example().unwrap();
    assert_eq!((g.groups, g.total_symbols), (91, 364));
}

#[test]
fn preamble_detection_is_sample_accurate() {
    let errors = preamble_detection::run_example().unwrap();
    assert_eq!(errors.len(), 5);
    assert!(errors.iter().all(|e| e.abs() <= 2), "{errors:?}");
}

#[test]
fn drift_tracking_within_three_samples() {
    assert!(drift_tracking::run_example().unwrap() <= 3.0);
}

#[test]
fn equalization_removes_echo_errors() {
    let (raw, eq) = equalization::run_example().unwrap();
    assert!(eq < raw, "{eq} vs {raw}");
}

#[test]
fn channel_presets_round_trip() {
    assert_eq!(channel_presets::run_example().unwrap(), uwmodem::channel::PRESET_NAMES.len());
}

#[test]
fn token_vq_error_grows_with_ier() {
    let mse = token_vq::run_example().unwrap();
    assert!(mse.windows(2).all(|w| w[1] >= w[0]), "{mse:?}");
}

#[test]
fn end_to_end_static_presets_are_clean() {
    let all = end_to_end::run_example().unwrap();
    assert!(all.iter().all(|m| m.detected));
    assert_eq!(all[0].ber, Some(0.0));
}

#[test]
fn ablation_full_receiver_beats_one_equal() {
    let sers = ablation::run_example(6).unwrap();
    assert!(sers[0] < sers[3], "{sers:?}");
}

#[test]
fn overhead_tradeoff_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let (path, sers) = overhead_tradeoff::run_example(4, dir.path()).unwrap();
    assert!(path.exists());
    assert!(sers[0] <= sers[3], "{sers:?}");
}

#[test]
fn wav_handoff_decodes() {
    let m = wav_handoff::run_example().unwrap();
    assert_eq!(m.ber, Some(0.0));
}
