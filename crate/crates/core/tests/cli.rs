use std::path::Path;
use std::process::{Command, Output};

fn pon_phy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pon-phy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"preset": "gfdm-t1", "n_frames": 4, "frames_per_trial": 2, "training_frames": 1,
    "rx_power_dbm": [-16]}"#;

#[test]
fn presets_lists_all_three() {
    let out = pon_phy(&["presets"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), ["ofdm-t1", "ufofdm-t1", "gfdm-t1"]);
    let one = pon_phy(&["presets", "ufofdm-t1"]);
    assert!(String::from_utf8(one.stdout).unwrap().contains("\"n_subbands\": 13"));
    assert_eq!(pon_phy(&["presets", "qpsk-t1"]).status.code(), Some(2));
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.json", SMALL);
    assert_eq!(pon_phy(&["validate", &good]).status.code(), Some(0));

    let neg = write(tmp.path(), "neg.json", r#"{"preset": "ofdm-t1", "guard_band_hz": [-5e6], "n_frames": 7}"#);
    let out = pon_phy(&["validate", &neg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    // both problems are reported at once
    assert!(err.contains("-5000000") && err.contains("n_frames"), "{err}");

    let unknown = write(tmp.path(), "unknown.json", r#"{"preset": "ofdm-t1", "colour": "red"}"#);
    assert_eq!(pon_phy(&["validate", &unknown]).status.code(), Some(2));
    let missing = tmp.path().join("nope.json");
    assert_eq!(pon_phy(&["validate", missing.to_str().unwrap()]).status.code(), Some(2));
    let overlap = write(
        tmp.path(),
        "overlap.json",
        r#"{"preset": "ofdm-t1", "link": {"band_center": 1.2e9}}"#,
    );
    assert_eq!(pon_phy(&["validate", &overlap]).status.code(), Some(2));
}

#[test]
fn run_writes_csvs_and_runtime_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL);
    let out_dir = tmp.path().join("out");
    let out = pon_phy(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--workers", "2", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "per_subcarrier_evm.csv", "psd.csv"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(results.starts_with("experiment,waveform,band_id,guard_hz,fiber_km,rx_power_dbm,snr_db,with_pam,evm_percent,ber,bit_errors,bits,wwpr_db,seed,version"));
    assert_eq!(results.lines().count(), 1 + 4);

    // output directory below a regular file cannot be created
    let blocker = write(tmp.path(), "blocker", "");
    let bad_out = Path::new(&blocker).join("sub");
    let out = pon_phy(&["run", &cfg, "--out", bad_out.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn psd_command_prints_csv() {
    let out = pon_phy(&["psd", "ofdm-t1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frequency_hz,psd_db"));
    assert_eq!(lines.count(), 4096);
}
