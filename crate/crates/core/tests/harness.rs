use pon_phy::harness::{preset, read_results, run_experiment, simulate, write_outputs, ExperimentConfig, RunOptions};

fn small(name: &str) -> ExperimentConfig {
    let mut cfg = preset(name).unwrap();
    cfg.n_frames = 4;
    cfg.frames_per_trial = 2;
    cfg.training_frames = 1;
    cfg.rx_power_dbm = vec![-18.0, -14.0];
    cfg
}

#[test]
fn results_csv_round_trips() {
    let cfg = small("ufofdm-t1");
    let run = simulate(&cfg, Some(1)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_outputs(&run, tmp.path()).unwrap();
    let back = read_results(&tmp.path().join("results.csv")).unwrap();
    assert_eq!(back, run.results);
    let pam: Vec<_> = back.iter().filter(|r| r.band_id == "pam").collect();
    assert_eq!(pam.len(), 2);
    assert!(pam.iter().all(|r| r.evm_percent.is_none() && r.wwpr_db.is_some()));
}

#[test]
fn seed_option_matches_config_seed() {
    let mut cfg = small("gfdm-t1");
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        workers: Some(2),
        seed: Some(77),
        out: Some(tmp.path().to_path_buf()),
    };
    let (via_opts, _) = run_experiment(&cfg, &opts).unwrap();
    cfg.seed = 77;
    let direct = simulate(&cfg, Some(1)).unwrap();
    assert_eq!(via_opts.results, direct.results);
    cfg.seed = 78;
    let other = simulate(&cfg, Some(1)).unwrap();
    assert_ne!(other.results, direct.results);
}

#[test]
fn lower_power_never_helps() {
    let mut cfg = small("ofdm-t1");
    cfg.n_frames = 20;
    cfg.frames_per_trial = 10;
    cfg.training_frames = 2;
    cfg.rx_power_dbm = (0..7).map(|i| -26.0 + i as f64).collect();
    cfg.write_psd = false;
    let run = simulate(&cfg, None).unwrap();
    for band in ["1", "2", "3", "pam"] {
        let ber: Vec<f64> = run.results.iter().filter(|r| r.band_id == band).map(|r| r.ber).collect();
        assert_eq!(ber.len(), 7);
        assert!(ber.windows(2).all(|w| w[1] <= w[0]), "band {band}: {ber:?}");
    }
}

#[test]
fn pam_only_run_has_no_wireless_rows() {
    let mut cfg = small("ofdm-t1");
    cfg.bands.clear();
    let run = simulate(&cfg, Some(1)).unwrap();
    assert!(run.results.iter().all(|r| r.band_id == "pam" && r.wwpr_db.is_none()));
    assert!(run.per_subcarrier.is_empty());
}

#[test]
fn single_band_run_reports_only_that_band() {
    let mut a = small("ufofdm-t1");
    a.bands = vec![2];
    a.with_pam = false;
    let run = simulate(&a, Some(1)).unwrap();
    assert_eq!(run.results.len(), 2);
    assert!(run.results.iter().all(|r| r.band_id == "2"));
    let evm: Vec<f64> = run.results.iter().map(|r| r.evm_percent.unwrap()).collect();
    assert!(evm[1] < evm[0] && evm[0] < 15.0, "{evm:?}");
}
