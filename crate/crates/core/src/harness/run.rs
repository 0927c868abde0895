use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{run_trial, LevelTally, NoiseLevel, TrialOutput};
use crate::error::{Error, Result};
use crate::metrics::{wwpr, BerCount};
use crate::numerics::Psd;

pub const VERSION: &str = concat!("pon-phy ", env!("CARGO_PKG_VERSION"));

/// One line of `results.csv`. Bands are `"1"`, `"2"`, `"3"`; the wired
/// stream is `"pam"` and has no EVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub waveform: String,
    pub band_id: String,
    pub guard_hz: f64,
    pub fiber_km: f64,
    pub rx_power_dbm: Option<f64>,
    pub snr_db: Option<f64>,
    pub with_pam: bool,
    pub evm_percent: Option<f64>,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub wwpr_db: Option<f64>,
    pub seed: u64,
    pub version: String,
}

/// One line of `per_subcarrier_evm.csv`; subcarriers count from 1 at the
/// lowest frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierRow {
    pub experiment: String,
    pub waveform: String,
    pub band_id: String,
    pub guard_hz: f64,
    pub fiber_km: f64,
    pub rx_power_dbm: Option<f64>,
    pub snr_db: Option<f64>,
    pub subcarrier: usize,
    pub evm_percent: f64,
}

/// One line of `psd.csv`: the transmitted composite, positive frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdRow {
    pub experiment: String,
    pub waveform: String,
    pub guard_hz: f64,
    pub frequency_hz: f64,
    pub psd_db: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub results: Vec<ResultRow>,
    pub per_subcarrier: Vec<SubcarrierRow>,
    pub psd: Vec<PsdRow>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses one per core.
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn levels(cfg: &ExperimentConfig) -> Vec<NoiseLevel> {
    if cfg.rx_power_dbm.is_empty() {
        cfg.snr_db.iter().map(|&s| NoiseLevel::SnrDb(s)).collect()
    } else {
        cfg.rx_power_dbm.iter().map(|&p| NoiseLevel::RxPowerDbm(p)).collect()
    }
}

fn add_tally(acc: &mut LevelTally, t: &LevelTally) {
    for (a, b) in acc.bands.iter_mut().zip(&t.bands) {
        for (x, y) in a.sq_err.iter_mut().zip(&b.sq_err) {
            *x += y;
        }
        a.rows += b.rows;
        a.bit_errors += b.bit_errors;
        a.bits += b.bits;
    }
    if let (Some(a), Some(b)) = (acc.pam.as_mut(), t.pam) {
        a.0 += b.0;
        a.1 += b.1;
    }
}

/// Computes every sweep point without touching the filesystem.
pub fn simulate(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let levels = levels(cfg);
    let n_trials = cfg.n_frames / cfg.frames_per_trial;
    let mut groups = Vec::new();
    for &fiber in &cfg.fiber_km {
        for &guard in &cfg.guard_band_hz {
            groups.push((fiber, guard));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..n_trials).map(move |t| (g, t)))
        .collect();
    let work = |&(g, t): &(usize, usize)| -> Result<TrialOutput> {
        let (fiber, guard) = groups[g];
        let link = cfg.link_at(guard, fiber);
        run_trial(cfg, &link, t, &levels, t == 0)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    // collect keeps job order, so the result is independent of scheduling
    let outputs: Vec<TrialOutput> = pool.install(|| jobs.par_iter().map(work).collect::<Result<Vec<_>>>())?;

    let mut run = RunOutput::default();
    let waveform = cfg.modem.name().to_string();
    for (g, &(fiber, guard)) in groups.iter().enumerate() {
        let trials = &outputs[g * n_trials..(g + 1) * n_trials];
        let link = cfg.link_at(guard, fiber);
        let psd: &Psd = trials[0].psd.as_ref().expect("first trial keeps its spectrum");
        let wwpr_db = if cfg.with_pam && !cfg.bands.is_empty() {
            let edges = link.band_edges();
            Some(wwpr(psd, link.wired_region(), &edges)?)
        } else {
            None
        };
        if cfg.write_psd {
            run.psd.extend(psd.frequencies.iter().zip(&psd.psd_db).map(|(f, d)| PsdRow {
                experiment: cfg.name.clone(),
                waveform: waveform.clone(),
                guard_hz: guard,
                frequency_hz: *f,
                psd_db: *d,
            }));
        }
        for (li, level) in levels.iter().enumerate() {
            let mut acc = trials[0].levels[li].clone();
            for t in &trials[1..] {
                add_tally(&mut acc, &t.levels[li]);
            }
            let (rx_power_dbm, snr_db) = match *level {
                NoiseLevel::RxPowerDbm(p) => (Some(p), None),
                NoiseLevel::SnrDb(s) => (None, Some(s)),
            };
            for b in &acc.bands {
                let per: Vec<f64> = b.sq_err.iter().map(|e| 100.0 * (e / b.rows as f64).sqrt()).collect();
                let evm = (per.iter().map(|v| v * v).sum::<f64>() / per.len() as f64).sqrt();
                let ber = BerCount::from_counts(b.bit_errors, b.bits)?;
                run.results.push(ResultRow {
                    experiment: cfg.name.clone(),
                    waveform: waveform.clone(),
                    band_id: b.band.to_string(),
                    guard_hz: guard,
                    fiber_km: fiber,
                    rx_power_dbm,
                    snr_db,
                    with_pam: cfg.with_pam,
                    evm_percent: Some(evm),
                    ber: ber.ber,
                    bit_errors: ber.errors,
                    bits: ber.n,
                    wwpr_db,
                    seed: cfg.seed,
                    version: VERSION.to_string(),
                });
                run.per_subcarrier.extend(per.iter().enumerate().map(|(k, v)| SubcarrierRow {
                    experiment: cfg.name.clone(),
                    waveform: waveform.clone(),
                    band_id: b.band.to_string(),
                    guard_hz: guard,
                    fiber_km: fiber,
                    rx_power_dbm,
                    snr_db,
                    subcarrier: k + 1,
                    evm_percent: *v,
                }));
            }
            if let Some((errors, bits)) = acc.pam {
                let ber = BerCount::from_counts(errors, bits)?;
                run.results.push(ResultRow {
                    experiment: cfg.name.clone(),
                    waveform: waveform.clone(),
                    band_id: "pam".into(),
                    guard_hz: guard,
                    fiber_km: fiber,
                    rx_power_dbm,
                    snr_db,
                    with_pam: true,
                    evm_percent: None,
                    ber: ber.ber,
                    bit_errors: errors,
                    bits,
                    wwpr_db,
                    seed: cfg.seed,
                    version: VERSION.to_string(),
                });
            }
        }
    }
    Ok(run)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULT_FILES: [&str; 3] = ["results.csv", "per_subcarrier_evm.csv", "psd.csv"];

/// Writes the three CSV files into `dir`. Files already written are removed
/// again if a later one fails.
pub fn write_outputs(run: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let result = (|| -> Result<()> {
        let targets: [(&str, &dyn Fn(&Path) -> Result<()>); 3] = [
            ("results.csv", &|p| write_csv(p, &run.results)),
            ("per_subcarrier_evm.csv", &|p| write_csv(p, &run.per_subcarrier)),
            ("psd.csv", &|p| write_csv(p, &run.psd)),
        ];
        for (name, f) in targets {
            let path = dir.join(name);
            written.push(path.clone());
            f(&path)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

/// Runs an experiment and writes its CSV files. `opts` overrides the
/// config's seed and output directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(RunOutput, PathBuf)> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let run = simulate(&cfg, opts.workers)?;
    write_outputs(&run, &dir)?;
    Ok((run, dir))
}

/// Reads `results.csv` back.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
