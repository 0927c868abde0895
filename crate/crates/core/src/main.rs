use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pon_phy::harness::{preset, run_experiment, validate_config, ExperimentConfig, RunOptions, PRESETS};
use pon_phy::numerics::welch_psd;
use pon_phy::{Error, Result};

#[derive(Parser)]
#[command(name = "pon-phy", version, about = "Converged optical access link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV results.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: config's output_dir, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print it with defaults filled in.
    Validate { config: PathBuf },
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
    /// Single-band baseband spectrum of a preset's waveform as CSV.
    Psd {
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn is_config_error(e: &Error) -> bool {
    match e {
        Error::Config(_) | Error::Overlap(_) | Error::Json(_) => true,
        Error::Stage { source, .. } => is_config_error(source),
        _ => false,
    }
}

fn psd_csv(name: &str, seed: u64) -> Result<String> {
    let cfg: ExperimentConfig = preset(name)?;
    let modem = &cfg.modem;
    let rows = 200 * modem.rows_per_frame();
    let bits = pon_phy::mapping::BitStream::prbs31(seed, 4 * rows * modem.n_active());
    let grid = pon_phy::SymbolGrid::new(rows, modem.n_active(), pon_phy::mapping::map_qam16(&bits)?)?;
    let x = modem.modulate(&grid)?;
    let psd = welch_psd(&x, 4096, 0.5)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frequency_hz", "psd_db"])?;
    for (f, d) in psd.frequencies.iter().zip(&psd.psd_db) {
        w.write_record([f.to_string(), d.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let cfg = validate_config(&config)?;
            let (run, dir) = run_experiment(&cfg, &RunOptions { workers, seed, out })?;
            for r in &run.results {
                let evm = r.evm_percent.map(|v| format!("{v:.3}%")).unwrap_or_else(|| "-".into());
                let x = match (r.rx_power_dbm, r.snr_db) {
                    (Some(p), _) => format!("{p} dBm"),
                    (_, Some(s)) => format!("{s} dB SNR"),
                    _ => String::new(),
                };
                println!(
                    "{} band {} guard {} MHz fiber {} km {}: EVM {} BER {:.3e}",
                    r.waveform,
                    r.band_id,
                    r.guard_hz / 1e6,
                    r.fiber_km,
                    x,
                    evm,
                    r.ber
                );
            }
            eprintln!("wrote {}", dir.display());
        }
        Command::Validate { config } => {
            let cfg = validate_config(&config)?;
            println!("{}", cfg.to_json()?);
        }
        Command::Presets { name } => match name {
            Some(n) => println!("{}", preset(&n)?.to_json()?),
            None => {
                for p in PRESETS {
                    println!("{p}");
                }
            }
        },
        Command::Psd { preset, seed, out } => {
            let text = psd_csv(&preset, seed.unwrap_or(1))?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
