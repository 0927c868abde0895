//! One Monte-Carlo trial: payloads → modems → composite → optical link →
//! extraction → demodulation → error statistics, for every noise level of a
//! sweep group at once.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ExperimentConfig;
use crate::error::{Error, Result, StageExt};
use crate::grid::SymbolGrid;
use crate::link::{apply_optical_link, assemble_composite, BandExtractor, LinkConfig};
use crate::mapping::{demap_qam16, map_pam4, map_qam16, BitStream};
use crate::numerics::{welch_psd, Psd};
use crate::pam::{pam4_receive_ddlms, pam4_transmit, EqualizerState, TRAINING_SYMBOLS};
use crate::signal::ComplexSignal;

/// Independent random streams of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Payload of wireless band 1, 2 or 3.
    Payload(usize),
    PamPayload,
    Noise,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Payload(b) => b as u64,
            Purpose::PamPayload => 16,
            Purpose::Noise => 17,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(master) ^ (purpose << 32 | trial))`.
///
/// Streams depend on the trial index but not on the sweep point, so every
/// point of a sweep sees the same payloads and the same normalized noise.
pub fn derive_seed(master: u64, purpose: Purpose, trial: u64) -> u64 {
    splitmix64(splitmix64(master) ^ (purpose.code() << 32 | (trial & 0xFFFF_FFFF)))
}

/// Noise setting of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    RxPowerDbm(f64),
    SnrDb(f64),
}

/// Error tallies of one band at one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTally {
    pub band: usize,
    /// Σ|rx − ref|² per subcarrier.
    pub sq_err: Vec<f64>,
    pub rows: usize,
    pub bit_errors: u64,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelTally {
    pub bands: Vec<BandTally>,
    /// `(errors, bits)` of the PAM-4 stream.
    pub pam: Option<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub levels: Vec<LevelTally>,
    /// Composite drive spectrum, positive frequencies.
    pub psd: Option<Psd>,
}

/// Smallest `m ≥ n` that is 4 times a 7-smooth number, so the record splits
/// into whole PAM symbols and keeps fast transform sizes.
pub fn record_len(n: usize) -> usize {
    let mut m = n.div_ceil(4);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return 4 * m;
        }
        m += 1;
    }
}

fn qam_grid(seed: u64, rows: usize, width: usize) -> Result<(BitStream, SymbolGrid)> {
    let bits = BitStream::prbs31(seed, 4 * rows * width);
    let grid = SymbolGrid::new(rows, width, map_qam16(&bits)?)?;
    Ok((bits, grid))
}

fn padded(x: ComplexSignal, len: usize) -> Result<ComplexSignal> {
    let rate = x.sample_rate();
    let mut s = x.into_samples();
    s.resize(len, Complex64::new(0.0, 0.0));
    ComplexSignal::new(s, rate)
}

/// Receiver noise standard deviation for a level, given the noiseless
/// detected signal power.
fn noise_sigma(level: NoiseLevel, link: &LinkConfig, signal_power: f64) -> Result<f64> {
    match level {
        NoiseLevel::RxPowerDbm(p) => link
            .noise
            .as_ref()
            .map(|n| n.sigma(p))
            .ok_or_else(|| Error::Config("power sweep without a noise calibration".into())),
        NoiseLevel::SnrDb(s) => Ok((signal_power / 10f64.powf(s / 10.0)).sqrt()),
    }
}

/// Runs trial `trial` of `cfg` at one `(guard, fiber)` pair for every
/// level.
pub fn run_trial(
    cfg: &ExperimentConfig,
    link: &LinkConfig,
    trial: usize,
    levels: &[NoiseLevel],
    want_psd: bool,
) -> Result<TrialOutput> {
    let modem = &cfg.modem;
    let width = modem.n_active();
    let rows = cfg.frames_per_trial * modem.rows_per_frame();
    let frames_len = cfg.frames_per_trial * modem.frame_len();
    let base_len = record_len(frames_len);
    let up = link.upsample_factor()?;
    let dac_len = base_len * up;
    let t = trial as u64;

    let mut payloads = Vec::new();
    let mut bands = Vec::with_capacity(3);
    for b in 1..=3 {
        if cfg.bands.contains(&b) {
            let (bits, grid) = qam_grid(derive_seed(cfg.seed, Purpose::Payload(b), t), rows, width)?;
            let x = modem.modulate(&grid).stage("modulate")?;
            bands.push(padded(x, base_len)?);
            payloads.push((b, bits, grid));
        } else {
            bands.push(ComplexSignal::zeros(base_len, link.modem_rate)?);
        }
    }

    let pam = if cfg.with_pam {
        let n_sym = dac_len as f64 * link.pam_baud / link.dac_rate;
        if (n_sym - n_sym.round()).abs() > 1e-6 {
            return Err(Error::Config("record does not hold a whole number of PAM symbols".into()));
        }
        let bits = BitStream::prbs31(derive_seed(cfg.seed, Purpose::PamPayload, t), 2 * n_sym.round() as usize);
        let x = pam4_transmit(&bits, link.pam_baud, link.dac_rate).stage("pam transmit")?;
        Some((bits, x))
    } else {
        None
    };

    let drive = assemble_composite(&bands, pam.as_ref().map(|p| &p.1), link).stage("assemble")?;
    let psd = if want_psd {
        let seg = 16_384.min(drive.len());
        let full = welch_psd(&drive, seg, 0.5).stage("psd")?;
        let keep: Vec<usize> = (0..full.frequencies.len()).filter(|&i| full.frequencies[i] >= 0.0).collect();
        Some(Psd {
            frequencies: keep.iter().map(|&i| full.frequencies[i]).collect(),
            psd_db: keep.iter().map(|&i| full.psd_db[i]).collect(),
        })
    } else {
        None
    };
    drop(bands);

    let mut quiet = ChaCha8Rng::seed_from_u64(0);
    let clean = apply_optical_link(&drive, link, &mut quiet).stage("optical")?;
    drop(drive);
    let clean_power = clean.power();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Purpose::Noise, t));
    let unit_noise: Vec<f64> = (0..clean.len()).map(|_| StandardNormal.sample(&mut rng)).collect();

    let centers = link.band_centers();
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        let sigma = noise_sigma(level, link, clean_power)?;
        let noisy: Vec<Complex64> = clean
            .samples()
            .iter()
            .zip(&unit_noise)
            .map(|(v, w)| Complex64::new(v.re + sigma * w, 0.0))
            .collect();
        let rx = ComplexSignal::new(noisy, clean.sample_rate())?;
        let ex = BandExtractor::new(&rx, link).stage("extract")?;

        let mut tallies = Vec::new();
        for (b, bits, grid) in &payloads {
            let y = ex.band(centers[b - 1]).stage("extract")?;
            let y = modem.frames(&y, 0, cfg.frames_per_trial)?;
            let train_rows = cfg.training_frames * modem.rows_per_frame();
            let train_sig = modem.frames(&y, 0, cfg.training_frames)?;
            let est = modem
                .estimate(&train_sig, &grid.rows(0, train_rows))
                .stage("channel estimate")?;
            let data_frames = cfg.frames_per_trial - cfg.training_frames;
            let data_sig = modem.frames(&y, cfg.training_frames, data_frames)?;
            let rx_grid = modem.demodulate(&data_sig, &est).stage("demodulate")?;
            let reference = grid.rows(train_rows, rows - train_rows);
            let mut sq_err = vec![0.0; width];
            for m in 0..reference.n_symbols() {
                for ((e, a), r) in sq_err.iter_mut().zip(rx_grid.row(m)).zip(reference.row(m)) {
                    *e += (a - r).norm_sqr();
                }
            }
            let rx_bits = demap_qam16(rx_grid.data());
            let tx_bits = &bits.bits()[4 * train_rows * width..];
            let bit_errors = rx_bits.bits().iter().zip(tx_bits).filter(|(a, b)| a != b).count() as u64;
            tallies.push(BandTally {
                band: *b,
                sq_err,
                rows: reference.n_symbols(),
                bit_errors,
                bits: tx_bits.len() as u64,
            });
        }

        let pam_tally = match &pam {
            Some((bits, _)) => {
                let wired = ex.baseband(link.pam_exclusion_hz).stage("extract")?;
                let levels_tx = map_pam4(bits)?;
                let training = &levels_tx[..TRAINING_SYMBOLS.min(levels_tx.len())];
                let res = pam4_receive_ddlms(&wired, link.pam_baud, &EqualizerState::default(), Some(training))
                    .stage("pam receive")?;
                let tx = &bits.bits()[2 * res.warmup..];
                let errors = res.bits.bits().iter().zip(tx).filter(|(a, b)| a != b).count() as u64;
                Some((errors, tx.len() as u64))
            }
            None => None,
        };
        out.push(LevelTally {
            bands: tallies,
            pam: pam_tally,
        });
    }
    Ok(TrialOutput { levels: out, psd })
}
