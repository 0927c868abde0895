//! PAM-4 transmitter and receiver with a T-spaced decision-directed LMS
//! equalizer.
//!
//! The transmitter holds each symbol for one symbol period (NRZ) and
//! rationally resamples to the output rate. The receiver integrates over
//! each symbol period (matched to NRZ) on the way back down to one sample
//! per symbol, normalizes to unit power, and equalizes.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{decide_pam4, demap_pam4, map_pam4, BitStream};
use crate::numerics::filters::kaiser_lowpass;
use crate::numerics::{Boundary, Resampler};
use crate::signal::ComplexSignal;

pub const PAM_BAUD_HZ: f64 = 5.5e9;
pub const DDLMS_TAPS: usize = 13;
pub const DDLMS_STEP: f64 = 5e-4;
pub const TRAINING_SYMBOLS: usize = 2000;
pub const WARMUP_SYMBOLS: usize = 5000;

/// Smallest `(p, q)` with `p/q = ratio` to 1e-9, denominators up to 1000.
fn rational(ratio: f64) -> Result<(usize, usize)> {
    for q in 1..=1000usize {
        let p = (ratio * q as f64).round();
        if p >= 1.0 && ((p / q as f64) - ratio).abs() <= 1e-9 * ratio {
            return Ok((p as usize, q));
        }
    }
    Err(Error::invalid(format!("rate ratio {ratio} is not a small rational")))
}

/// Rectangle of `width` intermediate samples, odd length with half-weight
/// ends so it stays centered.
fn centered_rect(width: usize, height: f64) -> Vec<f64> {
    let mut r = vec![height; width + 1];
    r[0] *= 0.5;
    r[width] *= 0.5;
    r
}

fn convolve_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn tx_resampler(baud: f64, out_rate: f64) -> Result<Resampler> {
    if !(baud > 0.0) || !(out_rate >= 2.0 * baud) {
        return Err(Error::invalid(format!(
            "output rate {out_rate} Hz is below twice the {baud} Bd symbol rate"
        )));
    }
    let (up, down) = rational(out_rate / baud)?;
    // hold for `up` intermediate samples, then band-limit to the output Nyquist
    let cutoff = 0.5 / down.max(1) as f64;
    let lp = if down == 1 {
        vec![1.0]
    } else {
        kaiser_lowpass(cutoff, 0.4 * cutoff, 70.0)
    };
    Resampler::with_filter(up, down, convolve_real(&centered_rect(up, 1.0), &lp))
}

/// Mean output power per unit-power i.i.d. input symbol.
fn shaped_power(r: &Resampler) -> f64 {
    let taps = r.taps();
    let half = (taps.len() / 2) as i64;
    let (up, down) = (r.up() as i64, r.down() as i64);
    let phases = up;
    let mut total = 0.0;
    for j in 0..phases {
        let t = j * down + half;
        let mut k = t.rem_euclid(up);
        while k < taps.len() as i64 {
            total += taps[k as usize].powi(2);
            k += up;
        }
    }
    total / phases as f64
}

/// Unnormalized `|H(f)|²` of the transmit shaping at frequency `f` (Hz).
/// For i.i.d. symbols the drive spectrum is proportional to it.
pub(crate) fn tx_shaping_response(baud: f64, out_rate: f64) -> Result<impl Fn(f64) -> f64> {
    let r = tx_resampler(baud, out_rate)?;
    let inter_rate = baud * r.up() as f64;
    let taps = r.taps().to_vec();
    Ok(move |f: f64| {
        let w = 2.0 * std::f64::consts::PI * f / inter_rate;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, h) in taps.iter().enumerate() {
            re += h * (w * k as f64).cos();
            im -= h * (w * k as f64).sin();
        }
        re * re + im * im
    })
}

/// Gain applied by [`pam4_transmit`] to reach unit average power.
pub fn pam4_tx_gain(baud: f64, out_rate: f64) -> Result<f64> {
    Ok(shaped_power(&tx_resampler(baud, out_rate)?).sqrt().recip())
}

/// Gray PAM-4, NRZ shaped, resampled to `out_rate`, unit average power.
///
/// When `symbols·out_rate/baud` is an integer the record is treated as one
/// period of a repeating pattern (no edge transients); otherwise the edges
/// are zero-extended.
pub fn pam4_transmit(bits: &BitStream, baud: f64, out_rate: f64) -> Result<ComplexSignal> {
    let r = tx_resampler(baud, out_rate)?;
    let gain = shaped_power(&r).sqrt().recip();
    let symbols: Vec<Complex64> = map_pam4(bits)?
        .into_iter()
        .map(|v| Complex64::new(v * gain, 0.0))
        .collect();
    let boundary = if (symbols.len() * r.up()) % r.down() == 0 {
        Boundary::Periodic
    } else {
        Boundary::Zero
    };
    let y = r.process(&symbols, boundary)?;
    Ok(ComplexSignal::from_parts(
        y.into_iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
        out_rate,
    ))
}

/// Integrate-and-dump to one sample per symbol, scaled to unit power.
/// Periodic edges when the length divides evenly, zero-extended otherwise.
pub fn pam4_matched_filter(x: &ComplexSignal, baud: f64) -> Result<Vec<f64>> {
    let rate = x.sample_rate();
    if !(rate >= 2.0 * baud) {
        return Err(Error::invalid("input rate is below twice the symbol rate"));
    }
    let (down, up) = rational(rate / baud)?;
    // interpolation lowpass at the input Nyquist, then average over a symbol
    let cutoff = 0.5 / up.max(1) as f64;
    let lp: Vec<f64> = if up == 1 {
        vec![1.0]
    } else {
        kaiser_lowpass(cutoff, 0.4 * cutoff, 70.0)
    };
    let taps = convolve_real(&centered_rect(down, up as f64 / down as f64), &lp);
    let r = Resampler::with_filter(up, down, taps)?;
    let boundary = if (x.len() * up) % down == 0 {
        Boundary::Periodic
    } else {
        Boundary::Zero
    };
    let mut y: Vec<f64> = r.process(x.samples(), boundary)?.iter().map(|v| v.re).collect();
    // whole symbols only
    y.truncate(x.len() * up / down);
    let power = y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64;
    if !(power > 0.0) {
        return Ok(y);
    }
    let g = power.sqrt().recip();
    Ok(y.into_iter().map(|v| v * g).collect())
}

/// Tap vector and adaptation settings of the DD-LMS equalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizerState {
    pub taps: Vec<f64>,
    /// LMS step μ. Zero freezes the taps.
    pub step_size: f64,
    pub center_tap_index: usize,
    /// Symbols excluded from the returned decisions.
    pub warmup: usize,
}

impl Default for EqualizerState {
    fn default() -> Self {
        Self::new(DDLMS_TAPS, DDLMS_STEP).expect("default equalizer is valid")
    }
}

impl EqualizerState {
    /// Center-spike initialization.
    pub fn new(n_taps: usize, step_size: f64) -> Result<Self> {
        if n_taps == 0 || n_taps % 2 == 0 {
            return Err(Error::invalid(format!("tap count must be odd, got {n_taps}")));
        }
        if !(0.0..1.0).contains(&step_size) {
            return Err(Error::invalid(format!("step size {step_size} outside [0, 1)")));
        }
        let mut taps = vec![0.0; n_taps];
        taps[n_taps / 2] = 1.0;
        Ok(Self {
            taps,
            step_size,
            center_tap_index: n_taps / 2,
            warmup: WARMUP_SYMBOLS,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.taps.is_empty() || self.center_tap_index >= self.taps.len() {
            return Err(Error::invalid("center tap lies outside the tap vector"));
        }
        if !(0.0..1.0).contains(&self.step_size) {
            return Err(Error::invalid(format!("step size {} outside [0, 1)", self.step_size)));
        }
        if self.taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("non-finite equalizer tap"));
        }
        Ok(())
    }

    /// Tap-delay line at symbol `k`: `u[i] = y[k + c - i]`, zero outside.
    fn regressor(&self, y: &[f64], k: usize, u: &mut [f64]) {
        let c = self.center_tap_index as i64;
        for (i, slot) in u.iter_mut().enumerate() {
            let idx = k as i64 + c - i as i64;
            *slot = if idx >= 0 && (idx as usize) < y.len() { y[idx as usize] } else { 0.0 };
        }
    }

    /// Output of the FIR with the current taps and no adaptation.
    pub fn filter(&self, y: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.taps.len()];
        (0..y.len())
            .map(|k| {
                self.regressor(y, k, &mut u);
                u.iter().zip(&self.taps).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

/// Equalizer run over a symbol-spaced sequence.
#[derive(Debug, Clone)]
pub struct LmsRun {
    pub outputs: Vec<f64>,
    pub errors: Vec<f64>,
    pub state: EqualizerState,
}

/// Adapts `state` over `y` (one sample per symbol). The first
/// `training.len()` symbols use the known levels as reference, the rest use
/// hard decisions.
pub fn ddlms_equalize(y: &[f64], state: &EqualizerState, training: &[f64]) -> Result<LmsRun> {
    state.validate()?;
    let mut st = state.clone();
    let mut u = vec![0.0; st.taps.len()];
    let mut outputs = Vec::with_capacity(y.len());
    let mut errors = Vec::with_capacity(y.len());
    for k in 0..y.len() {
        st.regressor(y, k, &mut u);
        let z: f64 = u.iter().zip(&st.taps).map(|(a, b)| a * b).sum();
        let reference = training.get(k).copied().unwrap_or_else(|| decide_pam4(z));
        let e = reference - z;
        if st.step_size > 0.0 {
            for (w, x) in st.taps.iter_mut().zip(&u) {
                *w += st.step_size * e * x;
            }
        }
        outputs.push(z);
        errors.push(e);
    }
    if st.taps.iter().any(|t| !t.is_finite()) {
        return Err(Error::NotConverged("equalizer taps diverged".into()));
    }
    Ok(LmsRun {
        outputs,
        errors,
        state: st,
    })
}

/// One (time offset in symbol periods, amplitude) point of an eye diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeSample {
    pub time_offset: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct PamRxResult {
    /// Bits of every symbol after the warm-up.
    pub bits: BitStream,
    /// Decided levels after the warm-up.
    pub decisions: Vec<f64>,
    /// Equalizer outputs after the warm-up.
    pub equalized: Vec<f64>,
    pub state: EqualizerState,
    pub eye: Vec<EyeSample>,
    /// Symbols dropped from the front.
    pub warmup: usize,
}

/// Eye points spanning two symbol periods, from the received waveform
/// scaled to unit power. At most `max_points` points after the warm-up.
pub fn eye_samples(x: &ComplexSignal, baud: f64, skip_symbols: usize, max_points: usize) -> Vec<EyeSample> {
    let rate = x.sample_rate();
    let rms = x.power().sqrt();
    let g = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let start = ((skip_symbols as f64) * rate / baud).ceil() as usize;
    x.samples()
        .iter()
        .enumerate()
        .skip(start)
        .take(max_points)
        .map(|(k, v)| {
            let t = k as f64 * baud / rate;
            EyeSample {
                time_offset: (t + 1.0).rem_euclid(2.0) - 1.0,
                amplitude: v.re * g,
            }
        })
        .collect()
}

/// Writes eye points as CSV with header `time_offset_symbols,amplitude`.
pub fn write_eye_csv<W: Write>(eye: &[EyeSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_offset_symbols", "amplitude"])?;
    for p in eye {
        w.write_record([format!("{:.6}", p.time_offset), format!("{:.6e}", p.amplitude)])?;
    }
    w.flush()?;
    Ok(())
}

/// Matched filter, DD-LMS equalization, decisions and eye export.
///
/// Fails with [`Error::NotConverged`] when the mean squared error after the
/// warm-up is no lower than over the first 1000 symbols and the eye is
/// closed (MSE above 0.1).
pub fn pam4_receive_ddlms(
    x: &ComplexSignal,
    baud: f64,
    state: &EqualizerState,
    training: Option<&[f64]>,
) -> Result<PamRxResult> {
    let y = pam4_matched_filter(x, baud)?;
    if y.len() <= state.warmup {
        return Err(Error::invalid(format!(
            "{} symbols do not cover the {}-symbol warm-up",
            y.len(),
            state.warmup
        )));
    }
    let run = ddlms_equalize(&y, state, training.unwrap_or(&[]))?;
    let mse = |e: &[f64]| e.iter().map(|v| v * v).sum::<f64>() / e.len().max(1) as f64;
    let early = mse(&run.errors[..run.errors.len().min(1000)]);
    let late = mse(&run.errors[state.warmup..]);
    if late >= early && late > 0.1 {
        return Err(Error::NotConverged(format!(
            "error power {late:.3e} after warm-up, {early:.3e} at start"
        )));
    }
    let equalized = run.outputs[state.warmup..].to_vec();
    let decisions: Vec<f64> = equalized.iter().map(|&v| decide_pam4(v)).collect();
    Ok(PamRxResult {
        bits: demap_pam4(&decisions),
        decisions,
        equalized,
        state: run.state,
        eye: eye_samples(x, baud, state.warmup, 20_000),
        warmup: state.warmup,
    })
}
