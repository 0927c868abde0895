//! Shared signal-processing primitives: transforms, filter design, rational
//! resampling, frequency translation and spectral estimation.
//!
//! Everything here is a pure function of its inputs.

pub mod fft;
pub mod filters;
pub mod psd;
pub mod resample;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use fft::{fft_forward, fft_inverse, FftPair};
pub use filters::{design_dolph_chebyshev, design_gaussian_bandpass, FilterTaps};
pub use psd::{welch_psd, Psd};
pub use resample::{resample_periodic, resample_rational, Boundary, Resampler};

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// `y[k] = x[k]·e^{j2π·f_shift·k/fs}`.
pub fn frequency_shift(x: &ComplexSignal, f_shift_hz: f64) -> Result<ComplexSignal> {
    let fs = x.sample_rate();
    if !(f_shift_hz.abs() < fs / 2.0) {
        return Err(Error::invalid(format!(
            "shift {f_shift_hz} Hz not below Nyquist {}",
            fs / 2.0
        )));
    }
    Ok(ComplexSignal::from_parts(
        shifted(x.samples(), f_shift_hz / fs),
        fs,
    ))
}

/// Multiplies by a unit-modulus phasor `e^{j2π·f·k}`, `f` in cycles/sample.
/// The phase is reduced modulo one cycle per sample to keep it exact on long
/// records.
pub(crate) fn shifted(x: &[Complex64], freq_norm: f64) -> Vec<Complex64> {
    x.iter()
        .enumerate()
        .map(|(k, v)| {
            let cycles = (freq_norm * k as f64).rem_euclid(1.0);
            v * Complex64::from_polar(1.0, 2.0 * PI * cycles)
        })
        .collect()
}

/// Linear convolution of two complex sequences.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
