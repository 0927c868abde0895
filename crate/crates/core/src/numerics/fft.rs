//! Discrete Fourier transforms.
//!
//! One convention is used across the crate: the forward transform is the
//! plain sum `X[k] = Σ x[n]·e^{-j2πkn/N}` and the inverse carries the `1/N`
//! factor, `x[n] = (1/N)·Σ X[k]·e^{+j2πkn/N}`. An OFDM modulator is then a
//! bare inverse transform.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub fn fft_forward(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::invalid("fft of empty input"));
    }
    let plan = FftPair::new(x.len());
    let mut buf = x.to_vec();
    plan.forward(&mut buf);
    Ok(buf)
}

pub fn fft_inverse(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::invalid("inverse fft of empty input"));
    }
    let plan = FftPair::new(x.len());
    let mut buf = x.to_vec();
    plan.inverse(&mut buf);
    Ok(buf)
}

/// Planned forward/inverse transforms of one length, for hot loops.
#[derive(Clone)]
pub struct FftPair {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "transform length must be positive");
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
    }

    /// In-place inverse transform including the 1/N factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

/// Frequency (in cycles/sample, in `[-0.5, 0.5)`) of each bin of a length-`n`
/// transform, in natural FFT order.
pub fn bin_frequencies(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k < n.div_ceil(2) {
                k as f64 / n as f64
            } else {
                (k as f64 - n as f64) / n as f64
            }
        })
        .collect()
}
