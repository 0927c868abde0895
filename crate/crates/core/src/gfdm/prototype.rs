//! Circular prototype pulses for GFDM.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fft_forward, fft_inverse};

/// Largest overlap factor with a coefficient set.
pub const MAX_OVERLAP: usize = 5;

/// Which pulse a [`PrototypeFilter`] is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrototypeKind {
    /// PHYDYAS (Mirabbasi-Martin) frequency samples with overlap `overlap`.
    Phydyas { overlap: usize },
    /// Rectangular pulse one subcarrier period long; orthogonal.
    Rectangular,
}

/// Unit-energy circular pulse of length `M·N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    pub kind: PrototypeKind,
    pub g_time: Vec<f64>,
    /// Block DFT of `g_time`.
    pub g_freq: Vec<Complex64>,
    pub nonzero_freq_bins: usize,
}

impl PrototypeFilter {
    pub fn build(kind: PrototypeKind, m: usize, n: usize) -> Result<Self> {
        match kind {
            PrototypeKind::Phydyas { overlap } => build_phydyas_prototype(m, n, overlap),
            PrototypeKind::Rectangular => build_rectangular_prototype(m, n),
        }
    }

    pub fn len(&self) -> usize {
        self.g_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_time.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.g_time.iter().map(|v| v * v).sum()
    }

    /// Block-DFT bins (signed) holding the nonzero part of the spectrum.
    pub(crate) fn support(&self) -> Vec<(i64, Complex64)> {
        let len = self.g_freq.len() as i64;
        let peak = self.g_freq.iter().map(|v| v.norm()).fold(0.0, f64::max);
        self.g_freq
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 1e-12 * peak)
            .map(|(k, v)| {
                let k = k as i64;
                (if k > len / 2 { k - len } else { k }, *v)
            })
            .collect()
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!("block dimensions must be positive, got M={m} N={n}")));
    }
    Ok(())
}

/// Places the `2K-1` PHYDYAS coefficients on consecutive block-DFT bins
/// around DC, transforms to time and normalizes to unit energy.
pub fn build_phydyas_prototype(m: usize, n: usize, overlap: usize) -> Result<PrototypeFilter> {
    check_dims(m, n)?;
    let coeffs = phydyas_coefficients(overlap)?;
    let len = m * n;
    if 2 * overlap - 1 > len {
        return Err(Error::invalid(format!(
            "{} frequency samples do not fit a {len}-sample block",
            2 * overlap - 1
        )));
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); len];
    for (k, &h) in coeffs.iter().enumerate() {
        spec[k] = Complex64::new(h, 0.0);
        spec[(len - k) % len] = Complex64::new(h, 0.0);
    }
    // ‖g‖² = Σ|G|²/len
    let energy: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / len as f64;
    let scale = energy.sqrt().recip();
    spec.iter_mut().for_each(|v| *v *= scale);
    let g_time = fft_inverse(&spec)?.iter().map(|v| v.re).collect();
    Ok(PrototypeFilter {
        kind: PrototypeKind::Phydyas { overlap },
        g_time,
        g_freq: spec,
        nonzero_freq_bins: 2 * overlap - 1,
    })
}

/// Rectangle over the first `N` samples of the block.
pub fn build_rectangular_prototype(m: usize, n: usize) -> Result<PrototypeFilter> {
    check_dims(m, n)?;
    let len = m * n;
    let amp = (n as f64).sqrt().recip();
    let g_time: Vec<f64> = (0..len).map(|k| if k < n { amp } else { 0.0 }).collect();
    let as_complex: Vec<Complex64> = g_time.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let g_freq = fft_forward(&as_complex)?;
    let peak = g_freq.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let nonzero_freq_bins = g_freq.iter().filter(|v| v.norm() > 1e-12 * peak).count();
    Ok(PrototypeFilter {
        kind: PrototypeKind::Rectangular,
        g_time,
        g_freq,
        nonzero_freq_bins,
    })
}

/// PHYDYAS frequency coefficients `H_0..H_{K-1}` for overlap `K`, `H_0 = 1`.
///
/// They satisfy the Nyquist power-complementary condition
/// `H_k² + H_{K-k}² = 1`, and the pulse
/// `h(t) = 1 + 2Σ H_k cos(2πkt/KT)` vanishes at the edges of its `KT`
/// support (`K ≥ 3`). For `K ≤ 4` these pin the set down; for `K = 5` one degree of
/// freedom remains and is chosen to minimize stopband energy beyond `1/T`.
pub fn phydyas_coefficients(overlap: usize) -> Result<Vec<f64>> {
    match overlap {
        1 => Ok(vec![1.0]),
        2 => Ok(vec![1.0, FRAC_1_SQRT_2]),
        3 => {
            // 1 - 2H1 + 2H2 = 0 with H1² + H2² = 1
            let h1 = (1.0 + 7f64.sqrt()) / 4.0;
            Ok(vec![1.0, h1, (1.0 - h1 * h1).sqrt()])
        }
        4 => {
            // H1 + H3 = ½ + H2, H1² + H3² = 1
            let s = 0.5 + FRAC_1_SQRT_2;
            let p = (s * s - 1.0) / 2.0;
            let h1 = (s + (s * s - 4.0 * p).sqrt()) / 2.0;
            Ok(vec![1.0, h1, FRAC_1_SQRT_2, s - h1])
        }
        5 => {
            static K5: OnceLock<Vec<f64>> = OnceLock::new();
            Ok(K5.get_or_init(phydyas_k5).clone())
        }
        k => Err(Error::UnsupportedParameter(format!(
            "no PHYDYAS coefficient set for overlap {k} (supported: 1..={MAX_OVERLAP})"
        ))),
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// K = 5 set from angle `a`: H1 = cos a, H4 = sin a, H2 = cos b, H3 = sin b,
/// with `b` fixed by the zero-edge condition `1 - 2H1 + 2H2 - 2H3 + 2H4 = 0`.
fn k5_from_angle(a: f64) -> Option<[f64; 5]> {
    let c = (-0.5 + a.cos() - a.sin()) / std::f64::consts::SQRT_2;
    if c.abs() > 1.0 {
        return None;
    }
    let b = c.acos() - PI / 4.0;
    if !(0.0..=PI / 2.0).contains(&b) {
        return None;
    }
    Some([1.0, a.cos(), b.cos(), b.sin(), a.sin()])
}

/// Energy of `H(f) = Σ_k H_|k| sinc(Kf - k)` over `1 ≤ |f|T ≤ 8`.
fn stopband_energy(h: &[f64]) -> f64 {
    let k = h.len() as f64;
    let steps = 4000;
    let df = 7.0 / steps as f64;
    (0..=steps)
        .map(|i| {
            let f = 1.0 + i as f64 * df;
            let v: f64 = (-(h.len() as i64 - 1)..h.len() as i64)
                .map(|j| h[j.unsigned_abs() as usize] * sinc(k * f - j as f64))
                .sum();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * v * v * df
        })
        .sum()
}

fn phydyas_k5() -> Vec<f64> {
    let cost = |a: f64| k5_from_angle(a).map_or(f64::INFINITY, |h| stopband_energy(&h));
    // coarse scan, then golden-section refinement around the best point
    let grid = 400;
    let step = (PI / 2.0) / grid as f64;
    let best = (0..=grid)
        .map(|i| i as f64 * step)
        .min_by(|a, b| cost(*a).partial_cmp(&cost(*b)).unwrap())
        .unwrap();
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(PI / 2.0));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = hi - ratio * (hi - lo);
        let x2 = lo + ratio * (hi - lo);
        if cost(x1) < cost(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    k5_from_angle((lo + hi) / 2.0)
        .expect("optimum lies inside the feasible range")
        .to_vec()
}
