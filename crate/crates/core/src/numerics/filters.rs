//! FIR and frequency-mask filter designs.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// FIR filter coefficients with a human-readable label.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps {
    pub coefficients: Vec<Complex64>,
    pub description: String,
}

impl FilterTaps {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `H(f) = Σ h[k]·e^{-j2πfk}` at `freq` cycles/sample.
    pub fn response(&self, freq: f64) -> Complex64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, h)| h * Complex64::from_polar(1.0, -2.0 * PI * freq * k as f64))
            .sum()
    }
}

/// Chebyshev polynomial `T_n(x)` valid for any real `x`.
fn chebyshev_poly(order: f64, x: f64, odd_order: bool) -> f64 {
    if x > 1.0 {
        (order * x.acosh()).cosh()
    } else if x < -1.0 {
        let v = (order * (-x).acosh()).cosh();
        if odd_order {
            -v
        } else {
            v
        }
    } else {
        (order * x.acos()).cos()
    }
}

/// Dolph-Chebyshev window of `len` points with equiripple sidelobes
/// `atten_db` below the mainlobe, peak-normalized to 1.
///
/// Built by sampling `T_{len-1}(β·cos(πk/len))` and transforming back to time,
/// then mirroring so the result is exactly symmetric.
pub fn chebyshev_window(len: usize, atten_db: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let order = (len - 1) as f64;
    let odd_order = (len - 1) % 2 == 1;
    let ripple = 10f64.powf(atten_db / 20.0);
    let beta = (ripple.acosh() / order).cosh();
    let n = len as f64;

    let p: Vec<Complex64> = (0..len)
        .map(|k| {
            let v = chebyshev_poly(order, beta * (PI * k as f64 / n).cos(), odd_order);
            if len % 2 == 0 {
                Complex64::from_polar(v, PI * k as f64 / n)
            } else {
                Complex64::new(v, 0.0)
            }
        })
        .collect();
    // Real part of the forward DFT; len is small so the direct sum is fine.
    let dft_re = |m: usize| -> f64 {
        p.iter()
            .enumerate()
            .map(|(k, v)| (v * Complex64::from_polar(1.0, -2.0 * PI * (k * m) as f64 / n)).re)
            .sum()
    };

    let mut w = Vec::with_capacity(len);
    if len % 2 == 1 {
        let half: Vec<f64> = (0..len.div_ceil(2)).map(dft_re).collect();
        w.extend(half.iter().skip(1).rev());
        w.extend(half.iter());
    } else {
        let half: Vec<f64> = (0..len / 2 + 1).map(dft_re).collect();
        w.extend(half[1..].iter().rev());
        w.extend(half[1..].iter());
    }
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    w.iter_mut().for_each(|v| *v /= peak);
    w
}

/// Dolph-Chebyshev lowpass prototype modulated to `center_freq_norm`
/// (cycles/sample): `h[k] = w[k]/Σw · e^{j2π·f_c·k}`, so `H(f_c) = 1`.
///
/// Negative centers are accepted so sub-bands below DC can be filtered.
pub fn design_dolph_chebyshev(
    length: usize,
    sidelobe_atten_db: f64,
    center_freq_norm: f64,
) -> Result<FilterTaps> {
    if length == 0 {
        return Err(Error::invalid("filter length must be at least 1"));
    }
    if !(sidelobe_atten_db > 0.0) {
        return Err(Error::invalid(format!(
            "sidelobe attenuation must be positive, got {sidelobe_atten_db}"
        )));
    }
    if !(center_freq_norm.abs() < 0.5) {
        return Err(Error::invalid(format!(
            "center frequency {center_freq_norm} outside (-0.5, 0.5)"
        )));
    }
    let w = chebyshev_window(length, sidelobe_atten_db);
    let sum: f64 = w.iter().sum();
    let coefficients = w
        .iter()
        .enumerate()
        .map(|(k, v)| Complex64::from_polar(v / sum, 2.0 * PI * center_freq_norm * k as f64))
        .collect();
    Ok(FilterTaps {
        coefficients,
        description: format!(
            "dolph-chebyshev L={length} {sidelobe_atten_db} dB @ {center_freq_norm:.6} cyc/sa"
        ),
    })
}

/// Super-Gaussian magnitude response `exp(-½((f-center)/σ)^(2·order))` with
/// `σ = bandwidth/2`.
pub fn gaussian_response(order: u32, center_hz: f64, bandwidth_hz: f64, freq_hz: f64) -> f64 {
    let sigma = bandwidth_hz / 2.0;
    let u = ((freq_hz - center_hz) / sigma).abs();
    // u^(2·order) overflows to inf for far-out bins, which gives exp(-inf) = 0.
    (-0.5 * u.powi(2 * order as i32)).exp()
}

/// Zero-phase super-Gaussian mask evaluated on the bins of an `n_bins`-point
/// transform at `sample_rate` (natural FFT order, signed frequencies).
pub fn design_gaussian_bandpass(
    order: u32,
    center_hz: f64,
    bandwidth_hz: f64,
    sample_rate: f64,
    n_bins: usize,
) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::invalid("gaussian filter order must be at least 1"));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(Error::invalid("gaussian filter bandwidth must be positive"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if center_hz < 0.0 || center_hz + bandwidth_hz / 2.0 >= sample_rate / 2.0 {
        return Err(Error::invalid(format!(
            "gaussian passband {center_hz} ± {} Hz exceeds Nyquist {}",
            bandwidth_hz / 2.0,
            sample_rate / 2.0
        )));
    }
    Ok(super::fft::bin_frequencies(n_bins)
        .into_iter()
        .map(|f| gaussian_response(order, center_hz, bandwidth_hz, f * sample_rate))
        .collect())
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc lowpass. `cutoff` and `transition` are in
/// cycles/sample; the result has odd length and unit DC gain.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let est = ((atten_db - 7.95) / (2.285 * 2.0 * PI * transition)).ceil() as usize;
    let half = est.div_ceil(2).max(1);
    let len = 2 * half + 1;
    let i0_beta = bessel_i0(beta);
    let mut h: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 - half as f64;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / half as f64;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response_db(taps: &FilterTaps, grid: usize) -> Vec<f64> {
        (0..grid)
            .map(|i| {
                let f = i as f64 / grid as f64 - 0.5;
                20.0 * taps.response(f).norm().max(1e-300).log10()
            })
            .collect()
    }

    #[test]
    fn degenerate_length_one() {
        let taps = design_dolph_chebyshev(1, 40.0, 0.0).unwrap();
        assert_eq!(taps.coefficients, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn length_74_is_exactly_symmetric() {
        let taps = design_dolph_chebyshev(74, 40.0, 0.0).unwrap();
        assert_eq!(taps.len(), 74);
        for k in 0..74 {
            assert_eq!(taps.coefficients[k].re, taps.coefficients[73 - k].re);
            assert_eq!(taps.coefficients[k].im, 0.0);
        }
        let w = chebyshev_window(75, 40.0);
        for k in 0..75 {
            assert_eq!(w[k], w[74 - k]);
        }
    }

    #[test]
    fn unit_gain_at_center() {
        for fc in [0.0, 0.1, -0.03564453125, 0.31] {
            let taps = design_dolph_chebyshev(74, 40.0, fc).unwrap();
            assert!((taps.response(fc) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    /// Sidelobe peaks sit at the design attenuation, equiripple.
    #[test]
    fn sidelobes_equiripple_at_design_level() {
        for (len, atten) in [(74usize, 40.0), (74, 60.0), (33, 50.0)] {
            let taps = design_dolph_chebyshev(len, atten, 0.0).unwrap();
            let db = response_db(&taps, 8192);
            let peak = db.iter().cloned().fold(f64::MIN, f64::max);
            let center = 4096;
            // walk out of the mainlobe to its first null
            let mut k = center;
            while k + 1 < db.len() && db[k + 1] < db[k] {
                k += 1;
            }
            let mut lobes = Vec::new();
            for i in k + 1..db.len() - 1 {
                if db[i] > db[i - 1] && db[i] >= db[i + 1] {
                    lobes.push(db[i] - peak);
                }
            }
            assert!(!lobes.is_empty());
            for lobe in &lobes {
                assert!((lobe + atten).abs() < 0.5, "len {len} atten {atten}: lobe {lobe}");
            }
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(design_dolph_chebyshev(0, 40.0, 0.0).is_err());
        assert!(design_dolph_chebyshev(10, 0.0, 0.0).is_err());
        assert!(design_dolph_chebyshev(10, 40.0, 0.5).is_err());
    }

    #[test]
    fn designs_are_deterministic() {
        let a = design_dolph_chebyshev(74, 40.0, 0.0123).unwrap();
        let b = design_dolph_chebyshev(74, 40.0, 0.0123).unwrap();
        assert_eq!(a, b);
        assert_eq!(kaiser_lowpass(0.05, 0.02, 70.0), kaiser_lowpass(0.05, 0.02, 70.0));
    }

    #[test]
    fn gaussian_closed_form_points() {
        let (c, bw) = (0.0, 152e6);
        assert_eq!(gaussian_response(12, c, bw, c), 1.0);
        let edge = gaussian_response(12, c, bw, c + bw / 2.0);
        assert!((edge - (-0.5f64).exp()).abs() < 1e-15);
        assert!((edge - 0.6065).abs() < 1e-4);
        let far = gaussian_response(12, c, bw, c + bw);
        assert!(far < 1e-200);
        assert!(gaussian_response(12, c, bw, c - bw) < 1e-200);
    }

    #[test]
    fn gaussian_mask_on_bins() {
        let mask = design_gaussian_bandpass(12, 0.0, 152e6, 2e9, 1024).unwrap();
        assert_eq!(mask[0], 1.0);
        assert!(mask[512] < 1e-200);
        assert!(design_gaussian_bandpass(12, 0.95e9, 152e6, 2e9, 1024).is_err());
        assert!(design_gaussian_bandpass(0, 0.0, 152e6, 2e9, 1024).is_err());
        assert!(design_gaussian_bandpass(12, 0.0, -1.0, 2e9, 1024).is_err());
    }

    #[test]
    fn kaiser_meets_attenuation() {
        let h = kaiser_lowpass(0.05, 0.02, 70.0);
        let taps = FilterTaps {
            coefficients: h.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            description: String::new(),
        };
        for i in 0..400 {
            let f = 0.06 + 0.44 * i as f64 / 400.0;
            assert!(taps.response(f).norm() < 10f64.powf(-60.0 / 20.0), "f={f}");
        }
        for i in 0..100 {
            let f = 0.04 * i as f64 / 100.0;
            assert!((taps.response(f).norm() - 1.0).abs() < 0.01);
        }
    }
}
