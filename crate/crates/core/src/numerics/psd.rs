//! Welch power spectral density estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPair;
use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// Two-sided PSD on ascending frequencies (Hz), stored in dB re 1 unit²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub psd_db: Vec<f64>,
}

impl Psd {
    /// Builds a PSD from linear-scale density values.
    pub fn from_linear(frequencies: Vec<f64>, linear: &[f64]) -> Self {
        let psd_db = linear
            .iter()
            .map(|&v| 10.0 * v.max(1e-300).log10())
            .collect();
        Self {
            frequencies,
            psd_db,
        }
    }

    pub fn linear(&self) -> Vec<f64> {
        self.psd_db.iter().map(|d| 10f64.powf(d / 10.0)).collect()
    }

    /// Frequency spacing between bins.
    pub fn resolution(&self) -> f64 {
        if self.frequencies.len() < 2 {
            0.0
        } else {
            self.frequencies[1] - self.frequencies[0]
        }
    }

    /// ∫ PSD df over `[lo, hi]` (rectangle rule on the bin grid).
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let df = self.resolution();
        self.frequencies
            .iter()
            .zip(&self.psd_db)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, d)| 10f64.powf(d / 10.0) * df)
            .sum()
    }

    /// Returns a copy with every density multiplied by `gain` (linear).
    pub fn scaled(&self, gain: f64) -> Self {
        let offset = 10.0 * gain.log10();
        Self {
            frequencies: self.frequencies.clone(),
            psd_db: self.psd_db.iter().map(|d| d + offset).collect(),
        }
    }
}

fn hann(len: usize) -> Vec<f64> {
    // periodic Hann, the usual choice for spectral averaging
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos())
        .collect()
}

/// Hann-windowed averaged periodogram with density scaling, so that
/// `Σ psd·Δf` equals the mean signal power.
pub fn welch_psd(x: &ComplexSignal, segment_len: usize, overlap: f64) -> Result<Psd> {
    if segment_len == 0 {
        return Err(Error::invalid("segment length must be positive"));
    }
    if segment_len > x.len() {
        return Err(Error::invalid(format!(
            "segment length {segment_len} exceeds signal length {}",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap {overlap} outside [0, 1)")));
    }
    let step = (((1.0 - overlap) * segment_len as f64).round() as usize).max(1);
    let window = hann(segment_len);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPair::new(segment_len);
    let samples = x.samples();

    let mut acc = vec![0.0; segment_len];
    let mut n_seg = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut start = 0;
    while start + segment_len <= samples.len() {
        for (b, (s, w)) in buf.iter_mut().zip(samples[start..].iter().zip(&window)) {
            *b = s * w;
        }
        fft.forward(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
        n_seg += 1;
        start += step;
    }

    let fs = x.sample_rate();
    let scale = 1.0 / (n_seg as f64 * fs * win_energy);
    // reorder to ascending frequency: bins ceil(n/2).. are negative
    let split = segment_len.div_ceil(2);
    let order: Vec<usize> = (split..segment_len).chain(0..split).collect();
    let freqs = order
        .iter()
        .map(|&k| {
            let f = k as f64 / segment_len as f64;
            (if k >= split { f - 1.0 } else { f }) * fs
        })
        .collect();
    let linear: Vec<f64> = order.iter().map(|&k| acc[k] * scale).collect();
    Ok(Psd::from_linear(freqs, &linear))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn tone_sum(freqs: &[f64], fs: f64, n: usize) -> ComplexSignal {
        ComplexSignal::new(
            (0..n)
                .map(|k| {
                    freqs
                        .iter()
                        .map(|f| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 / fs))
                        .sum()
                })
                .collect(),
            fs,
        )
        .unwrap()
    }

    #[test]
    fn white_noise_is_flat_and_parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 256 * 400;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = ComplexSignal::new(
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * s, im * s)
                })
                .collect(),
            1e6,
        )
        .unwrap();
        let psd = welch_psd(&x, 256, 0.5).unwrap();
        let total = psd.integrate(f64::MIN, f64::MAX);
        assert!((total / x.power() - 1.0).abs() < 0.01);
        let flat = 10.0 * (x.power() / 1e6).log10();
        for d in &psd.psd_db {
            assert!((d - flat).abs() < 1.0, "bin deviates: {d} vs {flat}");
        }
    }

    #[test]
    fn tone_gives_single_peak() {
        let fs = 1e6;
        let x = tone_sum(&[125e3], fs, 8192);
        let psd = welch_psd(&x, 1024, 0.5).unwrap();
        let (imax, _) = psd
            .psd_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((psd.frequencies[imax] - 125e3).abs() < 1e-6);
        let total = psd.integrate(f64::MIN, f64::MAX);
        assert!((total - 1.0).abs() < 0.01);
    }

    #[test]
    fn equal_tones_equal_peaks() {
        let fs = 1e6;
        let x = tone_sum(&[-250e3, 125e3], fs, 16384);
        let psd = welch_psd(&x, 1024, 0.5).unwrap();
        let at = |f: f64| {
            let i = psd.frequencies.iter().position(|v| (v - f).abs() < 1.0).unwrap();
            psd.psd_db[i]
        };
        assert!((at(-250e3) - at(125e3)).abs() < 0.1);
    }

    #[test]
    fn argument_checks() {
        let x = tone_sum(&[1.0], 10.0, 100);
        assert!(welch_psd(&x, 200, 0.5).is_err());
        assert!(welch_psd(&x, 50, 1.0).is_err());
        assert!(welch_psd(&x, 0, 0.0).is_err());
    }
}
