use num_complex::Complex64;

use super::{snap_bin, LinkConfig};
use crate::error::{Error, Result};
use crate::numerics::filters::gaussian_response;
use crate::numerics::FftPair;
use crate::signal::ComplexSignal;

/// Splits a detected composite into its services. The record spectrum is
/// computed once and shared by every band.
#[derive(Debug, Clone)]
pub struct BandExtractor {
    spectrum: Vec<Complex64>,
    rate: f64,
    modem_rate: f64,
    decimation: usize,
    mask_bw: f64,
    order: u32,
}

impl BandExtractor {
    pub fn new(x: &ComplexSignal, cfg: &LinkConfig) -> Result<Self> {
        if !x.is_real() {
            return Err(Error::invalid("detected signal must be real"));
        }
        let rate = x.sample_rate();
        let ratio = rate / cfg.modem_rate;
        let decimation = ratio.round() as usize;
        if decimation == 0 || (ratio - decimation as f64).abs() > 1e-9 * ratio {
            return Err(Error::invalid(format!(
                "sample rate {rate} is not a multiple of the modem rate {}",
                cfg.modem_rate
            )));
        }
        if x.len() % decimation != 0 {
            return Err(Error::invalid(format!(
                "record length {} is not a multiple of {decimation}",
                x.len()
            )));
        }
        let mut spectrum = x.samples().to_vec();
        FftPair::new(spectrum.len()).forward(&mut spectrum);
        Ok(Self {
            spectrum,
            rate,
            modem_rate: cfg.modem_rate,
            decimation,
            mask_bw: cfg.band_bw + cfg.guard_band / 2.0,
            order: cfg.extraction_order,
        })
    }

    /// Complex baseband of the band at `center_hz`, at the modem rate:
    /// super-Gaussian bandpass, downconversion and decimation in one step.
    /// The mask edge sits halfway into the guard on each side.
    pub fn band(&self, center_hz: f64) -> Result<ComplexSignal> {
        let n = self.spectrum.len();
        let m = n / self.decimation;
        if !(center_hz > self.modem_rate / 2.0 && center_hz + self.modem_rate / 2.0 < self.rate / 2.0) {
            return Err(Error::invalid(format!(
                "band at {center_hz} Hz does not fit between DC and Nyquist"
            )));
        }
        let kc = snap_bin(center_hz, self.rate, n);
        let df = self.rate / n as f64;
        let g = std::f64::consts::SQRT_2 / self.decimation as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let half = m as i64 / 2;
        for (i, o) in out.iter_mut().enumerate() {
            let q = if (i as i64) < half { i as i64 } else { i as i64 - m as i64 };
            let mask = gaussian_response(self.order, 0.0, self.mask_bw, q as f64 * df);
            if mask == 0.0 {
                continue;
            }
            let k = (kc + q).rem_euclid(n as i64) as usize;
            *o = self.spectrum[k] * (g * mask);
        }
        FftPair::new(m).inverse(&mut out);
        Ok(ComplexSignal::from_parts(out, self.modem_rate))
    }

    /// Full-rate lowpass copy for the wired receiver (super-Gaussian of the
    /// same order, passband `±cutoff_hz`).
    pub fn baseband(&self, cutoff_hz: f64) -> Result<ComplexSignal> {
        if !(cutoff_hz > 0.0) {
            return Err(Error::invalid("lowpass cutoff must be positive"));
        }
        let n = self.spectrum.len();
        let freqs = crate::numerics::fft::bin_frequencies(n);
        let mut out: Vec<Complex64> = self
            .spectrum
            .iter()
            .zip(freqs)
            .map(|(v, f)| v * gaussian_response(self.order, 0.0, 2.0 * cutoff_hz, f * self.rate))
            .collect();
        FftPair::new(n).inverse(&mut out);
        for v in out.iter_mut() {
            v.im = 0.0;
        }
        Ok(ComplexSignal::from_parts(out, self.rate))
    }
}

/// One-shot form of [`BandExtractor::band`].
pub fn extract_band(x: &ComplexSignal, center_hz: f64, cfg: &LinkConfig) -> Result<ComplexSignal> {
    BandExtractor::new(x, cfg)?.band(center_hz)
}
