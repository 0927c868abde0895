//! Rational-rate polyphase resampling.
//!
//! Filters are zero-phase: output sample `j` is aligned with input time
//! `j·down/up`, so no group-delay bookkeeping is needed downstream.

use num_complex::Complex64;

use super::filters::kaiser_lowpass;
use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// How samples beyond either end of the input are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Zero outside the record.
    Zero,
    /// The record is one period of a periodic waveform, as played out by an
    /// arbitrary waveform generator looping its memory.
    Periodic,
}

const STOPBAND_DB: f64 = 70.0;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Polyphase up-by-`up`, filter, down-by-`down` engine with a centered
/// (odd-length) filter defined at the intermediate rate.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
    half: usize,
}

impl Resampler {
    /// Anti-alias resampler: passband to 80% of the narrower Nyquist,
    /// stopband from 120%, at least 60 dB rejection.
    pub fn new(up: usize, down: usize) -> Result<Self> {
        if up == 0 || down == 0 {
            return Err(Error::invalid(format!(
                "resampling factors must be positive, got {up}/{down}"
            )));
        }
        let g = gcd(up, down);
        let (up, down) = (up / g, down / g);
        if up == 1 && down == 1 {
            return Ok(Self {
                up,
                down,
                taps: vec![1.0],
                half: 0,
            });
        }
        let cutoff = 0.5 / up.max(down) as f64;
        let taps: Vec<f64> = kaiser_lowpass(cutoff, 0.4 * cutoff, STOPBAND_DB)
            .into_iter()
            .map(|v| v * up as f64)
            .collect();
        Self::with_filter(up, down, taps)
    }

    /// Uses caller-supplied taps (odd length, centered, gain included).
    pub fn with_filter(up: usize, down: usize, taps: Vec<f64>) -> Result<Self> {
        if up == 0 || down == 0 {
            return Err(Error::invalid("resampling factors must be positive"));
        }
        if taps.len() % 2 == 0 {
            return Err(Error::invalid("resampler filter must have odd length"));
        }
        let half = taps.len() / 2;
        Ok(Self {
            up,
            down,
            taps,
            half,
        })
    }

    pub fn up(&self) -> usize {
        self.up
    }

    pub fn down(&self) -> usize {
        self.down
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, x: &[Complex64], boundary: Boundary) -> Result<Vec<Complex64>> {
        let n_in = x.len();
        if boundary == Boundary::Periodic && (n_in * self.up) % self.down != 0 {
            return Err(Error::invalid(format!(
                "periodic resampling needs len·up divisible by down ({n_in}·{}/{})",
                self.up, self.down
            )));
        }
        let n_out = self.output_len(n_in);
        let up = self.up as i64;
        let half = self.half as i64;
        let last = self.taps.len() as i64 - 1;
        let n_in_i = n_in as i64;
        let mut y = vec![Complex64::new(0.0, 0.0); n_out];
        if n_in == 0 {
            return Ok(y);
        }
        for (j, out) in y.iter_mut().enumerate() {
            let t = j as i64 * self.down as i64 + half;
            // taps index k = t - i·up must lie in [0, last]
            let i_lo = (t - last).div_euclid(up) + i64::from((t - last).rem_euclid(up) != 0);
            let i_hi = t.div_euclid(up);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in i_lo..=i_hi {
                let sample = match boundary {
                    Boundary::Zero => {
                        if i < 0 || i >= n_in_i {
                            continue;
                        }
                        x[i as usize]
                    }
                    Boundary::Periodic => x[i.rem_euclid(n_in_i) as usize],
                };
                acc += sample * self.taps[(t - i * up) as usize];
            }
            *out = acc;
        }
        Ok(y)
    }
}

/// Resamples by `up/down` with an anti-alias filter; edges are zero-extended.
pub fn resample_rational(x: &ComplexSignal, up: usize, down: usize) -> Result<ComplexSignal> {
    let r = Resampler::new(up, down)?;
    resample_with(x, &r, Boundary::Zero)
}

/// Resamples a record treated as one period of a periodic waveform.
pub fn resample_periodic(x: &ComplexSignal, up: usize, down: usize) -> Result<ComplexSignal> {
    let r = Resampler::new(up, down)?;
    resample_with(x, &r, Boundary::Periodic)
}

pub fn resample_with(x: &ComplexSignal, r: &Resampler, boundary: Boundary) -> Result<ComplexSignal> {
    let y = r.process(x.samples(), boundary)?;
    Ok(ComplexSignal::from_parts(
        y,
        x.sample_rate() * r.up() as f64 / r.down() as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, fs: f64, n: usize) -> ComplexSignal {
        ComplexSignal::new(
            (0..n)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * freq * k as f64 / fs))
                .collect(),
            fs,
        )
        .unwrap()
    }

    #[test]
    fn identity_ratio() {
        let x = tone(1e6, 1e8, 100);
        let y = resample_rational(&x, 1, 1).unwrap();
        assert_eq!(x, y);
        let y = resample_rational(&x, 7, 7).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_factor_rejected() {
        let x = tone(1e6, 1e8, 10);
        assert!(resample_rational(&x, 0, 1).is_err());
        assert!(resample_rational(&x, 1, 0).is_err());
    }

    #[test]
    fn tone_upsampled_by_ten() {
        let x = tone(10e6, 2e9, 4000);
        let y = resample_rational(&x, 10, 1).unwrap();
        assert_eq!(y.sample_rate(), 20e9);
        assert_eq!(y.len(), 40000);
        // away from the edge transients the output is the analytic tone
        let mut max_db: f64 = 0.0;
        for j in 5000..35000 {
            let expect = Complex64::from_polar(1.0, 2.0 * PI * 10e6 * j as f64 / 20e9);
            let got = y.samples()[j];
            max_db = max_db.max((20.0 * got.norm().log10()).abs());
            assert!((got - expect).norm() < 1e-3, "j={j}");
        }
        assert!(max_db < 0.1);
    }

    #[test]
    fn periodic_tone_has_no_edges() {
        // 16 cycles over the record
        let n = 1600;
        let x = tone(2e9 * 16.0 / n as f64, 2e9, n);
        let y = resample_periodic(&x, 10, 1).unwrap();
        for (j, got) in y.samples().iter().enumerate() {
            let expect = Complex64::from_polar(1.0, 2.0 * PI * 16.0 * j as f64 / (10 * n) as f64);
            assert!((got - expect).norm() < 1e-3);
        }
    }

    #[test]
    fn pam_rate_conversion_lengths() {
        // 5.5 GBaud impulse train at one sample per symbol to the 20 GSa/s DAC
        let n = 1100;
        let x = ComplexSignal::from_real(
            &(0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>(),
            5.5e9,
        )
        .unwrap();
        let y = resample_periodic(&x, 40, 11).unwrap();
        assert_eq!(y.len(), 4000);
        assert!((y.sample_rate() - 20e9).abs() < 1e-3);
        let z = resample_rational(&x, 40, 11).unwrap();
        assert_eq!(z.len(), 4000);
    }

    #[test]
    fn periodic_length_must_divide() {
        let x = tone(1e6, 5.5e9, 10);
        assert!(resample_periodic(&x, 40, 11).is_err());
    }

    #[test]
    fn anti_alias_stopband() {
        let r = Resampler::new(40, 11).unwrap();
        let cutoff = 0.5 / 40.0;
        let resp = |f: f64| -> f64 {
            r.taps()
                .iter()
                .enumerate()
                .map(|(k, h)| h * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64))
                .sum::<Complex64>()
                .norm()
                / 40.0
        };
        assert!((resp(0.0) - 1.0).abs() < 1e-9);
        for i in 0..200 {
            let f = 1.2 * cutoff + (0.5 - 1.2 * cutoff) * i as f64 / 200.0;
            assert!(20.0 * resp(f).log10() < -60.0, "f={f}");
        }
        for i in 0..50 {
            let f = 0.8 * cutoff * i as f64 / 50.0;
            assert!((20.0 * resp(f).log10()).abs() < 0.1);
        }
    }
}
