//! Types shared by the three multicarrier modems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subcarrier spacing of every waveform here: 2 GSa/s over a 1024-point
/// transform.
pub const SUBCARRIER_SPACING_HZ: f64 = 1.953_125e6;
pub const STANDARD_FFT_SIZE: usize = 1024;
pub const STANDARD_ACTIVE: usize = 78;

/// Numerology of a CP-OFDM style multicarrier symbol.
///
/// `active_bins` holds signed subcarrier indices (negative below DC) in
/// ascending frequency order; subcarrier `n` of a [`SymbolGrid`] row is
/// `active_bins[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticarrierConfig {
    pub n_fft: usize,
    pub active_bins: Vec<i64>,
    pub cp_len: usize,
    pub subcarrier_spacing: f64,
}

impl MulticarrierConfig {
    /// `n_active` contiguous subcarriers split evenly around an unused DC bin
    /// (the extra one goes above DC when `n_active` is odd).
    pub fn centered(n_fft: usize, n_active: usize, cp_len: usize, spacing: f64) -> Result<Self> {
        let below = (n_active / 2) as i64;
        let above = (n_active - n_active / 2) as i64;
        let active_bins = (-below..0).chain(1..=above).collect();
        let cfg = Self {
            n_fft,
            active_bins,
            cp_len,
            subcarrier_spacing: spacing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Contiguous block of `n_active` bins starting at signed bin `start`.
    pub fn contiguous(n_fft: usize, start: i64, n_active: usize, cp_len: usize, spacing: f64) -> Result<Self> {
        let cfg = Self {
            n_fft,
            active_bins: (start..start + n_active as i64).collect(),
            cp_len,
            subcarrier_spacing: spacing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Standard OFDM numerology: N = 1024, 78 subcarriers, CP 3.125 % (32 samples).
    pub fn standard_ofdm() -> Self {
        Self::centered(STANDARD_FFT_SIZE, STANDARD_ACTIVE, STANDARD_FFT_SIZE / 32, SUBCARRIER_SPACING_HZ)
            .expect("standard numerology is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_fft as i64;
        if self.active_bins.is_empty() || self.active_bins.len() > self.n_fft {
            return Err(Error::invalid(format!(
                "{} active subcarriers for a {}-point transform",
                self.active_bins.len(),
                self.n_fft
            )));
        }
        if self.active_bins.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("active bins must be strictly ascending"));
        }
        let lo = self.active_bins[0];
        let hi = *self.active_bins.last().unwrap();
        if lo < -n / 2 || hi >= n - n / 2 || hi - lo >= n {
            return Err(Error::invalid("active bins exceed the transform span"));
        }
        if self.cp_len >= self.n_fft {
            return Err(Error::invalid("cyclic prefix must be shorter than the transform"));
        }
        if !(self.subcarrier_spacing > 0.0) {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        Ok(())
    }

    pub fn n_active(&self) -> usize {
        self.active_bins.len()
    }

    /// Transform index (natural FFT order) of active subcarrier `n`.
    pub fn bin_index(&self, n: usize) -> usize {
        self.active_bins[n].rem_euclid(self.n_fft as i64) as usize
    }

    pub fn sample_rate(&self) -> f64 {
        self.n_fft as f64 * self.subcarrier_spacing
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    /// Share of transmitted samples spent on the prefix, `N_CP/(N+N_CP)`.
    pub fn overhead_fraction(&self) -> f64 {
        self.cp_len as f64 / self.symbol_len() as f64
    }

    /// Prefix length relative to the useful symbol, `N_CP/N`.
    pub fn cp_fraction(&self) -> f64 {
        self.cp_len as f64 / self.n_fft as f64
    }

    /// Occupied bandwidth `n_active·Δf`.
    pub fn occupied_bandwidth(&self) -> f64 {
        self.n_active() as f64 * self.subcarrier_spacing
    }
}

/// `n_symbols × n_subcarriers` matrix of data symbols, row-major by symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    n_symbols: usize,
    n_subcarriers: usize,
    data: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn new(n_symbols: usize, n_subcarriers: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n_symbols * n_subcarriers {
            return Err(Error::invalid(format!(
                "grid data has {} entries, expected {n_symbols}×{n_subcarriers}",
                data.len()
            )));
        }
        Ok(Self {
            n_symbols,
            n_subcarriers,
            data,
        })
    }

    pub fn zeros(n_symbols: usize, n_subcarriers: usize) -> Self {
        Self {
            n_symbols,
            n_subcarriers,
            data: vec![Complex64::new(0.0, 0.0); n_symbols * n_subcarriers],
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[m * self.n_subcarriers + n]
    }

    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        self.data[m * self.n_subcarriers + n] = v;
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.n_subcarriers..(m + 1) * self.n_subcarriers]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.data[m * self.n_subcarriers..(m + 1) * self.n_subcarriers]
    }

    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// Rows `start..start+count` as a new grid.
    pub fn rows(&self, start: usize, count: usize) -> Self {
        let a = start * self.n_subcarriers;
        Self {
            n_symbols: count,
            n_subcarriers: self.n_subcarriers,
            data: self.data[a..a + count * self.n_subcarriers].to_vec(),
        }
    }

    /// Stacks grids with equal width vertically.
    pub fn concat(grids: &[SymbolGrid]) -> Result<Self> {
        let width = grids.first().map_or(0, |g| g.n_subcarriers);
        if grids.iter().any(|g| g.n_subcarriers != width) {
            return Err(Error::invalid("cannot stack grids of different widths"));
        }
        Ok(Self {
            n_symbols: grids.iter().map(|g| g.n_symbols).sum(),
            n_subcarriers: width,
            data: grids.iter().flat_map(|g| g.data.iter().copied()).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &SymbolGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Smallest channel magnitude used as a divisor by single-tap equalizers.
pub const EQUALIZER_FLOOR: f64 = 1e-6;

/// Per-bin complex channel gains for single-tap equalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_freq: Vec<Complex64>,
}

impl ChannelEstimate {
    pub fn identity(n: usize) -> Self {
        Self {
            h_freq: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.h_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_freq.is_empty()
    }

    /// Zero-forcing division with the magnitude floor applied.
    pub fn equalize(&self, k: usize, y: Complex64) -> Complex64 {
        let h = self.h_freq[k];
        let mag = h.norm();
        if mag >= EQUALIZER_FLOOR {
            y / h
        } else if mag == 0.0 {
            y / EQUALIZER_FLOOR
        } else {
            y / (h * (EQUALIZER_FLOOR / mag))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_numerology() {
        let cfg = MulticarrierConfig::standard_ofdm();
        assert_eq!(cfg.n_fft, 1024);
        assert_eq!(cfg.n_active(), 78);
        assert_eq!(cfg.cp_len, 32);
        assert_eq!(cfg.symbol_len(), 1056);
        assert!((cfg.cp_fraction() - 0.03125).abs() < 1e-15);
        assert!((cfg.overhead_fraction() - 32.0 / 1056.0).abs() < 1e-15);
        assert_eq!(cfg.sample_rate(), 2e9);
        assert_eq!(cfg.active_bins[0], -39);
        assert_eq!(*cfg.active_bins.last().unwrap(), 39);
        assert!(!cfg.active_bins.contains(&0));
        assert_eq!(cfg.bin_index(0), 1024 - 39);
        // 78 × 1.953125 MHz
        assert!((cfg.occupied_bandwidth() - 152.34375e6).abs() < 1.0);
    }

    #[test]
    fn invalid_layouts() {
        assert!(MulticarrierConfig::centered(64, 65, 4, 1.0).is_err());
        assert!(MulticarrierConfig::centered(64, 8, 64, 1.0).is_err());
        assert!(MulticarrierConfig::contiguous(64, 30, 8, 4, 1.0).is_err());
        assert!(MulticarrierConfig::centered(64, 0, 4, 1.0).is_err());
    }

    #[test]
    fn equalizer_floor_prevents_blowup() {
        let est = ChannelEstimate {
            h_freq: vec![Complex64::new(0.0, 0.0), Complex64::new(1e-9, 0.0)],
        };
        let y = Complex64::new(1.0, 0.0);
        assert!(est.equalize(0, y).norm() <= 1.0 / EQUALIZER_FLOOR);
        assert!((est.equalize(1, y).norm() - 1e6).abs() < 1e-3);
    }
}
