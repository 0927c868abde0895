//! UF-OFDM (universal filtered multicarrier) modem.
//!
//! The active subcarriers are split into equal sub-bands. Each sub-band is
//! inverse transformed on its own, filtered by a Dolph-Chebyshev prototype
//! shifted to the sub-band center, and the filtered sub-bands are summed.
//! A symbol therefore lasts `N + L - 1` samples (plus an optional zero tail)
//! and has no cyclic prefix.
//!
//! The receiver zero-pads each symbol window to `2N`, transforms, and keeps
//! every second output bin (`2b` for subcarrier `b`). Those bins sample the
//! symbol spectrum exactly at the subcarrier frequencies, so on a channel
//! shorter than the tail there is no inter-carrier leakage and a single tap
//! per subcarrier (filter response × channel) equalizes perfectly.
//!
//! [`ufofdm_demodulate_aliased`] gets the same bins from an `N`-point
//! transform by folding the `2N` window: `f[k] = x'[k] + x'[k+N]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChannelEstimate, MulticarrierConfig, SymbolGrid, SUBCARRIER_SPACING_HZ};
use crate::numerics::{design_dolph_chebyshev, FftPair, FilterTaps};
use crate::ofdm::ls_from_bins;
use crate::signal::ComplexSignal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UfofdmConfig {
    pub base: MulticarrierConfig,
    pub n_subbands: usize,
    pub subband_size: usize,
    pub filter_len: usize,
    pub filter_atten_db: f64,
    /// Zero samples appended after each filtered symbol. Zero reproduces the
    /// plain `N + L - 1` span; a few samples let a short dispersive channel
    /// ring out inside the symbol window.
    #[serde(default)]
    pub tail_len: usize,
}

impl UfofdmConfig {
    /// Standard numerology: N = 1024, 13 sub-bands of 6 subcarriers, L = 74.
    pub fn standard() -> Self {
        Self {
            base: MulticarrierConfig::centered(1024, 78, 0, SUBCARRIER_SPACING_HZ)
                .expect("standard numerology is valid"),
            n_subbands: 13,
            subband_size: 6,
            filter_len: 74,
            filter_atten_db: 40.0,
            tail_len: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.base.cp_len != 0 {
            return Err(Error::invalid("UF-OFDM uses no cyclic prefix (cp_len must be 0)"));
        }
        if self.n_subbands == 0 || self.subband_size == 0 {
            return Err(Error::invalid("sub-band count and size must be positive"));
        }
        if self.n_subbands * self.subband_size != self.base.n_active() {
            return Err(Error::invalid(format!(
                "{} sub-bands × {} subcarriers ≠ {} active subcarriers",
                self.n_subbands,
                self.subband_size,
                self.base.n_active()
            )));
        }
        if self.filter_len == 0 {
            return Err(Error::invalid("filter length must be at least 1"));
        }
        if !(self.filter_atten_db > 0.0) {
            return Err(Error::invalid("filter attenuation must be positive"));
        }
        if self.symbol_len() > 2 * self.base.n_fft {
            return Err(Error::invalid(format!(
                "symbol span {} exceeds the {}-point receiver window",
                self.symbol_len(),
                2 * self.base.n_fft
            )));
        }
        Ok(())
    }

    pub fn n_fft(&self) -> usize {
        self.base.n_fft
    }

    /// `N + L - 1 + tail_len` samples per symbol.
    pub fn symbol_len(&self) -> usize {
        self.base.n_fft + self.filter_len - 1 + self.tail_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.base.sample_rate()
    }

    /// Arithmetic mean of the signed bins of sub-band `i`, in bins.
    pub fn subband_center(&self, i: usize) -> f64 {
        let bins = &self.base.active_bins[i * self.subband_size..(i + 1) * self.subband_size];
        bins.iter().sum::<i64>() as f64 / bins.len() as f64
    }

    /// The filter of every sub-band.
    pub fn filters(&self) -> Result<Vec<FilterTaps>> {
        (0..self.n_subbands)
            .map(|i| {
                design_dolph_chebyshev(
                    self.filter_len,
                    self.filter_atten_db,
                    self.subband_center(i) / self.base.n_fft as f64,
                )
            })
            .collect()
    }

    /// Per-subcarrier response of its own sub-band filter: the equalizer
    /// for an ideal channel.
    pub fn filter_response(&self) -> Result<ChannelEstimate> {
        let filters = self.filters()?;
        let n = self.base.n_fft as f64;
        Ok(ChannelEstimate {
            h_freq: self
                .base
                .active_bins
                .iter()
                .enumerate()
                .map(|(k, &b)| filters[k / self.subband_size].response(b as f64 / n))
                .collect(),
        })
    }

    /// Filter response multiplied by a per-subcarrier channel.
    pub fn composite_estimate(&self, channel: &ChannelEstimate) -> Result<ChannelEstimate> {
        let f = self.filter_response()?;
        if channel.len() != f.len() {
            return Err(Error::invalid("channel estimate length does not match the layout"));
        }
        Ok(ChannelEstimate {
            h_freq: f.h_freq.iter().zip(&channel.h_freq).map(|(a, b)| a * b).collect(),
        })
    }
}

pub fn ufofdm_modulate(grid: &SymbolGrid, cfg: &UfofdmConfig) -> Result<ComplexSignal> {
    cfg.validate()?;
    if grid.n_subcarriers() != cfg.base.n_active() {
        return Err(Error::invalid(format!(
            "grid has {} subcarriers, config expects {}",
            grid.n_subcarriers(),
            cfg.base.n_active()
        )));
    }
    let n = cfg.n_fft();
    let n2 = 2 * n;
    let span = cfg.symbol_len();
    let fft_n = FftPair::new(n);
    let fft_2n = FftPair::new(n2);
    // filter spectra on the 2N grid, long enough for the linear convolution
    let filter_spectra: Vec<Vec<Complex64>> = cfg
        .filters()?
        .iter()
        .map(|f| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n2];
            buf[..f.len()].copy_from_slice(&f.coefficients);
            fft_2n.forward(&mut buf);
            buf
        })
        .collect();

    let mut out = Vec::with_capacity(grid.n_symbols() * span);
    let mut sub = vec![Complex64::new(0.0, 0.0); n];
    let mut padded = vec![Complex64::new(0.0, 0.0); n2];
    let mut acc = vec![Complex64::new(0.0, 0.0); n2];
    for m in 0..grid.n_symbols() {
        acc.fill(Complex64::new(0.0, 0.0));
        let row = grid.row(m);
        for (i, spec) in filter_spectra.iter().enumerate() {
            let idx = i * cfg.subband_size..(i + 1) * cfg.subband_size;
            if row[idx.clone()].iter().all(|d| d.norm_sqr() == 0.0) {
                continue;
            }
            sub.fill(Complex64::new(0.0, 0.0));
            for k in idx {
                sub[cfg.base.bin_index(k)] = row[k];
            }
            fft_n.inverse(&mut sub);
            padded[..n].copy_from_slice(&sub);
            padded[n..].fill(Complex64::new(0.0, 0.0));
            fft_2n.forward(&mut padded);
            for ((a, p), h) in acc.iter_mut().zip(&padded).zip(spec) {
                *a += p * h;
            }
        }
        fft_2n.inverse(&mut acc);
        let filtered = n + cfg.filter_len - 1;
        out.extend_from_slice(&acc[..filtered]);
        out.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), cfg.tail_len));
    }
    Ok(ComplexSignal::from_parts(out, cfg.sample_rate()))
}

fn check_frame(x: &ComplexSignal, cfg: &UfofdmConfig, est: &ChannelEstimate) -> Result<usize> {
    cfg.validate()?;
    let span = cfg.symbol_len();
    if x.len() % span != 0 {
        return Err(Error::invalid(format!(
            "signal length {} is not a multiple of the {span}-sample symbol",
            x.len()
        )));
    }
    if est.len() != cfg.base.n_active() {
        return Err(Error::invalid(format!(
            "channel estimate has {} bins, expected {}",
            est.len(),
            cfg.base.n_active()
        )));
    }
    Ok(x.len() / span)
}

/// Unequalized subcarrier outputs of the `2N` receiver.
fn raw_bins(x: &ComplexSignal, cfg: &UfofdmConfig, n_sym: usize) -> SymbolGrid {
    let n = cfg.n_fft();
    let n2 = 2 * n;
    let span = cfg.symbol_len();
    let fft = FftPair::new(n2);
    let mut grid = SymbolGrid::zeros(n_sym, cfg.base.n_active());
    let mut buf = vec![Complex64::new(0.0, 0.0); n2];
    for m in 0..n_sym {
        buf[..span].copy_from_slice(&x.samples()[m * span..(m + 1) * span]);
        buf[span..].fill(Complex64::new(0.0, 0.0));
        fft.forward(&mut buf);
        for (k, v) in grid.row_mut(m).iter_mut().enumerate() {
            let bin = (2 * cfg.base.active_bins[k]).rem_euclid(n2 as i64) as usize;
            *v = buf[bin];
        }
    }
    grid
}

/// `2N`-point receiver. `est` is the composite (filter × channel) response,
/// for example from [`UfofdmConfig::composite_estimate`].
pub fn ufofdm_demodulate(
    x: &ComplexSignal,
    cfg: &UfofdmConfig,
    est: &ChannelEstimate,
) -> Result<SymbolGrid> {
    let n_sym = check_frame(x, cfg, est)?;
    let mut grid = raw_bins(x, cfg, n_sym);
    equalize(&mut grid, est);
    Ok(grid)
}

/// `N`-point receiver on the time-aliased window. Same output as
/// [`ufofdm_demodulate`].
pub fn ufofdm_demodulate_aliased(
    x: &ComplexSignal,
    cfg: &UfofdmConfig,
    est: &ChannelEstimate,
) -> Result<SymbolGrid> {
    let n_sym = check_frame(x, cfg, est)?;
    let n = cfg.n_fft();
    let span = cfg.symbol_len();
    let fft = FftPair::new(n);
    let mut grid = SymbolGrid::zeros(n_sym, cfg.base.n_active());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n_sym {
        let window = &x.samples()[m * span..(m + 1) * span];
        buf.copy_from_slice(&window[..n]);
        for (b, v) in buf.iter_mut().zip(&window[n..]) {
            *b += v;
        }
        fft.forward(&mut buf);
        for (k, v) in grid.row_mut(m).iter_mut().enumerate() {
            *v = buf[cfg.base.bin_index(k)];
        }
    }
    equalize(&mut grid, est);
    Ok(grid)
}

fn equalize(grid: &mut SymbolGrid, est: &ChannelEstimate) {
    for m in 0..grid.n_symbols() {
        for (k, v) in grid.row_mut(m).iter_mut().enumerate() {
            *v = est.equalize(k, *v);
        }
    }
}

/// Pooled least-squares composite (filter × channel) estimate from known
/// training symbols.
pub fn estimate_composite_ls(
    rx_training: &ComplexSignal,
    known_grid: &SymbolGrid,
    cfg: &UfofdmConfig,
) -> Result<ChannelEstimate> {
    let n_sym = check_frame(rx_training, cfg, &ChannelEstimate::identity(cfg.base.n_active()))?;
    ls_from_bins(&raw_bins(rx_training, cfg, n_sym), known_grid)
}
