//! GFDM block modem with a zero-forcing receiver.
//!
//! A block carries `M` subsymbols on each of `N` subcarriers. Subsymbol `m`
//! of subcarrier `n` is the prototype `g` circularly shifted by `mN` samples
//! and modulated by `e^{j2πnk/N}`:
//!
//! `x[k] = Σ_{m,n} d[m,n]·g[(k - mN) mod MN]·e^{j2πnk/N}`
//!
//! In the block-frequency domain this is `X[b] = Σ_n G[b - nM]·D_n[b mod M]`
//! where `D_n` is the `M`-point DFT of subcarrier `n`'s subsymbols, so only
//! the nonzero bins of `G` cost anything. The ZF receiver splits the block
//! spectrum by residue `r = b mod M`; each residue class is an `N`-point
//! circular convolution over subcarriers and is inverted with one FFT pair.

mod prototype;

pub use prototype::{
    build_phydyas_prototype, build_rectangular_prototype, phydyas_coefficients, PrototypeFilter,
    PrototypeKind, MAX_OVERLAP,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChannelEstimate, MulticarrierConfig, SymbolGrid, SUBCARRIER_SPACING_HZ};
use crate::numerics::FftPair;
use crate::signal::ComplexSignal;

/// Largest block the dense matrix oracle will build.
pub const ORACLE_MAX_DIM: usize = 4096;

/// Residue-class spectra `Λ_r` whose smallest magnitude relative to the
/// largest falls below this are treated as singular.
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfdmConfig {
    /// Subcarrier lattice (`n_fft` = N), active subcarriers and block CP.
    pub base: MulticarrierConfig,
    pub m_subsymbols: usize,
    pub prototype: PrototypeKind,
}

impl GfdmConfig {
    /// Standard numerology: N = 1024, 78 active, M = 5, CP 32 (0.625 % of 5120),
    /// PHYDYAS overlap 5.
    pub fn standard() -> Self {
        Self {
            base: MulticarrierConfig::centered(1024, 78, 32, SUBCARRIER_SPACING_HZ)
                .expect("standard numerology is valid"),
            m_subsymbols: 5,
            prototype: PrototypeKind::Phydyas { overlap: 5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.m_subsymbols == 0 {
            return Err(Error::invalid("at least one subsymbol per block is required"));
        }
        if let PrototypeKind::Phydyas { overlap } = self.prototype {
            if overlap == 0 || overlap > MAX_OVERLAP {
                return Err(Error::UnsupportedParameter(format!(
                    "PHYDYAS overlap {overlap} (supported: 1..={MAX_OVERLAP})"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.base.n_fft
    }

    pub fn block_len(&self) -> usize {
        self.m_subsymbols * self.base.n_fft
    }

    /// Samples per transmitted block, CP included.
    pub fn symbol_len(&self) -> usize {
        self.block_len() + self.base.cp_len
    }

    /// Samples that must arrive before any symbol of a block can be
    /// detected: the whole block and its CP.
    pub fn block_latency_samples(&self) -> usize {
        self.symbol_len()
    }

    pub fn cp_fraction(&self) -> f64 {
        self.base.cp_len as f64 / self.block_len() as f64
    }

    pub fn sample_rate(&self) -> f64 {
        self.base.sample_rate()
    }

    pub fn build_prototype(&self) -> Result<PrototypeFilter> {
        PrototypeFilter::build(self.prototype, self.m_subsymbols, self.base.n_fft)
    }
}

/// Dense `MN × MN` modulation matrix, row-major. Column `m·N + n` holds the
/// pulse of subsymbol `m` on subcarrier `n` (`n` in `0..N`, natural order).
pub fn gfdm_build_matrix(cfg: &GfdmConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let (m_sub, n) = (cfg.m_subsymbols, cfg.n());
    let dim = m_sub * n;
    if dim > ORACLE_MAX_DIM {
        return Err(Error::invalid(format!(
            "dense oracle limited to MN ≤ {ORACLE_MAX_DIM}, got {dim}"
        )));
    }
    let g = cfg.build_prototype()?.g_time;
    let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
    for k in 0..dim {
        for m in 0..m_sub {
            let gv = g[(k + dim - m * n) % dim];
            for sc in 0..n {
                let phase = 2.0 * std::f64::consts::PI * ((sc * k) % n) as f64 / n as f64;
                a[k * dim + m * n + sc] = Complex64::from_polar(gv, phase);
            }
        }
    }
    Ok(a)
}

/// Per-block spectral kernel shared by modulator and receiver.
struct Engine {
    m: usize,
    n: usize,
    proto: PrototypeFilter,
    fft_block: FftPair,
    fft_m: FftPair,
}

impl Engine {
    fn new(cfg: &GfdmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            m: cfg.m_subsymbols,
            n: cfg.n(),
            proto: cfg.build_prototype()?,
            fft_block: FftPair::new(cfg.block_len()),
            fft_m: FftPair::new(cfg.m_subsymbols),
        })
    }

    /// Time-domain block (no CP) for the `M × n_active` subsymbol slice.
    fn modulate_block(&self, cfg: &GfdmConfig, rows: &[Complex64]) -> Vec<Complex64> {
        let (m, n) = (self.m, self.n);
        let len = m * n;
        let n_active = cfg.base.n_active();
        let support = self.proto.support();
        let mut spec = vec![Complex64::new(0.0, 0.0); len];
        let mut dn = vec![Complex64::new(0.0, 0.0); m];
        for (k, &bin) in cfg.base.active_bins.iter().enumerate() {
            for (s, v) in dn.iter_mut().enumerate() {
                *v = rows[s * n_active + k];
            }
            if dn.iter().all(|v| v.norm_sqr() == 0.0) {
                continue;
            }
            self.fft_m.forward(&mut dn);
            let shift = bin * m as i64;
            for &(j, gj) in &support {
                let b = (shift + j).rem_euclid(len as i64) as usize;
                spec[b] += gj * dn[j.rem_euclid(m as i64) as usize];
            }
        }
        self.fft_block.inverse(&mut spec);
        spec
    }

    /// `Λ_r[p]` for every residue `r`, row-major `M × N`.
    fn residue_spectra(&self) -> Vec<Complex64> {
        let (m, n) = (self.m, self.n);
        let len = m * n;
        let fft_n = FftPair::new(n);
        let mut out = Vec::with_capacity(len);
        for r in 0..m {
            let mut c: Vec<Complex64> = (0..n).map(|s| self.proto.g_freq[(r + s * m) % len]).collect();
            fft_n.forward(&mut c);
            out.extend(c);
        }
        out
    }

    fn check_invertible(&self, lambda: &[Complex64]) -> Result<()> {
        let mags = lambda.iter().map(|v| v.norm());
        let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !(lo > SINGULAR_TOL * hi) {
            return Err(Error::Singular {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }
        Ok(())
    }

    /// ZF inverse of one block spectrum; returns all `M × N` symbols
    /// row-major by subsymbol, subcarriers in natural order.
    fn invert(&self, spec: &[Complex64], lambda: &[Complex64], fft_n: &FftPair) -> Vec<Complex64> {
        let (m, n) = (self.m, self.n);
        // dr[r][n] = D_n[r]
        let mut dr = vec![Complex64::new(0.0, 0.0); m * n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..m {
            for (q, v) in buf.iter_mut().enumerate() {
                *v = spec[r + q * m];
            }
            fft_n.forward(&mut buf);
            for (v, l) in buf.iter_mut().zip(&lambda[r * n..(r + 1) * n]) {
                *v /= l;
            }
            fft_n.inverse(&mut buf);
            dr[r * n..(r + 1) * n].copy_from_slice(&buf);
        }
        let mut d = vec![Complex64::new(0.0, 0.0); m * n];
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for sc in 0..n {
            for (r, v) in col.iter_mut().enumerate() {
                *v = dr[r * n + sc];
            }
            self.fft_m.inverse(&mut col);
            for (s, v) in col.iter().enumerate() {
                d[s * n + sc] = *v;
            }
        }
        d
    }
}

/// Modulates `grid` (rows = subsymbols, a multiple of `M`; columns = active
/// subcarriers) into CP-prefixed blocks of `MN + cp_len` samples.
pub fn gfdm_modulate(grid: &SymbolGrid, cfg: &GfdmConfig) -> Result<ComplexSignal> {
    let engine = Engine::new(cfg)?;
    check_grid(grid, cfg)?;
    let m = cfg.m_subsymbols;
    let width = cfg.base.n_active();
    let n_blocks = grid.n_symbols() / m;
    let mut out = Vec::with_capacity(n_blocks * cfg.symbol_len());
    for blk in 0..n_blocks {
        let rows = &grid.data()[blk * m * width..(blk + 1) * m * width];
        let x = engine.modulate_block(cfg, rows);
        out.extend_from_slice(&x[x.len() - cfg.base.cp_len..]);
        out.extend_from_slice(&x);
    }
    Ok(ComplexSignal::from_parts(out, cfg.sample_rate()))
}

fn check_grid(grid: &SymbolGrid, cfg: &GfdmConfig) -> Result<()> {
    if grid.n_subcarriers() != cfg.base.n_active() {
        return Err(Error::invalid(format!(
            "grid has {} subcarriers, config expects {}",
            grid.n_subcarriers(),
            cfg.base.n_active()
        )));
    }
    if grid.n_symbols() % cfg.m_subsymbols != 0 {
        return Err(Error::invalid(format!(
            "{} subsymbol rows is not a whole number of {}-subsymbol blocks",
            grid.n_symbols(),
            cfg.m_subsymbols
        )));
    }
    Ok(())
}

/// Block spectra (CP removed) of every block in `x`.
fn block_spectra(x: &ComplexSignal, cfg: &GfdmConfig, fft: &FftPair) -> Result<Vec<Vec<Complex64>>> {
    let span = cfg.symbol_len();
    if x.len() % span != 0 {
        return Err(Error::invalid(format!(
            "signal length {} is not a multiple of the {span}-sample block",
            x.len()
        )));
    }
    Ok((0..x.len() / span)
        .map(|blk| {
            let start = blk * span + cfg.base.cp_len;
            let mut buf = x.samples()[start..start + cfg.block_len()].to_vec();
            fft.forward(&mut buf);
            buf
        })
        .collect())
}

/// Removes the CP, equalizes each block-spectrum bin by `est` (length `MN`,
/// natural FFT order), and applies the ZF inverse of the modulation.
pub fn gfdm_demodulate_zf(
    x: &ComplexSignal,
    cfg: &GfdmConfig,
    est: &ChannelEstimate,
) -> Result<SymbolGrid> {
    let engine = Engine::new(cfg)?;
    if est.len() != cfg.block_len() {
        return Err(Error::invalid(format!(
            "block channel estimate has {} bins, expected {}",
            est.len(),
            cfg.block_len()
        )));
    }
    let lambda = engine.residue_spectra();
    engine.check_invertible(&lambda)?;
    let fft_n = FftPair::new(cfg.n());
    let spectra = block_spectra(x, cfg, &engine.fft_block)?;
    let (m, n) = (cfg.m_subsymbols, cfg.n());
    let width = cfg.base.n_active();
    let mut grid = SymbolGrid::zeros(spectra.len() * m, width);
    for (blk, mut spec) in spectra.into_iter().enumerate() {
        for (b, v) in spec.iter_mut().enumerate() {
            *v = est.equalize(b, *v);
        }
        let d = engine.invert(&spec, &lambda, &fft_n);
        for s in 0..m {
            for k in 0..width {
                grid.set(blk * m + s, k, d[s * n + cfg.base.bin_index(k)]);
            }
        }
    }
    Ok(grid)
}

/// Pooled least-squares estimate of the block-spectrum channel from known
/// training blocks. Bins the training never excites are left at 1.
pub fn estimate_block_channel_ls(
    rx_training: &ComplexSignal,
    known_grid: &SymbolGrid,
    cfg: &GfdmConfig,
) -> Result<ChannelEstimate> {
    estimate_block_channel_smoothed(rx_training, known_grid, cfg, 0)
}

/// Like [`estimate_block_channel_ls`], but each bin pools the training
/// energy of its `half_width` neighbours on either side as well. Trades a
/// small bias on frequency-selective channels for a lower-variance estimate.
pub fn estimate_block_channel_smoothed(
    rx_training: &ComplexSignal,
    known_grid: &SymbolGrid,
    cfg: &GfdmConfig,
    half_width: usize,
) -> Result<ChannelEstimate> {
    let engine = Engine::new(cfg)?;
    check_grid(known_grid, cfg)?;
    if known_grid.n_symbols() == 0 {
        return Err(Error::invalid("at least one training block is required"));
    }
    if let Some(i) = known_grid.data().iter().position(|d| d.norm_sqr() == 0.0) {
        return Err(Error::invalid(format!("known training symbol {i} is zero")));
    }
    let rx = block_spectra(rx_training, cfg, &engine.fft_block)?;
    let len = cfg.block_len();
    if rx.len() * cfg.m_subsymbols != known_grid.n_symbols() {
        return Err(Error::invalid("received training length does not match the known grid"));
    }
    let width = cfg.base.n_active();
    let m = cfg.m_subsymbols;
    let mut num = vec![Complex64::new(0.0, 0.0); len];
    let mut den = vec![0.0; len];
    for (blk, y) in rx.iter().enumerate() {
        let rows = &known_grid.data()[blk * m * width..(blk + 1) * m * width];
        let mut xk = engine.modulate_block(cfg, rows);
        engine.fft_block.forward(&mut xk);
        for b in 0..len {
            num[b] += y[b] * xk[b].conj();
            den[b] += xk[b].norm_sqr();
        }
    }
    if half_width > 0 {
        let w = half_width.min(len / 2) as isize;
        let pool = |v: &dyn Fn(usize) -> Complex64| -> Vec<Complex64> {
            (0..len)
                .map(|b| (-w..=w).map(|d| v((b as isize + d).rem_euclid(len as isize) as usize)).sum())
                .collect()
        };
        let n2 = pool(&|i| num[i]);
        let d2 = pool(&|i| Complex64::new(den[i], 0.0));
        num = n2;
        den = d2.iter().map(|v| v.re).collect();
    }
    let peak = den.iter().cloned().fold(0.0, f64::max);
    Ok(ChannelEstimate {
        h_freq: num
            .iter()
            .zip(&den)
            .map(|(nu, &de)| {
                if de > 1e-9 * peak {
                    nu / de
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect(),
    })
}

/// Average output-noise power gain of the ZF receiver relative to an
/// orthogonal matched receiver, in dB: `(1/M)·Σ_{r,p} 1/|Λ_r[p]|²` for a
/// unit-energy prototype.
pub fn noise_enhancement_db(cfg: &GfdmConfig) -> Result<f64> {
    let engine = Engine::new(cfg)?;
    let lambda = engine.residue_spectra();
    engine.check_invertible(&lambda)?;
    let total: f64 = lambda.iter().map(|l| 1.0 / l.norm_sqr()).sum();
    Ok(10.0 * (total / cfg.m_subsymbols as f64).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_qam16, BitStream};
    use nalgebra::DMatrix;

    fn random_grid(m: usize, n: usize, seed: u64) -> SymbolGrid {
        let bits = BitStream::prbs31(seed, 4 * m * n);
        SymbolGrid::new(m, n, map_qam16(&bits).unwrap()).unwrap()
    }

    fn small(n: usize, m: usize, cp: usize, proto: PrototypeKind) -> GfdmConfig {
        GfdmConfig {
            base: MulticarrierConfig::contiguous(n, -(n as i64 / 2), n, cp, 1.0).unwrap(),
            m_subsymbols: m,
            prototype: proto,
        }
    }

    /// vec(D) in the oracle's column order from a full-width grid block.
    fn vec_d(cfg: &GfdmConfig, grid: &SymbolGrid) -> Vec<Complex64> {
        let n = cfg.n();
        let mut v = vec![Complex64::new(0.0, 0.0); cfg.block_len()];
        for s in 0..cfg.m_subsymbols {
            for k in 0..cfg.base.n_active() {
                v[s * n + cfg.base.bin_index(k)] = grid.get(s, k);
            }
        }
        v
    }

    fn dense(cfg: &GfdmConfig) -> DMatrix<Complex64> {
        let dim = cfg.block_len();
        DMatrix::from_row_slice(dim, dim, &gfdm_build_matrix(cfg).unwrap())
    }

    #[test]
    fn standard_block_accounting() {
        let cfg = GfdmConfig::standard();
        assert_eq!(cfg.block_len(), 5120);
        assert_eq!(cfg.symbol_len(), 5152);
        assert_eq!(cfg.block_latency_samples(), 5152);
        assert!((cfg.cp_fraction() - 0.00625).abs() < 1e-15);
    }

    #[test]
    fn m1_rectangular_is_scaled_idft() {
        let cfg = small(8, 1, 0, PrototypeKind::Rectangular);
        let a = gfdm_build_matrix(&cfg).unwrap();
        let s = 8f64.sqrt().recip();
        for k in 0..8 {
            for n in 0..8 {
                let want = Complex64::from_polar(s, 2.0 * std::f64::consts::PI * (k * n) as f64 / 8.0);
                assert!((a[k * 8 + n] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn columns_have_prototype_norm() {
        let cfg = small(4, 3, 0, PrototypeKind::Phydyas { overlap: 2 });
        let a = dense(&cfg);
        for c in 0..12 {
            assert!((a.column(c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_modulator_matches_matrix() {
        for proto in [PrototypeKind::Phydyas { overlap: 5 }, PrototypeKind::Rectangular] {
            let cfg = small(8, 5, 0, proto);
            let grid = random_grid(5, 8, 21);
            let x = gfdm_modulate(&grid, &cfg).unwrap();
            let ax = dense(&cfg) * nalgebra::DVector::from_vec(vec_d(&cfg, &grid));
            let diff = ax
                .iter()
                .zip(x.samples())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10, "{proto:?} diff {diff}");
        }
    }

    #[test]
    fn zf_matches_dense_inverse() {
        for (n, m) in [(8, 5), (32, 5), (16, 3)] {
            let cfg = small(n, m, 0, PrototypeKind::Phydyas { overlap: 5.min(m) });
            let a = dense(&cfg);
            let inv = a.clone().pseudo_inverse(1e-12).unwrap();
            // arbitrary received block, not necessarily a valid GFDM signal
            let y: Vec<Complex64> = (0..n * m)
                .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 0.3).cos()))
                .collect();
            let oracle = &inv * nalgebra::DVector::from_vec(y.clone());
            let x = ComplexSignal::new(y, 1.0).unwrap();
            let got = gfdm_demodulate_zf(&x, &cfg, &ChannelEstimate::identity(n * m)).unwrap();
            let want = {
                let mut g = SymbolGrid::zeros(m, n);
                for s in 0..m {
                    for k in 0..n {
                        g.set(s, k, oracle[s * n + cfg.base.bin_index(k)]);
                    }
                }
                g
            };
            assert!(got.max_abs_diff(&want) < 1e-8, "N={n} M={m}");
        }
    }

    #[test]
    fn full_size_round_trip() {
        let cfg = GfdmConfig::standard();
        let grid = random_grid(10, 78, 31);
        let x = gfdm_modulate(&grid, &cfg).unwrap();
        assert_eq!(x.len(), 2 * 5152);
        let back = gfdm_demodulate_zf(&x, &cfg, &ChannelEstimate::identity(5120)).unwrap();
        assert!(back.max_abs_diff(&grid) < 1e-9);
    }

    #[test]
    fn zero_grid_zero_block() {
        let cfg = GfdmConfig::standard();
        let x = gfdm_modulate(&SymbolGrid::zeros(5, 78), &cfg).unwrap();
        assert!(x.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn block_cp_absorbs_channel() {
        let cfg = GfdmConfig::standard();
        let grid = random_grid(15, 78, 32);
        let x = gfdm_modulate(&grid, &cfg).unwrap();
        let taps: Vec<Complex64> = (0..33)
            .map(|k| Complex64::new(0.8f64.powi(k), 0.1 * (k as f64).sin()))
            .collect();
        let mut y = crate::numerics::convolve(x.samples(), &taps);
        y.truncate(x.len());
        let y = ComplexSignal::new(y, x.sample_rate()).unwrap();
        let mut padded = vec![Complex64::new(0.0, 0.0); 5120];
        padded[..33].copy_from_slice(&taps);
        let h = crate::numerics::fft_forward(&padded).unwrap();
        let est = ChannelEstimate { h_freq: h };
        // first block has no CP history issue: the CP is part of it
        let back = gfdm_demodulate_zf(&y, &cfg, &est).unwrap();
        assert!(back.max_abs_diff(&grid) < 1e-6);
        // estimating from the same blocks recovers the response in-band
        let ls = estimate_block_channel_ls(&y, &grid, &cfg).unwrap();
        let back = gfdm_demodulate_zf(&y, &cfg, &ls).unwrap();
        assert!(back.max_abs_diff(&grid) < 1e-6);
    }

    #[test]
    fn noise_enhancement_values() {
        let ofdm_like = small(16, 1, 0, PrototypeKind::Rectangular);
        assert!(noise_enhancement_db(&ofdm_like).unwrap().abs() < 1e-9);
        let rect5 = small(16, 5, 0, PrototypeKind::Rectangular);
        assert!(noise_enhancement_db(&rect5).unwrap().abs() < 1e-9);

        let cfg = small(64, 5, 0, PrototypeKind::Phydyas { overlap: 5 });
        let nef = noise_enhancement_db(&cfg).unwrap();
        assert!(nef > 0.0);
        // dense oracle: mean row energy of A⁻¹
        let inv = dense(&cfg).try_inverse().unwrap();
        let mean_row = inv.iter().map(|v| v.norm_sqr()).sum::<f64>() / 320.0;
        assert!((nef - 10.0 * mean_row.log10()).abs() < 1e-9);

        // closed form for K = M = 5
        let h = phydyas_coefficients(5).unwrap();
        let lin = (1.0 + 2.0 / (h[1].powi(2) - h[4].powi(2)) + 2.0 / (h[2].powi(2) - h[3].powi(2))) / 5.0;
        let full = noise_enhancement_db(&GfdmConfig::standard()).unwrap();
        assert!((full - 10.0 * lin.log10()).abs() < 1e-6, "{full} vs {}", 10.0 * lin.log10());
    }

    #[test]
    fn degenerate_prototype_is_singular() {
        // even M with K = M puts equal taps in the middle residue class
        let even = small(16, 4, 0, PrototypeKind::Phydyas { overlap: 4 });
        assert!(matches!(noise_enhancement_db(&even), Err(Error::Singular { .. })));
        let cfg = small(8, 3, 0, PrototypeKind::Phydyas { overlap: 1 });
        assert!(matches!(noise_enhancement_db(&cfg), Err(Error::Singular { .. })));
        let x = ComplexSignal::zeros(24, 1.0).unwrap();
        assert!(matches!(
            gfdm_demodulate_zf(&x, &cfg, &ChannelEstimate::identity(24)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn oracle_size_cap() {
        assert!(gfdm_build_matrix(&GfdmConfig::standard()).is_err());
    }
}
