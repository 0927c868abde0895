//! CP-OFDM modem with single-tap frequency-domain equalization.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ChannelEstimate, MulticarrierConfig, SymbolGrid};
use crate::numerics::FftPair;
use crate::signal::ComplexSignal;

/// Loads each grid row onto the active bins, inverse transforms, and
/// prepends the last `cp_len` samples. Output length is `M·(N + N_CP)`.
pub fn ofdm_modulate(grid: &SymbolGrid, cfg: &MulticarrierConfig) -> Result<ComplexSignal> {
    cfg.validate()?;
    if grid.n_subcarriers() != cfg.n_active() {
        return Err(Error::invalid(format!(
            "grid has {} subcarriers, config expects {}",
            grid.n_subcarriers(),
            cfg.n_active()
        )));
    }
    let n = cfg.n_fft;
    let fft = FftPair::new(n);
    let mut out = Vec::with_capacity(grid.n_symbols() * cfg.symbol_len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..grid.n_symbols() {
        buf.fill(Complex64::new(0.0, 0.0));
        for (k, &d) in grid.row(m).iter().enumerate() {
            buf[cfg.bin_index(k)] = d;
        }
        fft.inverse(&mut buf);
        out.extend_from_slice(&buf[n - cfg.cp_len..]);
        out.extend_from_slice(&buf);
    }
    Ok(ComplexSignal::from_parts(out, cfg.sample_rate()))
}

/// Active-bin outputs of the forward transform of each symbol, CP removed,
/// without equalization.
fn raw_bins(x: &ComplexSignal, cfg: &MulticarrierConfig) -> Result<SymbolGrid> {
    cfg.validate()?;
    let span = cfg.symbol_len();
    if x.len() % span != 0 {
        return Err(Error::invalid(format!(
            "signal length {} is not a multiple of the {span}-sample symbol",
            x.len()
        )));
    }
    let n_sym = x.len() / span;
    let fft = FftPair::new(cfg.n_fft);
    let mut grid = SymbolGrid::zeros(n_sym, cfg.n_active());
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
    for m in 0..n_sym {
        let start = m * span + cfg.cp_len;
        buf.copy_from_slice(&x.samples()[start..start + cfg.n_fft]);
        fft.forward(&mut buf);
        for (k, out) in grid.row_mut(m).iter_mut().enumerate() {
            *out = buf[cfg.bin_index(k)];
        }
    }
    Ok(grid)
}

/// Drops the CP, transforms, extracts the active bins and divides by the
/// channel estimate.
pub fn ofdm_demodulate(
    x: &ComplexSignal,
    cfg: &MulticarrierConfig,
    est: &ChannelEstimate,
) -> Result<SymbolGrid> {
    if est.len() != cfg.n_active() {
        return Err(Error::invalid(format!(
            "channel estimate has {} bins, expected {}",
            est.len(),
            cfg.n_active()
        )));
    }
    let mut grid = raw_bins(x, cfg)?;
    for m in 0..grid.n_symbols() {
        for (k, v) in grid.row_mut(m).iter_mut().enumerate() {
            *v = est.equalize(k, *v);
        }
    }
    Ok(grid)
}

/// Pooled least-squares per-subcarrier gain over known training symbols:
/// `ĥ_n = Σ_m y_{m,n}·d*_{m,n} / Σ_m |d_{m,n}|²`.
pub fn estimate_channel_ls(
    rx_training: &ComplexSignal,
    known_grid: &SymbolGrid,
    cfg: &MulticarrierConfig,
) -> Result<ChannelEstimate> {
    let y = raw_bins(rx_training, cfg)?;
    ls_from_bins(&y, known_grid)
}

/// Least-squares gains from already-demodulated training bins.
pub(crate) fn ls_from_bins(y: &SymbolGrid, known: &SymbolGrid) -> Result<ChannelEstimate> {
    if known.n_symbols() == 0 {
        return Err(Error::invalid("at least one training symbol is required"));
    }
    if y.n_symbols() != known.n_symbols() || y.n_subcarriers() != known.n_subcarriers() {
        return Err(Error::invalid(format!(
            "training grid is {}×{}, received {}×{}",
            known.n_symbols(),
            known.n_subcarriers(),
            y.n_symbols(),
            y.n_subcarriers()
        )));
    }
    if let Some(i) = known.data().iter().position(|d| d.norm_sqr() == 0.0) {
        return Err(Error::invalid(format!("known training symbol {i} is zero")));
    }
    let h_freq = (0..known.n_subcarriers())
        .map(|n| {
            let (num, den) = (0..known.n_symbols()).fold(
                (Complex64::new(0.0, 0.0), 0.0),
                |(num, den), m| {
                    let d = known.get(m, n);
                    (num + y.get(m, n) * d.conj(), den + d.norm_sqr())
                },
            );
            num / den
        })
        .collect();
    Ok(ChannelEstimate { h_freq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_qam16, BitStream};
    use crate::numerics::{convolve, fft_forward};

    fn random_grid(m: usize, n: usize, seed: u64) -> SymbolGrid {
        let bits = BitStream::prbs31(seed, 4 * m * n);
        SymbolGrid::new(m, n, map_qam16(&bits).unwrap()).unwrap()
    }

    /// Linear convolution truncated to the input length (a causal FIR channel).
    fn fir_channel(x: &ComplexSignal, taps: &[Complex64]) -> ComplexSignal {
        let mut y = convolve(x.samples(), taps);
        y.truncate(x.len());
        ComplexSignal::new(y, x.sample_rate()).unwrap()
    }

    fn channel_response(taps: &[Complex64], cfg: &MulticarrierConfig) -> ChannelEstimate {
        let mut padded = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
        padded[..taps.len()].copy_from_slice(taps);
        let spec = fft_forward(&padded).unwrap();
        ChannelEstimate {
            h_freq: (0..cfg.n_active()).map(|k| spec[cfg.bin_index(k)]).collect(),
        }
    }

    #[test]
    fn single_tone_has_constant_envelope() {
        let cfg = MulticarrierConfig::contiguous(1024, 5, 1, 32, 1.0).unwrap();
        let grid = SymbolGrid::new(1, 1, vec![Complex64::new(1.0, 0.0)]).unwrap();
        let x = ofdm_modulate(&grid, &cfg).unwrap();
        assert_eq!(x.len(), 1056);
        for s in x.samples() {
            assert!((s.norm() - 1.0 / 1024.0).abs() < 1e-15);
        }
        // the CP is the tail of the symbol
        for k in 0..32 {
            assert_eq!(x.samples()[k], x.samples()[1024 + k]);
        }
    }

    #[test]
    fn zero_grid_gives_zero_signal() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let x = ofdm_modulate(&SymbolGrid::zeros(3, 78), &cfg).unwrap();
        assert_eq!(x.len(), 3 * 1056);
        assert!(x.samples().iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn identity_round_trip() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let grid = random_grid(20, 78, 5);
        let x = ofdm_modulate(&grid, &cfg).unwrap();
        let back = ofdm_demodulate(&x, &cfg, &ChannelEstimate::identity(78)).unwrap();
        assert!(back.max_abs_diff(&grid) < 1e-10);
    }

    #[test]
    fn cp_absorbs_short_channel() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let grid = random_grid(10, 78, 8);
        let taps = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.4, -0.2),
            Complex64::new(-0.1, 0.05),
        ];
        let x = fir_channel(&ofdm_modulate(&grid, &cfg).unwrap(), &taps);
        let back = ofdm_demodulate(&x, &cfg, &channel_response(&taps, &cfg)).unwrap();
        assert!(back.max_abs_diff(&grid) < 1e-9);
    }

    #[test]
    fn channel_longer_than_cp_leaves_isi() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let grid = random_grid(10, 78, 9);
        let taps: Vec<Complex64> = (0..64)
            .map(|k| Complex64::new(0.98f64.powi(k), 0.0))
            .collect();
        let x = fir_channel(&ofdm_modulate(&grid, &cfg).unwrap(), &taps);
        let back = ofdm_demodulate(&x, &cfg, &channel_response(&taps, &cfg)).unwrap();
        let err: f64 = back
            .data()
            .iter()
            .zip(grid.data())
            .skip(78) // first symbol has no predecessor
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / (9.0 * 78.0);
        assert!(100.0 * err.sqrt() > 1.0, "evm {}", 100.0 * err.sqrt());
    }

    #[test]
    fn misaligned_length_rejected() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let x = ComplexSignal::zeros(1057, 2e9).unwrap();
        assert!(ofdm_demodulate(&x, &cfg, &ChannelEstimate::identity(78)).is_err());
        let bad = SymbolGrid::zeros(1, 77);
        assert!(ofdm_modulate(&bad, &cfg).is_err());
    }

    #[test]
    fn ls_estimate_identity_and_fir() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let known = random_grid(4, 78, 12);
        let x = ofdm_modulate(&known, &cfg).unwrap();
        let est = estimate_channel_ls(&x, &known, &cfg).unwrap();
        for h in &est.h_freq {
            assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
        let taps = [Complex64::new(0.8, 0.1), Complex64::new(0.3, 0.0), Complex64::new(0.0, -0.2)];
        let y = fir_channel(&x, &taps);
        let est = estimate_channel_ls(&y, &known, &cfg).unwrap();
        let truth = channel_response(&taps, &cfg);
        for (a, b) in est.h_freq.iter().zip(&truth.h_freq) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn ls_error_variance_follows_training_length() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::{Distribution, Normal};

        let cfg = MulticarrierConfig::standard_ofdm();
        let k_train = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut ratio_sum = 0.0;
        let mut count = 0;
        for trial in 0..40 {
            let known = random_grid(k_train, 78, 1000 + trial);
            let x = ofdm_modulate(&known, &cfg).unwrap();
            // 20 dB SNR on the per-bin symbols: bin noise variance 0.01
            let sigma2_bin = 0.01;
            let sigma_t = (sigma2_bin / cfg.n_fft as f64 / 2.0).sqrt();
            let normal = Normal::new(0.0, sigma_t).unwrap();
            let noisy: Vec<Complex64> = x
                .samples()
                .iter()
                .map(|s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect();
            let y = ComplexSignal::new(noisy, x.sample_rate()).unwrap();
            let est = estimate_channel_ls(&y, &known, &cfg).unwrap();
            for (n, h) in est.h_freq.iter().enumerate() {
                let energy: f64 = (0..k_train).map(|m| known.get(m, n).norm_sqr()).sum();
                ratio_sum += (h - 1.0).norm_sqr() / (sigma2_bin / energy);
                count += 1;
            }
        }
        let ratio = ratio_sum / count as f64;
        assert!((1.0 / 1.5..1.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn ls_rejects_zero_symbols() {
        let cfg = MulticarrierConfig::standard_ofdm();
        let known = SymbolGrid::zeros(1, 78);
        let x = ofdm_modulate(&known, &cfg).unwrap();
        assert!(estimate_channel_ls(&x, &known, &cfg).is_err());
    }
}
