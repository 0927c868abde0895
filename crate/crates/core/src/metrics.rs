//! EVM, BER, spectral emission, wired/wireless power ratio and receiver
//! sensitivity.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::SymbolGrid;
use crate::mapping::BitStream;
use crate::numerics::Psd;

/// Hard-decision FEC threshold (7 % overhead HD-FEC).
pub const FEC_LIMIT: f64 = 3.8e-3;

/// Floor reported when a spectral window holds no power at all.
pub const DB_FLOOR: f64 = -200.0;

/// Width of the averaging window used by [`oob_level`].
pub const OOB_WINDOW_HZ: f64 = 1e6;

/// Aggregate and per-subcarrier EVM in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evm {
    pub percent: f64,
    pub per_subcarrier: Vec<f64>,
}

/// RMS error vector relative to the unit average constellation power.
/// Per-subcarrier values average over symbols only; the aggregate is the
/// RMS of the per-subcarrier values.
pub fn evm(rx: &SymbolGrid, reference: &SymbolGrid) -> Result<Evm> {
    if rx.n_symbols() != reference.n_symbols() || rx.n_subcarriers() != reference.n_subcarriers() {
        return Err(Error::invalid(format!(
            "grid shapes differ: {}x{} vs {}x{}",
            rx.n_symbols(),
            rx.n_subcarriers(),
            reference.n_symbols(),
            reference.n_subcarriers()
        )));
    }
    if rx.n_symbols() == 0 || rx.n_subcarriers() == 0 {
        return Err(Error::invalid("empty symbol grid"));
    }
    let k = rx.n_subcarriers();
    let mut mse = vec![0.0; k];
    for m in 0..rx.n_symbols() {
        for ((e, a), b) in mse.iter_mut().zip(rx.row(m)).zip(reference.row(m)) {
            *e += (a - b).norm_sqr();
        }
    }
    let n = rx.n_symbols() as f64;
    let per_subcarrier: Vec<f64> = mse.iter().map(|e| 100.0 * (e / n).sqrt()).collect();
    let percent = (per_subcarrier.iter().map(|v| v * v).sum::<f64>() / k as f64).sqrt();
    Ok(Evm {
        percent,
        per_subcarrier,
    })
}

/// Bit error count with a Wilson score interval at 95 %.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerCount {
    pub ber: f64,
    pub errors: u64,
    pub n: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerCount {
    pub fn from_counts(errors: u64, n: u64) -> Result<Self> {
        if n == 0 || errors > n {
            return Err(Error::invalid(format!("invalid count {errors}/{n}")));
        }
        let (ci_low, ci_high) = wilson_interval(errors, n, 1.959_963_984_540_054);
        Ok(Self {
            ber: errors as f64 / n as f64,
            errors,
            n,
            ci_low,
            ci_high,
        })
    }

    pub fn passes_fec(&self) -> bool {
        self.ber < FEC_LIMIT
    }

    /// Pools two counts of the same experiment.
    pub fn merge(&self, other: &BerCount) -> Result<Self> {
        Self::from_counts(self.errors + other.errors, self.n + other.n)
    }
}

fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn ber_count(rx: &BitStream, tx: &BitStream) -> Result<BerCount> {
    if rx.len() != tx.len() {
        return Err(Error::invalid(format!(
            "bit streams differ in length: {} vs {}",
            rx.len(),
            tx.len()
        )));
    }
    if rx.is_empty() {
        return Err(Error::invalid("empty bit streams"));
    }
    let errors = rx.bits().iter().zip(tx.bits()).filter(|(a, b)| a != b).count();
    BerCount::from_counts(errors as u64, rx.len() as u64)
}

fn window_mean(psd: &Psd, lo: f64, hi: f64) -> Result<f64> {
    let (first, last) = match (psd.frequencies.first(), psd.frequencies.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::invalid("empty PSD")),
    };
    if lo < first || hi > last {
        return Err(Error::invalid(format!(
            "window [{lo}, {hi}] Hz is outside the PSD span [{first}, {last}]"
        )));
    }
    let vals: Vec<f64> = psd
        .frequencies
        .iter()
        .zip(&psd.psd_db)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, d)| 10f64.powf(d / 10.0))
        .collect();
    if vals.is_empty() {
        return Err(Error::invalid(format!("no PSD bins inside [{lo}, {hi}] Hz")));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Out-of-band level in dB relative to the mean in-band density, taken as
/// the worse of 1 MHz windows centered `offset` outside either band edge.
pub fn oob_level(psd: &Psd, band_lo: f64, band_hi: f64, offset: f64) -> Result<f64> {
    if !(offset > 0.0) {
        return Err(Error::invalid("offset must be positive"));
    }
    if !(band_hi > band_lo) {
        return Err(Error::invalid("band edges are reversed"));
    }
    let inband = window_mean(psd, band_lo, band_hi)?;
    let half = OOB_WINDOW_HZ / 2.0;
    let upper = window_mean(psd, band_hi + offset - half, band_hi + offset + half)?;
    let lower = window_mean(psd, band_lo - offset - half, band_lo - offset + half)?;
    if !(inband > 0.0) {
        return Err(Error::invalid("no in-band power"));
    }
    Ok(to_db(upper.max(lower) / inband))
}

/// `10·log10(∫wired / Σ∫wireless)` on the linear PSD.
pub fn wwpr(psd: &Psd, wired: (f64, f64), wireless: &[(f64, f64)]) -> Result<f64> {
    let mut regions = vec![wired];
    regions.extend_from_slice(wireless);
    for r in &regions {
        if !(r.1 > r.0) {
            return Err(Error::invalid(format!("empty region [{}, {}]", r.0, r.1)));
        }
    }
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            let (a, b) = (regions[i], regions[j]);
            if a.0 < b.1 && b.0 < a.1 {
                return Err(Error::invalid(format!(
                    "regions [{}, {}] and [{}, {}] overlap",
                    a.0, a.1, b.0, b.1
                )));
            }
        }
    }
    let (Some(&first), Some(&last)) = (psd.frequencies.first(), psd.frequencies.last()) else {
        return Err(Error::invalid("empty PSD"));
    };
    let span = (first, last);
    if regions.iter().any(|r| r.0 < span.0 || r.1 > span.1) {
        return Err(Error::invalid("region outside the PSD span"));
    }
    let p_wired = psd.integrate(wired.0, wired.1);
    let p_wireless: f64 = wireless.iter().map(|r| psd.integrate(r.0, r.1)).sum();
    if !(p_wireless > 0.0) {
        return Err(Error::invalid("no wireless power"));
    }
    Ok(10.0 * (p_wired / p_wireless).log10())
}

/// Received power at which the BER crosses `target`, by linear
/// interpolation of `log10(BER)` against dBm between the bracketing points.
pub fn sensitivity_at_ber(curve: &[(f64, f64)], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target BER must be in (0, 1)"));
    }
    let mut pts: Vec<(f64, f64)> = curve.iter().copied().filter(|p| p.1 > 0.0).collect();
    if pts.len() < 2 {
        return Err(Error::Extrapolation("need at least two non-zero BER points".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lt = target.log10();
    for w in pts.windows(2) {
        let (p0, b0) = (w[0].0, w[0].1.log10());
        let (p1, b1) = (w[1].0, w[1].1.log10());
        if (b0 - lt) * (b1 - lt) <= 0.0 {
            if b0 == b1 {
                return Ok(p0);
            }
            return Ok(p0 + (lt - b0) * (p1 - p0) / (b1 - b0));
        }
    }
    Err(Error::Extrapolation(format!(
        "target BER {target:e} is outside the measured range"
    )))
}

pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact Gray 16-QAM bit error probability on AWGN at `Es/N0` (linear).
pub fn qam16_ber_theory(es_n0: f64) -> f64 {
    let x = (es_n0 / 5.0).sqrt();
    0.25 * (3.0 * q_function(x) + 2.0 * q_function(3.0 * x) - q_function(5.0 * x))
}

/// Gray PAM-4 bit error probability for unit-power levels and real noise
/// of variance `sigma²`, exact to nearest-neighbour errors.
pub fn pam4_ber_theory(sigma: f64) -> f64 {
    let d = 1.0 / 5f64.sqrt();
    // three thresholds, each crossed with prob Q(d/σ) from each neighbour
    0.75 * q_function(d / sigma)
}

/// Per-band result bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub band_id: String,
    pub evm_percent: f64,
    pub evm_per_subcarrier: Vec<f64>,
    pub ber: Option<BerCount>,
    pub psd: Option<Psd>,
    pub oob_db_at_offsets: BTreeMap<String, f64>,
    pub wwpr_db: Option<f64>,
}

impl MetricsReport {
    pub fn from_evm(band_id: impl Into<String>, evm: Evm) -> Self {
        Self {
            band_id: band_id.into(),
            evm_percent: evm.percent,
            evm_per_subcarrier: evm.per_subcarrier,
            ber: None,
            psd: None,
            oob_db_at_offsets: BTreeMap::new(),
            wwpr_db: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `band_id,subcarrier,evm_percent` rows, subcarriers numbered from 1.
    pub fn write_per_subcarrier_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["band_id", "subcarrier", "evm_percent"])?;
        for (i, v) in self.evm_per_subcarrier.iter().enumerate() {
            w.write_record([self.band_id.clone(), (i + 1).to_string(), format!("{v:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn reference(n_sym: usize, seed: u64) -> SymbolGrid {
        let bits = BitStream::prbs31(seed, 4 * 78 * n_sym);
        SymbolGrid::new(n_sym, 78, crate::mapping::map_qam16(&bits).unwrap()).unwrap()
    }

    fn noisy(r: &SymbolGrid, var: f64, seed: u64) -> SymbolGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (var / 2.0).sqrt();
        let data = r
            .data()
            .iter()
            .map(|v| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                v + Complex64::new(s * a, s * b)
            })
            .collect();
        SymbolGrid::new(r.n_symbols(), r.n_subcarriers(), data).unwrap()
    }

    #[test]
    fn evm_zero_and_known_noise() {
        let r = reference(200, 1);
        let e = evm(&r, &r).unwrap();
        assert_eq!(e.percent, 0.0);
        let e = evm(&noisy(&r, 0.0036, 2), &r).unwrap();
        assert!((e.percent - 6.0).abs() < 0.1, "{}", e.percent);
        assert_eq!(e.per_subcarrier.len(), 78);
        let rms = (e.per_subcarrier.iter().map(|v| v * v).sum::<f64>() / 78.0).sqrt();
        assert!((rms - e.percent).abs() < 1e-9);
        assert!(evm(&reference(3, 1), &r).is_err());
    }

    #[test]
    fn evm_tracks_snr() {
        let r = reference(200, 3);
        for snr_db in [10.0, 20.0, 30.0] {
            let var = 10f64.powf(-snr_db / 10.0);
            let e = evm(&noisy(&r, var, 4), &r).unwrap().percent;
            let want = 100.0 * 10f64.powf(-snr_db / 20.0);
            assert!((e / want - 1.0).abs() < 0.02, "{snr_db}: {e} vs {want}");
        }
    }

    #[test]
    fn ber_counts() {
        let a = BitStream::prbs31(5, 10_000);
        let c = ber_count(&a, &a).unwrap();
        assert_eq!((c.ber, c.errors), (0.0, 0));
        assert_eq!(c.ci_low, 0.0);
        let mut bits = a.bits().to_vec();
        bits[17] ^= 1;
        let b = BitStream::new(bits, "flip").unwrap();
        let c = ber_count(&b, &a).unwrap();
        assert_eq!(c.ber, 1e-4);
        assert!(c.ci_low < 1e-4 && c.ci_high > 1e-4);
        assert!(c.passes_fec());
        assert!(!BerCount::from_counts(4, 1000).unwrap().passes_fec());
        assert!(ber_count(&a, &BitStream::prbs31(5, 10)).is_err());
    }

    #[test]
    fn wilson_matches_reference_value() {
        // 10 successes in 100 at 95 %: [0.0552, 0.1744]
        let c = BerCount::from_counts(10, 100).unwrap();
        assert!((c.ci_low - 0.05523).abs() < 1e-4 && (c.ci_high - 0.17437).abs() < 1e-4);
    }

    fn flat(freqs: std::ops::Range<i64>, f: impl Fn(f64) -> f64) -> Psd {
        let fr: Vec<f64> = freqs.map(|k| k as f64 * 1e5).collect();
        let lin: Vec<f64> = fr.iter().map(|&x| f(x)).collect();
        Psd::from_linear(fr, &lin)
    }

    #[test]
    fn oob_of_brick_wall_hits_floor() {
        let psd = flat(-2000..2000, |f| if f.abs() <= 50e6 { 1.0 } else { 0.0 });
        assert_eq!(oob_level(&psd, -50e6, 50e6, 10e6).unwrap(), DB_FLOOR);
        let psd = flat(-2000..2000, |f| if f.abs() <= 50e6 { 1.0 } else { 1e-3 });
        assert!((oob_level(&psd, -50e6, 50e6, 10e6).unwrap() + 30.0).abs() < 1e-9);
        assert!(oob_level(&psd, -50e6, 50e6, 190e6).is_err());
        assert!(oob_level(&psd, -50e6, 50e6, 0.0).is_err());
    }

    #[test]
    fn wwpr_arithmetic_and_invariance() {
        let psd = flat(0..1000, |_| 1.0);
        let wl = [(40e6, 50e6), (50e6, 60e6), (60e6, 70e6)];
        assert!(wwpr(&psd, (0.0, 30e6), &wl).unwrap().abs() < 0.2);
        let half = wwpr(&psd, (0.0, 15e6), &wl).unwrap();
        assert!((half + 3.01).abs() < 0.15, "{half}");
        let scaled = wwpr(&psd.scaled(123.0), (0.0, 15e6), &wl).unwrap();
        assert!((scaled - half).abs() < 1e-9);
        assert!(wwpr(&psd, (0.0, 45e6), &wl).is_err());
        let empty = Psd { frequencies: vec![], psd_db: vec![] };
        assert!(wwpr(&empty, (0.0, 15e6), &wl).is_err());
    }

    #[test]
    fn sensitivity_interpolation() {
        let c = [(-20.0, 1e-2), (-18.0, 1e-4)];
        assert!((sensitivity_at_ber(&c, 1e-3).unwrap() + 19.0).abs() < 1e-12);
        assert!(matches!(sensitivity_at_ber(&c, 1e-6), Err(Error::Extrapolation(_))));
        let a = sensitivity_at_ber(&c, 2e-3).unwrap();
        assert_eq!(a - sensitivity_at_ber(&c, 2e-3).unwrap(), 0.0);
    }

    #[test]
    fn qam_theory_reference_points() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(3.0) - 1.349_898e-3).abs() < 1e-8);
        // Es/N0 = 16 dB
        let p = qam16_ber_theory(10f64.powf(1.6));
        assert!((p / 1.791_218_085_7e-3 - 1.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn report_round_trips() {
        let r = reference(10, 7);
        let mut rep = MetricsReport::from_evm("band1", evm(&noisy(&r, 0.01, 1), &r).unwrap());
        rep.oob_db_at_offsets.insert("10MHz".into(), -40.0);
        rep.ber = Some(BerCount::from_counts(3, 1000).unwrap());
        let back = MetricsReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
        let mut buf = Vec::new();
        rep.write_per_subcarrier_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("band_id,subcarrier,evm_percent\nband1,1,"));
        assert_eq!(text.lines().count(), 79);
    }
}
