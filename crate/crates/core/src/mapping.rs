//! Bit sources and Gray-labelled constellations (square 16-QAM, PAM-4).
//!
//! Labelling, fixed repo-wide: each 2-bit group maps to a 4-level rail as
//! `00 → -3`, `01 → -1`, `11 → +1`, `10 → +3`. PAM-4 uses one rail scaled by
//! `1/√5`; 16-QAM uses bits `b0 b1` on I and `b2 b3` on Q, scaled by `1/√10`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sequence of bits (each byte is 0 or 1) with a note on where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitStream {
    bits: Vec<u8>,
    pub origin: String,
}

impl BitStream {
    pub fn new(bits: Vec<u8>, origin: impl Into<String>) -> Result<Self> {
        if let Some(k) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!("bit {k} has value {}", bits[k])));
        }
        Ok(Self {
            bits,
            origin: origin.into(),
        })
    }

    /// `len` bits of the PRBS-31 sequence (x³¹ + x²⁸ + 1) starting from a
    /// state derived from `seed`. Distinct seeds give distinct phases.
    pub fn prbs31(seed: u64, len: usize) -> Self {
        // splitmix64 finalizer so nearby seeds start far apart in the sequence
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        let mut state = (z & 0x7FFF_FFFF) as u32;
        if state == 0 {
            state = 0x5A5A_5A5A & 0x7FFF_FFFF;
        }
        let mut bits = Vec::with_capacity(len);
        for _ in 0..len {
            let bit = ((state >> 30) ^ (state >> 27)) & 1;
            state = ((state << 1) | bit) & 0x7FFF_FFFF;
            bits.push(bit as u8);
        }
        Self {
            bits,
            origin: format!("prbs31 seed={seed}"),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

const RAIL: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

/// Gray rail level index for a bit pair.
fn rail_index(b0: u8, b1: u8) -> usize {
    match (b0, b1) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

const RAIL_BITS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];

/// Nearest rail level for an unscaled amplitude (thresholds at 0, ±2).
fn decide_rail(v: f64) -> usize {
    if v < -2.0 {
        0
    } else if v < 0.0 {
        1
    } else if v < 2.0 {
        2
    } else {
        3
    }
}

pub const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/√10
pub const PAM4_SCALE: f64 = 0.447_213_595_499_957_9; // 1/√5

/// Symbol alphabet with the bit label of each point.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub points: Vec<Complex64>,
    pub gray_labels: Vec<u8>,
    pub bits_per_symbol: usize,
}

impl Constellation {
    pub fn qam16() -> Self {
        let mut points = Vec::with_capacity(16);
        let mut gray_labels = Vec::with_capacity(16);
        for label in 0u8..16 {
            let b = [(label >> 3) & 1, (label >> 2) & 1, (label >> 1) & 1, label & 1];
            let i = RAIL[rail_index(b[0], b[1])];
            let q = RAIL[rail_index(b[2], b[3])];
            points.push(Complex64::new(i, q) * QAM16_SCALE);
            gray_labels.push(label);
        }
        Self {
            points,
            gray_labels,
            bits_per_symbol: 4,
        }
    }

    pub fn pam4() -> Self {
        let mut points = Vec::with_capacity(4);
        let mut gray_labels = Vec::with_capacity(4);
        for label in 0u8..4 {
            let level = RAIL[rail_index((label >> 1) & 1, label & 1)];
            points.push(Complex64::new(level * PAM4_SCALE, 0.0));
            gray_labels.push(label);
        }
        Self {
            points,
            gray_labels,
            bits_per_symbol: 2,
        }
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

pub fn map_qam16(bits: &BitStream) -> Result<Vec<Complex64>> {
    if bits.len() % 4 != 0 {
        return Err(Error::invalid(format!(
            "16-QAM needs a multiple of 4 bits, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .bits()
        .chunks_exact(4)
        .map(|b| {
            Complex64::new(RAIL[rail_index(b[0], b[1])], RAIL[rail_index(b[2], b[3])])
                * QAM16_SCALE
        })
        .collect())
}

/// Hard-decision demapping of arbitrary complex values.
pub fn demap_qam16(symbols: &[Complex64]) -> BitStream {
    let mut bits = Vec::with_capacity(4 * symbols.len());
    for s in symbols {
        let (i0, i1) = RAIL_BITS[decide_rail(s.re / QAM16_SCALE)];
        let (q0, q1) = RAIL_BITS[decide_rail(s.im / QAM16_SCALE)];
        bits.extend_from_slice(&[i0, i1, q0, q1]);
    }
    BitStream {
        bits,
        origin: "demap_qam16".into(),
    }
}

/// Nearest 16-QAM point for each value.
pub fn decide_qam16(symbols: &[Complex64]) -> Vec<Complex64> {
    symbols
        .iter()
        .map(|s| {
            Complex64::new(
                RAIL[decide_rail(s.re / QAM16_SCALE)],
                RAIL[decide_rail(s.im / QAM16_SCALE)],
            ) * QAM16_SCALE
        })
        .collect()
}

pub fn map_pam4(bits: &BitStream) -> Result<Vec<f64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "PAM-4 needs an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .bits()
        .chunks_exact(2)
        .map(|b| RAIL[rail_index(b[0], b[1])] * PAM4_SCALE)
        .collect())
}

pub fn demap_pam4(symbols: &[f64]) -> BitStream {
    let mut bits = Vec::with_capacity(2 * symbols.len());
    for &s in symbols {
        let (b0, b1) = RAIL_BITS[decide_rail(s / PAM4_SCALE)];
        bits.push(b0);
        bits.push(b1);
    }
    BitStream {
        bits,
        origin: "demap_pam4".into(),
    }
}

/// Nearest PAM-4 level (unit average power scaling).
pub fn decide_pam4(v: f64) -> f64 {
    RAIL[decide_rail(v / PAM4_SCALE)] * PAM4_SCALE
}
