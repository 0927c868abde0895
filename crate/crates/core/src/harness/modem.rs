use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfdm::{estimate_block_channel_smoothed, gfdm_demodulate_zf, gfdm_modulate, GfdmConfig};
use crate::grid::{ChannelEstimate, MulticarrierConfig, SymbolGrid};
use crate::ofdm::{estimate_channel_ls, ofdm_demodulate, ofdm_modulate};
use crate::signal::ComplexSignal;
use crate::ufofdm::{estimate_composite_ls, ufofdm_demodulate, ufofdm_modulate, UfofdmConfig};

/// One of the three multicarrier waveforms with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "waveform", rename_all = "lowercase")]
pub enum Modem {
    Ofdm(MulticarrierConfig),
    Ufofdm(UfofdmConfig),
    Gfdm(GfdmConfig),
}

impl Modem {
    pub fn name(&self) -> &'static str {
        match self {
            Modem::Ofdm(_) => "ofdm",
            Modem::Ufofdm(_) => "ufofdm",
            Modem::Gfdm(_) => "gfdm",
        }
    }

    pub fn base(&self) -> &MulticarrierConfig {
        match self {
            Modem::Ofdm(c) => c,
            Modem::Ufofdm(c) => &c.base,
            Modem::Gfdm(c) => &c.base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Modem::Ofdm(c) => c.validate(),
            Modem::Ufofdm(c) => c.validate(),
            Modem::Gfdm(c) => c.validate(),
        }
    }

    pub fn n_active(&self) -> usize {
        self.base().n_active()
    }

    /// Grid rows per frame: one symbol, or one block of `M` subsymbols.
    pub fn rows_per_frame(&self) -> usize {
        match self {
            Modem::Gfdm(c) => c.m_subsymbols,
            _ => 1,
        }
    }

    /// Samples per frame at the modem rate.
    pub fn frame_len(&self) -> usize {
        match self {
            Modem::Ofdm(c) => c.symbol_len(),
            Modem::Ufofdm(c) => c.symbol_len(),
            Modem::Gfdm(c) => c.symbol_len(),
        }
    }

    pub fn sample_rate(&self) -> f64 {
        self.base().sample_rate()
    }

    pub fn modulate(&self, grid: &SymbolGrid) -> Result<ComplexSignal> {
        match self {
            Modem::Ofdm(c) => ofdm_modulate(grid, c),
            Modem::Ufofdm(c) => ufofdm_modulate(grid, c),
            Modem::Gfdm(c) => gfdm_modulate(grid, c),
        }
    }

    /// Least-squares estimate of whatever response the receiver must undo.
    pub fn estimate(&self, rx: &ComplexSignal, known: &SymbolGrid) -> Result<ChannelEstimate> {
        match self {
            Modem::Ofdm(c) => estimate_channel_ls(rx, known, c),
            Modem::Ufofdm(c) => estimate_composite_ls(rx, known, c),
            Modem::Gfdm(c) => estimate_block_channel_smoothed(rx, known, c, c.m_subsymbols),
        }
    }

    pub fn demodulate(&self, rx: &ComplexSignal, est: &ChannelEstimate) -> Result<SymbolGrid> {
        match self {
            Modem::Ofdm(c) => ofdm_demodulate(rx, c, est),
            Modem::Ufofdm(c) => ufofdm_demodulate(rx, c, est),
            Modem::Gfdm(c) => gfdm_demodulate_zf(rx, c, est),
        }
    }

    /// Slices whole frames `[first, first + count)` out of a frame train.
    pub fn frames(&self, x: &ComplexSignal, first: usize, count: usize) -> Result<ComplexSignal> {
        let len = self.frame_len();
        let end = (first + count) * len;
        if end > x.len() {
            return Err(Error::invalid(format!(
                "need {end} samples for frames {first}..{}, have {}",
                first + count,
                x.len()
            )));
        }
        ComplexSignal::new(x.samples()[first * len..end].to_vec(), x.sample_rate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_qam16, BitStream};

    #[test]
    fn every_waveform_round_trips_through_the_wrapper() {
        let modems = [
            Modem::Ofdm(MulticarrierConfig::standard_ofdm()),
            Modem::Ufofdm(UfofdmConfig::standard()),
            Modem::Gfdm(GfdmConfig::standard()),
        ];
        for m in modems {
            let rows = 2 * m.rows_per_frame();
            let bits = BitStream::prbs31(1, 4 * rows * 78);
            let grid = SymbolGrid::new(rows, 78, map_qam16(&bits).unwrap()).unwrap();
            let x = m.modulate(&grid).unwrap();
            assert_eq!(x.len(), 2 * m.frame_len());
            let est = m.estimate(&x, &grid).unwrap();
            let y = m.demodulate(&m.frames(&x, 1, 1).unwrap(), &est).unwrap();
            assert!(y.max_abs_diff(&grid.rows(m.rows_per_frame(), m.rows_per_frame())) < 1e-9, "{}", m.name());
        }
    }

    #[test]
    fn tagged_json() {
        let m = Modem::Gfdm(GfdmConfig::standard());
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["waveform"], "gfdm");
        assert_eq!(serde_json::from_value::<Modem>(v).unwrap(), m);
    }
}
