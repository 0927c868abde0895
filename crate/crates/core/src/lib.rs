//! Physical-layer simulation of a converged wired/wireless optical access
//! downlink: CP-OFDM, UF-OFDM and GFDM modems for the wireless bands, a PAM-4
//! transceiver for the wired service, and an IM/DD link model that carries
//! all of them on one drive signal.
//!
//! FFT convention, fixed crate-wide: the forward transform is the plain sum
//! `X[k] = Σ x[n]·e^{-j2πkn/N}` and the inverse carries the `1/N`.

pub mod error;
pub mod gfdm;
pub mod grid;
pub mod harness;
pub mod link;
pub mod mapping;
pub mod metrics;
pub mod numerics;
pub mod ofdm;
pub mod pam;
pub mod signal;
pub mod ufofdm;

pub use error::{Error, Result};
pub use grid::{ChannelEstimate, MulticarrierConfig, SymbolGrid};
pub use signal::ComplexSignal;
