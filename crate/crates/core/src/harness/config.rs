use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::modem::Modem;
use crate::error::{Error, Result};
use crate::gfdm::GfdmConfig;
use crate::grid::MulticarrierConfig;
use crate::link::LinkConfig;
use crate::ufofdm::UfofdmConfig;

pub const PRESETS: [&str; 3] = ["ofdm-t1", "ufofdm-t1", "gfdm-t1"];

/// One experiment: a waveform, a sweep grid and Monte-Carlo sizes.
///
/// Points are the Cartesian product `fiber_km × guard_band_hz × (rx_power_dbm
/// or snr_db)`. Exactly one of the two noise sweeps is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub modem: Modem,
    pub guard_band_hz: Vec<f64>,
    pub with_pam: bool,
    /// Wireless bands carrying data (1 = lowest); the others stay silent.
    #[serde(default = "all_bands")]
    pub bands: Vec<usize>,
    #[serde(default)]
    pub rx_power_dbm: Vec<f64>,
    /// Electrical SNR of the detected composite, instead of a power sweep.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    pub fiber_km: Vec<f64>,
    /// Frames (symbols, or GFDM blocks) per band and point, training included.
    pub n_frames: usize,
    pub frames_per_trial: usize,
    /// Leading frames of every trial used for channel estimation only.
    pub training_frames: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub write_psd: bool,
    #[serde(default)]
    pub link: LinkConfig,
}

fn all_bands() -> Vec<usize> {
    vec![1, 2, 3]
}

fn yes() -> bool {
    true
}

/// Standard profile for `name`, set up as the 15 MHz, with-PAM, -14 dBm,
/// 25 km operating point.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (modem, n_frames, per_trial, training) = match name {
        "ofdm-t1" => (Modem::Ofdm(MulticarrierConfig::standard_ofdm()), 500, 100, 10),
        "ufofdm-t1" => (Modem::Ufofdm(UfofdmConfig::standard()), 500, 100, 10),
        "gfdm-t1" => (Modem::Gfdm(GfdmConfig::standard()), 100, 20, 2),
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        modem,
        guard_band_hz: vec![15e6],
        with_pam: true,
        bands: all_bands(),
        rx_power_dbm: vec![-14.0],
        snr_db: Vec::new(),
        fiber_km: vec![25.0],
        n_frames,
        frames_per_trial: per_trial,
        training_frames: training,
        seed: 1,
        output_dir: None,
        write_psd: true,
        link: LinkConfig::default(),
    })
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // a different waveform replaces the whole modem block
                    Some(slot) if k != "modem" || slot.get("waveform") == v.get("waveform") => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl ExperimentConfig {
    /// Parses JSON text. A top-level `"preset"` key supplies defaults that
    /// the remaining keys override (objects merge key by key).
    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON: {e}")))?;
        if let Some(obj) = value.as_object_mut() {
            if let Some(p) = obj.remove("preset") {
                let name = p
                    .as_str()
                    .ok_or_else(|| Error::Config("`preset` must be a string".into()))?;
                let mut base = serde_json::to_value(preset(name)?)?;
                merge(&mut base, value);
                value = base;
            }
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Link parameters for one sweep point (noise is added by the harness).
    pub fn link_at(&self, guard: f64, fiber_km: f64) -> LinkConfig {
        LinkConfig {
            guard_band: guard,
            fiber_km,
            rx_power_dbm: None,
            ..self.link.clone()
        }
    }

    /// Every violated invariant, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.name.trim().is_empty() {
            p.push("name is empty".to_string());
        }
        if let Err(e) = self.modem.validate() {
            p.push(format!("modem: {e}"));
        }
        let occupied = self.modem.base().occupied_bandwidth();
        if !self.bands.is_empty() && occupied > self.link.band_bw * (1.0 + 1e-9) {
            p.push(format!(
                "modem occupies {occupied} Hz, wider than the {} Hz band",
                self.link.band_bw
            ));
        }
        let rate = self.modem.sample_rate();
        if (rate - self.link.modem_rate).abs() > 1e-6 * rate {
            p.push(format!(
                "modem sample rate {rate} Hz differs from the link's {} Hz",
                self.link.modem_rate
            ));
        }
        if self.guard_band_hz.is_empty() {
            p.push("guard_band_hz sweep is empty".into());
        }
        for g in &self.guard_band_hz {
            if !(*g >= 0.0 && g.is_finite()) {
                p.push(format!("guard band {g} Hz must be non-negative"));
            }
        }
        if self.fiber_km.is_empty() {
            p.push("fiber_km sweep is empty".into());
        }
        for f in &self.fiber_km {
            if !(*f >= 0.0 && f.is_finite()) {
                p.push(format!("fiber length {f} km must be non-negative"));
            }
        }
        match (self.rx_power_dbm.is_empty(), self.snr_db.is_empty()) {
            (true, true) => p.push("one of rx_power_dbm or snr_db must list sweep points".into()),
            (false, false) => p.push("rx_power_dbm and snr_db are mutually exclusive".into()),
            _ => {}
        }
        if self.rx_power_dbm.iter().chain(&self.snr_db).any(|v| !v.is_finite()) {
            p.push("sweep values must be finite".into());
        }
        if !self.rx_power_dbm.is_empty() && self.link.noise.is_none() {
            p.push("rx_power_dbm sweep needs link.noise".into());
        }
        let mut seen = [false; 4];
        for &b in &self.bands {
            if !(1..=3).contains(&b) {
                p.push(format!("band {b} does not exist (1, 2 or 3)"));
            } else if std::mem::replace(&mut seen[b], true) {
                p.push(format!("band {b} listed twice"));
            }
        }
        if self.bands.is_empty() && !self.with_pam {
            p.push("nothing to transmit: no bands and no PAM".into());
        }
        if self.n_frames == 0 {
            p.push("n_frames must be positive".into());
        }
        if self.frames_per_trial == 0 {
            p.push("frames_per_trial must be positive".into());
        } else if self.n_frames % self.frames_per_trial != 0 {
            p.push(format!(
                "n_frames {} is not a multiple of frames_per_trial {}",
                self.n_frames, self.frames_per_trial
            ));
        }
        if !self.bands.is_empty() && (self.training_frames == 0 || self.training_frames >= self.frames_per_trial) {
            p.push(format!(
                "training_frames must be in [1, {}), got {}",
                self.frames_per_trial, self.training_frames
            ));
        }
        for &g in self.guard_band_hz.iter().filter(|g| **g >= 0.0) {
            for &f in self.fiber_km.iter().filter(|f| **f >= 0.0) {
                let link = self.link_at(g, f);
                if let Err(e) = link.validate() {
                    p.push(format!("link at guard {g} Hz: {e}"));
                } else if let Err(e) = link.check_overlap() {
                    p.push(format!("link at guard {g} Hz: {e}"));
                }
            }
        }
        p.dedup();
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("\n")))
        }
    }
}

/// Reads, fills defaults and checks a config file.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}
