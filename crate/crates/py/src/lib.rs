use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use pon_phy::harness::{self, ExperimentConfig, Modem};
use pon_phy::mapping::{demap_qam16, map_qam16, BitStream};
use pon_phy::{metrics, numerics, ComplexSignal, Error, SymbolGrid};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_)
        | Error::UnsupportedParameter(_)
        | Error::Config(_)
        | Error::Overlap(_)
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

/// Names of the built-in experiment presets.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    harness::PRESETS.to_vec()
}

/// A preset as JSON text.
#[pyfunction]
fn preset_json(name: &str) -> PyResult<String> {
    harness::preset(name).and_then(|c| c.to_json()).map_err(to_py)
}

/// Checks a config (JSON text) and returns it with defaults filled in.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json_str(text).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    cfg.to_json().map_err(to_py)
}

/// Runs a config (JSON text) in memory and returns the results rows as
/// dicts.
#[pyfunction]
#[pyo3(signature = (config, workers=None, seed=None))]
fn run<'py>(py: Python<'py>, config: &str, workers: Option<usize>, seed: Option<u64>) -> PyResult<Bound<'py, PyList>> {
    let mut cfg = ExperimentConfig::from_json_str(config).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = py.detach(|| harness::simulate(&cfg, workers)).map_err(to_py)?;
    let rows = serde_json::to_value(&out.results).map_err(|e| to_py(e.into()))?;
    Ok(json_to_py(py, &rows)?.cast_into::<PyList>()?)
}

/// One of the preset waveforms, for modulating symbol grids directly.
#[pyclass(name = "Modem", frozen)]
struct PyModem {
    inner: Modem,
}

#[pymethods]
impl PyModem {
    #[new]
    fn new(preset: &str) -> PyResult<Self> {
        Ok(Self {
            inner: harness::preset(preset).map_err(to_py)?.modem,
        })
    }

    #[getter]
    fn waveform(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn n_active(&self) -> usize {
        self.inner.n_active()
    }

    #[getter]
    fn rows_per_frame(&self) -> usize {
        self.inner.rows_per_frame()
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.inner.frame_len()
    }

    #[getter]
    fn sample_rate(&self) -> f64 {
        self.inner.sample_rate()
    }

    /// Modulates `frames` whole frames of 16-QAM symbols (row-major,
    /// `rows_per_frame · n_active` per frame).
    fn modulate(&self, symbols: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let width = self.inner.n_active();
        if symbols.is_empty() || symbols.len() % (width * self.inner.rows_per_frame()) != 0 {
            return Err(PyValueError::new_err("symbol count is not a whole number of frames"));
        }
        let grid = SymbolGrid::new(symbols.len() / width, width, symbols).map_err(to_py)?;
        Ok(self.inner.modulate(&grid).map_err(to_py)?.into_samples())
    }

    /// Estimates the channel on the first `training` frames of `samples`
    /// from their known symbols, then demodulates the remaining frames.
    fn demodulate(&self, samples: Vec<Complex64>, known: Vec<Complex64>, training: usize) -> PyResult<Vec<Complex64>> {
        let m = &self.inner;
        let width = m.n_active();
        let x = ComplexSignal::new(samples, m.sample_rate()).map_err(to_py)?;
        let frames = x.len() / m.frame_len();
        if training == 0 || training >= frames {
            return Err(PyValueError::new_err(format!("training must be in [1, {frames})")));
        }
        let rows = training * m.rows_per_frame();
        let known = SymbolGrid::new(rows, width, known).map_err(to_py)?;
        let est = m.estimate(&m.frames(&x, 0, training).map_err(to_py)?, &known).map_err(to_py)?;
        let data = m.frames(&x, training, frames - training).map_err(to_py)?;
        Ok(m.demodulate(&data, &est).map_err(to_py)?.into_data())
    }
}

/// Gray-mapped 16-QAM symbols of a PRBS-31 stream with `n` symbols.
#[pyfunction]
fn qam16_symbols(seed: u64, n: usize) -> PyResult<Vec<Complex64>> {
    map_qam16(&BitStream::prbs31(seed, 4 * n)).map_err(to_py)
}

/// Hard 16-QAM decisions as bits.
#[pyfunction]
fn qam16_bits(symbols: Vec<Complex64>) -> Vec<u8> {
    demap_qam16(&symbols).bits().to_vec()
}

/// EVM in percent of `rx` against `reference` (same length).
#[pyfunction]
fn evm_percent(rx: Vec<Complex64>, reference: Vec<Complex64>) -> PyResult<f64> {
    let n = reference.len();
    let a = SymbolGrid::new(1, n, rx).map_err(to_py)?;
    let b = SymbolGrid::new(1, n, reference).map_err(to_py)?;
    Ok(metrics::evm(&a, &b).map_err(to_py)?.percent)
}

/// Welch PSD: `(frequencies_hz, psd_db)`, ascending two-sided axis.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, segment_len=4096, overlap=0.5))]
fn welch_psd(samples: Vec<Complex64>, sample_rate: f64, segment_len: usize, overlap: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let x = ComplexSignal::new(samples, sample_rate).map_err(to_py)?;
    let p = numerics::welch_psd(&x, segment_len, overlap).map_err(to_py)?;
    Ok((p.frequencies, p.psd_db))
}

#[pyfunction]
fn qam16_ber_theory(es_n0_db: f64) -> f64 {
    metrics::qam16_ber_theory(10f64.powf(es_n0_db / 10.0))
}

#[pymodule]
fn pon_phy_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FEC_LIMIT", metrics::FEC_LIMIT)?;
    m.add("VERSION", harness::VERSION)?;
    m.add_class::<PyModem>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset_json, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(qam16_symbols, m)?)?;
    m.add_function(wrap_pyfunction!(qam16_bits, m)?)?;
    m.add_function(wrap_pyfunction!(evm_percent, m)?)?;
    m.add_function(wrap_pyfunction!(welch_psd, m)?)?;
    m.add_function(wrap_pyfunction!(qam16_ber_theory, m)?)?;
    Ok(())
}
