//! Waveform files for an arbitrary waveform generator.
//!
//! Layout, byte for byte:
//!
//! ```text
//! PONIQ 1\n
//! sample_rate_hz <decimal>\n
//! format <f32le-iq | f32le-real>\n
//! length <samples>\n
//! end_header\n
//! <payload>
//! ```
//!
//! The header is ASCII. The payload holds `length` samples as IEEE-754
//! single precision, little endian: interleaved `re, im` pairs for
//! `f32le-iq` (8 bytes per sample) and bare real values for `f32le-real`
//! (4 bytes per sample). Nothing follows the payload.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

const MAGIC: &str = "PONIQ 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IqFormat {
    Complex,
    Real,
}

impl IqFormat {
    fn tag(self) -> &'static str {
        match self {
            IqFormat::Complex => "f32le-iq",
            IqFormat::Real => "f32le-real",
        }
    }
}

/// Writes `x` in the layout above. `Real` requires a real signal.
pub fn write_iq<W: Write>(x: &ComplexSignal, format: IqFormat, mut out: W) -> Result<()> {
    if format == IqFormat::Real && !x.is_real() {
        return Err(Error::invalid("real format requested for a complex signal"));
    }
    write!(
        out,
        "{MAGIC}\nsample_rate_hz {}\nformat {}\nlength {}\nend_header\n",
        x.sample_rate(),
        format.tag(),
        x.len()
    )?;
    let mut buf = Vec::with_capacity(x.len() * 8);
    for v in x.samples() {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        if format == IqFormat::Complex {
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::invalid(format!("expected `{key}` header line, got `{line}`")))
}

/// Reads a file written by [`write_iq`].
pub fn read_iq<R: BufRead>(mut input: R) -> Result<(ComplexSignal, IqFormat)> {
    let mut lines = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::invalid("truncated I/Q header"));
        }
        lines.push(line.trim_end_matches('\n').to_string());
    }
    if lines[0] != MAGIC {
        return Err(Error::invalid(format!("bad I/Q magic `{}`", lines[0])));
    }
    let rate: f64 = header_value(&lines[1], "sample_rate_hz")?
        .parse()
        .map_err(|_| Error::invalid("bad sample rate"))?;
    let format = match header_value(&lines[2], "format")? {
        "f32le-iq" => IqFormat::Complex,
        "f32le-real" => IqFormat::Real,
        other => return Err(Error::invalid(format!("unknown I/Q format `{other}`"))),
    };
    let len: usize = header_value(&lines[3], "length")?
        .parse()
        .map_err(|_| Error::invalid("bad length"))?;
    if lines[4] != "end_header" {
        return Err(Error::invalid("missing end_header"));
    }
    let width = if format == IqFormat::Complex { 8 } else { 4 };
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() != len * width {
        return Err(Error::invalid(format!(
            "payload is {} bytes, header promises {}",
            payload.len(),
            len * width
        )));
    }
    let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
    let samples = payload
        .chunks_exact(width)
        .map(|c| match format {
            IqFormat::Complex => Complex64::new(f(&c[..4]), f(&c[4..])),
            IqFormat::Real => Complex64::new(f(c), 0.0),
        })
        .collect();
    Ok((ComplexSignal::new(samples, rate)?, format))
}
