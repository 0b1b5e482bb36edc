//! Flat little-endian `f64` arrays with a sidecar text header, and 8-bit PGM
//! previews.
//!
//! `write_array("x.bin", …)` writes the raw values to `x.bin` and a header to
//! `x.bin.hdr`:
//!
//! ```text
//! dims = 64 64
//! model = gaussian
//! seed = 7
//! ```
//!
//! The first line is always `dims`; further `key = value` lines are free-form
//! metadata kept in insertion order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrayHeader {
    pub dims: Vec<usize>,
    pub fields: Vec<(String, String)>,
}

impl ArrayHeader {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims, fields: Vec::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn render(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut out = format!("dims = {}\n", dims.join(" "));
        for (k, v) in &self.fields {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    fn parse(text: &str) -> Result<Self> {
        let mut header = ArrayHeader::default();
        let mut saw_dims = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("header line {}: expected 'key = value'", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "dims" {
                header.dims = v
                    .split_whitespace()
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Format(format!("header line {}: bad dims '{v}'", lineno + 1)))?;
                saw_dims = true;
            } else {
                header.fields.push((k.to_string(), v.to_string()));
            }
        }
        if !saw_dims {
            return Err(Error::Format("header has no dims line".into()));
        }
        Ok(header)
    }
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

pub fn write_array(path: &Path, data: &[f64], header: &ArrayHeader) -> Result<()> {
    Error::check_dim(header.len(), data.len())?;
    let mut bytes = Vec::with_capacity(8 * data.len());
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(header_path(path), header.render())?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<(Vec<f64>, ArrayHeader)> {
    let header = ArrayHeader::parse(&fs::read_to_string(header_path(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * header.len() {
        return Err(Error::Format(format!(
            "{} holds {} bytes, header dims need {}",
            path.display(),
            bytes.len(),
            8 * header.len()
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((data, header))
}

/// Binary PGM preview, linearly mapping `[min, max]` of the data to
/// `0..=255` (a constant image maps to 0).
pub fn write_pgm(path: &Path, data: &[f64], rows: usize, cols: usize) -> Result<()> {
    Error::check_dim(rows * cols, data.len())?;
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{cols} {rows}\n255\n")?;
    let pixels: Vec<u8> = data.iter().map(|v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    f.write_all(&pixels)?;
    Ok(())
}
