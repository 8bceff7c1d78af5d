//! CSV spectra and result tables, plus JSON metadata sidecars.
//!
//! Spectrum files: header `freq_hz,re,im` (complex) or `detuning_hz,power` (power),
//! UTF-8, LF line endings, every float written with 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scattering::{ComplexSpectrum, Port, PowerSpectrum};

pub const COMPLEX_HEADER: [&str; 3] = ["freq_hz", "re", "im"];
pub const POWER_HEADER: [&str; 2] = ["detuning_hz", "power"];
pub const POWER_LAW_HEADER: [&str; 2] = ["n_drive", "n_res"];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    match s.trim() {
        "nan" | "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: cannot parse {t:?} as a number"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

/// Result table with a self-describing header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Provenance sidecar written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        Self {
            tool: "emconv".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: None,
            parameters,
            notes: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// `results.csv` -> `results.meta.json`.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

pub fn complex_spectrum_csv(spec: &ComplexSpectrum) -> Result<String> {
    let mut t = Table::new(COMPLEX_HEADER);
    for (f, v) in spec.freq.iter().zip(&spec.value) {
        t.push(vec![(*f).into(), v.re.into(), v.im.into()]);
    }
    t.to_csv()
}

pub fn power_spectrum_csv(spec: &PowerSpectrum) -> Result<String> {
    let mut t = Table::new(POWER_HEADER);
    for (d, p) in spec.detuning.iter().zip(&spec.power) {
        t.push(vec![(*d).into(), (*p).into()]);
    }
    t.to_csv()
}

pub fn write_complex_spectrum(path: &Path, spec: &ComplexSpectrum) -> Result<()> {
    fs::write(path, complex_spectrum_csv(spec)?)?;
    Ok(())
}

pub fn write_power_spectrum(path: &Path, spec: &PowerSpectrum) -> Result<()> {
    fs::write(path, power_spectrum_csv(spec)?)?;
    Ok(())
}

fn read_columns(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Error::Format(format!(
            "expected header {:?}, found {:?}",
            header.join(","),
            found.join(",")
        )));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(Error::Format(format!(
                "line {}: expected {} fields, got {}",
                k + 2,
                header.len(),
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            cols[c].push(parse_f64(field, k + 2)?);
        }
    }
    Ok(cols)
}

pub fn parse_complex_spectrum(text: &str, port: Port) -> Result<ComplexSpectrum> {
    let cols = read_columns(text, &COMPLEX_HEADER)?;
    let value = cols[1]
        .iter()
        .zip(&cols[2])
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    ComplexSpectrum::new(cols[0].clone(), value, port)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn parse_power_spectrum(text: &str) -> Result<PowerSpectrum> {
    let cols = read_columns(text, &POWER_HEADER)?;
    PowerSpectrum::new(cols[0].clone(), cols[1].clone()).map_err(|e| Error::Format(e.to_string()))
}

/// `(n_drive, n_res)` pairs for the heating power-law fit.
pub fn parse_power_law(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cols = read_columns(text, &POWER_LAW_HEADER)?;
    let y = cols.pop().unwrap_or_default();
    let x = cols.pop().unwrap_or_default();
    Ok((x, y))
}

pub fn read_complex_spectrum(path: &Path, port: Port) -> Result<ComplexSpectrum> {
    parse_complex_spectrum(&fs::read_to_string(path)?, port)
}

pub fn read_power_spectrum(path: &Path) -> Result<PowerSpectrum> {
    parse_power_spectrum(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_format() {
        let spec = ComplexSpectrum::new(
            vec![7.444e9, 7.4440001e9],
            vec![Complex64::new(1.0, -0.5), Complex64::new(0.1, 1e-20)],
            Port::S11,
        )
        .unwrap();
        let text = complex_spectrum_csv(&spec).unwrap();
        let mut lines = text.split('\n');
        assert_eq!(lines.next(), Some("freq_hz,re,im"));
        assert_eq!(
            lines.next(),
            Some("7.4440000000000000e9,1.0000000000000000e0,-5.0000000000000000e-1")
        );
        assert!(text.ends_with('\n') && !text.contains('\r'));
        let p = PowerSpectrum::new(vec![-1.0, 1.0], vec![0.5, 0.25]).unwrap();
        assert!(power_spectrum_csv(&p).unwrap().starts_with("detuning_hz,power\n"));
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            parse_complex_spectrum("f,re,im\n1,2,3\n", Port::S11),
            Err(Error::Format(_))
        ));
        assert!(parse_complex_spectrum("freq_hz,re,im\n1,2\n", Port::S11).is_err());
        assert!(parse_complex_spectrum("freq_hz,re,im\n2,0,0\n1,0,0\n", Port::S11).is_err());
        assert!(parse_power_spectrum("detuning_hz,power\n0,abc\n").is_err());
    }

    #[test]
    fn sidecar_names() {
        let p = sidecar_path(Path::new("/tmp/out/grid.csv"), "meta");
        assert_eq!(p, PathBuf::from("/tmp/out/grid.meta.json"));
    }

    proptest! {
        #[test]
        fn spectrum_text_round_trip(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
            f0 in 1e6f64..1e10,
        ) {
            let freq: Vec<f64> = (0..pts.len()).map(|k| f0 + k as f64 * 1.5).collect();
            let value: Vec<Complex64> = pts.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let spec = ComplexSpectrum::new(freq, value, Port::S22).unwrap();
            let back = parse_complex_spectrum(&complex_spectrum_csv(&spec).unwrap(), Port::S22).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
