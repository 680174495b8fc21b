//! Delimited-text input and output: bivariate samples, pseudo-observations,
//! density grids and run manifests.
//!
//! Floating-point output uses 17 significant digits so that values read back
//! are bit-identical.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::DensityGrid;
use crate::transform::{PseudoSample, Scaling};

/// A column addressed by 1-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidArgument("empty column reference".into()));
        }
        match s.parse::<usize>() {
            Ok(0) => Err(Error::InvalidArgument("column indices are 1-based".into())),
            Ok(i) => Ok(ColumnRef::Index(i)),
            Err(_) => Ok(ColumnRef::Name(s.to_string())),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "{i}"),
            ColumnRef::Name(s) => f.write_str(s),
        }
    }
}

/// Header handling for input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Treat the first row as a header if a selected field is not numeric.
    #[default]
    Auto,
    Yes,
    No,
}

impl FromStr for HeaderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(HeaderMode::Auto),
            "yes" | "true" => Ok(HeaderMode::Yes),
            "no" | "false" => Ok(HeaderMode::No),
            other => Err(Error::InvalidArgument(format!(
                "unknown header mode '{other}'"
            ))),
        }
    }
}

/// Keep only rows whose `column` equals `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: ColumnRef,
    pub value: String,
}

impl FromStr for RowFilter {
    type Err = Error;

    /// `COLUMN=VALUE`.
    fn from_str(s: &str) -> Result<Self> {
        let (c, v) = s.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("filter must look like COLUMN=VALUE, got '{s}'"))
        })?;
        Ok(Self {
            column: c.parse()?,
            value: v.trim().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub column_x: ColumnRef,
    pub column_y: ColumnRef,
    pub delimiter: u8,
    pub header: HeaderMode,
    pub filter: Option<RowFilter>,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, column_x: ColumnRef, column_y: ColumnRef) -> Self {
        Self {
            path: path.into(),
            column_x,
            column_y,
            delimiter: b',',
            header: HeaderMode::Auto,
            filter: None,
        }
    }
}

/// A raw bivariate sample and what was dropped while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Data rows whose selected fields were missing, unparsable or not finite.
    pub skipped: usize,
    /// Data rows excluded by the filter.
    pub filtered_out: usize,
    pub header: Option<Vec<String>>,
}

impl LoadedSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn resolve(col: &ColumnRef, header: Option<&[String]>) -> Result<usize> {
    match col {
        ColumnRef::Index(i) => Ok(i - 1),
        ColumnRef::Name(name) => {
            let h = header.ok_or_else(|| {
                Error::Data(format!(
                    "column '{name}' given by name but the file has no header"
                ))
            })?;
            h.iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| Error::Data(format!("no column named '{name}'")))
        }
    }
}

fn parse_field(rec: &csv::StringRecord, k: usize) -> Option<f64> {
    rec.get(k)?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read two numeric columns. Malformed rows are skipped and counted.
pub fn load_csv(spec: &DatasetSpec) -> Result<LoadedSample> {
    let file = File::open(&spec.path).map_err(io_err(&spec.path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::Data(format!("{} is empty", spec.path.display())));
    }
    let first: Vec<String> = records[0].iter().map(|s| s.trim().to_string()).collect();
    let has_header = match spec.header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => {
            let by_name = matches!(spec.column_x, ColumnRef::Name(_))
                || matches!(spec.column_y, ColumnRef::Name(_));
            let numeric = |c: &ColumnRef| match c {
                ColumnRef::Index(i) => parse_field(&records[0], i - 1).is_some(),
                ColumnRef::Name(_) => false,
            };
            by_name || !(numeric(&spec.column_x) && numeric(&spec.column_y))
        }
    };
    let header = has_header.then_some(first);
    let kx = resolve(&spec.column_x, header.as_deref())?;
    let ky = resolve(&spec.column_y, header.as_deref())?;
    let filter = match &spec.filter {
        Some(f) => Some((resolve(&f.column, header.as_deref())?, f.value.as_str())),
        None => None,
    };
    let mut out = LoadedSample {
        x: Vec::new(),
        y: Vec::new(),
        skipped: 0,
        filtered_out: 0,
        header: header.clone(),
    };
    let start = usize::from(has_header);
    for (line, rec) in records.iter().enumerate().skip(start) {
        if let Some((k, want)) = filter {
            if rec.get(k).map(str::trim) != Some(want) {
                out.filtered_out += 1;
                continue;
            }
        }
        match (parse_field(rec, kx), parse_field(rec, ky)) {
            (Some(a), Some(b)) => {
                out.x.push(a);
                out.y.push(b);
            }
            _ => {
                log::warn!(
                    "{}: skipping malformed row {}",
                    spec.path.display(),
                    line + 1
                );
                out.skipped += 1;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!(
            "no usable rows in {} for columns {} and {}",
            spec.path.display(),
            spec.column_x,
            spec.column_y
        )));
    }
    if out.skipped > 0 {
        log::warn!(
            "{}: skipped {} malformed row(s)",
            spec.path.display(),
            out.skipped
        );
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pseudo-observations as CSV with columns `u,v`.
pub fn write_pseudo_csv<W: Write>(pseudo: &PseudoSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "v"])?;
    for (u, v) in pseudo.points() {
        w.write_record([fmt17(u), fmt17(v)])?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn save_pseudo_csv(pseudo: &PseudoSample, path: &Path) -> Result<()> {
    write_pseudo_csv(pseudo, create(path)?)
}

/// Read a file written by [`write_pseudo_csv`].
pub fn load_pseudo_csv(path: &Path, scaling: Scaling) -> Result<PseudoSample> {
    let spec = DatasetSpec {
        header: HeaderMode::Yes,
        ..DatasetSpec::new(
            path,
            ColumnRef::Name("u".into()),
            ColumnRef::Name("v".into()),
        )
    };
    let s = load_csv(&spec)?;
    if s.skipped > 0 {
        return Err(Error::Data(format!(
            "{} malformed pseudo-observation rows",
            s.skipped
        )));
    }
    PseudoSample::from_unit_square(s.x, s.y, scaling)
}

/// Density grid as CSV with columns `u,v,c_hat`, one row per node.
pub fn write_grid_csv<W: Write>(grid: &DensityGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "v", "c_hat"])?;
    let m = grid.resolution;
    for i in 0..m {
        for j in 0..m {
            w.write_record([
                fmt17(grid.node(i)),
                fmt17(grid.node(j)),
                fmt17(grid.at(i, j)),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn save_grid_csv(grid: &DensityGrid, path: &Path) -> Result<()> {
    write_grid_csv(grid, create(path)?)
}

/// Bandwidth grid bounds recorded in a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub min: f64,
    pub max: f64,
    pub len: usize,
}

/// Everything needed to reproduce a run from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub n: usize,
    pub h: Option<f64>,
    pub method: String,
    pub kernel: String,
    pub scaling: String,
    pub seed: u64,
    pub grid: Option<GridBounds>,
    pub boundary_minimum: Option<bool>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null", default)]
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            n: 0,
            h: None,
            method: String::new(),
            kernel: String::new(),
            scaling: String::new(),
            seed: 0,
            grid: None,
            boundary_minimum: None,
            details: serde_json::Value::Null,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(io_err(path))?;
        Ok(serde_json::from_reader(f)?)
    }
}
