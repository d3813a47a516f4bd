//! CSV files for locations, measurements and predictions, and the region
//! split used for large real data sets.
//!
//! Every file starts with a header row. Coordinates are `x,y` (planar) or
//! `lon,lat` (degrees); measurement files have a single `value` column, and
//! datasets combine both as `x,y,value` or `lon,lat,value`. A missing value is
//! an empty field or `NA`. Numbers are written with 17 significant digits so
//! that files round-trip exactly.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Location, LocationSet, Metric};
use crate::stats::MeasurementVector;

/// What to do with rows whose value is missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MissingPolicy {
    #[default]
    Drop,
    Strict,
}

/// Locations with one measurement each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub locations: LocationSet,
    pub values: MeasurementVector,
    /// Free-text origin, e.g. the source file.
    pub provenance: String,
}

impl Dataset {
    pub fn new(locations: LocationSet, values: MeasurementVector, provenance: impl Into<String>) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        Ok(Self {
            locations,
            values,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Writes a number so that parsing it back gives the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-empty lines with their 1-based line numbers; the first is the header.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn header_matches(found: &[&str], wanted: &[&str]) -> bool {
    found.len() == wanted.len() && found.iter().zip(wanted).all(|(f, w)| f.eq_ignore_ascii_case(w))
}

fn coordinate_header(found: &[&str], tail: &[&str]) -> bool {
    [["x", "y"], ["lon", "lat"]].iter().any(|xy| {
        let wanted: Vec<&str> = xy.iter().chain(tail).copied().collect();
        header_matches(found, &wanted)
    })
}

fn parse_number(field: &str, line: usize, what: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Input(format!("line {line}: invalid {what} '{field}'"))),
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("NA")
}

fn input_error(context: &str, e: Error) -> Error {
    Error::Input(format!("{context}: {e}"))
}

/// Parses a dataset CSV (`x,y,value` or `lon,lat,value`).
pub fn parse_dataset(text: &str, metric: Metric, policy: MissingPolicy, provenance: &str) -> Result<Dataset> {
    let mut rows = lines(text);
    let Some((_, header)) = rows.next() else {
        return Err(Error::Input(format!("{provenance}: empty file, expected a header row")));
    };
    if !coordinate_header(&fields(header), &["value"]) {
        return Err(Error::Input(format!(
            "{provenance}: header must be 'x,y,value' or 'lon,lat,value', found '{header}'"
        )));
    }
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut first_seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (line, row) in rows {
        let f = fields(row);
        if f.len() != 3 {
            return Err(Error::Input(format!("line {line}: expected 3 fields, found {}", f.len())));
        }
        let p = Location::new(parse_number(f[0], line, "coordinate")?, parse_number(f[1], line, "coordinate")?);
        metric.check(&p).map_err(|e| Error::Input(format!("line {line}: {e}")))?;
        if is_missing(f[2]) {
            match policy {
                MissingPolicy::Drop => continue,
                MissingPolicy::Strict => return Err(Error::Input(format!("line {line}: missing value"))),
            }
        }
        let v = parse_number(f[2], line, "value")?;
        if let Some(prev) = first_seen.insert(metric.key(&p), line) {
            return Err(Error::Input(format!(
                "duplicate location ({}, {}) on lines {prev} and {line}",
                p.x, p.y
            )));
        }
        points.push(p);
        values.push(v);
    }
    if points.is_empty() {
        return Err(Error::Input(format!("{provenance}: no usable rows")));
    }
    let locations = LocationSet::new(points, metric).map_err(|e| input_error(provenance, e))?;
    Dataset::new(locations, MeasurementVector::new(values)?, provenance)
}

/// Reads a dataset CSV; rows with a missing value are dropped or rejected
/// according to `policy`, and duplicate coordinates are an error naming both
/// lines.
pub fn load_dataset(path: impl AsRef<Path>, metric: Metric, policy: MissingPolicy) -> Result<Dataset> {
    let path = path.as_ref();
    parse_dataset(&read(path)?, metric, policy, &path.display().to_string())
}

fn coordinate_names(metric: Metric) -> &'static str {
    match metric {
        Metric::Euclidean => "x,y",
        Metric::GreatCircle { .. } => "lon,lat",
    }
}

pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = format!("{},value\n", coordinate_names(d.locations.metric()));
    for (p, v) in d.locations.points().iter().zip(d.values.as_slice()) {
        out.push_str(&format!("{},{},{}\n", format_f64(p.x), format_f64(p.y), format_f64(*v)));
    }
    out
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &dataset_to_csv(d))
}

/// Parses a locations CSV (`x,y` or `lon,lat`). Rows keep their order.
pub fn parse_locations(text: &str, metric: Metric, source: &str) -> Result<LocationSet> {
    let mut rows = lines(text);
    let Some((_, header)) = rows.next() else {
        return Err(Error::Input(format!("{source}: empty file, expected a header row")));
    };
    if !coordinate_header(&fields(header), &[]) {
        return Err(Error::Input(format!("{source}: header must be 'x,y' or 'lon,lat', found '{header}'")));
    }
    let mut points = Vec::new();
    let mut first_seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (line, row) in rows {
        let f = fields(row);
        if f.len() != 2 {
            return Err(Error::Input(format!("{source}: line {line}: expected 2 fields, found {}", f.len())));
        }
        let p = Location::new(parse_number(f[0], line, "coordinate")?, parse_number(f[1], line, "coordinate")?);
        metric.check(&p).map_err(|e| Error::Input(format!("{source}: line {line}: {e}")))?;
        if let Some(prev) = first_seen.insert(metric.key(&p), line) {
            return Err(Error::Input(format!(
                "{source}: duplicate location ({}, {}) on lines {prev} and {line}",
                p.x, p.y
            )));
        }
        points.push(p);
    }
    LocationSet::new(points, metric).map_err(|e| input_error(source, e))
}

pub fn load_locations(path: impl AsRef<Path>, metric: Metric) -> Result<LocationSet> {
    let path = path.as_ref();
    parse_locations(&read(path)?, metric, &path.display().to_string())
}

pub fn locations_to_csv(set: &LocationSet) -> String {
    let mut out = format!("{}\n", coordinate_names(set.metric()));
    for p in set.points() {
        out.push_str(&format!("{},{}\n", format_f64(p.x), format_f64(p.y)));
    }
    out
}

pub fn save_locations(set: &LocationSet, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &locations_to_csv(set))
}

/// Parses a single-column `value` CSV. Missing values come back as `None`.
pub fn parse_values(text: &str, source: &str) -> Result<Vec<Option<f64>>> {
    let mut rows = lines(text);
    let Some((_, header)) = rows.next() else {
        return Err(Error::Input(format!("{source}: empty file, expected a header row")));
    };
    if !header_matches(&fields(header), &["value"]) {
        return Err(Error::Input(format!("{source}: header must be 'value', found '{header}'")));
    }
    rows.map(|(line, row)| {
        let f = fields(row);
        if f.len() != 1 {
            return Err(Error::Input(format!("{source}: line {line}: expected 1 field, found {}", f.len())));
        }
        if is_missing(f[0]) {
            Ok(None)
        } else {
            parse_number(f[0], line, "value").map(Some).map_err(|e| input_error(source, e))
        }
    })
    .collect()
}

pub fn values_to_csv(values: &[f64]) -> String {
    let mut out = String::from("value\n");
    for v in values {
        out.push_str(&format_f64(*v));
        out.push('\n');
    }
    out
}

pub fn save_values(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &values_to_csv(values))
}

/// Reads a measurement file with no missing entries.
pub fn load_values(path: impl AsRef<Path>) -> Result<MeasurementVector> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let raw = parse_values(&read(path)?, &source)?;
    let values = raw
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Input(format!("{source}: value {} is missing", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    MeasurementVector::new(values)
}

/// Pairs a locations file with a measurement file of the same length,
/// applying `policy` to missing values.
pub fn load_split(
    locations: impl AsRef<Path>,
    values: impl AsRef<Path>,
    metric: Metric,
    policy: MissingPolicy,
) -> Result<Dataset> {
    let (lp, vp) = (locations.as_ref(), values.as_ref());
    let set = load_locations(lp, metric)?;
    let raw = parse_values(&read(vp)?, &vp.display().to_string())?;
    if raw.len() != set.len() {
        return Err(Error::Input(format!(
            "{} has {} locations but {} has {} values",
            lp.display(),
            set.len(),
            vp.display(),
            raw.len()
        )));
    }
    let mut keep = Vec::with_capacity(raw.len());
    let mut values = Vec::with_capacity(raw.len());
    for (i, v) in raw.into_iter().enumerate() {
        match (v, policy) {
            (Some(v), _) => {
                keep.push(i);
                values.push(v);
            }
            (None, MissingPolicy::Drop) => {}
            (None, MissingPolicy::Strict) => {
                return Err(Error::Input(format!("{}: value {} is missing", vp.display(), i + 1)));
            }
        }
    }
    if keep.is_empty() {
        return Err(Error::Input(format!("{}: no usable values", vp.display())));
    }
    let locations = if keep.len() == set.len() { set } else { set.select(&keep)? };
    Dataset::new(locations, MeasurementVector::new(values)?, format!("{} + {}", lp.display(), vp.display()))
}

/// Prediction CSV: `x,y,predicted[,truth]` (or `lon,lat,...`).
pub fn write_predictions<W: Write>(
    mut w: W,
    unknown: &LocationSet,
    predicted: &[f64],
    truth: Option<&[f64]>,
) -> Result<()> {
    let m = unknown.len();
    if predicted.len() != m || truth.is_some_and(|t| t.len() != m) {
        return Err(Error::DimensionMismatch(format!("{m} locations but {} predictions", predicted.len())));
    }
    let io = |source| Error::Io {
        path: "<predictions>".into(),
        source,
    };
    let names = coordinate_names(unknown.metric());
    match truth {
        Some(_) => writeln!(w, "{names},predicted,truth"),
        None => writeln!(w, "{names},predicted"),
    }
    .map_err(io)?;
    for (i, p) in unknown.points().iter().enumerate() {
        let mut row = format!("{},{},{}", format_f64(p.x), format_f64(p.y), format_f64(predicted[i]));
        if let Some(t) = truth {
            row.push(',');
            row.push_str(&format_f64(t[i]));
        }
        writeln!(w, "{row}").map_err(io)?;
    }
    Ok(())
}

/// Reads the `predicted` column (and `truth` when present) of a prediction CSV.
pub fn parse_predictions(text: &str, source: &str) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let mut rows = lines(text);
    let Some((_, header)) = rows.next() else {
        return Err(Error::Input(format!("{source}: empty file, expected a header row")));
    };
    let h = fields(header);
    let with_truth = coordinate_header(&h, &["predicted", "truth"]);
    if !with_truth && !coordinate_header(&h, &["predicted"]) {
        return Err(Error::Input(format!("{source}: unexpected prediction header '{header}'")));
    }
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for (line, row) in rows {
        let f = fields(row);
        if f.len() != h.len() {
            return Err(Error::Input(format!("{source}: line {line}: expected {} fields", h.len())));
        }
        pred.push(parse_number(f[2], line, "prediction")?);
        if with_truth {
            truth.push(parse_number(f[3], line, "value")?);
        }
    }
    Ok((pred, with_truth.then_some(truth)))
}

/// One cell of a [`partition_regions`] split.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// `R0`, `R1`, ... over the non-empty cells in row-major order.
    pub name: String,
    pub row: usize,
    pub col: usize,
    pub dataset: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub regions: Vec<Region>,
    /// `(row, col)` of cells without any point.
    pub empty_cells: Vec<(usize, usize)>,
}

/// Splits the bounding box of `d` into `rows x cols` equal cells (row 0 at
/// the smallest `y`) and returns one dataset per non-empty cell. Points on an
/// interior cell edge go to the upper/right cell; the outer edges are closed.
pub fn partition_regions(d: &Dataset, rows: usize, cols: usize) -> Result<Partition> {
    if rows == 0 || cols == 0 {
        return Err(Error::Domain(format!("cannot split into {rows} x {cols} regions")));
    }
    let pts = d.locations.points();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let cell = |v: f64, lo: f64, hi: f64, k: usize| -> usize {
        if hi > lo {
            (((v - lo) / (hi - lo) * k as f64) as usize).min(k - 1)
        } else {
            0
        }
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); rows * cols];
    for (i, p) in pts.iter().enumerate() {
        let (r, c) = (cell(p.y, y0, y1, rows), cell(p.x, x0, x1, cols));
        members[r * cols + c].push(i);
    }
    let mut regions = Vec::new();
    let mut empty_cells = Vec::new();
    for (idx, m) in members.iter().enumerate() {
        let (row, col) = (idx / cols, idx % cols);
        if m.is_empty() {
            empty_cells.push((row, col));
            continue;
        }
        let name = format!("R{}", regions.len());
        let dataset = Dataset::new(
            d.locations.select(m)?,
            d.values.select(m),
            format!("{} [{name}: row {row}, col {col}]", d.provenance),
        )?;
        regions.push(Region { name, row, col, dataset });
    }
    Ok(Partition { regions, empty_cells })
}
