//! CSV formats for points on the sphere and for compositional records.
//!
//! Point files have a header `x0,...,xp` and an optional trailing `label`
//! column. Coordinates are written with the shortest decimal representation
//! that parses back to the same `f64`, so a write/read cycle is lossless.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{self, UnitVector};

/// Rows whose norm is further than this from 1 are reported when re-normalized.
pub const RENORMALIZE_WARN: f64 = 1e-6;

pub const LABEL_COLUMN: &str = "label";

/// Shortest round-trip decimal representation of `x`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes points (and optional labels) to CSV. `dim` is the intrinsic
/// dimension `p`, needed to write the header of an empty file.
pub fn write_points<W: Write>(
    out: W,
    dim: usize,
    points: &[UnitVector],
    labels: Option<&[usize]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(Error::LengthMismatch(points.len(), l.len()));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..=dim).map(|i| format!("x{i}")).collect();
    if labels.is_some() {
        header.push(LABEL_COLUMN.into());
    }
    w.write_record(&header)?;
    for (i, x) in points.iter().enumerate() {
        if x.ambient_dim() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim + 1,
                found: x.ambient_dim(),
            });
        }
        let mut row: Vec<String> = x.coords().iter().map(|&c| format_f64(c)).collect();
        if let Some(l) = labels {
            row.push(l[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointTable {
    pub points: Vec<UnitVector>,
    pub labels: Option<Vec<usize>>,
    /// Number of rows whose norm differed from 1 by more than
    /// [`RENORMALIZE_WARN`].
    pub renormalized: usize,
}

fn parse_error(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Reads a point CSV. Coordinates are re-normalized onto the sphere.
pub fn read_points<R: Read>(input: R) -> Result<PointTable> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_label = names.last() == Some(&LABEL_COLUMN);
    let n_coords = names.len() - usize::from(has_label);
    for (i, name) in names[..n_coords].iter().enumerate() {
        if *name != format!("x{i}") {
            return Err(parse_error(
                1,
                format!("expected column x{i}, found {name:?}"),
            ));
        }
    }
    if n_coords < 2 {
        return Err(parse_error(1, "need at least two coordinate columns"));
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut renormalized = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(parse_error(
                line,
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        let coords = rec
            .iter()
            .take(n_coords)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(line, format!("not a finite number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if (sphere::norm(&coords) - 1.0).abs() > RENORMALIZE_WARN {
            renormalized += 1;
            log::warn!("line {line}: point is not unit norm; re-normalizing");
        }
        points.push(UnitVector::new(coords).map_err(|e| parse_error(line, e.to_string()))?);
        if has_label {
            let f = &rec[n_coords];
            labels.push(
                f.parse::<usize>()
                    .map_err(|_| parse_error(line, format!("invalid label {f:?}")))?,
            );
        }
    }
    Ok(PointTable {
        points,
        labels: has_label.then_some(labels),
        renormalized,
    })
}

/// Non-negative category values of one observation, e.g. expenditures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalRecord {
    pub id: String,
    pub values: Vec<f64>,
    pub group: Option<String>,
}

impl CompositionalRecord {
    /// `ℓ1`-normalizes the values and takes element-wise square roots, which
    /// maps the simplex onto the non-negative orthant of the sphere.
    pub fn to_sphere(&self) -> Result<UnitVector> {
        let total: f64 = self.values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroSumRow(self.id.clone()));
        }
        let coords = self.values.iter().map(|v| (v / total).sqrt()).collect();
        UnitVector::new(coords)
    }
}

/// Column selection for compositional CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalSchema {
    pub categories: Vec<String>,
    pub group: Option<String>,
    /// Identifier column; rows are numbered from 1 when absent.
    pub id: Option<String>,
}

impl Default for CompositionalSchema {
    fn default() -> Self {
        Self {
            categories: vec!["food".into(), "housing".into(), "service".into()],
            group: Some("gender".into()),
            id: None,
        }
    }
}

/// Reads compositional records. Column names are matched case-insensitively.
pub fn read_compositional<R: Read>(
    input: R,
    schema: &CompositionalSchema,
) -> Result<Vec<CompositionalRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut missing = Vec::new();
    let mut cat_idx = Vec::new();
    for c in &schema.categories {
        match find(c) {
            Some(i) => cat_idx.push(i),
            None => missing.push(c.clone()),
        }
    }
    let group_idx = match &schema.group {
        Some(g) => match find(g) {
            Some(i) => Some(i),
            None => {
                missing.push(g.clone());
                None
            }
        },
        None => None,
    };
    let id_idx = match &schema.id {
        Some(c) => match find(c) {
            Some(i) => Some(i),
            None => {
                missing.push(c.clone());
                None
            }
        },
        None => None,
    };
    if !missing.is_empty() {
        return Err(Error::MissingColumns {
            missing,
            available: header,
        });
    }

    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = cat_idx
            .iter()
            .map(|&i| {
                let f = &rec[i];
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| {
                        parse_error(line, format!("column {:?}: invalid value {f:?}", header[i]))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(CompositionalRecord {
            id: id_idx.map_or_else(|| (row + 1).to_string(), |i| rec[i].to_string()),
            values,
            group: group_idx.map(|i| rec[i].to_string()),
        });
    }
    Ok(out)
}

/// Writes compositional records with the schema's column names.
pub fn write_compositional<W: Write>(
    out: W,
    schema: &CompositionalSchema,
    records: &[CompositionalRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![schema.id.clone().unwrap_or_else(|| "id".into())];
    header.extend(schema.categories.iter().cloned());
    if let Some(g) = &schema.group {
        header.push(g.clone());
    }
    w.write_record(&header)?;
    for rec in records {
        if rec.values.len() != schema.categories.len() {
            return Err(Error::LengthMismatch(
                schema.categories.len(),
                rec.values.len(),
            ));
        }
        let mut row = vec![rec.id.clone()];
        row.extend(rec.values.iter().map(|&v| format_f64(v)));
        if schema.group.is_some() {
            row.push(rec.group.clone().unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Maps group names to dense integer labels in order of first appearance.
pub fn group_labels(records: &[CompositionalRecord]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let labels = records
        .iter()
        .map(|r| {
            let g = r.group.clone().unwrap_or_default();
            match names.iter().position(|n| *n == g) {
                Some(i) => i,
                None => {
                    names.push(g);
                    names.len() - 1
                }
            }
        })
        .collect();
    (labels, names)
}
