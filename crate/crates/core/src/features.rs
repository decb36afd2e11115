//! Region-grid histograms over a code map, and the feature CSV format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::descriptor::{CodeMap, DescriptorKind};
use crate::{Error, Result};

/// Number of regions along each axis of the code map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub rows: usize,
    pub cols: usize,
}

impl Default for RegionGrid {
    fn default() -> Self {
        RegionGrid { rows: 8, cols: 8 }
    }
}

impl RegionGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        RegionGrid { rows, cols }
    }

    pub fn square(side: usize) -> Self {
        RegionGrid::new(side, side)
    }

    pub fn regions(&self) -> usize {
        self.rows * self.cols
    }

    /// Rectangles covering a `width x height` map, row-major.
    pub fn layout(&self, width: usize, height: usize) -> Result<Vec<Region>> {
        let ys = split_axis(height, self.rows)?;
        let xs = split_axis(width, self.cols)?;
        let mut out = Vec::with_capacity(self.regions());
        let mut y = 0;
        for &h in &ys {
            let mut x = 0;
            for &w in &xs {
                out.push(Region { x, y, w, h });
                x += w;
            }
            y += h;
        }
        Ok(out)
    }
}

/// Axis-aligned rectangle in code-map coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

/// Split `length` into `parts` segments; the first `length % parts` segments
/// get the extra pixel.
pub fn split_axis(length: usize, parts: usize) -> Result<Vec<usize>> {
    if parts == 0 {
        return Err(Error::Argument("region count must be at least 1".into()));
    }
    if length < parts {
        return Err(Error::Size(format!(
            "cannot split {length} pixels into {parts} regions"
        )));
    }
    let (base, extra) = (length / parts, length % parts);
    Ok((0..parts).map(|i| base + usize::from(i < extra)).collect())
}

/// Code counts within `region`.
pub fn region_histogram(map: &CodeMap, region: &Region) -> Result<Vec<u32>> {
    if region.area() == 0 {
        return Err(Error::Argument("region is empty".into()));
    }
    if region.x + region.w > map.width() || region.y + region.h > map.height() {
        return Err(Error::Argument(format!(
            "region {region:?} exceeds {}x{} code map",
            map.width(),
            map.height()
        )));
    }
    let mut bins = vec![0u32; map.code_range()];
    for y in region.y..region.y + region.h {
        for &c in &map.row(y)[region.x..region.x + region.w] {
            bins[c as usize] += 1;
        }
    }
    Ok(bins)
}

/// Concatenated, per-region L1-normalized histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub descriptor: DescriptorKind,
    pub grid: RegionGrid,
}

impl FeatureVector {
    pub fn block(&self, region: usize) -> &[f64] {
        let n = self.descriptor.code_range();
        &self.values[region * n..(region + 1) * n]
    }
}

pub fn extract_feature_vector(map: &CodeMap, grid: &RegionGrid) -> Result<FeatureVector> {
    if map.width() < grid.cols || map.height() < grid.rows {
        return Err(Error::ImageSize {
            width: map.width(),
            height: map.height(),
            min_width: grid.cols,
            min_height: grid.rows,
        });
    }
    let regions = grid.layout(map.width(), map.height())?;
    let mut values = Vec::with_capacity(regions.len() * map.code_range());
    for region in &regions {
        let hist = region_histogram(map, region)?;
        let area = region.area() as f64;
        values.extend(hist.iter().map(|&c| c as f64 / area));
    }
    Ok(FeatureVector {
        values,
        descriptor: map.descriptor(),
        grid: *grid,
    })
}

/// Labelled feature rows, in sample order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    pub labels: Vec<String>,
    pub subjects: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, label: impl Into<String>, subject: impl Into<String>, row: Vec<f64>) {
        self.labels.push(label.into());
        self.subjects.push(subject.into());
        self.rows.push(row);
    }

    /// Distinct labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }
}

/// Shortest-form decimal with 9 significant digits (like C's `%.9g`).
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.8e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Write `label,subject,f0,...,f{D-1}` CSV.
pub fn write_feature_csv<W: Write>(out: W, matrix: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Argument(format!("CSV write failed: {e}"));
    let dim = matrix.dim();
    let mut header = vec!["label".to_string(), "subject".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(to_err)?;
    for ((label, subject), row) in matrix.labels.iter().zip(&matrix.subjects).zip(&matrix.rows) {
        if row.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: row.len(),
            });
        }
        let mut rec = Vec::with_capacity(dim + 2);
        rec.push(label.clone());
        rec.push(subject.clone());
        rec.extend(row.iter().map(|&v| format_sig9(v)));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Argument(format!("CSV write failed: {e}")))?;
    Ok(())
}

/// Read a feature CSV. Format problems are schema errors with 1-based line numbers.
pub fn read_feature_csv<R: Read>(input: R) -> Result<FeatureMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r
        .headers()
        .map_err(|e| Error::Schema {
            line: 1,
            reason: format!("unreadable header: {e}"),
        })?
        .clone();
    if header.len() < 3 || &header[0] != "label" || &header[1] != "subject" {
        return Err(Error::Schema {
            line: 1,
            reason: "header must be label,subject,f0,...".into(),
        });
    }
    let dim = header.len() - 2;
    let mut matrix = FeatureMatrix::default();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Schema {
            line,
            reason: e.to_string(),
        })?;
        if rec.len() != dim + 2 {
            return Err(Error::Schema {
                line,
                reason: format!("expected {} fields, found {}", dim + 2, rec.len()),
            });
        }
        let row = rec
            .iter()
            .skip(2)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Schema {
                line,
                reason: format!("non-numeric feature: {e}"),
            })?;
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Schema {
                line,
                reason: "label and subject must be non-empty".into(),
            });
        }
        matrix.push(&rec[0], &rec[1], row);
    }
    if matrix.is_empty() {
        return Err(Error::EmptyInput("feature CSV has no rows".into()));
    }
    Ok(matrix)
}
