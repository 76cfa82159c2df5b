//! Labeled feature datasets, optionally carrying ground-truth posteriors.

use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use std::path::Path;

/// Tolerance for "posterior rows sum to one" checks.
pub const ETA_SUM_TOL: f64 = 1e-9;

/// Feature vectors with class labels and, when the generating distribution
/// is known, the true posterior at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    eta_true: Option<Vec<Vec<f64>>>,
    seed: u64,
}

impl LabeledDataset {
    /// Build a dataset, validating lengths, label ranges, and posterior rows.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        eta_true: Option<Vec<Vec<f64>>>,
        seed: u64,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} feature rows", labels.len(), features.len()),
            ));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes", "must be positive"));
        }
        let dim = features.first().map_or(0, Vec::len);
        for row in &features {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        for &y in &labels {
            if y >= num_classes {
                return Err(Error::invalid(
                    "labels",
                    format!("label {y} out of range for {num_classes} classes"),
                ));
            }
        }
        if let Some(eta) = &eta_true {
            if eta.len() != features.len() {
                return Err(Error::invalid(
                    "eta_true",
                    format!("{} rows for {} samples", eta.len(), features.len()),
                ));
            }
            for row in eta {
                if row.len() != num_classes {
                    return Err(Error::DimensionMismatch {
                        expected: num_classes,
                        got: row.len(),
                    });
                }
                validate_posterior(row)?;
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            eta_true,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature dimension (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Ground-truth posterior rows, when the generator provided them.
    pub fn eta_true(&self) -> Option<&[Vec<f64>]> {
        self.eta_true.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Drop the stored posterior rows (used after feature transforms, which
    /// change the distribution the posterior was stated for).
    pub fn without_eta(mut self) -> Self {
        self.eta_true = None;
        self
    }

    /// Select rows by index, preserving order. Posterior rows follow along.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        let mut eta = self.eta_true.as_ref().map(|_| Vec::with_capacity(indices.len()));
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid("indices", format!("index {i} out of bounds")));
            }
            features.push(self.features[i].clone());
            labels.push(self.labels[i]);
            if let (Some(out), Some(rows)) = (eta.as_mut(), self.eta_true.as_ref()) {
                out.push(rows[i].clone());
            }
        }
        LabeledDataset::new(features, labels, self.num_classes, eta, self.seed)
    }

    /// Axis-aligned bounding box of the features: (mins, maxs).
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return Err(Error::EmptySelection("bounding box of empty dataset".into()));
        }
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in &self.features {
            for j in 0..d {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        Ok((lo, hi))
    }

    /// Serialize as CSV: `x0,..,x{D-1},label[,eta0,..,eta{K-1}]`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for j in 0..d {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("label");
        if self.eta_true.is_some() {
            for k in 0..self.num_classes {
                out.push_str(&format!(",eta{k}"));
            }
        }
        out.push('\n');
        for i in 0..self.len() {
            for v in &self.features[i] {
                out.push_str(&fmt_f64(*v));
                out.push(',');
            }
            out.push_str(&self.labels[i].to_string());
            if let Some(eta) = &self.eta_true {
                for v in &eta[i] {
                    out.push(',');
                    out.push_str(&fmt_f64(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }

    /// Parse the CSV produced by [`to_csv`](Self::to_csv). The generator seed
    /// is not part of the format; loaded datasets carry seed 0.
    pub fn from_csv(text: &str, path_hint: &str) -> Result<Self> {
        let malformed = |reason: &str| Error::Malformed {
            path: path_hint.to_string(),
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| malformed("empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        let dim = cols.iter().take_while(|c| c.starts_with('x')).count();
        if dim == 0 || cols.get(dim) != Some(&"label") {
            return Err(malformed("header must be x0,..,label[,eta0,..]"));
        }
        let n_eta = cols.len() - dim - 1;

        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut eta = if n_eta > 0 { Some(Vec::new()) } else { None };
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(malformed(&format!("row {} has {} fields, expected {}", lineno + 2, fields.len(), cols.len())));
            }
            let mut row = Vec::with_capacity(dim);
            for f in &fields[..dim] {
                row.push(f.parse::<f64>().map_err(|_| malformed("bad float"))?);
            }
            features.push(row);
            labels.push(fields[dim].parse::<usize>().map_err(|_| malformed("bad label"))?);
            if let Some(out) = eta.as_mut() {
                let mut row = Vec::with_capacity(n_eta);
                for f in &fields[dim + 1..] {
                    row.push(f.parse::<f64>().map_err(|_| malformed("bad posterior"))?);
                }
                out.push(row);
            }
        }
        let num_classes = if n_eta > 0 {
            n_eta
        } else {
            labels.iter().copied().max().unwrap_or(0) + 1
        };
        LabeledDataset::new(features, labels, num_classes, eta, 0)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

/// Check that a posterior row is a probability vector.
pub fn validate_posterior(row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(0.0..=1.0 + ETA_SUM_TOL).contains(&p) {
            return Err(Error::invalid("posterior", format!("component {p} outside [0,1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ETA_SUM_TOL {
        return Err(Error::invalid("posterior", format!("row sums to {sum}")));
    }
    Ok(())
}
