use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{param, Error, Result};

/// `N` points in `R^dim` with labels in `0..k`, plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    dim: usize,
    k: usize,
    pub seed: u64,
    pub source: String,
}

impl LabeledDataset {
    pub fn new(
        points: Vec<Vec<f64>>,
        labels: Vec<usize>,
        k: usize,
        seed: u64,
        source: impl Into<String>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(param("dataset must contain at least one point"));
        }
        if points.len() != labels.len() {
            return Err(param(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(param("points must have dimension >= 1"));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= k) {
            return Err(param(format!("label {y} outside 0..{k}")));
        }
        Ok(Self {
            points,
            labels,
            dim,
            k,
            seed,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Same points, new labels (used by label-noise injection).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(
            self.points.clone(),
            labels,
            self.k,
            self.seed,
            self.source.clone(),
        )
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.points[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.k,
            self.seed,
            self.source.clone(),
        )
    }

    /// Plain-text columnar form: a `dim,k,n,seed` header row, then one row per
    /// point with its coordinates followed by its label.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{},{},{}", self.dim, self.k, self.len(), self.seed)?;
        let mut line = String::new();
        for (p, y) in self.points.iter().zip(&self.labels) {
            line.clear();
            for x in p {
                let _ = write!(line, "{x},");
            }
            let _ = write!(line, "{y}");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let head: Vec<&str> = header.trim().split(',').collect();
        if head.len() != 4 {
            return Err(Error::Parse(format!("bad header `{header}`")));
        }
        let num = |s: &str| -> Result<u64> {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("header field `{s}`: {e}")))
        };
        let (dim, k, n, seed) = (
            num(head[0])? as usize,
            num(head[1])? as usize,
            num(head[2])? as usize,
            num(head[3])?,
        );
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "row {row}: expected {} fields, found {}",
                    dim + 1,
                    fields.len()
                )));
            }
            let mut p = Vec::with_capacity(dim);
            for f in &fields[..dim] {
                p.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {row}: `{f}`: {e}")))?,
                );
            }
            points.push(p);
            labels.push(
                fields[dim]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("row {row} label: {e}")))?,
            );
        }
        if points.len() != n {
            return Err(Error::Parse(format!(
                "header announces {n} rows, found {}",
                points.len()
            )));
        }
        Self::new(points, labels, k, seed, "file")
    }
}
