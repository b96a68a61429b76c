//! Embedding matrices, distances and class prototypes.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::LabeledEmbeddings;
use crate::error::{Error, Result};
use crate::ClassId;

/// Row-major `rows × dim` matrix of feature vectors, stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Build a matrix from row-major values. Requires at least one row, at
    /// least two columns and finite entries.
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Shape("matrix needs at least one row".into()));
        }
        Self::with_possibly_no_rows(rows, dim, values)
    }

    /// A matrix with no rows, for degenerate query batches.
    pub fn empty(dim: usize) -> Self {
        Self { rows: 0, dim, values: Vec::new() }
    }

    fn with_possibly_no_rows(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Shape(format!("dimensionality must be at least 2, got {dim}")));
        }
        let expected = rows.checked_mul(dim).ok_or_else(|| Error::Shape(format!("{rows} x {dim} overflows")))?;
        if values.len() != expected {
            return Err(Error::Shape(format!("{rows} x {dim} matrix needs {expected} values, got {}", values.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / dim, col: pos % dim });
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {dim}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size; dim >= 2 is an invariant.
        self.values.chunks_exact(self.dim)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), dim: self.dim, values }
    }

    /// `self` followed by the rows of `other`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!("cannot stack dim {} onto dim {}", other.dim, self.dim)));
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&other.values);
        Ok(Self { rows: self.rows + other.rows, dim: self.dim, values })
    }

    /// Divide every row by its L2 norm.
    pub fn normalize_rows(&self) -> Result<Self> {
        let mut values = self.values.clone();
        for (i, row) in values.chunks_exact_mut(self.dim).enumerate() {
            let norm = norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { row: i });
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self { rows: self.rows, dim: self.dim, values })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.iter_rows().all(|r| (norm(r) - 1.0).abs() <= tol)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Scale `v` to unit length in place; `None` if it has zero norm.
pub(crate) fn renormalize(v: &mut [f64]) -> Option<()> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(())
}

/// Distance between embedding rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// `1 - a·b`, which lies in `[0, 2]` for unit vectors.
    #[default]
    Cosine,
    /// `|a - b|²`; equals twice the cosine distance on unit vectors.
    SquaredEuclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Cosine => 1.0 - dot(a, b),
            Metric::SquaredEuclidean => squared_euclidean(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::SquaredEuclidean => "euclidean",
        }
    }
}

/// Dense symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// All pairwise distances between rows of `m`.
///
/// Rows are computed in parallel; each entry is a single sequential reduction
/// over the coordinates, so the result does not depend on the thread count.
pub fn pairwise_distance(m: &EmbeddingMatrix, metric: Metric) -> DistanceMatrix {
    let n = m.rows();
    let mut values = vec![0.0; n * n];
    if n > 0 {
        values.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            let a = m.row(i);
            for (j, slot) in out.iter_mut().enumerate() {
                *slot = if i == j { 0.0 } else { metric.distance(a, m.row(j)) };
            }
        });
    }
    DistanceMatrix { n, values }
}

/// One unit-norm anchor vector per known class, ordered by ascending class id.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    class_ids: Vec<ClassId>,
    vectors: EmbeddingMatrix,
}

impl PrototypeSet {
    pub fn new(class_ids: Vec<ClassId>, vectors: EmbeddingMatrix) -> Result<Self> {
        if class_ids.len() != vectors.rows() {
            return Err(Error::Shape(format!(
                "{} class ids for {} prototype vectors",
                class_ids.len(),
                vectors.rows()
            )));
        }
        let mut seen = class_ids.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("duplicate prototype class {}", w[0])));
        }
        Ok(Self { class_ids, vectors })
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn vectors(&self) -> &EmbeddingMatrix {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }
}

/// Renormalized per-class mean of the support rows.
pub fn class_prototypes(support: &LabeledEmbeddings) -> Result<PrototypeSet> {
    let dim = support.embeddings.dim();
    let mut sums: BTreeMap<ClassId, Vec<f64>> = BTreeMap::new();
    for (row, &label) in support.embeddings.iter_rows().zip(&support.labels) {
        let acc = sums.entry(label).or_insert_with(|| vec![0.0; dim]);
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    if sums.is_empty() {
        return Err(Error::Empty("support set"));
    }
    let mut class_ids = Vec::with_capacity(sums.len());
    let mut values = Vec::with_capacity(sums.len() * dim);
    for (class, mut mean) in sums {
        // Dividing by the count is skipped: renormalization removes it.
        renormalize(&mut mean).ok_or(Error::EmptyClass { class })?;
        class_ids.push(class);
        values.extend(mean);
    }
    let vectors = EmbeddingMatrix::new(class_ids.len(), dim, values)?;
    PrototypeSet::new(class_ids, vectors)
}
