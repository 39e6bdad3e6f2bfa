//! Sparse vector and row-matrix primitives.
//!
//! Indices are `u32` so that label and feature spaces up to `2^32 - 1` fit without widening the
//! in-memory layout. Values are kept in `f64`; model weights are rounded to `f32` precision when
//! they are finalized (see [`crate::solver::finalize_weights`]).

use crate::error::{Error, Result};
use std::cmp::Ordering;

pub type Index = u32;

/// A sparse vector with strictly increasing indices and no stored zeros.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVec {
    dim: usize,
    indices: Vec<Index>,
    values: Vec<f64>,
}

impl SparseVec {
    /// Validating constructor.
    pub fn new(dim: usize, indices: Vec<Index>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(format!(
                    "indices not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: last as usize + 1,
                });
            }
        }
        if let Some(v) = values.iter().find(|v| **v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "stored value {v} must be finite and nonzero"
            )));
        }
        Ok(Self {
            dim,
            indices,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from arbitrary `(index, value)` pairs: sorts them, sums duplicates and drops
    /// zeros. Panics if an index is out of range.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(Index, f64)>) -> Self {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            assert!((i as usize) < dim, "index {i} out of range for dim {dim}");
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = Self {
            dim,
            indices,
            values,
        };
        out.retain(|_, v| v != 0.0);
        out
    }

    /// Builds a vector from a dense slice, skipping exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(i as Index);
                values.push(v);
            }
        }
        Self {
            dim: dense.len(),
            indices,
            values,
        }
    }

    /// Internal constructor for callers that already guarantee the invariants.
    pub(crate) fn from_parts_unchecked(dim: usize, indices: Vec<Index>, values: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().is_none_or(|&i| (i as usize) < dim));
        Self {
            dim,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (Index, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }

    /// Dot product via a sorted merge over the two supports.
    pub fn dot(&self, other: &SparseVec) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(merge_dot(
            &self.indices,
            &self.values,
            &other.indices,
            &other.values,
        ))
    }

    /// Dot product against a dense vector. Entries past the end of `dense` count as zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter()
            .map(|(i, v)| dense.get(i as usize).map_or(0.0, |d| d * v))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns `self / ||self||`; the zero vector is returned unchanged.
    pub fn l2_normalize(&self) -> SparseVec {
        let mut out = self.clone();
        out.l2_normalize_in_place();
        out
    }

    pub fn l2_normalize_in_place(&mut self) {
        let norm = self.l2_norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        if s == 0.0 {
            self.indices.clear();
            self.values.clear();
        } else {
            for v in &mut self.values {
                *v *= s;
            }
        }
    }

    /// Keeps only entries with `|value| > delta`.
    pub fn prune_threshold(&self, delta: f64) -> SparseVec {
        let mut out = self.clone();
        out.retain(|_, v| v.abs() > delta);
        out
    }

    pub fn retain(&mut self, mut keep: impl FnMut(Index, f64) -> bool) {
        let mut w = 0;
        for r in 0..self.indices.len() {
            let (i, v) = (self.indices[r], self.values[r]);
            if keep(i, v) {
                self.indices[w] = i;
                self.values[w] = v;
                w += 1;
            }
        }
        self.indices.truncate(w);
        self.values.truncate(w);
    }

    /// Maps each value through `f`, dropping results that become zero.
    pub fn map_values(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in &mut self.values {
            *v = f(*v);
        }
        self.retain(|_, v| v != 0.0);
    }

    /// Concatenates `self` with `other`, offsetting `other`'s indices by `self.dim()`.
    pub fn concat(&self, other: &SparseVec) -> SparseVec {
        let offset = self.dim as Index;
        let mut indices = self.indices.clone();
        let mut values = self.values.clone();
        indices.extend(other.indices.iter().map(|&i| i + offset));
        values.extend_from_slice(&other.values);
        Self::from_parts_unchecked(self.dim + other.dim, indices, values)
    }

    /// Re-expresses the vector in a compacted index space. `new_index` maps an old index to its
    /// new position; entries mapping to `None` are dropped.
    pub fn remap(&self, new_dim: usize, mut new_index: impl FnMut(Index) -> Option<Index>) -> Self {
        let mut pairs = Vec::with_capacity(self.nnz());
        for (i, v) in self.iter() {
            if let Some(j) = new_index(i) {
                pairs.push((j, v));
            }
        }
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let (indices, values) = pairs.into_iter().unzip();
        Self::from_parts_unchecked(new_dim, indices, values)
    }
}

pub(crate) fn merge_dot(ai: &[Index], av: &[f64], bi: &[Index], bv: &[f64]) -> f64 {
    let (mut p, mut q) = (0, 0);
    let mut sum = 0.0;
    while p < ai.len() && q < bi.len() {
        match ai[p].cmp(&bi[q]) {
            Ordering::Less => p += 1,
            Ordering::Greater => q += 1,
            Ordering::Equal => {
                sum += av[p] * bv[q];
                p += 1;
                q += 1;
            }
        }
    }
    sum
}

/// `acc += s * a` over the nonzeros of `a`.
pub fn add_scaled(acc: &mut [f64], a: &SparseVec, s: f64) {
    debug_assert!(acc.len() >= a.dim());
    for (i, v) in a.iter() {
        acc[i as usize] += s * v;
    }
}

/// Rows of sparse vectors sharing one dimensionality.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseRowMatrix {
    dim: usize,
    rows: Vec<SparseVec>,
}

impl SparseRowMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, rows: Vec<SparseVec>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.dim(),
            });
        }
        Ok(Self { dim, rows })
    }

    pub fn push(&mut self, row: SparseVec) -> Result<()> {
        if row.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: row.dim(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseVec {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseVec::nnz).sum()
    }

    pub fn into_rows(self) -> Vec<SparseVec> {
        self.rows
    }
}
