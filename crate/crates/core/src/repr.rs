//! Label representations used to cluster labels.
//!
//! * input space: `v_l = normalize(sum of x_i over instances carrying l)`, dimension `D`
//! * output space: `v_l = normalize(row l of Y^T Y)`, dimension `L`
//! * joint: both blocks normalized separately, scaled by `1/sqrt(2)` and concatenated, dimension
//!   `D + L`

use crate::data::{Dataset, LabelIndex};
use crate::error::Error;
use crate::par;
use crate::sparse::{Index, SparseVec};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReprSpace {
    Input,
    Output,
    Joint,
}

impl ReprSpace {
    pub fn dim(self, n_features: usize, n_labels: usize) -> usize {
        match self {
            ReprSpace::Input => n_features,
            ReprSpace::Output => n_labels,
            ReprSpace::Joint => n_features + n_labels,
        }
    }
}

impl fmt::Display for ReprSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReprSpace::Input => "input",
            ReprSpace::Output => "output",
            ReprSpace::Joint => "joint",
        })
    }
}

impl FromStr for ReprSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "input" | "i" => Ok(ReprSpace::Input),
            "output" | "o" => Ok(ReprSpace::Output),
            "joint" | "io" => Ok(ReprSpace::Joint),
            other => Err(Error::InvalidArgument(format!(
                "unknown representation space {other:?} (expected input, output or joint)"
            ))),
        }
    }
}

/// One vector per label, all of the same dimensionality.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelRepr {
    pub space: ReprSpace,
    pub dim: usize,
    pub vectors: Vec<SparseVec>,
}

impl LabelRepr {
    pub fn build(space: ReprSpace, ds: &Dataset, idx: &LabelIndex) -> Self {
        match space {
            ReprSpace::Input => build_input_repr(ds, idx),
            ReprSpace::Output => build_output_repr(ds, idx),
            ReprSpace::Joint => build_joint_repr(ds, idx),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, l: Index) -> &SparseVec {
        &self.vectors[l as usize]
    }
}

fn sum_rows(rows: &[SparseVec], ids: &[Index], dim: usize) -> SparseVec {
    let pairs = ids
        .iter()
        .flat_map(|&i| rows[i as usize].iter())
        .collect::<Vec<_>>();
    SparseVec::from_pairs(dim, pairs)
}

pub fn build_input_repr(ds: &Dataset, idx: &LabelIndex) -> LabelRepr {
    let rows = ds.features.rows();
    let dim = ds.n_features();
    let vectors = par::map_range(ds.n_labels(), |l| {
        sum_rows(rows, idx.instances(l as Index), dim).l2_normalize()
    });
    LabelRepr {
        space: ReprSpace::Input,
        dim,
        vectors,
    }
}

pub fn build_output_repr(ds: &Dataset, idx: &LabelIndex) -> LabelRepr {
    let rows = ds.labels.rows();
    let dim = ds.n_labels();
    let vectors = par::map_range(dim, |l| {
        sum_rows(rows, idx.instances(l as Index), dim).l2_normalize()
    });
    LabelRepr {
        space: ReprSpace::Output,
        dim,
        vectors,
    }
}

pub fn build_joint_repr(ds: &Dataset, idx: &LabelIndex) -> LabelRepr {
    let input = build_input_repr(ds, idx);
    let output = build_output_repr(ds, idx);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let vectors = input
        .vectors
        .iter()
        .zip(&output.vectors)
        .map(|(a, b)| {
            let mut v = a.concat(b);
            v.scale(scale);
            v
        })
        .collect();
    LabelRepr {
        space: ReprSpace::Joint,
        dim: input.dim + output.dim,
        vectors,
    }
}
