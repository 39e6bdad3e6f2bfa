//! Beam-search prediction over trained trees.
//!
//! A label's score is the product of the edge probabilities along its root-to-leaf path times the
//! leaf classifier's probability, every probability being `sigmoid(w.x + b)`. Path probabilities
//! are accumulated in log space.

use crate::error::{Error, Result};
use crate::par;
use crate::solver::Weights;
use crate::sparse::{Index, SparseRowMatrix, SparseVec};
use crate::tree::{Ensemble, Tree, TreeNode};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Default beam width.
pub const DEFAULT_BEAM: usize = 10;

/// Label/score pairs sorted by descending score, ties by ascending label id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredLabels(Vec<(Index, f64)>);

impl ScoredLabels {
    /// Sorts the pairs and keeps the best `k`. Labels must be unique.
    pub fn top_k(mut pairs: Vec<(Index, f64)>, k: usize) -> Self {
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.truncate(k);
        Self(pairs)
    }

    /// Wraps pairs that are already ranked, e.g. read back from a prediction file.
    pub fn from_ranked(pairs: Vec<(Index, f64)>) -> Self {
        Self(pairs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[(Index, f64)] {
        &self.0
    }

    pub fn labels(&self) -> impl Iterator<Item = Index> + '_ {
        self.0.iter().map(|&(l, _)| l)
    }
}

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(m))` without cancellation for large `|m|`.
fn log_sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        -(-m).exp().ln_1p()
    } else {
        m - m.exp().ln_1p()
    }
}

/// Probability of descending into the child (or predicting the label) guarded by `w`.
pub fn node_child_prob(w: &Weights, x: &SparseVec) -> f64 {
    sigmoid(w.margin(x))
}

/// Every label reached by a beam of width `beam`, with its chain-rule score, unsorted.
pub fn predict_tree_all(tree: &Tree, x: &SparseVec, beam: usize) -> Vec<(Index, f64)> {
    let beam = beam.max(1);
    let dense = x.to_dense();
    let mut frontier: Vec<(&TreeNode, f64)> = vec![(&tree.root, 0.0)];
    let mut next = Vec::new();
    let mut scored = Vec::new();
    while !frontier.is_empty() {
        if frontier.len() > beam {
            frontier.sort_by(|a, b| b.1.total_cmp(&a.1));
            frontier.truncate(beam);
        }
        next.clear();
        for &(node, logp) in &frontier {
            if node.is_leaf {
                for (&label, w) in node.labels.iter().zip(&node.classifiers) {
                    let p = (logp + log_sigmoid(w.margin_dense(&dense))).exp();
                    if p > 0.0 {
                        scored.push((label, p));
                    }
                }
            } else {
                for (child, w) in node.children.iter().zip(&node.classifiers) {
                    next.push((child, logp + log_sigmoid(w.margin_dense(&dense))));
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    scored
}

pub fn predict_tree(tree: &Tree, x: &SparseVec, beam: usize, k: usize) -> ScoredLabels {
    ScoredLabels::top_k(predict_tree_all(tree, x, beam), k)
}

/// Averages per-tree scores, a label missing from a tree's beam counting as 0 for that tree.
pub fn predict_ensemble(ens: &Ensemble, x: &SparseVec, beam: usize, k: usize) -> ScoredLabels {
    if ens.trees.len() == 1 {
        return predict_tree(&ens.trees[0], x, beam, k);
    }
    let mut sums: HashMap<Index, f64> = HashMap::new();
    for tree in &ens.trees {
        for (l, p) in predict_tree_all(tree, x, beam) {
            *sums.entry(l).or_insert(0.0) += p;
        }
    }
    let t = ens.trees.len() as f64;
    ScoredLabels::top_k(sums.into_iter().map(|(l, s)| (l, s / t)).collect(), k)
}

/// Predicts every row, applying the same instance normalization as training.
pub fn predict_batch(
    ens: &Ensemble,
    features: &SparseRowMatrix,
    beam: usize,
    k: usize,
) -> Result<Vec<ScoredLabels>> {
    if features.dim() != ens.n_features {
        return Err(Error::DimensionMismatch {
            expected: ens.n_features,
            actual: features.dim(),
        });
    }
    let normalize = ens.config.normalize_instances;
    Ok(par::map_slice(features.rows(), |x| {
        if normalize {
            predict_ensemble(ens, &x.l2_normalize(), beam, k)
        } else {
            predict_ensemble(ens, x, beam, k)
        }
    }))
}

/// One line per instance: space-separated `label:score`, scores with 5 decimals.
pub fn write_predictions<W: Write>(preds: &[ScoredLabels], mut out: W) -> Result<()> {
    for p in preds {
        let line: Vec<String> = p
            .pairs()
            .iter()
            .map(|(l, s)| format!("{l}:{s:.5}"))
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads a prediction file, keeping the ranking order of each line.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<ScoredLabels>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut pairs = Vec::new();
        for tok in line.split_whitespace() {
            let (l, s) = tok.split_once(':').ok_or_else(|| {
                Error::parse(n + 1, format!("expected `label:score`, got {tok:?}"))
            })?;
            let l: Index = l
                .parse()
                .map_err(|_| Error::parse(n + 1, format!("invalid label {l:?}")))?;
            let s: f64 = s
                .parse()
                .map_err(|_| Error::parse(n + 1, format!("invalid score {s:?}")))?;
            pairs.push((l, s));
        }
        out.push(ScoredLabels::from_ranked(pairs));
    }
    Ok(out)
}
