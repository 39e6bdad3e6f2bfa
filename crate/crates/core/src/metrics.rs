//! Ranking metrics for multi-label predictions: P@k, nDCG@k, their propensity-scored variants
//! and unique-label coverage.
//!
//! Per-instance functions return fractions; [`evaluate`] reports everything multiplied by 100.

use crate::data::LabelIndex;
use crate::error::{Error, Result};
use crate::predict::ScoredLabels;
use crate::sparse::Index;
use std::collections::HashSet;
use std::fmt;

/// Inverse-propensity model `p_l = 1 / (1 + C exp(-A ln(N_l + B)))` with
/// `C = (ln N - 1) (1 + B)^A`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropensityModel {
    pub a: f64,
    pub b: f64,
    pub n_instances: usize,
    probs: Vec<f64>,
}

/// Propensity of a label with `n_l` positives among `n` training instances. Clamped to `(0, 1]`,
/// which only matters for tiny `n` where `ln N - 1` turns negative.
pub fn propensity(n_l: usize, n: usize, a: f64, b: f64) -> f64 {
    let c = ((n as f64).ln() - 1.0) * (1.0 + b).powf(a);
    let denom = 1.0 + c * (-a * (n_l as f64 + b).ln()).exp();
    if denom <= 1.0 {
        1.0
    } else {
        1.0 / denom
    }
}

impl PropensityModel {
    pub const DEFAULT_A: f64 = 0.55;
    pub const DEFAULT_B: f64 = 1.5;

    pub fn fit(idx: &LabelIndex, n_instances: usize, a: f64, b: f64) -> Self {
        Self::from_frequencies(&idx.frequencies(), n_instances, a, b)
    }

    pub fn from_frequencies(freqs: &[usize], n_instances: usize, a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            n_instances,
            probs: freqs
                .iter()
                .map(|&f| propensity(f, n_instances, a, b))
                .collect(),
        }
    }

    /// Every label has propensity 1, which turns PS metrics into their plain counterparts.
    pub fn uniform(n_labels: usize) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            n_instances: 0,
            probs: vec![1.0; n_labels],
        }
    }

    /// Labels outside the fitted range get propensity 1.
    pub fn p(&self, l: Index) -> f64 {
        self.probs.get(l as usize).copied().unwrap_or(1.0)
    }

    pub fn n_labels(&self) -> usize {
        self.probs.len()
    }
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

fn ideal_dcg(k: usize, n_truth: usize) -> f64 {
    (1..=k.min(n_truth)).map(discount).sum()
}

fn is_relevant(truth: &[Index], l: Index) -> bool {
    truth.binary_search(&l).is_ok()
}

/// `|top-k(pred) ∩ truth| / k`; missing prediction slots count as misses. `truth` must be sorted.
pub fn precision_at_k(pred: &ScoredLabels, truth: &[Index], k: usize) -> f64 {
    assert!(k >= 1);
    let hits = pred
        .labels()
        .take(k)
        .filter(|&l| is_relevant(truth, l))
        .count();
    hits as f64 / k as f64
}

pub fn ndcg_at_k(pred: &ScoredLabels, truth: &[Index], k: usize) -> f64 {
    assert!(k >= 1);
    if truth.is_empty() {
        return 0.0;
    }
    let dcg: f64 = pred
        .labels()
        .take(k)
        .enumerate()
        .filter(|&(_, l)| is_relevant(truth, l))
        .map(|(r, _)| discount(r + 1))
        .sum();
    dcg / ideal_dcg(k, truth.len())
}

pub fn psp_at_k(pred: &ScoredLabels, truth: &[Index], prop: &PropensityModel, k: usize) -> f64 {
    assert!(k >= 1);
    let gain: f64 = pred
        .labels()
        .take(k)
        .filter(|&l| is_relevant(truth, l))
        .map(|l| 1.0 / prop.p(l))
        .sum();
    gain / k as f64
}

pub fn psndcg_at_k(pred: &ScoredLabels, truth: &[Index], prop: &PropensityModel, k: usize) -> f64 {
    assert!(k >= 1);
    if truth.is_empty() {
        return 0.0;
    }
    let dcg: f64 = pred
        .labels()
        .take(k)
        .enumerate()
        .filter(|&(_, l)| is_relevant(truth, l))
        .map(|(r, l)| discount(r + 1) / prop.p(l))
        .sum();
    dcg / ideal_dcg(k, truth.len())
}

/// The truth labels ranked by descending `1/p_l` (ties by label id), truncated to `k`: the
/// ranking that maximizes the propensity-scored gain.
pub fn oracle_ranking(truth: &[Index], prop: &PropensityModel, k: usize) -> ScoredLabels {
    let pairs = truth.iter().map(|&l| (l, 1.0 / prop.p(l))).collect();
    ScoredLabels::top_k(pairs, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsMetric {
    Precision,
    Ndcg,
}

/// `100 * G(predictions) / G(oracle)` where `G` averages the chosen PS metric over instances.
pub fn ps_report(
    preds: &[ScoredLabels],
    truths: &[&[Index]],
    prop: &PropensityModel,
    k: usize,
    metric: PsMetric,
) -> Result<f64> {
    check_aligned(preds, truths)?;
    let score = |p: &ScoredLabels, t: &[Index]| match metric {
        PsMetric::Precision => psp_at_k(p, t, prop, k),
        PsMetric::Ndcg => psndcg_at_k(p, t, prop, k),
    };
    let m = preds.len() as f64;
    let pred_gain: f64 = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| score(p, t))
        .sum::<f64>()
        / m;
    let oracle_gain: f64 = truths
        .iter()
        .map(|t| score(&oracle_ranking(t, prop, k), t))
        .sum::<f64>()
        / m;
    if oracle_gain == 0.0 {
        return Err(Error::Empty("no test instance has a relevant label".into()));
    }
    Ok(100.0 * pred_gain / oracle_gain)
}

/// Distinct labels among all top-k predictions over distinct labels among all propensity-ranked
/// ground-truth top-k sets.
pub fn coverage_at_k(
    preds: &[ScoredLabels],
    truths: &[&[Index]],
    prop: &PropensityModel,
    k: usize,
) -> Result<f64> {
    check_aligned(preds, truths)?;
    let predicted: HashSet<Index> = preds.iter().flat_map(|p| p.labels().take(k)).collect();
    let truth: HashSet<Index> = truths
        .iter()
        .flat_map(|t| oracle_ranking(t, prop, k).labels().collect::<Vec<_>>())
        .collect();
    if truth.is_empty() {
        return Err(Error::Empty("ground truth has no labels".into()));
    }
    Ok(predicted.len() as f64 / truth.len() as f64)
}

fn check_aligned(preds: &[ScoredLabels], truths: &[&[Index]]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Empty("empty test set".into()));
    }
    if preds.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: preds.len(),
        });
    }
    Ok(())
}

/// Metric table; every value is a percentage.
///
/// `psp` and `psndcg` are plain means of the per-instance scores, so they coincide with
/// `precision` and `ndcg` under uniform propensities. `psp_rel` and `psndcg_rel` are the same
/// gains relative to the propensity-optimal ranking of the ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub precision: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub psp: Vec<f64>,
    pub psndcg: Vec<f64>,
    pub psp_rel: Vec<f64>,
    pub psndcg_rel: Vec<f64>,
    pub coverage: Vec<f64>,
}

impl EvalReport {
    pub fn rows(&self) -> [(&'static str, &[f64]); 7] {
        [
            ("P@k", &self.precision),
            ("nDCG@k", &self.ndcg),
            ("PSP@k", &self.psp),
            ("PSnDCG@k", &self.psndcg),
            ("PSPrel@k", &self.psp_rel),
            ("PSnDCGrel@k", &self.psndcg_rel),
            ("C@k", &self.coverage),
        ]
    }

    /// Value of metric `name` (e.g. `"P@k"`) at `k`.
    pub fn get(&self, name: &str, k: usize) -> Option<f64> {
        let col = self.ks.iter().position(|&x| x == k)?;
        self.rows()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v[col])
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<12}", "metric")?;
        for k in &self.ks {
            write!(f, " {:>8}", format!("k={k}"))?;
        }
        writeln!(f)?;
        for (name, values) in self.rows() {
            write!(f, "{name:<12}")?;
            for v in values {
                write!(f, " {v:>8.2}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn evaluate(
    preds: &[ScoredLabels],
    truths: &[&[Index]],
    prop: &PropensityModel,
    ks: &[usize],
) -> Result<EvalReport> {
    check_aligned(preds, truths)?;
    if ks.contains(&0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mean = |f: &dyn Fn(&ScoredLabels, &[Index]) -> f64| {
        100.0 * preds.iter().zip(truths).map(|(p, t)| f(p, t)).sum::<f64>() / preds.len() as f64
    };
    let mut report = EvalReport {
        ks: ks.to_vec(),
        precision: Vec::new(),
        ndcg: Vec::new(),
        psp: Vec::new(),
        psndcg: Vec::new(),
        psp_rel: Vec::new(),
        psndcg_rel: Vec::new(),
        coverage: Vec::new(),
    };
    for &k in ks {
        report.precision.push(mean(&|p, t| precision_at_k(p, t, k)));
        report.ndcg.push(mean(&|p, t| ndcg_at_k(p, t, k)));
        report.psp.push(mean(&|p, t| psp_at_k(p, t, prop, k)));
        report.psndcg.push(mean(&|p, t| psndcg_at_k(p, t, prop, k)));
        report
            .psp_rel
            .push(ps_report(preds, truths, prop, k, PsMetric::Precision)?);
        report
            .psndcg_rel
            .push(ps_report(preds, truths, prop, k, PsMetric::Ndcg)?);
        report
            .coverage
            .push(100.0 * coverage_at_k(preds, truths, prop, k)?);
    }
    Ok(report)
}
