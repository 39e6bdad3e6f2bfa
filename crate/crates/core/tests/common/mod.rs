//! Generators and brute-force oracles shared by the integration tests and the acceptance harness.
//!
//! Every `check_*` function returns `Err` with a human-readable reason on the first mismatch.
#![allow(dead_code)]

use bonsai_core::cluster::{kmeans_partition, KMeansParams};
use bonsai_core::metrics::{
    coverage_at_k, ndcg_at_k, precision_at_k, ps_report, psndcg_at_k, psp_at_k, PsMetric,
};
use bonsai_core::predict::predict_tree_all;
use bonsai_core::solver::{solve, BinaryProblem, SolverParams, SquaredHingeObjective, Weights};
use bonsai_core::{
    load_model, predict_ensemble, save_model, train_ensemble, Dataset, Ensemble, Index, LabelIndex,
    LabelRepr, PropensityModel, ReprSpace, ScoredLabels, SparseVec, TrainConfig, Tree, TreeNode,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sparse(rng: &mut impl Rng, dim: usize, density: f64, lo: f64, hi: f64) -> SparseVec {
    let mut pairs = Vec::new();
    for j in 0..dim as Index {
        if rng.random_bool(density) {
            pairs.push((j, rng.random_range(lo..hi)));
        }
    }
    SparseVec::from_pairs(dim, pairs)
}

/// Unstructured random data: every label and feature switched on independently.
pub fn random_dataset(rng: &mut impl Rng, n: usize, d: usize, l: usize) -> Dataset {
    let p_label = rng.random_range(0.05..0.5);
    let p_feat = rng.random_range(0.1..0.6);
    let rows = (0..n)
        .map(|_| {
            let labels = (0..l as Index)
                .filter(|_| rng.random_bool(p_label))
                .collect();
            let x = random_sparse(rng, d, p_feat, 0.1, 3.0);
            (labels, x.iter().collect())
        })
        .collect();
    Dataset::from_lists(d, l, rows).unwrap()
}

/// Data with learnable structure: each label owns a few prototype features, label popularity
/// falls off like `1/rank`, and instances mix the prototypes of their labels with noise.
pub fn synthetic_xmc(seed: u64, n: usize, d: usize, l: usize) -> Dataset {
    let mut rng = rng(seed);
    let protos: Vec<Vec<Index>> = (0..l)
        .map(|_| (0..4).map(|_| rng.random_range(0..d as Index)).collect())
        .collect();
    let weights: Vec<f64> = (0..l).map(|r| 1.0 / (r + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut u = rng.random_range(0.0..total);
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i as Index;
            }
            u -= w;
        }
        (l - 1) as Index
    };
    let rows = (0..n)
        .map(|_| {
            let n_labels = rng.random_range(1..=3);
            let labels: BTreeSet<Index> = (0..n_labels).map(|_| draw(&mut rng)).collect();
            let mut feats = Vec::new();
            for &lab in &labels {
                for &f in &protos[lab as usize] {
                    feats.push((f, rng.random_range(0.5..1.5)));
                }
            }
            for _ in 0..3 {
                feats.push((rng.random_range(0..d as Index), rng.random_range(0.0..0.5)));
            }
            let x = SparseVec::from_pairs(d, feats);
            (labels.into_iter().collect(), x.iter().collect())
        })
        .collect();
    Dataset::from_lists(d, l, rows).unwrap()
}

/// First `n_train` rows for training, the rest for testing.
pub fn split(ds: &Dataset, n_train: usize) -> (Dataset, Dataset) {
    let part = |range: std::ops::Range<usize>| {
        let rows = range
            .map(|i| {
                (
                    ds.label_set(i).to_vec(),
                    ds.features.row(i).iter().collect(),
                )
            })
            .collect();
        Dataset::from_lists(ds.n_features(), ds.n_labels(), rows).unwrap()
    };
    (part(0..n_train), part(n_train..ds.n_instances()))
}

pub fn truths(ds: &Dataset) -> Vec<&[Index]> {
    (0..ds.n_instances()).map(|i| ds.label_set(i)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------------------------------------
// label representations

fn dense_matrix(rows: &[SparseVec]) -> Vec<Vec<f64>> {
    rows.iter().map(SparseVec::to_dense).collect()
}

/// Row `l` of `A^T B` computed with plain loops, then normalized.
fn dense_at_b_row(a: &[Vec<f64>], b: &[Vec<f64>], l: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..a.len() {
        for j in 0..cols {
            out[j] += a[i][l] * b[i][j];
        }
    }
    let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in &mut out {
            *v /= n;
        }
    }
    out
}

pub fn dense_repr_oracle(ds: &Dataset, space: ReprSpace) -> Vec<Vec<f64>> {
    let x = dense_matrix(ds.features.rows());
    let y = dense_matrix(ds.labels.rows());
    let (d, l) = (ds.n_features(), ds.n_labels());
    (0..l)
        .map(|lab| match space {
            ReprSpace::Input => dense_at_b_row(&y, &x, lab, d),
            ReprSpace::Output => dense_at_b_row(&y, &y, lab, l),
            ReprSpace::Joint => {
                let h = 0.5f64.sqrt();
                let mut v = dense_at_b_row(&y, &x, lab, d);
                v.extend(dense_at_b_row(&y, &y, lab, l));
                v.iter().map(|e| e * h).collect()
            }
        })
        .collect()
}

pub fn check_repr_oracle(n_datasets: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for case in 0..n_datasets {
        let n = rng.random_range(1..=32);
        let d = rng.random_range(1..=32);
        let l = rng.random_range(1..=32);
        let ds = random_dataset(&mut rng, n, d, l);
        let idx = LabelIndex::build(&ds);
        for space in [ReprSpace::Input, ReprSpace::Output, ReprSpace::Joint] {
            let got = LabelRepr::build(space, &ds, &idx);
            let want = dense_repr_oracle(&ds, space);
            for (lab, (g, w)) in got.vectors.iter().zip(&want).enumerate() {
                let g = g.to_dense();
                if g.len() != w.len() || g.iter().zip(w).any(|(a, b)| !close(*a, *b, 1e-9)) {
                    return Err(format!(
                        "case {case} ({n}x{d}, L={l}) {space} label {lab}: {g:?} vs {w:?}"
                    ));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// K-means

pub fn random_unit_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<SparseVec> {
    (0..n)
        .map(|_| random_sparse(rng, dim, 0.5, -1.0, 1.0).l2_normalize())
        .collect()
}

pub fn check_kmeans_monotone(n_runs: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for run in 0..n_runs {
        let n = rng.random_range(3..=40);
        let dim = rng.random_range(2..=16);
        let k = rng.random_range(2..=6);
        let vecs = random_unit_vectors(&mut rng, n, dim);
        let mut params = KMeansParams::new(k);
        params.tol = 0.0;
        let part = kmeans_partition(&vecs, &params, rng.random()).map_err(|e| e.to_string())?;
        for w in part.objective_trace.windows(2) {
            if w[1] > w[0] + 1e-12 {
                return Err(format!("run {run}: objective rose {} -> {}", w[0], w[1]));
            }
        }
        // Recompute the reported objective from the returned centers and assignments.
        let recomputed: f64 = vecs
            .iter()
            .zip(&part.assignments)
            .map(|(v, &c)| {
                1.0 - v
                    .iter()
                    .map(|(j, x)| x * part.centers[c][j as usize])
                    .sum::<f64>()
            })
            .sum();
        if !close(recomputed, part.final_objective, 1e-9) {
            return Err(format!(
                "run {run}: final objective {} but recomputed {recomputed}",
                part.final_objective
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// beam search

fn random_weights(rng: &mut impl Rng, dim: usize) -> Weights {
    Weights {
        w: random_sparse(rng, dim, 0.6, -2.0, 2.0),
        bias: rng.random_range(-1.0..1.0),
    }
}

fn random_node(
    rng: &mut impl Rng,
    labels: Vec<Index>,
    depth: usize,
    k: usize,
    d_max: usize,
    dim: usize,
) -> TreeNode {
    if labels.len() <= k || depth >= d_max {
        let classifiers = labels.iter().map(|_| random_weights(rng, dim)).collect();
        return TreeNode {
            depth,
            labels,
            instance_ids: Vec::new(),
            children: Vec::new(),
            classifiers,
            is_leaf: true,
        };
    }
    // Unequal groups: cut the shuffled labels at random points.
    let mut shuffled = labels.clone();
    shuffled.shuffle(rng);
    let n_groups = rng.random_range(2..=k);
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, labels.len() - 1, n_groups - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(labels.len());
    let mut start = 0;
    let mut children = Vec::new();
    for end in cuts {
        let mut group = shuffled[start..end].to_vec();
        group.sort_unstable();
        children.push(random_node(rng, group, depth + 1, k, d_max, dim));
        start = end;
    }
    let classifiers = children.iter().map(|_| random_weights(rng, dim)).collect();
    TreeNode {
        depth,
        labels,
        instance_ids: Vec::new(),
        children,
        classifiers,
        is_leaf: false,
    }
}

pub fn random_tree(rng: &mut impl Rng, n_labels: usize, dim: usize) -> Tree {
    let k = rng.random_range(2..=5);
    let d_max = rng.random_range(1..=4);
    let root = random_node(rng, (0..n_labels as Index).collect(), 0, k, d_max, dim);
    Tree {
        root,
        k,
        d_max,
        repr_space: ReprSpace::Input,
        seed: 0,
        n_features: dim,
        n_labels,
    }
}

fn plain_margin(w: &Weights, x: &[f64]) -> f64 {
    w.w.iter().map(|(j, v)| v * x[j as usize]).sum::<f64>() + w.bias
}

fn plain_sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

/// Score of every label as the plain product of sigmoids along its path.
pub fn exhaustive_scores(tree: &Tree, x: &SparseVec) -> Vec<f64> {
    fn go(node: &TreeNode, x: &[f64], p: f64, out: &mut [f64]) {
        for (i, w) in node.classifiers.iter().enumerate() {
            let q = p * plain_sigmoid(plain_margin(w, x));
            if node.is_leaf {
                out[node.labels[i] as usize] = q;
            } else {
                go(&node.children[i], x, q, out);
            }
        }
    }
    let mut out = vec![0.0; tree.n_labels];
    go(&tree.root, &x.to_dense(), 1.0, &mut out);
    out
}

pub fn check_beam_exhaustive(n_trees: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for t in 0..n_trees {
        let n_labels = rng.random_range(2..=60);
        let dim = rng.random_range(1..=12);
        let tree = random_tree(&mut rng, n_labels, dim);
        let beam = tree.max_level_width() + rng.random_range(0..3);
        for _ in 0..5 {
            let x = random_sparse(&mut rng, dim, 0.7, -1.0, 1.0);
            let want = exhaustive_scores(&tree, &x);
            let mut got = vec![0.0; n_labels];
            let pairs = predict_tree_all(&tree, &x, beam);
            if pairs.len() != n_labels {
                return Err(format!(
                    "tree {t}: beam {beam} scored {} of {n_labels} labels",
                    pairs.len()
                ));
            }
            for (l, p) in pairs {
                got[l as usize] = p;
            }
            for (l, (g, w)) in got.iter().zip(&want).enumerate() {
                if (g - w).abs() > 1e-12 * w {
                    return Err(format!("tree {t} label {l}: beam {g} vs exhaustive {w}"));
                }
            }
            // Ranking must agree too.
            let top = ScoredLabels::top_k(
                want.iter()
                    .enumerate()
                    .map(|(l, &p)| (l as Index, p))
                    .collect(),
                5,
            );
            let ens = Ensemble {
                trees: vec![tree.clone()],
                config: TrainConfig::default(),
                n_features: dim,
                n_labels,
            };
            let pred = predict_ensemble(&ens, &x, beam, 5);
            if pred.labels().collect::<Vec<_>>() != top.labels().collect::<Vec<_>>() {
                return Err(format!("tree {t}: top-5 {pred:?} vs exhaustive {top:?}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// solver

pub fn check_solver_closed_form() -> Check {
    let rows = [SparseVec::from_dense(&[1.0])];
    let signs = [1.0];
    for c in [0.1, 1.0, 100.0] {
        let params = SolverParams {
            c,
            eps: 1e-10,
            max_newton_iters: 100,
            bias: false,
        };
        let report = solve(BinaryProblem::new(&rows, &signs).unwrap(), &params)
            .map_err(|e| e.to_string())?;
        let w = report.weights.w.to_dense()[0];
        let want = c / (1.0 + c);
        if !close(w, want, 1e-6) {
            return Err(format!("C={c}: w={w}, closed form {want}"));
        }
    }
    Ok(())
}

pub fn check_solver_gradient(n_cases: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for case in 0..n_cases {
        let n = rng.random_range(1..=20);
        let dim = rng.random_range(1..=10);
        let rows: Vec<SparseVec> = (0..n)
            .map(|_| random_sparse(&mut rng, dim, 0.6, -2.0, 2.0))
            .collect();
        let signs: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let c = rng.random_range(0.1..10.0);
        let bias = rng.random_bool(0.5);
        let obj = SquaredHingeObjective::new(BinaryProblem::new(&rows, &signs).unwrap(), c, bias);
        let w: Vec<f64> = (0..obj.n_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let g = obj.gradient(&w);
        let h = 1e-6;
        for j in 0..w.len() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
            let rel = (fd - g[j]).abs() / g[j].abs().max(fd.abs()).max(1.0);
            if rel > 1e-4 {
                return Err(format!(
                    "case {case} coord {j}: analytic {} vs finite difference {fd}",
                    g[j]
                ));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// metrics

/// A ranked prediction, its dense relevance vector and dense propensities.
pub struct MetricCase {
    pub pred: ScoredLabels,
    pub truth: Vec<Index>,
    pub relevant: Vec<bool>,
    pub prop: PropensityModel,
    pub p: Vec<f64>,
    pub k: usize,
}

pub fn random_metric_case(
    rng: &mut impl Rng,
    n_labels: usize,
    prop: &PropensityModel,
) -> MetricCase {
    let relevant: Vec<bool> = (0..n_labels).map(|_| rng.random_bool(0.25)).collect();
    let truth = (0..n_labels as Index)
        .filter(|&l| relevant[l as usize])
        .collect();
    let mut order: Vec<Index> = (0..n_labels as Index).collect();
    order.shuffle(rng);
    order.truncate(rng.random_range(0..=10.min(n_labels)));
    let n = order.len();
    let pred = ScoredLabels::from_ranked(
        order
            .into_iter()
            .enumerate()
            .map(|(r, l)| (l, (n - r) as f64))
            .collect(),
    );
    let p = (0..n_labels as Index).map(|l| prop.p(l)).collect();
    MetricCase {
        pred,
        truth,
        relevant,
        prop: prop.clone(),
        p,
        k: rng.random_range(1..=6),
    }
}

fn dense_gain(case: &MetricCase, weighted: bool, discounted: bool) -> f64 {
    let ranked: Vec<usize> = case.pred.labels().map(|l| l as usize).collect();
    let mut gain = 0.0;
    for r in 0..case.k.min(ranked.len()) {
        let l = ranked[r];
        if case.relevant[l] {
            let mut g = 1.0;
            if weighted {
                g /= case.p[l];
            }
            if discounted {
                g /= (r as f64 + 2.0).log2();
            }
            gain += g;
        }
    }
    gain
}

fn dense_norm(case: &MetricCase, discounted: bool) -> f64 {
    if !discounted {
        return case.k as f64;
    }
    let n_rel = case.relevant.iter().filter(|&&r| r).count();
    (0..case.k.min(n_rel))
        .map(|r| 1.0 / (r as f64 + 2.0).log2())
        .sum()
}

/// `(P, nDCG, PSP, PSnDCG)` computed from the dense vectors.
pub fn dense_metrics(case: &MetricCase) -> [f64; 4] {
    let ratio = |g: f64, z: f64| if z == 0.0 { 0.0 } else { g / z };
    [
        ratio(dense_gain(case, false, false), dense_norm(case, false)),
        ratio(dense_gain(case, false, true), dense_norm(case, true)),
        ratio(dense_gain(case, true, false), dense_norm(case, false)),
        ratio(dense_gain(case, true, true), dense_norm(case, true)),
    ]
}

/// The best achievable ranking under propensity weighting, by exhaustive sort of the dense
/// relevance vector.
fn dense_oracle_case(case: &MetricCase) -> MetricCase {
    let mut rel: Vec<usize> = (0..case.relevant.len())
        .filter(|&l| case.relevant[l])
        .collect();
    rel.sort_by(|&a, &b| case.p[a].total_cmp(&case.p[b]).then(a.cmp(&b)));
    let n = rel.len();
    MetricCase {
        pred: ScoredLabels::from_ranked(
            rel.into_iter()
                .enumerate()
                .map(|(r, l)| (l as Index, (n - r) as f64))
                .collect(),
        ),
        truth: case.truth.clone(),
        relevant: case.relevant.clone(),
        prop: case.prop.clone(),
        p: case.p.clone(),
        k: case.k,
    }
}

pub fn check_metrics_dense(n_cases: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for case_id in 0..n_cases {
        let n_labels = rng.random_range(1..=30);
        let n_train = rng.random_range(20..=2000);
        let freqs: Vec<usize> = (0..n_labels)
            .map(|_| rng.random_range(0..=n_train / 2))
            .collect();
        let prop = PropensityModel::from_frequencies(&freqs, n_train, 0.55, 1.5);
        let case = random_metric_case(&mut rng, n_labels, &prop);
        let k = case.k;
        let got = [
            precision_at_k(&case.pred, &case.truth, k),
            ndcg_at_k(&case.pred, &case.truth, k),
            psp_at_k(&case.pred, &case.truth, &case.prop, k),
            psndcg_at_k(&case.pred, &case.truth, &case.prop, k),
        ];
        let want = dense_metrics(&case);
        for (name, (g, w)) in ["P", "nDCG", "PSP", "PSnDCG"]
            .iter()
            .zip(got.iter().zip(&want))
        {
            if !close(*g, *w, 1e-12) {
                return Err(format!("case {case_id}: {name}@{k} = {g}, dense {w}"));
            }
        }

        // Propensity formula, written out independently.
        let cst = ((n_train as f64).ln() - 1.0) * 2.5f64.powf(0.55);
        for (l, &f) in freqs.iter().enumerate() {
            let raw = 1.0 / (1.0 + cst * (f as f64 + 1.5).powf(-0.55));
            let want = if raw >= 1.0 || cst <= 0.0 { 1.0 } else { raw };
            if !close(case.p[l], want, 1e-12) {
                return Err(format!(
                    "case {case_id}: p_{l} = {}, formula {want}",
                    case.p[l]
                ));
            }
        }
    }

    // Aggregate metrics over small batches.
    for batch_id in 0..20 {
        let n_labels = rng.random_range(2..=25);
        let n_train = rng.random_range(50..=500);
        let freqs: Vec<usize> = (0..n_labels)
            .map(|_| rng.random_range(0..=n_train / 3))
            .collect();
        let prop = PropensityModel::from_frequencies(&freqs, n_train, 0.55, 1.5);
        let k = rng.random_range(1..=5);
        let mut cases: Vec<MetricCase> = (0..rng.random_range(1..=12))
            .map(|_| random_metric_case(&mut rng, n_labels, &prop))
            .collect();
        if cases.iter().all(|c| c.truth.is_empty()) {
            cases[0].relevant[0] = true;
            cases[0].truth = vec![0];
        }
        for c in &mut cases {
            c.k = k;
        }
        let preds: Vec<ScoredLabels> = cases.iter().map(|c| c.pred.clone()).collect();
        let truths: Vec<&[Index]> = cases.iter().map(|c| c.truth.as_slice()).collect();
        let oracles: Vec<MetricCase> = cases.iter().map(dense_oracle_case).collect();
        for (metric, col) in [(PsMetric::Precision, 2), (PsMetric::Ndcg, 3)] {
            let num: f64 = cases.iter().map(|c| dense_metrics(c)[col]).sum();
            let den: f64 = oracles.iter().map(|c| dense_metrics(c)[col]).sum();
            let want = 100.0 * num / den;
            let got = ps_report(&preds, &truths, &prop, k, metric).map_err(|e| e.to_string())?;
            if !close(got, want, 1e-12 * want.abs().max(1.0)) {
                return Err(format!(
                    "batch {batch_id}: {metric:?} report {got} vs {want}"
                ));
            }
        }
        let mut predicted = vec![false; n_labels];
        let mut ideal = vec![false; n_labels];
        for (c, o) in cases.iter().zip(&oracles) {
            for l in c.pred.labels().take(k) {
                predicted[l as usize] = true;
            }
            for l in o.pred.labels().take(k) {
                ideal[l as usize] = true;
            }
        }
        let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as f64;
        let want = count(&predicted) / count(&ideal);
        let got = coverage_at_k(&preds, &truths, &prop, k).map_err(|e| e.to_string())?;
        if !close(got, want, 1e-12) {
            return Err(format!("batch {batch_id}: coverage {got} vs {want}"));
        }
    }
    Ok(())
}

/// Under uniform propensities PSP equals P and PSnDCG equals nDCG, bit for bit.
pub fn check_uniform_reduction(n_cases: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for case_id in 0..n_cases {
        let n_labels = rng.random_range(1..=30);
        let prop = PropensityModel::uniform(n_labels);
        let c = random_metric_case(&mut rng, n_labels, &prop);
        let k = c.k;
        let p = precision_at_k(&c.pred, &c.truth, k);
        let psp = psp_at_k(&c.pred, &c.truth, &prop, k);
        let n = ndcg_at_k(&c.pred, &c.truth, k);
        let psn = psndcg_at_k(&c.pred, &c.truth, &prop, k);
        if p != psp || n != psn {
            return Err(format!(
                "case {case_id}: P={p} PSP={psp} nDCG={n} PSnDCG={psn}"
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// trained trees

pub fn check_leaf_partition(tree: &Tree) -> Check {
    let mut seen = vec![0usize; tree.n_labels];
    for leaf in tree.root.leaves() {
        for &l in &leaf.labels {
            seen[l as usize] += 1;
        }
    }
    if let Some(l) = seen.iter().position(|&c| c != 1) {
        return Err(format!("label {l} appears in {} leaves", seen[l]));
    }
    let mut err = None;
    tree.root.walk(&mut |n| {
        if n.depth > tree.d_max {
            err.get_or_insert(format!("node at depth {} > d_max {}", n.depth, tree.d_max));
        }
        if !n.is_leaf {
            let mut union: Vec<Index> = n.children.iter().flat_map(|c| c.labels.clone()).collect();
            union.sort_unstable();
            if union != n.labels {
                err.get_or_insert(format!(
                    "children of a depth-{} node do not partition it",
                    n.depth
                ));
            }
        }
    });
    err.map_or(Ok(()), Err)
}

/// Trains small ensembles over assorted settings and checks every tree.
pub fn check_structural_invariants(n_configs: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let spaces = [ReprSpace::Input, ReprSpace::Output, ReprSpace::Joint];
    for cfg_id in 0..n_configs {
        let l = rng.random_range(5..=60);
        let ds = synthetic_xmc(rng.random(), rng.random_range(30..=200), 40, l);
        let config = TrainConfig {
            n_trees: 2,
            k: rng.random_range(2..=6),
            d_max: rng.random_range(1..=4),
            repr_space: spaces[cfg_id % 3],
            base_seed: rng.random(),
            ..TrainConfig::default()
        };
        let ens = train_ensemble(&ds, &config).map_err(|e| e.to_string())?;
        for (t, tree) in ens.trees.iter().enumerate() {
            check_leaf_partition(tree).map_err(|e| format!("config {cfg_id} tree {t}: {e}"))?;
            if tree.root.height() > config.d_max {
                return Err(format!("config {cfg_id} tree {t}: height above d_max"));
            }
        }
    }
    Ok(())
}

/// Saves and reloads `ens`, then compares predictions on `n_inputs` random inputs exactly.
pub fn check_round_trip(ens: &Ensemble, n_inputs: usize, seed: u64) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_model(ens, dir.path()).map_err(|e| e.to_string())?;
    let loaded = load_model(dir.path()).map_err(|e| e.to_string())?;
    let mut rng = rng(seed);
    for i in 0..n_inputs {
        let x = random_sparse(&mut rng, ens.n_features, 0.3, 0.0, 2.0).l2_normalize();
        let a = predict_ensemble(ens, &x, 10, 5);
        let b = predict_ensemble(&loaded, &x, 10, 5);
        if a != b {
            return Err(format!("input {i}: {a:?} before save, {b:?} after load"));
        }
    }
    Ok(())
}
