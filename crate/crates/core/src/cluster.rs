//! Unconstrained spherical K-means over label vectors.
//!
//! The distance between a label vector and a center is `1 - v . c`. Cluster sizes are left to
//! the data; nothing pushes the partition towards balance.

use crate::error::{Error, Result};
use crate::par;
use crate::sparse::{add_scaled, SparseVec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by less than this (absolute).
    pub tol: f64,
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 50,
            tol: 1e-4,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Cluster id of every input vector, in input order.
    pub assignments: Vec<usize>,
    /// Dense centers; a center is the zero vector only if its cluster could not be seeded.
    pub centers: Vec<Vec<f64>>,
    pub n_iters_run: usize,
    pub final_objective: f64,
    /// Objective after each assignment step.
    pub objective_trace: Vec<f64>,
}

impl Partition {
    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    /// Member indices of each cluster, in increasing order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.len()];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }
}

fn normalize_dense(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn dim_of(vecs: &[SparseVec]) -> usize {
    vecs.first().map_or(0, SparseVec::dim)
}

/// Assigns every vector to its nearest center, breaking ties toward the lowest cluster id.
/// Returns the assignments and the summed distance.
pub fn assign_step(vecs: &[SparseVec], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let (assignments, distances) = assign_with_distances(vecs, centers);
    (assignments, distances.iter().sum())
}

fn assign_with_distances(vecs: &[SparseVec], centers: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    assert!(!centers.is_empty(), "assign_step needs at least one center");
    let pairs = par::map_slice(vecs, |v| {
        let mut best = (0, f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let d = 1.0 - v.dot_dense(c);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    });
    pairs.into_iter().unzip()
}

/// Recomputes centers as normalized member means.
///
/// A cluster whose mean vanishes (no members, or members summing to zero) is reseeded with the
/// member vector that currently fits its own cluster worst. Reseeding only happens when that
/// member sits at a strictly positive distance, so identical inputs leave the spare cluster empty.
pub fn update_step(vecs: &[SparseVec], assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    assert_eq!(vecs.len(), assignments.len());
    let dim = dim_of(vecs);
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignments.iter().enumerate() {
        members[c].push(i);
    }
    let mut centers = par::map_slice(&members, |ids: &Vec<usize>| {
        let mut c = vec![0.0; dim];
        for &i in ids {
            add_scaled(&mut c, &vecs[i], 1.0);
        }
        if !ids.is_empty() {
            let inv = 1.0 / ids.len() as f64;
            c.iter_mut().for_each(|x| *x *= inv);
        }
        normalize_dense(&mut c);
        c
    });

    let degenerate: Vec<usize> = (0..k)
        .filter(|&c| centers[c].iter().all(|&x| x == 0.0))
        .collect();
    if degenerate.is_empty() {
        return centers;
    }

    // Worst-fit candidates, farthest first; the stable sort keeps lower ids first on ties.
    let mut candidates: Vec<(usize, f64)> = assignments
        .iter()
        .enumerate()
        .filter(|&(i, _)| !vecs[i].is_empty())
        .map(|(i, &c)| (i, 1.0 - vecs[i].dot_dense(&centers[c])))
        .filter(|&(_, d)| d > 1e-12)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (c, (i, _)) in degenerate.into_iter().zip(candidates) {
        let mut seed = vecs[i].to_dense();
        normalize_dense(&mut seed);
        centers[c] = seed;
    }
    centers
}

/// Partitions `vecs` into at most `params.k` clusters with Lloyd iterations.
///
/// With no more vectors than clusters every vector becomes its own cluster.
pub fn kmeans_partition(vecs: &[SparseVec], params: &KMeansParams, seed: u64) -> Result<Partition> {
    if params.k < 2 {
        return Err(Error::InvalidArgument(format!(
            "K-means needs K >= 2, got {}",
            params.k
        )));
    }
    if vecs.is_empty() {
        return Err(Error::Empty("no vectors to cluster".into()));
    }
    if vecs.len() <= params.k {
        return Ok(singleton_partition(vecs));
    }

    let mut best: Option<Partition> = None;
    for r in 0..params.restarts.max(1) {
        let run = lloyd(vecs, params, seed.wrapping_add(r as u64));
        if best
            .as_ref()
            .is_none_or(|b| run.final_objective < b.final_objective)
        {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn singleton_partition(vecs: &[SparseVec]) -> Partition {
    let centers: Vec<Vec<f64>> = vecs
        .iter()
        .map(|v| {
            let mut c = v.to_dense();
            normalize_dense(&mut c);
            c
        })
        .collect();
    let objective = vecs
        .iter()
        .zip(&centers)
        .map(|(v, c)| 1.0 - v.dot_dense(c))
        .sum();
    Partition {
        assignments: (0..vecs.len()).collect(),
        centers,
        n_iters_run: 0,
        final_objective: objective,
        objective_trace: Vec::new(),
    }
}

fn lloyd(vecs: &[SparseVec], params: &KMeansParams, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = rand::seq::index::sample(&mut rng, vecs.len(), params.k).into_vec();
    seeds.sort_unstable();
    let mut centers: Vec<Vec<f64>> = seeds
        .iter()
        .map(|&i| {
            let mut c = vecs[i].to_dense();
            normalize_dense(&mut c);
            c
        })
        .collect();

    let mut trace = Vec::new();
    let mut assignments;
    loop {
        let (a, objective) = assign_step(vecs, &centers);
        assignments = a;
        let improved = trace
            .last()
            .map_or(f64::INFINITY, |&prev: &f64| prev - objective);
        trace.push(objective);
        if improved < params.tol || trace.len() >= params.max_iters.max(1) {
            break;
        }
        centers = update_step(vecs, &assignments, params.k);
    }

    Partition {
        assignments,
        centers,
        n_iters_run: trace.len(),
        final_objective: *trace.last().unwrap(),
        objective_trace: trace,
    }
}
