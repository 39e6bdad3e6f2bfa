//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three interactive pieces: the propensity curve, the decay of chain-rule path probabilities
//! with depth, and a toy tree trained in the page from label groups of user-chosen sizes.

use bonsai_core::metrics::propensity;
use bonsai_core::{
    predict_ensemble, train_ensemble, Dataset, Ensemble, Index, SparseVec, TrainConfig, TreeNode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Propensities of labels with `1..=max_count` training positives out of `n_train` instances.
#[wasm_bindgen]
pub fn propensity_curve(a: f64, b: f64, n_train: u32, max_count: u32) -> Vec<f64> {
    (1..=max_count as usize)
        .map(|n_l| propensity(n_l, n_train as usize, a, b))
        .collect()
}

/// Score of a label reached through `depth` edges that each fire with probability `edge_p`, at
/// depths `1..=max_depth`.
#[wasm_bindgen]
pub fn chain_curve(edge_p: f64, max_depth: u32) -> Vec<f64> {
    (1..=max_depth as i32).map(|d| edge_p.powi(d)).collect()
}

/// Smallest depth that holds `n_labels` leaves with branching factor `k`.
#[wasm_bindgen]
pub fn min_depth(n_labels: u32, k: u32) -> u32 {
    let (mut depth, mut cap) = (0u32, 1u64);
    while cap * (k as u64) < n_labels as u64 && k >= 2 {
        cap *= k as u64;
        depth += 1;
    }
    depth
}

/// A single tree trained on synthetic data whose labels come in groups.
///
/// Every group owns a block of features, every label one more feature inside its group's block,
/// so input-space label vectors cluster by group and K-means recovers the group sizes.
#[wasm_bindgen]
pub struct ToyTree {
    ens: Ensemble,
    prototypes: Vec<SparseVec>,
}

fn toy_dataset(
    group_sizes: &[u32],
    per_label: usize,
    seed: u64,
) -> Result<(Dataset, Vec<SparseVec>), String> {
    let n_labels: usize = group_sizes.iter().map(|&s| s as usize).sum();
    if n_labels == 0 {
        return Err("need at least one label".into());
    }
    let block = 4;
    let d = group_sizes.len() * block + n_labels;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut prototypes = Vec::new();
    let mut label = 0;
    for (g, &size) in group_sizes.iter().enumerate() {
        for _ in 0..size {
            let own = (group_sizes.len() * block + label) as Index;
            let mut proto: Vec<(Index, f64)> = (0..block)
                .map(|j| ((g * block + j) as Index, 1.0))
                .collect();
            proto.push((own, 1.0));
            prototypes.push(SparseVec::from_pairs(d, proto.clone()));
            for _ in 0..per_label {
                let x: Vec<(Index, f64)> = proto
                    .iter()
                    .map(|&(j, v)| (j, v * rng.random_range(0.7..1.3)))
                    .collect();
                rows.push((vec![label as Index], x));
            }
            label += 1;
        }
    }
    let ds = Dataset::from_lists(d, n_labels, rows).map_err(|e| e.to_string())?;
    Ok((ds, prototypes))
}

fn describe_node(node: &TreeNode, out: &mut String) {
    let indent = "  ".repeat(node.depth);
    if node.is_leaf {
        out.push_str(&format!("{indent}leaf: labels {:?}\n", node.labels));
    } else {
        out.push_str(&format!(
            "{indent}node: {} labels in {} children\n",
            node.labels.len(),
            node.children.len()
        ));
        for c in &node.children {
            describe_node(c, out);
        }
    }
}

impl ToyTree {
    pub fn train(group_sizes: &[u32], k: u32, d_max: u32, seed: u32) -> Result<ToyTree, String> {
        let (ds, prototypes) = toy_dataset(group_sizes, 6, seed as u64)?;
        let config = TrainConfig {
            n_trees: 1,
            k: k as usize,
            d_max: d_max as usize,
            base_seed: seed as u64,
            kmeans_restarts: 10,
            ..TrainConfig::default()
        };
        let ens = train_ensemble(&ds, &config).map_err(|e| e.to_string())?;
        Ok(ToyTree { ens, prototypes })
    }
}

#[wasm_bindgen]
impl ToyTree {
    #[wasm_bindgen(constructor)]
    pub fn new(group_sizes: Vec<u32>, k: u32, d_max: u32, seed: u32) -> Result<ToyTree, String> {
        Self::train(&group_sizes, k, d_max, seed)
    }

    pub fn n_labels(&self) -> u32 {
        self.ens.n_labels as u32
    }

    /// Label counts of the root's children, largest first.
    pub fn root_cluster_sizes(&self) -> Vec<u32> {
        let mut sizes: Vec<u32> = self.ens.trees[0]
            .root
            .children
            .iter()
            .map(|c| c.labels.len() as u32)
            .collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn height(&self) -> u32 {
        self.ens.trees[0].root.height() as u32
    }

    /// Indented outline of the tree.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        describe_node(&self.ens.trees[0].root, &mut s);
        s
    }

    /// Top labels for the prototype of `label`, flattened as `[label, score, label, score, ...]`.
    pub fn predict_prototype(&self, label: u32, beam: u32, top: u32) -> Result<Vec<f64>, String> {
        let x = self
            .prototypes
            .get(label as usize)
            .ok_or_else(|| format!("label {label} out of range"))?;
        let pred = predict_ensemble(
            &self.ens,
            &x.l2_normalize(),
            beam.max(1) as usize,
            top as usize,
        );
        Ok(pred
            .pairs()
            .iter()
            .flat_map(|&(l, s)| [l as f64, s])
            .collect())
    }
}
