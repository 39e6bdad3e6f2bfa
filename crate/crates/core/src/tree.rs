//! Shallow label trees: recursive K-way label partitioning with one-vs-all node classifiers.
//!
//! Training follows the grow procedure: the root holds every label and instance; a node with more
//! than `K` labels and depth below `d_max` is split by K-means over its label vectors, each child
//! keeping the instances that carry at least one of its labels. Internal nodes learn one
//! classifier per child, leaves one classifier per label, each over the node's own instances.

use crate::cluster::{kmeans_partition, KMeansParams};
use crate::data::{Dataset, LabelIndex};
use crate::error::{Error, Result};
use crate::par;
use crate::repr::{LabelRepr, ReprSpace};
use crate::solver::{
    finalize_weights, remap_weights, train_binary, BinaryProblem, SolverParams, Weights,
};
use crate::sparse::{Index, SparseRowMatrix, SparseVec};
use log::{debug, info};
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub depth: usize,
    /// Sorted label ids under this node.
    pub labels: Vec<Index>,
    /// Sorted training instance ids reaching this node. Only populated on freshly trained trees.
    pub instance_ids: Vec<Index>,
    pub children: Vec<TreeNode>,
    /// One per child for internal nodes, one per label (in `labels` order) for leaves.
    pub classifiers: Vec<Weights>,
    pub is_leaf: bool,
}

impl TreeNode {
    /// Preorder traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a TreeNode)) {
        visit(self);
        for c in &self.children {
            c.walk(visit);
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if n.is_leaf {
                out.push(n)
            }
        });
        out
    }

    pub fn n_nodes(&self) -> usize {
        1 + self.children.iter().map(TreeNode::n_nodes).sum::<usize>()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    pub fn weight_nnz(&self) -> usize {
        let mut total = 0;
        self.walk(&mut |n| total += n.classifiers.iter().map(|w| w.w.nnz()).sum::<usize>());
        total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub root: TreeNode,
    pub k: usize,
    pub d_max: usize,
    pub repr_space: ReprSpace,
    pub seed: u64,
    pub n_features: usize,
    pub n_labels: usize,
}

impl Tree {
    /// Largest number of nodes found on a single level; a beam at least this wide explores the
    /// whole tree.
    pub fn max_level_width(&self) -> usize {
        let mut widths: Vec<usize> = Vec::new();
        self.root.walk(&mut |n| {
            if widths.len() <= n.depth {
                widths.resize(n.depth + 1, 0);
            }
            widths[n.depth] += 1;
        });
        widths.into_iter().max().unwrap_or(1)
    }
}

/// Hyperparameters shared by all trees of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub k: usize,
    pub d_max: usize,
    pub repr_space: ReprSpace,
    pub c: f64,
    pub eps: f64,
    pub max_newton_iters: usize,
    pub delta: f64,
    pub base_seed: u64,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub kmeans_restarts: usize,
    /// Scale every instance to unit L2 norm before training and prediction.
    pub normalize_instances: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 3,
            k: 100,
            d_max: 1,
            repr_space: ReprSpace::Input,
            c: 1.0,
            eps: 0.1,
            max_newton_iters: 100,
            delta: 0.01,
            base_seed: 42,
            kmeans_max_iters: 50,
            kmeans_tol: 1e-4,
            kmeans_restarts: 1,
            normalize_instances: true,
        }
    }
}

impl TrainConfig {
    /// Depth limit used when none is given: 1 up to 40000 labels, 2 beyond.
    pub fn default_depth(n_labels: usize) -> usize {
        if n_labels <= 40_000 {
            1
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidArgument("need at least one tree".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!(
                "branching factor must be >= 2, got {}",
                self.k
            )));
        }
        if !(self.c > 0.0) || !(self.eps > 0.0) || !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument(
                "C and eps must be positive and delta non-negative".into(),
            ));
        }
        Ok(())
    }

    fn solver(&self) -> SolverParams {
        SolverParams {
            c: self.c,
            eps: self.eps,
            max_newton_iters: self.max_newton_iters,
            bias: true,
        }
    }

    fn kmeans(&self) -> KMeansParams {
        KMeansParams {
            k: self.k,
            max_iters: self.kmeans_max_iters,
            tol: self.kmeans_tol,
            restarts: self.kmeans_restarts,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub trees: Vec<Tree>,
    pub config: TrainConfig,
    pub n_features: usize,
    pub n_labels: usize,
}

impl Ensemble {
    pub fn weight_nnz(&self) -> usize {
        self.trees.iter().map(|t| t.root.weight_nnz()).sum()
    }
}

/// Counters collected while training.
#[derive(Debug, Default)]
pub struct TrainStats {
    /// Classifiers trained on a problem without a single positive instance.
    pub zero_positive_classifiers: AtomicUsize,
    pub classifiers: AtomicUsize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `k`-th child of a node seeded with `seed`.
fn child_seed(seed: u64, k: usize) -> u64 {
    splitmix64(seed ^ splitmix64(k as u64 + 1))
}

/// Returns a copy of the dataset with every feature row scaled to unit norm.
pub fn normalize_dataset(ds: &Dataset) -> Dataset {
    let rows = ds
        .features
        .rows()
        .iter()
        .map(SparseVec::l2_normalize)
        .collect();
    Dataset {
        features: SparseRowMatrix::from_rows(ds.n_features(), rows).unwrap(),
        labels: ds.labels.clone(),
    }
}

/// Trains trees over one dataset, label index and label representation.
pub struct TreeTrainer<'a> {
    ds: &'a Dataset,
    idx: &'a LabelIndex,
    repr: &'a LabelRepr,
    config: &'a TrainConfig,
    pub stats: TrainStats,
}

impl<'a> TreeTrainer<'a> {
    /// `ds` must already be preprocessed (normalized) the way the classifiers should see it.
    pub fn new(
        ds: &'a Dataset,
        idx: &'a LabelIndex,
        repr: &'a LabelRepr,
        config: &'a TrainConfig,
    ) -> Self {
        Self {
            ds,
            idx,
            repr,
            config,
            stats: TrainStats::default(),
        }
    }

    pub fn train_tree(&self, seed: u64) -> Result<Tree> {
        let labels: Vec<Index> = (0..self.ds.n_labels() as Index).collect();
        let instances: Vec<Index> = (0..self.ds.n_instances() as Index).collect();
        let root = self.build_node(0, labels, instances, seed)?;
        Ok(Tree {
            root,
            k: self.config.k,
            d_max: self.config.d_max,
            repr_space: self.repr.space,
            seed,
            n_features: self.ds.n_features(),
            n_labels: self.ds.n_labels(),
        })
    }

    fn is_leaf(&self, depth: usize, n_labels: usize) -> bool {
        n_labels <= self.config.k || depth >= self.config.d_max
    }

    fn build_node(
        &self,
        depth: usize,
        labels: Vec<Index>,
        instance_ids: Vec<Index>,
        seed: u64,
    ) -> Result<TreeNode> {
        let mut node = TreeNode {
            depth,
            labels,
            instance_ids,
            children: Vec::new(),
            classifiers: Vec::new(),
            is_leaf: true,
        };
        if self.is_leaf(depth, node.labels.len()) {
            self.train_node_classifiers(&mut node)?;
            return Ok(node);
        }
        let children = self.grow(&node, seed)?;
        if children.len() < 2 {
            // Every label landed in one cluster; splitting further would only repeat this node.
            debug!(
                "node at depth {depth} with {} labels did not split; keeping it as a leaf",
                node.labels.len()
            );
            self.train_node_classifiers(&mut node)?;
            return Ok(node);
        }
        node.is_leaf = false;
        node.children = children;
        self.train_node_classifiers(&mut node)?;
        Ok(node)
    }

    /// Splits the node's labels with K-means and builds the resulting subtrees.
    /// Empty clusters are dropped, so there may be fewer than `K` children.
    pub fn grow(&self, node: &TreeNode, seed: u64) -> Result<Vec<TreeNode>> {
        let vecs = compact_vectors(node.labels.iter().map(|&l| self.repr.vector(l)));
        let partition = kmeans_partition(&vecs, &self.config.kmeans(), seed)?;
        let label_sets: Vec<Vec<Index>> = partition
            .clusters()
            .into_iter()
            .filter(|members| !members.is_empty())
            .map(|members| members.into_iter().map(|m| node.labels[m]).collect())
            .collect();
        if label_sets.len() < 2 {
            return Ok(Vec::new());
        }
        let depth = node.depth + 1;
        let built = par::map_range(label_sets.len(), |k| {
            let labels = label_sets[k].clone();
            let instances = self.instances_with_any(&labels, &node.instance_ids);
            self.build_node(depth, labels, instances, child_seed(seed, k))
        });
        built.into_iter().collect()
    }

    /// `{i in parent : some label of i is in labels}`.
    fn instances_with_any(&self, labels: &[Index], parent: &[Index]) -> Vec<Index> {
        let mut ids: Vec<Index> = labels
            .iter()
            .flat_map(|&l| self.idx.instances(l).iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.retain(|i| parent.binary_search(i).is_ok());
        ids
    }

    /// Trains the node's one-vs-all classifiers over `node.instance_ids`.
    pub fn train_node_classifiers(&self, node: &mut TreeNode) -> Result<()> {
        // A node whose labels never occur has no instances; it still gets (empty) classifiers.
        let n_targets = if node.is_leaf {
            node.labels.len()
        } else {
            node.children.len()
        };
        if node.instance_ids.is_empty() {
            let empty = Weights {
                w: SparseVec::zeros(self.ds.n_features()),
                bias: 0.0,
            };
            self.stats
                .zero_positive_classifiers
                .fetch_add(n_targets, Ordering::Relaxed);
            node.classifiers = vec![empty; n_targets];
            return Ok(());
        }

        let (rows, local_to_global) = self.local_rows(&node.instance_ids);
        let signs: Vec<Vec<f64>> = if node.is_leaf {
            node.labels
                .iter()
                .map(|&l| {
                    node.instance_ids
                        .iter()
                        .map(|&i| sign(self.ds.label_set(i as usize).binary_search(&l).is_ok()))
                        .collect()
                })
                .collect()
        } else {
            let mut child_of: HashMap<Index, usize> = HashMap::new();
            for (k, child) in node.children.iter().enumerate() {
                for &l in &child.labels {
                    child_of.insert(l, k);
                }
            }
            let mut signs = vec![vec![-1.0; node.instance_ids.len()]; n_targets];
            for (row, &i) in node.instance_ids.iter().enumerate() {
                for l in self.ds.label_set(i as usize) {
                    if let Some(&k) = child_of.get(l) {
                        signs[k][row] = 1.0;
                    }
                }
            }
            signs
        };

        let solver = self.config.solver();
        let d = self.ds.n_features();
        let delta = self.config.delta;
        let trained = par::map_slice(&signs, |s: &Vec<f64>| -> Result<Weights> {
            if !s.iter().any(|&v| v > 0.0) {
                self.stats
                    .zero_positive_classifiers
                    .fetch_add(1, Ordering::Relaxed);
            }
            self.stats.classifiers.fetch_add(1, Ordering::Relaxed);
            let problem = BinaryProblem::new(&rows, s)?;
            let local = train_binary(problem, &solver)?;
            Ok(finalize_weights(
                &remap_weights(&local, &local_to_global, d),
                delta,
            ))
        });
        node.classifiers = trained.into_iter().collect::<Result<_>>()?;
        Ok(())
    }

    /// Feature rows of `ids`, re-indexed onto the features they actually use.
    fn local_rows(&self, ids: &[Index]) -> (Vec<SparseVec>, Vec<Index>) {
        let mut used: Vec<Index> = ids
            .iter()
            .flat_map(|&i| self.ds.features.row(i as usize).indices().iter().copied())
            .collect();
        used.sort_unstable();
        used.dedup();
        let rows = ids
            .iter()
            .map(|&i| {
                self.ds.features.row(i as usize).remap(used.len(), |j| {
                    used.binary_search(&j).ok().map(|p| p as Index)
                })
            })
            .collect();
        (rows, used)
    }
}

fn sign(positive: bool) -> f64 {
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// Re-indexes a group of vectors onto the union of their supports.
fn compact_vectors<'v>(vecs: impl Iterator<Item = &'v SparseVec> + Clone) -> Vec<SparseVec> {
    let mut used: Vec<Index> = vecs
        .clone()
        .flat_map(|v| v.indices().iter().copied())
        .collect();
    used.sort_unstable();
    used.dedup();
    let dim = used.len().max(1);
    vecs.map(|v| v.remap(dim, |j| used.binary_search(&j).ok().map(|p| p as Index)))
        .collect()
}

/// Wall-clock timer for log lines. `std::time::Instant` panics on wasm32-unknown-unknown, so
/// there it always reads zero.
struct Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.start.elapsed();
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        return Duration::ZERO;
    }
}

/// Builds the label representation once and trains `n_trees` trees with seeds
/// `base_seed, base_seed + 1, ...`.
pub fn train_ensemble(ds: &Dataset, config: &TrainConfig) -> Result<Ensemble> {
    config.validate()?;
    if ds.n_labels() == 0 {
        return Err(Error::Empty("dataset has no labels".into()));
    }
    let start = Stopwatch::start();
    let prepared;
    let ds = if config.normalize_instances {
        prepared = normalize_dataset(ds);
        &prepared
    } else {
        ds
    };
    let idx = LabelIndex::build(ds);
    let repr = LabelRepr::build(config.repr_space, ds, &idx);
    info!(
        "built {} label representation ({} labels, dim {}) in {:.2?}",
        repr.space,
        repr.n_labels(),
        repr.dim,
        start.elapsed()
    );

    let trainer = TreeTrainer::new(ds, &idx, &repr, config);
    let trees = par::map_range(config.n_trees, |t| {
        let tree_start = Stopwatch::start();
        let tree = trainer.train_tree(config.base_seed.wrapping_add(t as u64));
        if let Ok(tree) = &tree {
            info!(
                "tree {t}: {} nodes, height {}, trained in {:.2?}",
                tree.root.n_nodes(),
                tree.root.height(),
                tree_start.elapsed()
            );
        }
        tree
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let zero_pos = trainer
        .stats
        .zero_positive_classifiers
        .load(Ordering::Relaxed);
    if zero_pos > 0 {
        log::warn!("{zero_pos} classifiers had no positive training instances");
    }
    info!(
        "trained {} classifiers in {:.2?}",
        trainer.stats.classifiers.load(Ordering::Relaxed),
        start.elapsed()
    );
    Ok(Ensemble {
        trees,
        config: config.clone(),
        n_features: ds.n_features(),
        n_labels: ds.n_labels(),
    })
}
