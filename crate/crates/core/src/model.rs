//! Model directory layout.
//!
//! `meta` is a text file of `key=value` lines. Each tree lives in `tree_<t>.bin`: an 8-byte magic,
//! a little-endian `u32` format version, then node records in preorder. A node record is
//! `depth, n_labels, n_children, is_leaf` as `u32`, the label ids as `u32`, then every classifier
//! as `nnz: u32`, `nnz x (index: u32, value: f32)`, `bias: f32`.

use crate::error::{Error, Result};
use crate::repr::ReprSpace;
use crate::solver::Weights;
use crate::sparse::{Index, SparseVec};
use crate::tree::{Ensemble, TrainConfig, Tree, TreeNode};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;
const TREE_MAGIC: &[u8; 8] = b"BONSAITR";

fn tree_file(t: usize) -> String {
    format!("tree_{t}.bin")
}

pub fn save_model(ens: &Ensemble, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let c = &ens.config;
    let meta = format!(
        "version={FORMAT_VERSION}\nT={}\nK={}\nd_max={}\nrepr_space={}\nD={}\nL={}\nC={}\n\
         eps={}\ndelta={}\nbase_seed={}\nnormalize={}\nmax_newton_iters={}\nkmeans_max_iters={}\n\
         kmeans_tol={}\nkmeans_restarts={}\n",
        ens.trees.len(),
        c.k,
        c.d_max,
        c.repr_space,
        ens.n_features,
        ens.n_labels,
        c.c,
        c.eps,
        c.delta,
        c.base_seed,
        c.normalize_instances,
        c.max_newton_iters,
        c.kmeans_max_iters,
        c.kmeans_tol,
        c.kmeans_restarts,
    );
    fs::write(dir.join("meta"), meta)?;
    for (t, tree) in ens.trees.iter().enumerate() {
        let mut w = BufWriter::new(File::create(dir.join(tree_file(t)))?);
        w.write_all(TREE_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        write_node(&tree.root, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_node(node: &TreeNode, w: &mut impl Write) -> Result<()> {
    put_u32(w, node.depth)?;
    put_u32(w, node.labels.len())?;
    put_u32(w, node.children.len())?;
    put_u32(w, usize::from(node.is_leaf))?;
    for &l in &node.labels {
        w.write_all(&l.to_le_bytes())?;
    }
    for c in &node.classifiers {
        put_u32(w, c.w.nnz())?;
        for (i, v) in c.w.iter() {
            w.write_all(&i.to_le_bytes())?;
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.write_all(&(c.bias as f32).to_le_bytes())?;
    }
    for c in &node.children {
        write_node(c, w)?;
    }
    Ok(())
}

fn parse_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::CorruptModel(format!("bad meta line {line:?}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn meta_get<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = meta
        .get(key)
        .ok_or_else(|| Error::CorruptModel(format!("meta is missing {key:?}")))?;
    raw.parse()
        .map_err(|_| Error::CorruptModel(format!("meta {key}={raw:?} is not valid")))
}

fn meta_get_or<T: std::str::FromStr>(
    meta: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    if meta.contains_key(key) {
        meta_get(meta, key)
    } else {
        Ok(default)
    }
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<Ensemble> {
    let dir = dir.as_ref();
    let meta = parse_meta(&fs::read_to_string(dir.join("meta"))?)?;
    let version: u32 = meta_get(&meta, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(format!(
            "model format {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    let defaults = TrainConfig::default();
    let repr: String = meta_get(&meta, "repr_space")?;
    let config = TrainConfig {
        n_trees: meta_get(&meta, "T")?,
        k: meta_get(&meta, "K")?,
        d_max: meta_get(&meta, "d_max")?,
        repr_space: repr
            .parse::<ReprSpace>()
            .map_err(|_| Error::CorruptModel(format!("bad repr_space {repr:?}")))?,
        c: meta_get(&meta, "C")?,
        eps: meta_get_or(&meta, "eps", defaults.eps)?,
        max_newton_iters: meta_get_or(&meta, "max_newton_iters", defaults.max_newton_iters)?,
        delta: meta_get(&meta, "delta")?,
        base_seed: meta_get(&meta, "base_seed")?,
        kmeans_max_iters: meta_get_or(&meta, "kmeans_max_iters", defaults.kmeans_max_iters)?,
        kmeans_tol: meta_get_or(&meta, "kmeans_tol", defaults.kmeans_tol)?,
        kmeans_restarts: meta_get_or(&meta, "kmeans_restarts", defaults.kmeans_restarts)?,
        normalize_instances: meta_get_or(&meta, "normalize", defaults.normalize_instances)?,
    };
    let n_features: usize = meta_get(&meta, "D")?;
    let n_labels: usize = meta_get(&meta, "L")?;

    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut r = BufReader::new(File::open(dir.join(tree_file(t)))?);
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != TREE_MAGIC {
            return Err(Error::Version(format!(
                "{} has wrong magic bytes",
                tree_file(t)
            )));
        }
        let file_version = get_u32(&mut r)?;
        if file_version != FORMAT_VERSION {
            return Err(Error::Version(format!(
                "{} is format {file_version}, this build reads {FORMAT_VERSION}",
                tree_file(t)
            )));
        }
        let root = read_node(&mut r, n_features, n_labels)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::CorruptModel(format!(
                "trailing bytes in {}",
                tree_file(t)
            )));
        }
        trees.push(Tree {
            root,
            k: config.k,
            d_max: config.d_max,
            repr_space: config.repr_space,
            seed: config.base_seed.wrapping_add(t as u64),
            n_features,
            n_labels,
        });
    }
    Ok(Ensemble {
        trees,
        config,
        n_features,
        n_labels,
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::CorruptModel("truncated tree file".into())
        } else {
            Error::Io(e)
        }
    })
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_node(r: &mut impl Read, n_features: usize, n_labels: usize) -> Result<TreeNode> {
    let depth = get_u32(r)? as usize;
    let n_node_labels = get_u32(r)? as usize;
    let n_children = get_u32(r)? as usize;
    let is_leaf = match get_u32(r)? {
        0 => false,
        1 => true,
        other => return Err(Error::CorruptModel(format!("bad leaf flag {other}"))),
    };
    if n_node_labels > n_labels || (is_leaf && n_children > 0) || (!is_leaf && n_children == 0) {
        return Err(Error::CorruptModel("inconsistent node header".into()));
    }
    let mut labels = Vec::with_capacity(n_node_labels);
    for _ in 0..n_node_labels {
        let l = get_u32(r)?;
        if l as usize >= n_labels {
            return Err(Error::CorruptModel(format!("label {l} out of range")));
        }
        labels.push(l);
    }
    let n_classifiers = if is_leaf { n_node_labels } else { n_children };
    let mut classifiers = Vec::with_capacity(n_classifiers);
    for _ in 0..n_classifiers {
        let nnz = get_u32(r)? as usize;
        if nnz > n_features {
            return Err(Error::CorruptModel(format!(
                "classifier with {nnz} weights"
            )));
        }
        let mut indices: Vec<Index> = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            indices.push(get_u32(r)?);
            values.push(get_f32(r)? as f64);
        }
        let w = SparseVec::new(n_features, indices, values)
            .map_err(|e| Error::CorruptModel(format!("bad classifier weights: {e}")))?;
        let bias = get_f32(r)? as f64;
        classifiers.push(Weights { w, bias });
    }
    let mut children = Vec::with_capacity(n_children);
    for _ in 0..n_children {
        children.push(read_node(r, n_features, n_labels)?);
    }
    Ok(TreeNode {
        depth,
        labels,
        instance_ids: Vec::new(),
        children,
        classifiers,
        is_leaf,
    })
}
