//! Reading and writing datasets in the XMC repository text format.
//!
//! ```text
//! N D L
//! 0,4 12:0.5 130:1.25
//!  7:1.0
//! ```
//!
//! The first line carries the instance, feature and label counts. Every following line holds a
//! comma-separated list of 0-based label ids (possibly empty), a single space, and
//! space-separated `feature:value` pairs.

use crate::error::{Error, Result};
use crate::sparse::{Index, SparseRowMatrix, SparseVec};
use log::warn;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Feature rows `X` (N×D) and binary label rows `Y` (N×L).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: SparseRowMatrix,
    pub labels: SparseRowMatrix,
}

/// Non-fatal irregularities found while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub duplicate_labels: usize,
    pub zero_values: usize,
}

impl Dataset {
    pub fn new(features: SparseRowMatrix, labels: SparseRowMatrix) -> Result<Self> {
        if features.n_rows() != labels.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                actual: labels.n_rows(),
            });
        }
        if let Some(bad) = labels
            .rows()
            .iter()
            .flat_map(|r| r.values())
            .find(|&&v| v != 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "label values must be 1.0, found {bad}"
            )));
        }
        Ok(Self { features, labels })
    }

    /// Builds a dataset from feature pairs and label id lists. Convenient for tests and tooling.
    pub fn from_lists(
        n_features: usize,
        n_labels: usize,
        rows: Vec<(Vec<Index>, Vec<(Index, f64)>)>,
    ) -> Result<Self> {
        let mut features = SparseRowMatrix::new(n_features);
        let mut labels = SparseRowMatrix::new(n_labels);
        for (ls, fs) in rows {
            if let Some(&bad) = ls.iter().find(|&&l| l as usize >= n_labels) {
                return Err(Error::DimensionMismatch {
                    expected: n_labels,
                    actual: bad as usize + 1,
                });
            }
            if let Some(&(bad, _)) = fs.iter().find(|&&(f, _)| f as usize >= n_features) {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    actual: bad as usize + 1,
                });
            }
            features.push(SparseVec::from_pairs(n_features, fs))?;
            let mut ls = ls;
            ls.sort_unstable();
            ls.dedup();
            let ones = vec![1.0; ls.len()];
            labels.push(SparseVec::from_parts_unchecked(n_labels, ls, ones))?;
        }
        Self::new(features, labels)
    }

    pub fn n_instances(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.dim()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.dim()
    }

    /// Sorted label ids of instance `i`.
    pub fn label_set(&self, i: usize) -> &[Index] {
        self.labels.row(i).indices()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let (ds, report) = Self::parse_with_report(BufReader::new(file))?;
        if report.duplicate_labels > 0 {
            warn!(
                "{}: dropped {} duplicate label ids",
                path.as_ref().display(),
                report.duplicate_labels
            );
        }
        Ok(ds)
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        Self::parse_with_report(reader).map(|(ds, _)| ds)
    }

    pub fn parse_with_report<R: BufRead>(reader: R) -> Result<(Self, ParseReport)> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::parse(1, "missing header")),
        };
        let (n, d, l) = parse_header(header.trim_end_matches('\r'))?;

        let mut report = ParseReport::default();
        let mut features = SparseRowMatrix::new(d);
        let mut labels = SparseRowMatrix::new(l);
        for (offset, line) in lines.enumerate() {
            let line_no = offset + 2;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() && features.n_rows() >= n {
                continue;
            }
            let (x, y) = parse_instance(line, line_no, d, l, &mut report)?;
            features.push(x)?;
            labels.push(y)?;
        }
        if features.n_rows() != n {
            return Err(Error::parse(
                features.n_rows() + 1,
                format!("header declares {n} instances, found {}", features.n_rows()),
            ));
        }
        Ok((Self { features, labels }, report))
    }

    /// Writes the dataset in canonical form; `parse` of the output reproduces `self` exactly.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{} {} {}",
            self.n_instances(),
            self.n_features(),
            self.n_labels()
        )?;
        for (x, y) in self.features.rows().iter().zip(self.labels.rows()) {
            let labels: Vec<String> = y.indices().iter().map(|l| l.to_string()).collect();
            write!(out, "{}", labels.join(","))?;
            for (i, v) in x.iter() {
                write!(out, " {i}:{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::parse(1, format!("expected `N D L`, got {line:?}")));
    }
    let mut nums = [0usize; 3];
    for (slot, p) in nums.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| Error::parse(1, format!("invalid count {p:?}")))?;
    }
    Ok((nums[0], nums[1], nums[2]))
}

fn parse_instance(
    line: &str,
    line_no: usize,
    d: usize,
    l: usize,
    report: &mut ParseReport,
) -> Result<(SparseVec, SparseVec)> {
    // A line opening with a space, or whose first token already is a feature pair, has no labels.
    let (label_part, feature_part) = match line.split_once(' ') {
        Some((first, rest)) if !first.contains(':') => (first, rest),
        Some(_) => ("", line),
        None if line.contains(':') => ("", line),
        None => (line, ""),
    };

    let mut label_ids = Vec::new();
    for tok in label_part.split(',').filter(|t| !t.is_empty()) {
        let id: u64 = tok
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid label id {tok:?}")))?;
        if id as usize >= l {
            return Err(Error::parse(
                line_no,
                format!("label id {id} out of range (L = {l})"),
            ));
        }
        label_ids.push(id as Index);
    }
    label_ids.sort_unstable();
    let before = label_ids.len();
    label_ids.dedup();
    report.duplicate_labels += before - label_ids.len();

    let mut pairs: Vec<(Index, f64)> = Vec::new();
    for tok in feature_part.split_whitespace() {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(line_no, format!("expected `id:value`, got {tok:?}")))?;
        let idx: u64 = idx
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid feature id {idx:?}")))?;
        if idx as usize >= d {
            return Err(Error::parse(
                line_no,
                format!("feature id {idx} out of range (D = {d})"),
            ));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid feature value {val:?}")))?;
        if !val.is_finite() {
            return Err(Error::parse(line_no, format!("non-finite value {val}")));
        }
        pairs.push((idx as Index, val));
    }
    pairs.sort_by_key(|&(i, _)| i);
    if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::parse(
            line_no,
            format!("duplicate feature id {}", w[0].0),
        ));
    }
    let before = pairs.len();
    pairs.retain(|&(_, v)| v != 0.0);
    report.zero_values += before - pairs.len();
    let (fi, fv): (Vec<Index>, Vec<f64>) = pairs.into_iter().unzip();

    let ones = vec![1.0; label_ids.len()];
    Ok((
        SparseVec::from_parts_unchecked(d, fi, fv),
        SparseVec::from_parts_unchecked(l, label_ids, ones),
    ))
}

/// Inverted index from each label to the sorted ids of instances carrying it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelIndex {
    instances: Vec<Vec<Index>>,
}

impl LabelIndex {
    pub fn build(ds: &Dataset) -> Self {
        let mut instances = vec![Vec::new(); ds.n_labels()];
        for i in 0..ds.n_instances() {
            for &l in ds.label_set(i) {
                instances[l as usize].push(i as Index);
            }
        }
        Self { instances }
    }

    pub fn n_labels(&self) -> usize {
        self.instances.len()
    }

    /// Instances with label `l`, in increasing order.
    pub fn instances(&self, l: Index) -> &[Index] {
        &self.instances[l as usize]
    }

    /// `N_l`, the number of positive training instances of label `l`.
    pub fn frequency(&self, l: Index) -> usize {
        self.instances[l as usize].len()
    }

    pub fn frequencies(&self) -> Vec<usize> {
        self.instances.iter().map(Vec::len).collect()
    }
}

/// Header-level statistics in the layout of the usual XMC dataset tables.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_labels: usize,
    /// Average points per label.
    pub avg_points_per_label: f64,
    /// Average labels per point.
    pub avg_labels_per_point: f64,
}

impl DatasetStats {
    pub fn compute(ds: &Dataset) -> Self {
        let total = ds.labels.nnz() as f64;
        let ratio = |den: usize| if den == 0 { 0.0 } else { total / den as f64 };
        Self {
            n_instances: ds.n_instances(),
            n_features: ds.n_features(),
            n_labels: ds.n_labels(),
            avg_points_per_label: ratio(ds.n_labels()),
            avg_labels_per_point: ratio(ds.n_instances()),
        }
    }
}

/// Label frequencies in descending order (ties by label id); zero-frequency labels are skipped.
pub fn ranked_label_frequencies(idx: &LabelIndex) -> Vec<usize> {
    let mut freqs: Vec<usize> = idx.frequencies().into_iter().filter(|&f| f > 0).collect();
    freqs.sort_by(|a, b| b.cmp(a));
    freqs
}

/// Writes `rank count` lines, one per label with at least one instance, most frequent first.
pub fn write_label_frequency_histogram<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let idx = LabelIndex::build(ds);
    for (rank, f) in ranked_label_frequencies(&idx).into_iter().enumerate() {
        writeln!(out, "{} {}", rank + 1, f)?;
    }
    Ok(())
}
