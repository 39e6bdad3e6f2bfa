//! Binary linear classifier with squared hinge loss and L2 regularization:
//!
//! ```text
//! J(w) = ||w||^2 + C * sum_i max(0, 1 - s_i w.x_i)^2
//! ```
//!
//! minimized in the primal by a trust-region Newton method whose inner problems are solved with
//! conjugate gradient on the generalized Hessian `2I + 2C X_A^T X_A` (`A` = rows with margin < 1).
//! When `bias` is enabled every row is augmented with a constant 1 feature, and the bias weight is
//! regularized like the others.

use crate::error::{Error, Result};
use crate::sparse::{Index, SparseVec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub c: f64,
    /// Stop when `||grad|| <= eps * max(min(n_pos, n_neg), 1) / n * ||grad(0)||`, the class-balance
    /// scaling LIBLINEAR applies to its primal tolerance. Without it, a one-vs-all problem with a
    /// handful of positives stops as soon as the bias has absorbed the negatives.
    pub eps: f64,
    pub max_newton_iters: usize,
    pub bias: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps: 0.1,
            max_newton_iters: 100,
            bias: true,
        }
    }
}

/// Rows with `+1`/`-1` targets.
#[derive(Clone, Copy, Debug)]
pub struct BinaryProblem<'a> {
    pub rows: &'a [SparseVec],
    pub signs: &'a [f64],
}

impl<'a> BinaryProblem<'a> {
    pub fn new(rows: &'a [SparseVec], signs: &'a [f64]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("binary problem without rows".into()));
        }
        if rows.len() != signs.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: signs.len(),
            });
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidArgument(format!("sign must be +-1, got {s}")));
        }
        Ok(Self { rows, signs })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }
}

/// A trained linear classifier: `score(x) = w.x + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub w: SparseVec,
    pub bias: f64,
}

impl Weights {
    pub fn margin(&self, x: &SparseVec) -> f64 {
        crate::sparse::merge_dot(self.w.indices(), self.w.values(), x.indices(), x.values())
            + self.bias
    }

    /// Same as `margin` for `x` scattered into a dense slice.
    pub fn margin_dense(&self, x: &[f64]) -> f64 {
        self.w.dot_dense(x) + self.bias
    }
}

/// Result of a solve, including the objective after every accepted step.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub weights: Weights,
    pub newton_iters: usize,
    pub objective_trace: Vec<f64>,
}

/// The objective `J` and its derivatives over a dense parameter vector (bias last, if enabled).
pub struct SquaredHingeObjective<'a> {
    problem: BinaryProblem<'a>,
    c: f64,
    bias: bool,
}

impl<'a> SquaredHingeObjective<'a> {
    pub fn new(problem: BinaryProblem<'a>, c: f64, bias: bool) -> Self {
        Self { problem, c, bias }
    }

    pub fn n_params(&self) -> usize {
        self.problem.dim() + usize::from(self.bias)
    }

    fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let d = self.problem.dim();
        let mut s = self.problem.rows[i].dot_dense(&w[..d]);
        if self.bias {
            s += w[d];
        }
        s
    }

    fn add_row(&self, i: usize, scale: f64, out: &mut [f64]) {
        let d = self.problem.dim();
        for (j, v) in self.problem.rows[i].iter() {
            out[j as usize] += scale * v;
        }
        if self.bias {
            out[d] += scale;
        }
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        (0..self.problem.rows.len())
            .map(|i| self.problem.signs[i] * self.row_dot(i, w))
            .collect()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let loss: f64 = self
            .margins(w)
            .into_iter()
            .map(|z| {
                let h = (1.0 - z).max(0.0);
                h * h
            })
            .sum();
        w.iter().map(|x| x * x).sum::<f64>() + self.c * loss
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let (g, _) = self.gradient_and_active(w);
        g
    }

    fn gradient_and_active(&self, w: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let margins = self.margins(w);
        let mut g: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let mut active = Vec::new();
        for (i, &z) in margins.iter().enumerate() {
            if z < 1.0 {
                active.push(i);
                self.add_row(i, 2.0 * self.c * (z - 1.0) * self.problem.signs[i], &mut g);
            }
        }
        (g, active)
    }

    /// Generalized Hessian-vector product restricted to the `active` rows.
    fn hessian_vec(&self, active: &[usize], v: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(v) {
            *o = 2.0 * x;
        }
        for &i in active {
            let xv = self.row_dot(i, v);
            self.add_row(i, 2.0 * self.c * xv, out);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Truncated CG for `min g.s + s.Hs/2` with `||s|| <= delta`. Returns `(s, r)` with `r = -g - Hs`.
fn trust_region_cg(
    f: &SquaredHingeObjective,
    active: &[usize],
    g: &[f64],
    delta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = g.len();
    let mut s = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut d = r.clone();
    let mut hd = vec![0.0; n];
    let mut rtr = dot(&r, &r);
    let cg_tol = 0.1 * norm(g);

    for _ in 0..n.max(1) * 2 {
        if rtr.sqrt() <= cg_tol {
            break;
        }
        f.hessian_vec(active, &d, &mut hd);
        let alpha = rtr / dot(&d, &hd);
        axpy(alpha, &d, &mut s);
        if norm(&s) > delta {
            // Step back and move to the trust-region boundary along d.
            axpy(-alpha, &d, &mut s);
            let std = dot(&s, &d);
            let sts = dot(&s, &s);
            let dtd = dot(&d, &d);
            let dsq = delta * delta;
            let rad = (std * std + dtd * (dsq - sts)).sqrt();
            let alpha = if std >= 0.0 {
                (dsq - sts) / (std + rad)
            } else {
                (rad - std) / dtd
            };
            axpy(alpha, &d, &mut s);
            axpy(-alpha, &hd, &mut r);
            break;
        }
        axpy(-alpha, &hd, &mut r);
        let rnew = dot(&r, &r);
        let beta = rnew / rtr;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = beta * *di + ri;
        }
        rtr = rnew;
    }
    (s, r)
}

/// Trust-region Newton solve; only steps that lower the objective are accepted.
pub fn solve(problem: BinaryProblem, params: &SolverParams) -> Result<SolveReport> {
    if !(params.c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(params.eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {}",
            params.eps
        )));
    }
    const ETA0: f64 = 1e-4;
    const ETA1: f64 = 0.25;
    const ETA2: f64 = 0.75;
    const SIGMA1: f64 = 0.25;
    const SIGMA2: f64 = 0.5;
    const SIGMA3: f64 = 4.0;

    let f = SquaredHingeObjective::new(problem, params.c, params.bias);
    let n = f.n_params();
    let mut w = vec![0.0; n];
    let mut fval = f.value(&w);
    let (mut g, mut active) = f.gradient_and_active(&w);
    let gnorm0 = norm(&g);
    let n_pos = problem.signs.iter().filter(|&&s| s > 0.0).count();
    let n_neg = problem.signs.len() - n_pos;
    let balance = n_pos.min(n_neg).max(1) as f64 / problem.signs.len().max(1) as f64;
    let gtol = params.eps * balance * gnorm0;
    let mut delta = gnorm0;
    let mut trace = vec![fval];
    let mut iters = 0;

    let mut converged = gnorm0 == 0.0;
    let mut attempts = 0;
    while !converged && iters < params.max_newton_iters {
        attempts += 1;
        let (s, r) = trust_region_cg(&f, &active, &g, delta);
        let mut w_new = w.clone();
        axpy(1.0, &s, &mut w_new);
        let gs = dot(&g, &s);
        let predicted = -0.5 * (gs - dot(&s, &r));
        let f_new = f.value(&w_new);
        let actual = fval - f_new;
        let snorm = norm(&s);
        if attempts == 1 {
            delta = delta.min(snorm);
        }
        let alpha = if f_new - fval - gs <= 0.0 {
            SIGMA3
        } else {
            SIGMA1.max(-0.5 * (gs / (f_new - fval - gs)))
        };
        delta = if actual < ETA0 * predicted {
            (alpha.max(SIGMA1) * snorm).min(SIGMA2 * delta)
        } else if actual < ETA1 * predicted {
            (SIGMA1 * delta).max((alpha * snorm).min(SIGMA2 * delta))
        } else if actual < ETA2 * predicted {
            (SIGMA1 * delta).max((alpha * snorm).min(SIGMA3 * delta))
        } else {
            delta.max((alpha * snorm).min(SIGMA3 * delta))
        };

        if actual > ETA0 * predicted && f_new < fval {
            iters += 1;
            w = w_new;
            fval = f_new;
            trace.push(fval);
            let (g_new, active_new) = f.gradient_and_active(&w);
            g = g_new;
            active = active_new;
            if norm(&g) <= gtol {
                converged = true;
            }
        }
        if actual.abs() <= 0.0 && predicted <= 0.0 {
            break;
        }
        if actual.abs() <= 1e-12 * fval.abs() && predicted.abs() <= 1e-12 * fval.abs() {
            break;
        }
        if attempts > 10 * params.max_newton_iters.max(1) || delta <= f64::MIN_POSITIVE {
            break;
        }
    }

    let dim = f.problem.dim();
    let bias = if params.bias { w[dim] } else { 0.0 };
    let weights = Weights {
        w: SparseVec::from_dense(&w[..dim]),
        bias,
    };
    Ok(SolveReport {
        weights,
        newton_iters: iters,
        objective_trace: trace,
    })
}

pub fn train_binary(problem: BinaryProblem, params: &SolverParams) -> Result<Weights> {
    solve(problem, params).map(|r| r.weights)
}

/// Drops weights with `|w_j| <= delta` and rounds what remains to `f32` precision, the precision
/// models are stored at. The bias is rounded but never pruned.
pub fn finalize_weights(weights: &Weights, delta: f64) -> Weights {
    let mut w = weights.w.prune_threshold(delta);
    w.map_values(|v| v as f32 as f64);
    Weights {
        w,
        bias: weights.bias as f32 as f64,
    }
}

/// Re-expresses weights trained in a compacted feature space in the original one.
/// `local_to_global[j]` is the original index of local feature `j`.
pub fn remap_weights(weights: &Weights, local_to_global: &[Index], global_dim: usize) -> Weights {
    Weights {
        w: weights
            .w
            .remap(global_dim, |j| Some(local_to_global[j as usize])),
        bias: weights.bias,
    }
}
