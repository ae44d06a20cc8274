//! Exact t-SNE.
//!
//! 1. Gaussian conditional affinities `p(j|i)` with a per-point bandwidth
//!    found by bisection so each row hits the requested perplexity.
//! 2. Student-t (one degree of freedom) affinities `q_ij` in the plane.
//! 3. Gradient descent with momentum on `KL(P || Q)`.
//!
//! Everything is O(n²) per iteration. Row computations may run on several
//! threads; every reduction sums in a fixed order, so results are the same
//! for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PERPLEXITY_TOL: f64 = 1e-3;
pub const MAX_BISECTION_STEPS: usize = 64;
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iterations run with the initial momentum and exaggerated P.
    pub exaggeration_iters: usize,
    pub exaggeration: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            max_iter: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            exaggeration_iters: 250,
            exaggeration: 12.0,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidParameter("t-SNE needs at least 2 points".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        let limit = (n as f64 - 1.0) / 3.0;
        if !(self.perplexity > 0.0 && self.perplexity < limit) {
            return Err(Error::InvalidParameter(format!(
                "perplexity {} must lie in (0, {limit:.4}) for {n} points",
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Dense row-major n×n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn sum(&self) -> f64 {
        self.data.chunks(self.n.max(1)).map(|r| r.iter().sum::<f64>()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ConditionalAffinities {
    pub p: SquareMatrix,
    pub betas: Vec<f64>,
    /// Rows where the bandwidth search failed and a uniform row was used.
    pub fallback_rows: Vec<usize>,
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map(Vec::len).unwrap_or(0);
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("rows have differing widths".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("input contains non-finite values".into()));
    }
    Ok(d)
}

fn squared_distances(x: &[Vec<f64>]) -> SquareMatrix {
    let n = x.len();
    let data = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        })
        .collect();
    SquareMatrix { n, data }
}

/// Row distribution for precision `beta` over squared distances `d2`
/// (self excluded), and its entropy in nats.
fn gaussian_row(d2: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&dist, o)) in d2.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-(dist - min) * beta).exp() };
        sum += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

fn search_row(d2: &[f64], i: usize, perplexity: f64, out: &mut [f64]) -> (f64, bool) {
    let n = d2.len();
    if n == 2 {
        out[1 - i] = 1.0;
        out[i] = 0.0;
        return (1.0, true);
    }
    // Scale so the initial precision is of order one.
    let mean = d2.iter().sum::<f64>() / (n - 1) as f64;
    let scale = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..MAX_BISECTION_STEPS {
        let h = gaussian_row(d2, i, beta * scale, out);
        let perp = h.exp();
        if (perp - perplexity).abs() < PERPLEXITY_TOL {
            return (beta * scale, true);
        }
        if perp > perplexity {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    (beta * scale, false)
}

/// Conditional affinities `p(j|i)`; row `i` sums to one with `p(i|i) = 0`.
pub fn conditional_affinities(x: &[Vec<f64>], perplexity: f64) -> Result<ConditionalAffinities> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    if !(perplexity > 0.0) {
        return Err(Error::InvalidParameter("perplexity must be > 0".into()));
    }
    check_rows(x)?;
    let d2 = squared_distances(x);
    let rows: Vec<(Vec<f64>, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; n];
            let (beta, ok) = search_row(d2.row(i), i, perplexity, &mut out);
            if !ok {
                let u = 1.0 / (n - 1) as f64;
                out.iter_mut().enumerate().for_each(|(j, o)| *o = if j == i { 0.0 } else { u });
            }
            (out, beta, ok)
        })
        .collect();
    let mut p = SquareMatrix::zeros(n);
    let mut betas = Vec::with_capacity(n);
    let mut fallback_rows = Vec::new();
    for (i, (row, beta, ok)) in rows.into_iter().enumerate() {
        p.data[i * n..(i + 1) * n].copy_from_slice(&row);
        betas.push(beta);
        if !ok {
            fallback_rows.push(i);
        }
    }
    if !fallback_rows.is_empty() {
        log::warn!(
            "perplexity search failed for {} row(s); used uniform rows",
            fallback_rows.len()
        );
    }
    Ok(ConditionalAffinities { p, betas, fallback_rows })
}

/// `P_ij = (p(j|i) + p(i|j)) / 2n`, floored at `PROB_FLOOR` off the diagonal
/// and renormalized so the whole matrix sums to one.
pub fn symmetrize(conditional: &SquareMatrix) -> SquareMatrix {
    let n = conditional.n;
    let mut p = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = (conditional.get(i, j) + conditional.get(j, i)) / (2.0 * n as f64);
                p.data[i * n + j] = v.max(PROB_FLOOR);
            }
        }
    }
    let total = p.sum();
    if total > 0.0 {
        p.data.iter_mut().for_each(|v| *v /= total);
    }
    p
}

/// Student-t kernel values `(1 + |y_i - y_j|²)^-1` (zero diagonal) and their sum.
fn student_kernel(y: &[[f64; 2]]) -> (SquareMatrix, f64) {
    let n = y.len();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| {
                if i == j {
                    0.0
                } else {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    1.0 / (1.0 + dx * dx + dy * dy)
                }
            })
        })
        .collect();
    let m = SquareMatrix { n, data };
    let sum = m.sum();
    (m, sum)
}

/// Low-dimensional affinities `q_ij`, normalized over all ordered pairs.
pub fn low_dim_affinities(y: &[[f64; 2]]) -> SquareMatrix {
    let (mut q, sum) = student_kernel(y);
    if sum > 0.0 {
        q.data.iter_mut().for_each(|v| *v /= sum);
    }
    q
}

/// `Σ_{i≠j} P_ij ln(P_ij / max(Q_ij, floor))`; zero entries of P contribute nothing.
pub fn kl_divergence(p: &SquareMatrix, q: &SquareMatrix) -> f64 {
    let n = p.n;
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p.get(i, j);
                    if pij > 0.0 {
                        pij * (pij / q.get(i, j).max(PROB_FLOOR)).ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .sum()
}

/// Gradient of `KL(scale·P || Q(Y))` with respect to Y, given the kernel.
fn gradient_with(p: &SquareMatrix, p_scale: f64, kernel: &SquareMatrix, kernel_sum: f64, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0, 0.0];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = kernel.get(i, j);
                let mult = (p_scale * p.get(i, j) - k / kernel_sum) * k;
                g[0] += mult * (y[i][0] - y[j][0]);
                g[1] += mult * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

/// Analytic gradient `4 Σ_j (P_ij − q_ij)(1 + |y_i − y_j|²)^-1 (y_i − y_j)`.
pub fn kl_gradient(p: &SquareMatrix, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (kernel, sum) = student_kernel(y);
    gradient_with(p, 1.0, &kernel, sum, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterLayout {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub final_kl: f64,
    pub iterations: usize,
    /// `kl_trace[k]` is the KL divergence after `k` updates.
    pub kl_trace: Vec<f64>,
}

impl ScatterLayout {
    pub fn is_finite(&self) -> bool {
        self.coords.iter().flatten().all(|v| v.is_finite())
    }
}

/// Affinities for `x` at the given perplexity.
pub fn input_affinities(x: &[Vec<f64>], perplexity: f64) -> Result<SquareMatrix> {
    Ok(symmetrize(&conditional_affinities(x, perplexity)?.p))
}

/// Runs exact t-SNE on the rows of `x`, returning coordinates in row order.
pub fn run_tsne_points(x: &[Vec<f64>], params: &TsneParams) -> Result<ScatterLayout> {
    let n = x.len();
    params.validate(n)?;
    let p = input_affinities(x, params.perplexity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut trace = Vec::with_capacity(params.max_iter + 1);

    for iter in 1..=params.max_iter {
        let (kernel, ksum) = student_kernel(&y);
        trace.push(kl_from_kernel(&p, &kernel, ksum));
        let exaggerating = iter <= params.exaggeration_iters;
        let scale = if exaggerating { params.exaggeration } else { 1.0 };
        let momentum = if exaggerating { params.initial_momentum } else { params.final_momentum };
        let grad = gradient_with(&p, scale, &kernel, ksum, &y);

        for i in 0..n {
            for a in 0..2 {
                let g = grad[i][a];
                gains[i][a] = if (g > 0.0) != (velocity[i][a] > 0.0) {
                    gains[i][a] + 0.2
                } else {
                    (gains[i][a] * 0.8).max(0.01)
                };
                velocity[i][a] = momentum * velocity[i][a] - params.learning_rate * gains[i][a] * g;
                y[i][a] += velocity[i][a];
            }
        }
        // Recentre; t-SNE is translation invariant.
        for a in 0..2 {
            let mean = y.iter().map(|p| p[a]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[a] -= mean);
        }
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: iter });
        }
    }
    let (kernel, ksum) = student_kernel(&y);
    let final_kl = kl_from_kernel(&p, &kernel, ksum);
    trace.push(final_kl);

    Ok(ScatterLayout {
        ids: (0..n).map(|i| i.to_string()).collect(),
        coords: y,
        final_kl,
        iterations: params.max_iter,
        kl_trace: trace,
    })
}

fn kl_from_kernel(p: &SquareMatrix, kernel: &SquareMatrix, ksum: f64) -> f64 {
    let n = p.n;
    (0..n)
        .map(|i| {
            let (pr, kr) = (p.row(i), kernel.row(i));
            (0..n)
                .filter(|&j| j != i && pr[j] > 0.0)
                .map(|j| pr[j] * (pr[j] / (kr[j] / ksum).max(PROB_FLOOR)).ln())
                .sum::<f64>()
        })
        .sum()
}

/// Runs t-SNE on an embedding matrix; layout ids follow the matrix rows.
pub fn run_tsne(embeddings: &crate::sgns::EmbeddingMatrix, params: &TsneParams) -> Result<ScatterLayout> {
    let rows: Vec<Vec<f64>> = (0..embeddings.len()).map(|r| embeddings.vector(r).to_vec()).collect();
    let mut layout = run_tsne_points(&rows, params)?;
    layout.ids = embeddings.ids.clone();
    Ok(layout)
}
