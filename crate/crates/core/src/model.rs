//! Problem data, class weighting, the penalty heuristic and data scaling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DwdError, Result};
use crate::ingest::build_z;
use crate::sparse::SparseColMatrix;

/// Per-class sample cap used by [`median_interclass_distance`] by default.
pub const DEFAULT_DISTANCE_CAP: usize = 1000;

/// A training instance: `d × n` features (one sample per column), labels in
/// `{−1, +1}`, penalty weights `e`, class weights `τ`, exponent `q` and
/// penalty `C`.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub x: SparseColMatrix,
    pub y: Vec<f64>,
    /// Weights on the slack penalty, normalized so the largest is 1.
    pub e: Vec<f64>,
    /// Weights on the margin terms: the objective uses `τ_i^q / r_i^q`.
    pub tau: Vec<f64>,
    pub q: f64,
    pub c: f64,
}

impl ProblemData {
    /// Unweighted problem: `e = 1`, `τ = 1`.
    pub fn new(x: SparseColMatrix, y: Vec<f64>, q: f64, c: f64) -> Result<Self> {
        let n = y.len();
        let p = Self {
            x,
            y,
            e: vec![1.0; n],
            tau: vec![1.0; n],
            q,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_class_weights(mut self, tau: Vec<f64>) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_penalty_weights(mut self, e: Vec<f64>) -> Result<Self> {
        self.e = e;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.ncols();
        if self.x.nrows() < 1 {
            return Err(DwdError::invalid("need at least one feature"));
        }
        if n < 2 {
            return Err(DwdError::invalid("need at least two samples"));
        }
        if self.y.len() != n || self.e.len() != n || self.tau.len() != n {
            return Err(DwdError::invalid(format!(
                "length mismatch: {} samples, {} labels, {} penalty weights, {} class weights",
                n,
                self.y.len(),
                self.e.len(),
                self.tau.len()
            )));
        }
        if let Some(v) = self.y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(DwdError::invalid(format!("label {v} is not ±1")));
        }
        class_counts(&self.y)?;
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(DwdError::invalid(format!("exponent q = {} must be positive", self.q)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(DwdError::invalid(format!("penalty C = {} must be positive", self.c)));
        }
        if self.e.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(DwdError::invalid("penalty weights must be positive"));
        }
        let emax = self.e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if emax != 1.0 {
            return Err(DwdError::invalid(format!(
                "penalty weights must have maximum 1, found {emax}"
            )));
        }
        if self.tau.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(DwdError::invalid("class weights must be positive"));
        }
        Ok(())
    }
}

/// The problem after `Z = X diag(y)` is formed and divided by
/// `Z_scale = √‖X‖_F`. The ball constraint on `w̃ = Z_scale·w` has radius
/// `Z_scale`.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub z: SparseColMatrix,
    pub z_scale: f64,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    pub tau: Vec<f64>,
    /// `τ_i^q`, cached.
    pub tau_pow_q: Vec<f64>,
    pub q: f64,
    pub c: f64,
    /// Scalar of `D = μ I`.
    pub mu: f64,
}

impl ScaledProblem {
    pub fn n(&self) -> usize {
        self.z.ncols()
    }

    pub fn d(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_weighted(&self) -> bool {
        self.tau.iter().any(|&t| t != 1.0)
    }
}

pub fn scale_problem(p: &ProblemData, mu: f64) -> Result<ScaledProblem> {
    p.validate()?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(DwdError::invalid(format!("mu = {mu} must be positive")));
    }
    let fro = p.x.frobenius_norm();
    if fro == 0.0 {
        return Err(DwdError::invalid("feature matrix is identically zero"));
    }
    let z_scale = fro.sqrt();
    let z = build_z(&p.x, &p.y)?.scale(1.0 / z_scale);
    let tau_pow_q = p.tau.iter().map(|t| t.powf(p.q)).collect();
    Ok(ScaledProblem {
        z,
        z_scale,
        y: p.y.clone(),
        e: p.e.clone(),
        tau: p.tau.clone(),
        tau_pow_q,
        q: p.q,
        c: p.c,
        mu,
    })
}

fn class_counts(y: &[f64]) -> Result<(usize, usize)> {
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(DwdError::invalid(format!(
            "both classes must be present ({pos} positive, {neg} negative)"
        )));
    }
    Ok((pos, neg))
}

/// Median Euclidean distance over all (positive, negative) sample pairs.
///
/// A class with more than `cap` samples is replaced by a uniform subsample of
/// size `cap` drawn from a generator seeded with `seed`.
pub fn median_interclass_distance(x: &SparseColMatrix, y: &[f64], cap: usize, seed: u64) -> Result<f64> {
    if y.len() != x.ncols() {
        return Err(DwdError::invalid("label vector length does not match sample count"));
    }
    if cap < 2 {
        return Err(DwdError::invalid("per-class sample cap must be at least 2"));
    }
    class_counts(y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |label: f64| -> Vec<usize> {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        if members.len() <= cap {
            return members;
        }
        let mut chosen: Vec<usize> = index::sample(&mut rng, members.len(), cap)
            .into_iter()
            .map(|k| members[k])
            .collect();
        chosen.sort_unstable();
        chosen
    };
    let pos = pick(1.0);
    let neg = pick(-1.0);

    let mut dists = Vec::with_capacity(pos.len() * neg.len());
    for &i in &pos {
        for &j in &neg {
            dists.push(column_distance(x, i, j));
        }
    }
    dists.sort_unstable_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    Ok(median)
}

/// `‖x_i − x_j‖` by merging the two sorted index lists.
fn column_distance(x: &SparseColMatrix, i: usize, j: usize) -> f64 {
    let (ri, vi) = x.col(i);
    let (rj, vj) = x.col(j);
    let (mut a, mut b) = (0, 0);
    let mut acc = 0.0;
    while a < ri.len() || b < rj.len() {
        let diff = if b == rj.len() || (a < ri.len() && ri[a] < rj[b]) {
            a += 1;
            vi[a - 1]
        } else if a == ri.len() || rj[b] < ri[a] {
            b += 1;
            -vj[b - 1]
        } else {
            a += 1;
            b += 1;
            vi[a - 1] - vj[b - 1]
        };
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Penalty heuristic
/// `C = 10^{q+1} · max{1, 10^{q−1} ln(n) max{1000, d}^{1/3} / dist^{q+1}}`.
pub fn compute_penalty_parameter(n: usize, d: usize, dist: f64, q: f64) -> Result<f64> {
    if !(dist > 0.0 && dist.is_finite()) {
        return Err(DwdError::invalid(format!("typical distance {dist} must be positive")));
    }
    if !(q > 0.0) {
        return Err(DwdError::invalid(format!("exponent q = {q} must be positive")));
    }
    let inner = 10f64.powf(q - 1.0) * (n as f64).ln() * (d.max(1000) as f64).cbrt() / dist.powf(q + 1.0);
    Ok(10f64.powf(q + 1.0) * inner.max(1.0))
}

/// Class weights for unbalanced data: `τ_± = (n_± / K)^{1/(1+q)}` with
/// `K = n / ln n`, and each sample receives the *other* class's `τ`
/// normalized by the larger of the two, so the minority class gets weight 1.
pub fn compute_class_weights(y: &[f64], q: f64) -> Result<Vec<f64>> {
    let (pos, neg) = class_counts(y)?;
    let n = y.len() as f64;
    if !(q > 0.0) {
        return Err(DwdError::invalid(format!("exponent q = {q} must be positive")));
    }
    let k = n / n.ln();
    let tau_pos = (pos as f64 / k).powf(1.0 / (1.0 + q));
    let tau_neg = (neg as f64 / k).powf(1.0 / (1.0 + q));
    let tmax = tau_pos.max(tau_neg);
    Ok(y
        .iter()
        .map(|&v| if v > 0.0 { tau_neg / tmax } else { tau_pos / tmax })
        .collect())
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::NumericalFailure => "NumericalFailure",
        }
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = DwdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Converged" => Ok(SolveStatus::Converged),
            "MaxIter" => Ok(SolveStatus::MaxIter),
            "NumericalFailure" => Ok(SolveStatus::NumericalFailure),
            other => Err(DwdError::invalid(format!("unknown status {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a solve ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Termination {
    pub status: SolveStatus,
    pub iterations: usize,
    pub psqmr_iterations: usize,
    /// Iterations in which the Gauss-Seidel back-sweep re-solved the normal system.
    pub double_count: usize,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

/// The classifier `x ↦ sgn(wᵀx + β)` in original feature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub w: Vec<f64>,
    pub beta: f64,
    pub q: f64,
    pub c: f64,
    pub z_scale: f64,
    pub termination: Termination,
}

impl TrainedModel {
    pub fn d(&self) -> usize {
        self.w.len()
    }

    /// `wᵀx_i + β` for every column of `x`.
    pub fn decision_values(&self, x: &SparseColMatrix) -> Result<Vec<f64>> {
        if x.nrows() != self.w.len() {
            return Err(DwdError::invalid(format!(
                "data has {} features, model has {}",
                x.nrows(),
                self.w.len()
            )));
        }
        Ok((0..x.ncols()).map(|j| x.col_dot(j, &self.w) + self.beta).collect())
    }

    /// Predicted labels in `{−1, 0, +1}` (0 only on the hyperplane).
    pub fn predict_signs(&self, x: &SparseColMatrix) -> Result<Vec<f64>> {
        Ok(self.decision_values(x)?.into_iter().map(sign).collect())
    }
}

/// Sign with `sgn(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
