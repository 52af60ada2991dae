//! Solvers for the `(d+1) × (d+1)` normal system
//!
//! ```text
//! A = [ ZZᵀ + μ²I + 𝒯   Zy  ]
//!     [ (Zy)ᵀ          yᵀy ]
//! ```
//!
//! chosen by the shape of `Z`: a dense Cholesky factor when `d` is moderate,
//! a Sherman-Morrison-Woodbury reduction to an `n × n` factor when `n` is
//! moderate, and unpreconditioned symmetric QMR otherwise. The iterative path
//! switches permanently to a closed-form solve with a low-rank proximal term
//! `𝒯` once QMR becomes expensive.

mod direct;
mod lanczos;
mod proximal;
mod psqmr;

pub use direct::{DirectFactor, SmwFactor};
pub use lanczos::{power_iteration, top_eigs, TopEigs};
pub use proximal::ProximalTerm;
pub use psqmr::{psqmr, PsqmrOutcome};

use crate::error::{DwdError, Result};
use crate::sparse::SparseColMatrix;

/// Largest `d` handled by the dense Cholesky path.
pub const DEFAULT_D_MAX: usize = 5000;
/// Largest `n` handled by the SMW path.
pub const DEFAULT_N_MAX: usize = 5000;
/// QMR steps after which the iterative path switches to the proximal solve.
pub const PSQMR_SWITCH_STEPS: usize = 50;
/// Number of leading eigenpairs of `ZZᵀ` used to build `𝒯`.
pub const DEFAULT_PROXIMAL_RANK: usize = 10;
const LANCZOS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    DirectCholesky,
    Smw,
    Iterative,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::DirectCholesky => "direct",
            Strategy::Smw => "smw",
            Strategy::Iterative => "iterative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyLimits {
    pub d_max: usize,
    pub n_max: usize,
}

impl Default for StrategyLimits {
    fn default() -> Self {
        Self {
            d_max: DEFAULT_D_MAX,
            n_max: DEFAULT_N_MAX,
        }
    }
}

pub fn choose_strategy(n: usize, d: usize, limits: StrategyLimits) -> Strategy {
    if d <= limits.d_max && d <= n {
        Strategy::DirectCholesky
    } else if n <= limits.n_max && n < d {
        Strategy::Smw
    } else {
        Strategy::Iterative
    }
}

/// The data defining `A` with `𝒯 = 0`, plus the cached `Zy` and `yᵀy`.
#[derive(Debug, Clone)]
pub struct NormalSystem<'a> {
    pub z: &'a SparseColMatrix,
    pub y: &'a [f64],
    pub mu: f64,
    zy: Vec<f64>,
    yty: f64,
}

impl<'a> NormalSystem<'a> {
    pub fn new(z: &'a SparseColMatrix, y: &'a [f64], mu: f64) -> Self {
        let zy = z.mul_vec(y);
        let yty = y.iter().map(|v| v * v).sum();
        Self { z, y, mu, zy, yty }
    }

    pub fn d(&self) -> usize {
        self.z.nrows()
    }

    pub fn n(&self) -> usize {
        self.z.ncols()
    }

    pub fn zy(&self) -> &[f64] {
        &self.zy
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// `ZZᵀ v`.
    pub fn apply_gram(&self, v: &[f64], out: &mut [f64]) {
        let t = self.z.tr_mul_vec(v);
        self.z.mul_vec_into(&t, out);
    }

    /// `A x` with `𝒯 = 0`; `x = [w; β]`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d();
        let (w, beta) = (&x[..d], x[d]);
        let mut zt = self.z.tr_mul_vec(w);
        for (v, yi) in zt.iter_mut().zip(self.y) {
            *v += beta * yi;
        }
        // Z(Zᵀw + yβ) = ZZᵀw + Zyβ
        self.z.mul_vec_into(&zt, &mut out[..d]);
        let mu2 = self.mu * self.mu;
        for (o, wi) in out[..d].iter_mut().zip(w) {
            *o += mu2 * wi;
        }
        out[d] = dot(&self.zy, w) + self.yty * beta;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    /// Dense `A` with `𝒯 = 0`, for tests and small problems.
    pub fn assemble(&self) -> nalgebra::DMatrix<f64> {
        let d = self.d();
        let mut a = nalgebra::DMatrix::zeros(d + 1, d + 1);
        let g = self.z.gram_rows();
        a.view_mut((0, 0), (d, d)).copy_from(&g);
        for i in 0..d {
            a[(i, i)] += self.mu * self.mu;
            a[(i, d)] = self.zy[i];
            a[(d, i)] = self.zy[i];
        }
        a[(d, d)] = self.yty;
        a
    }
}

/// A solution of the normal system.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    /// QMR steps taken; 0 for the factorized and proximal paths.
    pub iterations: usize,
    /// `‖h − A x‖`, recomputed after the solve.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct IterativeSolver {
    pub proximal: Option<ProximalTerm>,
    pub max_iter: usize,
    pub proximal_rank: usize,
    pub seed: u64,
    switch_requested: bool,
}

impl IterativeSolver {
    pub fn new(d: usize, proximal_rank: usize, seed: u64) -> Self {
        Self {
            proximal: None,
            max_iter: psqmr_iteration_cap(d),
            proximal_rank,
            seed,
            switch_requested: false,
        }
    }

    /// True once a QMR solve has needed more than [`PSQMR_SWITCH_STEPS`] steps.
    pub fn switch_requested(&self) -> bool {
        self.switch_requested
    }
}

/// Per-solve QMR cap `10 √(d+1) + 100`.
pub fn psqmr_iteration_cap(d: usize) -> usize {
    (10.0 * ((d + 1) as f64).sqrt()).ceil() as usize + 100
}

#[derive(Debug, Clone)]
pub enum NormalSystemSolver {
    DirectCholesky(DirectFactor),
    Smw(SmwFactor),
    Iterative(IterativeSolver),
}

impl NormalSystemSolver {
    pub fn build(sys: &NormalSystem<'_>, strategy: Strategy, seed: u64) -> Result<Self> {
        Ok(match strategy {
            Strategy::DirectCholesky => NormalSystemSolver::DirectCholesky(DirectFactor::new(sys)?),
            Strategy::Smw => NormalSystemSolver::Smw(SmwFactor::new(sys)?),
            Strategy::Iterative => {
                NormalSystemSolver::Iterative(IterativeSolver::new(sys.d(), DEFAULT_PROXIMAL_RANK, seed))
            }
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            NormalSystemSolver::DirectCholesky(_) => Strategy::DirectCholesky,
            NormalSystemSolver::Smw(_) => Strategy::Smw,
            NormalSystemSolver::Iterative(_) => Strategy::Iterative,
        }
    }

    pub fn proximal(&self) -> Option<&ProximalTerm> {
        match self {
            NormalSystemSolver::Iterative(it) => it.proximal.as_ref(),
            _ => None,
        }
    }

    /// Whether the iterative path has asked to move to the proximal solve.
    pub fn wants_proximal(&self) -> bool {
        match self {
            NormalSystemSolver::Iterative(it) => it.proximal.is_none() && it.switch_requested,
            _ => false,
        }
    }

    /// Builds `𝒯` from the leading eigenpairs of `ZZᵀ`; every later solve is
    /// of the `𝒯`-augmented system. Falls back to a rank-one term from power
    /// iteration when Lanczos does not converge.
    pub fn enable_proximal(&mut self, sys: &NormalSystem<'_>) -> Result<()> {
        let NormalSystemSolver::Iterative(it) = self else {
            return Err(DwdError::invalid("proximal term only applies to the iterative path"));
        };
        if it.proximal.is_some() {
            return Ok(());
        }
        let d = sys.d();
        let ell = it.proximal_rank.min(d.saturating_sub(1)).max(1);
        let eigs = match top_eigs(|v, out| sys.apply_gram(v, out), d, ell, LANCZOS_TOL, it.seed) {
            Ok(e) => e,
            Err(_) => power_iteration(|v, out| sys.apply_gram(v, out), d, 10_000, 1e-10, it.seed)?,
        };
        it.proximal = Some(ProximalTerm::new(sys, eigs)?);
        Ok(())
    }

    /// `𝒯 w`, or `None` when no proximal term is active.
    pub fn proximal_apply(&self, sys: &NormalSystem<'_>, w: &[f64]) -> Option<Vec<f64>> {
        self.proximal().map(|p| p.t_apply(sys, w))
    }

    /// `A x` including `𝒯` when active.
    pub fn apply(&self, sys: &NormalSystem<'_>, x: &[f64]) -> Vec<f64> {
        match self.proximal() {
            Some(p) => p.apply_augmented(sys, x),
            None => sys.apply(x),
        }
    }

    /// Solves `A x = h` (with `𝒯` when active). Factorized and proximal
    /// paths are exact up to roundoff; the QMR path starts from `x0` and
    /// stops once `‖h − A x‖ ≤ tol`.
    ///
    /// QMR breakdown or non-convergence is reported as
    /// [`DwdError::Breakdown`] so the caller can move to the proximal path.
    pub fn solve(&mut self, sys: &NormalSystem<'_>, h: &[f64], x0: &[f64], tol: f64) -> Result<LinearSolve> {
        let (x, iterations) = match self {
            NormalSystemSolver::DirectCholesky(f) => (f.solve(h), 0),
            NormalSystemSolver::Smw(f) => (f.solve(sys, h), 0),
            NormalSystemSolver::Iterative(it) => match &it.proximal {
                Some(p) => (p.solve(sys, h)?, 0),
                None => {
                    let out = psqmr(|v, o| sys.apply_into(v, o), h, x0, tol, it.max_iter)?;
                    if out.iterations > PSQMR_SWITCH_STEPS {
                        it.switch_requested = true;
                    }
                    if !out.converged {
                        it.switch_requested = true;
                        return Err(DwdError::Breakdown(format!(
                            "QMR reached {} steps with residual {:.3e} > {:.3e}",
                            out.iterations, out.residual, tol
                        )));
                    }
                    (out.x, out.iterations)
                }
            },
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DwdError::Numerical("normal-system solution is not finite".into()));
        }
        let ax = self.apply(sys, &x);
        let residual = norm(&sub(h, &ax));
        Ok(LinearSolve {
            x,
            iterations,
            residual,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
