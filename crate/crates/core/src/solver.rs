//! The three-block semi-proximal ADMM with symmetric Gauss-Seidel sweep.
//!
//! One iteration on the scaled problem (`D = μI`, ball radius `Z_scale`):
//!
//! 1a. solve `A [w̄; β̄] = h(r^k)` to accuracy `ε_k`;
//! 1b. `r^{k+1} = argmin θ(r) + σ/2 ‖r − (Zᵀw̄ + yβ̄ + ξ − α/σ)‖²`;
//! 1c. if `[w̄; β̄]` misses `h(r^{k+1})` by more than `5ε_k`, re-solve;
//! 2.  `u = Π_ball(w − ρ/(σμ))`, `ξ = max(0, r − Zᵀw − yβ + (α − Ce)/σ)`;
//! 3.  `α ← α − τσ(Zᵀw + yβ + ξ − r)`, `ρ ← ρ − τσμ(w − u)`.
//!
//! The directly extended ADMM baseline is the same loop with step 1c skipped.

use std::str::FromStr;

use crate::error::{DwdError, Result};
use crate::linalg::{axpy, choose_strategy, dot, norm, sub, NormalSystem, NormalSystemSolver, Strategy, StrategyLimits};
use crate::metrics::{kkt_residuals, Residuals};
pub use crate::model::SolveStatus;
use crate::model::{scale_problem, ProblemData, ScaledProblem, Termination, TrainedModel};
use crate::subproblems::{project_ball, solve_r_block};

pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_STEPLENGTH: f64 = 1.618;
pub const DEFAULT_SIGMA_PERIOD: usize = 10;
/// Upper bound on `max(η_C, η_gap)` in the stopping test.
const LOOSE_STOP: f64 = 0.05;
const SIGMA_RATIO_TRIGGER: f64 = 5.0;
/// `σ` stays within `[σ₀/SIGMA_RANGE, σ₀·SIGMA_RANGE]`.
const SIGMA_RANGE: f64 = 1e8;
/// Step 1c accepts the step-1a solution when its residual for the new
/// right-hand side is within this multiple of `ε_k`.
const STEP1C_SLACK: f64 = 5.0;
/// Linear-solve tolerances are never asked to go below this fraction of `‖h‖`.
const RELATIVE_TOL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Symmetric Gauss-Seidel sweep 1a → 1b → 1c.
    Sgs,
    /// Steps 1a → 1b only.
    DirectExtended,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Sgs => "sgs",
            Variant::DirectExtended => "direct",
        }
    }
}

impl FromStr for Variant {
    type Err = DwdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgs" => Ok(Variant::Sgs),
            "direct" => Ok(Variant::DirectExtended),
            other => Err(DwdError::invalid(format!("unknown variant {other:?} (expected sgs or direct)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Bound on `max(η_P, η_D)`; `√tol` bounds `min(η_C, η_gap)`.
    pub tol: f64,
    /// Dual steplength `τ ∈ (0, (1+√5)/2)`.
    pub steplength: f64,
    pub sigma0: Option<f64>,
    pub variant: Variant,
    pub limits: StrategyLimits,
    /// Overrides the shape-based choice of linear solver.
    pub strategy: Option<Strategy>,
    /// Constant `c` of `ε_k = c / max(1, ‖Z̃‖_F) / (k+1)^{1.5}`.
    pub eps_constant: f64,
    /// The `σ` rule runs after every `sigma_period`-th iteration.
    pub sigma_period: usize,
    pub mu: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            steplength: DEFAULT_STEPLENGTH,
            sigma0: None,
            variant: Variant::Sgs,
            limits: StrategyLimits::default(),
            strategy: None,
            eps_constant: 1.0,
            sigma_period: DEFAULT_SIGMA_PERIOD,
            mu: 1.0,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        if !(self.steplength > 0.0 && self.steplength < golden) {
            return Err(DwdError::invalid(format!(
                "steplength {} must lie in (0, {golden})",
                self.steplength
            )));
        }
        if self.sigma_period == 0 {
            return Err(DwdError::invalid("sigma_period must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(DwdError::invalid("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(DwdError::invalid("tolerance must be positive"));
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(DwdError::invalid(format!("sigma0 = {s} must be positive")));
            }
        }
        if !(self.eps_constant > 0.0) {
            return Err(DwdError::invalid("epsilon constant must be positive"));
        }
        Ok(())
    }
}

/// ADMM iterate on the scaled problem. `w` and `u` are `w̃` and `ũ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub r: Vec<f64>,
    pub xi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
    pub beta: f64,
    pub sigma: f64,
    pub k: usize,
    pub double_count: usize,
    pub psqmr_iterations: usize,
}

impl SolverState {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            r: vec![0.0; n],
            xi: vec![0.0; n],
            alpha: vec![0.0; n],
            w: vec![0.0; d],
            u: vec![0.0; d],
            rho: vec![0.0; d],
            beta: 0.0,
            sigma: 1.0,
            k: 0,
            double_count: 0,
            psqmr_iterations: 0,
        }
    }

    /// `r = ξ = 1`, everything else zero: primal feasible for any data.
    pub fn initial(n: usize, d: usize, sigma: f64) -> Self {
        Self {
            r: vec![1.0; n],
            xi: vec![1.0; n],
            sigma,
            ..Self::zeros(n, d)
        }
    }
}

/// `σ₀ = min(10C, n)^q`.
pub fn initial_sigma(n: usize, c: f64, q: f64) -> f64 {
    (10.0 * c).min(n as f64).powf(q)
}

/// `ε_k = (c / max(1, ‖Z̃‖_F)) / (k+1)^{1.5}`.
pub fn epsilon_schedule(k: usize, c: f64, z_fro: f64) -> f64 {
    c / z_fro.max(1.0) / ((k + 1) as f64).powf(1.5)
}

/// Rebalances `σ` from `χ = η_P/η_D`: multiply by `ζ` when `χ > 5`,
/// divide when `1/χ > 5`, with `ζ` = 1.1, 1.65 past ratio 50, 2.2 past 500.
pub fn update_sigma(sigma: f64, eta_p: f64, eta_d: f64) -> f64 {
    if eta_p == 0.0 && eta_d == 0.0 {
        return sigma;
    }
    let chi = if eta_d == 0.0 { f64::INFINITY } else { eta_p / eta_d };
    let spread = chi.max(1.0 / chi);
    let zeta = if spread > 500.0 {
        2.2
    } else if spread > 50.0 {
        1.65
    } else {
        1.1
    };
    if chi > SIGMA_RATIO_TRIGGER {
        sigma * zeta
    } else if 1.0 / chi > SIGMA_RATIO_TRIGGER {
        sigma / zeta
    } else {
        sigma
    }
}

/// Three-part stopping test: `max(η_P, η_D) < tol`,
/// `min(η_C, η_gap) < √tol` and `max(η_C, η_gap) < 0.05`. The first part
/// also bounds `η_D3`, since no other residual checks `Z̃α + Dρ = 0`.
pub fn stopping_test(res: &Residuals, tol: f64) -> bool {
    res.eta_p.max(res.eta_d).max(res.eta_d3) < tol
        && res.eta_c.min(res.eta_gap) < tol.sqrt()
        && res.eta_c.max(res.eta_gap) < LOOSE_STOP
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub k: usize,
    pub sigma: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub psqmr_iterations: usize,
    /// Whether step 1c re-solved the normal system.
    pub double: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub psqmr_iterations: usize,
    pub double: bool,
    pub newton_iterations: usize,
    pub residuals: Residuals,
}

/// Runs iterations on a borrowed scaled problem.
#[derive(Debug)]
pub struct Solver<'a> {
    sp: &'a ScaledProblem,
    sys: NormalSystem<'a>,
    linear: NormalSystemSolver,
    state: SolverState,
    opts: SolverOptions,
    sigma0: f64,
    z_fro: f64,
    newton_iterations: usize,
}

impl<'a> Solver<'a> {
    pub fn new(sp: &'a ScaledProblem, opts: SolverOptions) -> Result<Self> {
        let sigma0 = opts.sigma0.unwrap_or_else(|| initial_sigma(sp.n(), sp.c, sp.q));
        let state = SolverState::initial(sp.n(), sp.d(), sigma0);
        Self::with_state(sp, opts, state)
    }

    /// Starts from a given iterate; `σ₀` for clamping is `state.sigma`
    /// unless overridden in `opts`.
    pub fn with_state(sp: &'a ScaledProblem, opts: SolverOptions, state: SolverState) -> Result<Self> {
        opts.validate()?;
        if state.r.len() != sp.n() || state.w.len() != sp.d() {
            return Err(DwdError::invalid("iterate dimensions differ from the problem"));
        }
        let sys = NormalSystem::new(&sp.z, &sp.y, sp.mu);
        let strategy = opts
            .strategy
            .unwrap_or_else(|| choose_strategy(sp.n(), sp.d(), opts.limits));
        let linear = NormalSystemSolver::build(&sys, strategy, opts.seed)?;
        let sigma0 = opts.sigma0.unwrap_or(state.sigma);
        let z_fro = sp.z.frobenius_norm();
        Ok(Self {
            sp,
            sys,
            linear,
            state,
            opts,
            sigma0,
            z_fro,
            newton_iterations: 0,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn strategy(&self) -> Strategy {
        self.linear.strategy()
    }

    pub fn proximal_rank(&self) -> Option<usize> {
        self.linear.proximal().map(|p| p.ell())
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    /// `h(r)` for the current `ξ, α, u, ρ, σ` (and `𝒯w^k` when active).
    fn rhs(&self, r: &[f64]) -> Vec<f64> {
        let st = &self.state;
        let sp = self.sp;
        let s = st.sigma;
        let v: Vec<f64> = (0..sp.n()).map(|i| r[i] - st.xi[i] + st.alpha[i] / s).collect();
        let mut h = sp.z.mul_vec(&v);
        let mu = sp.mu;
        for (j, hj) in h.iter_mut().enumerate() {
            *hj += mu * mu * st.u[j] + mu * st.rho[j] / s;
        }
        if let Some(tw) = self.linear.proximal_apply(&self.sys, &st.w) {
            axpy(1.0, &tw, &mut h);
        }
        h.push(dot(&sp.y, &v));
        h
    }

    /// Solves `A x = h(r)`; QMR failure moves the iterative path to the
    /// proximal solve and retries with the `𝒯`-augmented right-hand side.
    fn solve_linear(&mut self, r: &[f64], x0: &[f64], tol: f64, psqmr: &mut usize) -> Result<Vec<f64>> {
        let h = self.rhs(r);
        let tol = tol.max(RELATIVE_TOL_FLOOR * norm(&h));
        match self.linear.solve(&self.sys, &h, x0, tol) {
            Ok(out) => {
                *psqmr += out.iterations;
                Ok(out.x)
            }
            Err(DwdError::Breakdown(_)) if self.linear.strategy() == Strategy::Iterative && self.linear.proximal().is_none() => {
                self.linear.enable_proximal(&self.sys)?;
                let h = self.rhs(r);
                Ok(self.linear.solve(&self.sys, &h, x0, tol)?.x)
            }
            Err(e) => Err(e),
        }
    }

    /// One pass of steps 1a through 3. Does not touch `σ`.
    pub fn step(&mut self) -> Result<StepReport> {
        let sp = self.sp;
        let (n, d) = (sp.n(), sp.d());
        let eps = epsilon_schedule(self.state.k, self.opts.eps_constant, self.z_fro);
        if self.linear.wants_proximal() {
            self.linear.enable_proximal(&self.sys)?;
        }
        let sigma = self.state.sigma;
        let mut psqmr = 0;

        // 1a
        let mut x0 = self.state.w.clone();
        x0.push(self.state.beta);
        let r_old = self.state.r.clone();
        let xbar = self.solve_linear(&r_old, &x0, eps, &mut psqmr)?;

        // 1b
        let mut c = sp.z.tr_mul_vec(&xbar[..d]);
        for i in 0..n {
            c[i] += sp.y[i] * xbar[d] + self.state.xi[i] - self.state.alpha[i] / sigma;
        }
        let rb = solve_r_block(&c, sp.q, sigma, &sp.tau_pow_q, &r_old, eps)?;
        let r_new = rb.r;

        // 1c
        let mut double = false;
        let x = match self.opts.variant {
            Variant::DirectExtended => xbar,
            Variant::Sgs => {
                let h = self.rhs(&r_new);
                let miss = norm(&sub(&h, &self.linear.apply(&self.sys, &xbar)));
                if miss <= STEP1C_SLACK * eps {
                    xbar
                } else {
                    double = true;
                    self.solve_linear(&r_new, &xbar, STEP1C_SLACK * eps, &mut psqmr)?
                }
            }
        };

        // 2
        let w = x[..d].to_vec();
        let beta = x[d];
        let g: Vec<f64> = (0..d)
            .map(|j| w[j] - self.state.rho[j] / (sigma * sp.mu))
            .collect();
        let u = project_ball(&g, sp.z_scale);
        let zw = sp.z.tr_mul_vec(&w);
        let xi: Vec<f64> = (0..n)
            .map(|i| {
                let v = r_new[i] - zw[i] - sp.y[i] * beta + (self.state.alpha[i] - sp.c * sp.e[i]) / sigma;
                v.max(0.0)
            })
            .collect();

        // 3
        let tau_sigma = self.opts.steplength * sigma;
        let st = &mut self.state;
        for i in 0..n {
            st.alpha[i] -= tau_sigma * (zw[i] + sp.y[i] * beta + xi[i] - r_new[i]);
        }
        for j in 0..d {
            st.rho[j] -= tau_sigma * sp.mu * (w[j] - u[j]);
        }
        st.r = r_new;
        st.xi = xi;
        st.w = w;
        st.u = u;
        st.beta = beta;
        st.k += 1;
        st.psqmr_iterations += psqmr;
        st.double_count += double as usize;
        self.newton_iterations += rb.newton_iterations;

        let residuals = kkt_residuals(&self.state, sp);
        if !residuals.is_finite() {
            return Err(DwdError::Numerical(format!(
                "non-finite residuals at iteration {}",
                self.state.k
            )));
        }
        Ok(StepReport {
            psqmr_iterations: psqmr,
            double,
            newton_iterations: rb.newton_iterations,
            residuals,
        })
    }

    /// Applies the `σ` rule for the residuals of the latest step. The dual
    /// side is `max(η_D, η_D3)`: `η_D` alone vanishes whenever `0 ≤ α ≤ Ce`,
    /// which would read as `χ = ∞` and grow `σ` without bound.
    pub fn adapt_sigma(&mut self, res: &Residuals) {
        if self.state.k % self.opts.sigma_period != 0 {
            return;
        }
        let s = update_sigma(self.state.sigma, res.eta_p, res.eta_d.max(res.eta_d3));
        self.state.sigma = s.clamp(self.sigma0 / SIGMA_RANGE, self.sigma0 * SIGMA_RANGE);
    }

    /// `w = ũ/Z_scale`, which lies in the unit ball exactly.
    pub fn model(&self, termination: Termination) -> TrainedModel {
        TrainedModel {
            w: self.state.u.iter().map(|v| v / self.sp.z_scale).collect(),
            beta: self.state.beta,
            q: self.sp.q,
            c: self.sp.c,
            z_scale: self.sp.z_scale,
            termination,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub model: TrainedModel,
    pub status: SolveStatus,
    pub log: Vec<LogRow>,
    pub strategy: Strategy,
    /// Rank of the proximal term if the iterative path switched to it.
    pub proximal_rank: Option<usize>,
    pub newton_iterations: usize,
    /// Number of training samples.
    pub samples: usize,
    /// Final residuals (all components).
    pub residuals: Residuals,
    /// Diagnostic for [`SolveStatus::NumericalFailure`].
    pub failure: Option<String>,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    /// Mean Newton steps per coordinate solve.
    pub fn mean_newton_iterations(&self) -> f64 {
        let solves = self.log.len() * self.samples;
        if solves == 0 {
            0.0
        } else {
            self.newton_iterations as f64 / solves as f64
        }
    }
}

/// Scales `p`, runs the iteration until the stopping test holds or
/// `max_iter` is reached, and returns the model in original coordinates.
///
/// Invalid input and failures while setting up the linear solver are
/// errors; a failure during the iteration ends the run with
/// [`SolveStatus::NumericalFailure`] and the log so far.
pub fn solve(p: &ProblemData, opts: &SolverOptions) -> Result<SolveResult> {
    let sp = scale_problem(p, opts.mu)?;
    solve_scaled(&sp, opts)
}

pub fn solve_scaled(sp: &ScaledProblem, opts: &SolverOptions) -> Result<SolveResult> {
    let mut solver = Solver::new(sp, opts.clone())?;
    let mut log = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut failure = None;
    let mut last = kkt_residuals(solver.state(), sp);
    for _ in 0..opts.max_iter {
        let sigma = solver.state().sigma;
        let rep = match solver.step() {
            Ok(rep) => rep,
            Err(e) => {
                status = SolveStatus::NumericalFailure;
                failure = Some(e.to_string());
                break;
            }
        };
        let res = rep.residuals;
        log.push(LogRow {
            k: solver.state().k,
            sigma,
            eta_p: res.eta_p,
            eta_d: res.eta_d,
            eta_c: res.eta_c,
            eta_gap: res.eta_gap,
            primal_objective: res.primal_objective,
            dual_objective: res.dual_objective,
            psqmr_iterations: rep.psqmr_iterations,
            double: rep.double,
        });
        last = res;
        if stopping_test(&res, opts.tol) {
            status = SolveStatus::Converged;
            break;
        }
        solver.adapt_sigma(&res);
    }

    let st = solver.state();
    let termination = Termination {
        status,
        iterations: log.len(),
        psqmr_iterations: st.psqmr_iterations,
        double_count: st.double_count,
        eta_p: last.eta_p,
        eta_d: last.eta_d,
        eta_c: last.eta_c,
        eta_gap: last.eta_gap,
        primal_objective: last.primal_objective,
        dual_objective: last.dual_objective,
    };
    Ok(SolveResult {
        model: solver.model(termination),
        status,
        log,
        strategy: solver.strategy(),
        proximal_rank: solver.proximal_rank(),
        newton_iterations: solver.newton_iterations(),
        samples: sp.n(),
        residuals: last,
        failure,
    })
}
