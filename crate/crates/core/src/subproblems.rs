//! Per-block subproblems: the separable `r`-update and the two projections.

use crate::error::{DwdError, Result};

/// Newton iteration cap before falling back to bisection.
pub const NEWTON_MAX_ITER: usize = 50;
const BISECTION_MAX_ITER: usize = 200;
const BISECTION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    /// Newton steps plus any bisection steps.
    pub iterations: usize,
    /// `|φ'(s)|` at the returned point.
    pub gradient: f64,
    pub used_bisection_init: bool,
}

/// The scalar model `φ(s) = w/s^q + σ/2 (s − a)²` on `s > 0`.
#[derive(Debug, Clone, Copy)]
struct ThetaProx {
    a: f64,
    q: f64,
    /// `w = τ^q`.
    weight: f64,
    sigma: f64,
}

impl ThetaProx {
    fn value(&self, s: f64) -> f64 {
        self.weight / s.powf(self.q) + 0.5 * self.sigma * (s - self.a) * (s - self.a)
    }

    fn gradient(&self, s: f64) -> f64 {
        -self.q * self.weight / s.powf(self.q + 1.0) + self.sigma * (s - self.a)
    }

    /// `s − φ'(s)/φ''(s)` written in the multiplicative form that keeps the
    /// iterate positive whenever `a ≥ 0`.
    fn newton_step(&self, s: f64) -> f64 {
        let qe_over_sigma = self.q * self.weight / self.sigma;
        let sq1 = s.powf(self.q + 1.0);
        let num = (self.q + 2.0) * qe_over_sigma + self.a * sq1;
        let den = (self.q + 1.0) * qe_over_sigma + sq1 * s;
        s * num / den
    }

    /// Upper end of a bracket: `φ'` is positive at `max(a,0) + (qw/σ)^{1/(q+2)} + 1`.
    fn upper_bound(&self) -> f64 {
        self.a.max(0.0) + (self.q * self.weight / self.sigma).powf(1.0 / (self.q + 2.0)) + 1.0
    }
}

/// Minimizes `τ^q/s^q + σ/2 (s − a)²` over `s > 0` by Newton's method from
/// `s0`, returning a point with `|φ'(s)| ≤ tol` (or at the roundoff floor).
///
/// `weight` is `τ^q`; pass 1 for the unweighted problem. Newton iterates are
/// required to decrease `φ`; a step that leaves the domain or increases `φ`
/// switches to bisection on `φ'`.
pub fn newton_theta_q(a: f64, q: f64, weight: f64, sigma: f64, s0: f64, tol: f64) -> Result<(f64, NewtonReport)> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(DwdError::invalid(format!("Newton start {s0} must be positive")));
    }
    if !(q > 0.0 && weight > 0.0 && sigma > 0.0) || !a.is_finite() {
        return Err(DwdError::invalid(format!(
            "bad scalar subproblem: a={a}, q={q}, weight={weight}, sigma={sigma}"
        )));
    }
    let f = ThetaProx { a, q, weight, sigma };

    let mut s = s0;
    let mut phi = f.value(s);
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER {
        let g = f.gradient(s);
        if g.abs() <= tol {
            return Ok((
                s,
                NewtonReport {
                    iterations,
                    gradient: g.abs(),
                    used_bisection_init: false,
                },
            ));
        }
        let next = f.newton_step(s);
        iterations += 1;
        if !(next > 0.0 && next.is_finite()) {
            break;
        }
        let phi_next = f.value(next);
        if phi_next > phi + 1e-14 * phi.abs() {
            break;
        }
        let stalled = (next - s).abs() <= 4.0 * f64::EPSILON * s;
        s = next;
        phi = phi_next;
        if stalled {
            return Ok((
                s,
                NewtonReport {
                    iterations,
                    gradient: f.gradient(s).abs(),
                    used_bisection_init: false,
                },
            ));
        }
    }

    let (s, extra, gradient) = bisect(&f, s0, tol)?;
    Ok((
        s,
        NewtonReport {
            iterations: iterations + extra,
            gradient,
            used_bisection_init: true,
        },
    ))
}

fn bisect(f: &ThetaProx, s0: f64, tol: f64) -> Result<(f64, usize, f64)> {
    let mut lo = s0.min(BISECTION_FLOOR);
    let mut guard = 0;
    while f.gradient(lo) >= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 1000 || lo == 0.0 {
            return Err(DwdError::Numerical("no lower bracket for scalar subproblem".into()));
        }
    }
    let mut hi = f.upper_bound();
    while f.gradient(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(DwdError::Numerical("no upper bracket for scalar subproblem".into()));
        }
    }
    let mut steps = 0;
    let mut mid = 0.5 * (lo + hi);
    let mut g = f.gradient(mid);
    while steps < BISECTION_MAX_ITER && g.abs() > tol && hi - lo > 2.0 * f64::EPSILON * mid {
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        g = f.gradient(mid);
        steps += 1;
    }
    if !(mid > 0.0 && mid.is_finite() && g.is_finite()) {
        return Err(DwdError::Numerical(format!(
            "bisection failed for a={}, q={}, sigma={}",
            f.a, f.q, f.sigma
        )));
    }
    Ok((mid, steps, g.abs()))
}

/// Result of the separable `r`-update.
#[derive(Debug, Clone)]
pub struct RBlockOutcome {
    pub r: Vec<f64>,
    pub newton_iterations: usize,
    pub bisection_fallbacks: usize,
}

/// Solves `min_r Σ τ_i^q/r_i^q + σ/2 ‖r − c‖²` coordinate-wise, each warm
/// started at `r_prev[i]` and accurate to `ε/√n` in the gradient.
pub fn solve_r_block(
    c: &[f64],
    q: f64,
    sigma: f64,
    tau_pow_q: &[f64],
    r_prev: &[f64],
    eps: f64,
) -> Result<RBlockOutcome> {
    let n = c.len();
    assert_eq!(r_prev.len(), n);
    assert_eq!(tau_pow_q.len(), n);
    let tol = eps / (n as f64).sqrt();
    let mut r = Vec::with_capacity(n);
    let mut newton_iterations = 0;
    let mut bisection_fallbacks = 0;
    for i in 0..n {
        let (s, rep) = newton_theta_q(c[i], q, tau_pow_q[i], sigma, r_prev[i], tol)?;
        newton_iterations += rep.iterations;
        bisection_fallbacks += rep.used_bisection_init as usize;
        r.push(s);
    }
    Ok(RBlockOutcome {
        r,
        newton_iterations,
        bisection_fallbacks,
    })
}

/// Euclidean projection onto `{v : ‖v‖ ≤ radius}`.
pub fn project_ball(g: &[f64], radius: f64) -> Vec<f64> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius {
        g.to_vec()
    } else {
        let s = radius / norm;
        g.iter().map(|v| v * s).collect()
    }
}

pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}
