//! Symmetric QMR without preconditioning.

use super::{axpy, dot, norm};
use crate::error::{DwdError, Result};

const BREAKDOWN_RATIO: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct PsqmrOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true residual `‖b − A x‖`.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for symmetric `A` given only `apply(v, out) : out = A v`.
///
/// Recurrences, starting from `r₀ = q₀ = b − A x₀`, `τ₀ = ‖r₀‖`, `θ₀ = 0`,
/// `d₀ = 0`:
///
/// ```text
/// α_k = r_{k−1}ᵀr_{k−1} / q_{k−1}ᵀA q_{k−1}
/// r_k = r_{k−1} − α_k A q_{k−1}
/// θ_k = ‖r_k‖ / τ_{k−1},  c_k = 1/√(1 + θ_k²),  τ_k = τ_{k−1} θ_k c_k
/// d_k = c_k² θ_{k−1}² d_{k−1} + c_k² α_k q_{k−1}
/// x_k = x_{k−1} + d_k
/// q_k = r_k + (r_kᵀr_k / r_{k−1}ᵀr_{k−1}) q_{k−1}
/// ```
///
/// The true residual `b − A x_k` is carried along through `A d_k`, which
/// needs no extra products, and is recomputed explicitly before declaring
/// convergence.
pub fn psqmr<F>(mut apply: F, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<PsqmrOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    assert_eq!(x0.len(), n);
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut res_norm = norm(&res);
    if res_norm <= tol {
        return Ok(PsqmrOutcome {
            x,
            iterations: 0,
            residual: res_norm,
            converged: true,
        });
    }

    let scale = norm(b).max(res_norm);
    let floor = BREAKDOWN_RATIO * scale * scale;
    let mut r = res.clone();
    let mut q = r.clone();
    let mut tau = res_norm;
    let mut theta = 0.0;
    let mut rho = dot(&r, &r);
    let mut d = vec![0.0; n];
    let mut ad = vec![0.0; n];
    let mut aq = vec![0.0; n];

    for k in 1..=max_iter {
        apply(&q, &mut aq);
        let sigma = dot(&q, &aq);
        if !sigma.is_finite() || sigma.abs() <= floor {
            return Err(DwdError::Breakdown(format!("qᵀAq = {sigma:.3e} at step {k}")));
        }
        let alpha = rho / sigma;
        axpy(-alpha, &aq, &mut r);

        let theta_new = norm(&r) / tau;
        let c2 = 1.0 / (1.0 + theta_new * theta_new);
        tau *= theta_new * c2.sqrt();
        let carry = c2 * theta * theta;
        let step = c2 * alpha;
        for i in 0..n {
            d[i] = carry * d[i] + step * q[i];
            ad[i] = carry * ad[i] + step * aq[i];
        }
        axpy(1.0, &d, &mut x);
        axpy(-1.0, &ad, &mut res);
        theta = theta_new;

        res_norm = norm(&res);
        if res_norm <= tol {
            apply(&x, &mut ax);
            for i in 0..n {
                res[i] = b[i] - ax[i];
            }
            res_norm = norm(&res);
            if res_norm <= tol {
                return Ok(PsqmrOutcome {
                    x,
                    iterations: k,
                    residual: res_norm,
                    converged: true,
                });
            }
        }

        let rho_new = dot(&r, &r);
        if !rho_new.is_finite() || rho_new <= floor {
            return Err(DwdError::Breakdown(format!("rᵀr = {rho_new:.3e} at step {k}")));
        }
        let beta = rho_new / rho;
        for i in 0..n {
            q[i] = r[i] + beta * q[i];
        }
        rho = rho_new;
    }

    apply(&x, &mut ax);
    let residual = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    Ok(PsqmrOutcome {
        x,
        iterations: max_iter,
        converged: residual <= tol,
        residual,
    })
}
