//! Leading eigenpairs of a symmetric positive semidefinite operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, dot, norm};
use crate::error::{DwdError, Result};

/// Relative size below which two Ritz values count as equal for the gap test.
const GAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct TopEigs {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖M v_i − λ_i v_i‖`.
    pub residuals: Vec<f64>,
}

impl TopEigs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes keep the basis orthonormal to working precision
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            axpy(-c, b, w);
        }
    }
}

/// Lanczos with full reorthogonalization on at most `min(d, 5ℓ + 100)`
/// vectors. When the Krylov space becomes invariant the process restarts
/// from a fresh random direction orthogonal to the basis, so repeated
/// eigenvalues are found with their multiplicity.
///
/// If `λ_{ℓ−1} > λ_ℓ` fails, `ℓ` is lowered until it holds. Returns an
/// error if any kept Ritz pair has residual above `tol · max(1, λ₁)`.
pub fn top_eigs<F>(mut apply: F, d: usize, ell: usize, tol: f64, seed: u64) -> Result<TopEigs>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if ell == 0 || ell > d {
        return Err(DwdError::invalid(format!("cannot take {ell} eigenpairs of a {d}-dimensional operator")));
    }
    let m_max = d.min(5 * ell + 100);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut alphas = Vec::with_capacity(m_max);
    let mut betas: Vec<f64> = Vec::with_capacity(m_max);
    let mut v = random_unit(d, &mut rng);
    let mut w = vec![0.0; d];
    let mut scale = 0.0f64;
    let mut tail = 0.0;

    loop {
        apply(&v, &mut w);
        let a = dot(&v, &w);
        alphas.push(a);
        basis.push(v);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        if basis.len() == m_max {
            tail = b;
            break;
        }
        if b > 1e-12 * scale.max(1e-300) {
            betas.push(b);
            v = w.iter().map(|x| x / b).collect();
        } else {
            let mut fresh = random_unit(d, &mut rng);
            orthogonalize(&mut fresh, &basis);
            let nf = norm(&fresh);
            if nf < 1e-8 {
                break;
            }
            betas.push(0.0);
            v = fresh.iter().map(|x| x / nf).collect();
        }
    }

    let m = basis.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let want = ell.min(m);
    let values: Vec<f64> = order[..want].iter().map(|&i| eig.eigenvalues[i]).collect();
    let lam1 = values[0].max(1.0);
    let mut kept = want;
    while kept > 1 && values[kept - 2] - values[kept - 1] <= GAP_TOL * lam1 {
        kept -= 1;
    }

    let mut out = TopEigs {
        values: Vec::with_capacity(kept),
        vectors: Vec::with_capacity(kept),
        residuals: Vec::with_capacity(kept),
    };
    for &i in &order[..kept] {
        let s = eig.eigenvectors.column(i);
        let mut x = vec![0.0; d];
        for (k, bk) in basis.iter().enumerate() {
            axpy(s[k], bk, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|e| *e /= nx);
        let residual = (tail * s[m - 1]).abs();
        if residual > tol * lam1 {
            return Err(DwdError::Breakdown(format!(
                "Lanczos residual {residual:.3e} exceeds {:.3e} after {m} steps",
                tol * lam1
            )));
        }
        out.values.push(eig.eigenvalues[i]);
        out.vectors.push(x);
        out.residuals.push(residual);
    }
    Ok(out)
}

/// Dominant eigenpair by power iteration, for use when Lanczos fails.
pub fn power_iteration<F>(mut apply: F, d: usize, max_iter: usize, tol: f64, seed: u64) -> Result<TopEigs>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if d == 0 {
        return Err(DwdError::invalid("empty operator"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(d, &mut rng);
    let mut w = vec![0.0; d];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        apply(&v, &mut w);
        lambda = dot(&v, &w);
        let r: f64 = w.iter().zip(&v).map(|(wi, vi)| (wi - lambda * vi).powi(2)).sum::<f64>().sqrt();
        if r <= tol * lambda.max(1.0) {
            return Ok(TopEigs {
                values: vec![lambda],
                vectors: vec![v],
                residuals: vec![r],
            });
        }
        let nw = norm(&w);
        if nw == 0.0 {
            // v lies in the null space; the operator is zero on the iterate
            return Ok(TopEigs {
                values: vec![0.0],
                vectors: vec![v],
                residuals: vec![0.0],
            });
        }
        v = w.iter().map(|x| x / nw).collect();
    }
    apply(&v, &mut w);
    let r: f64 = w.iter().zip(&v).map(|(wi, vi)| (wi - lambda * vi).powi(2)).sum::<f64>().sqrt();
    Err(DwdError::Breakdown(format!(
        "power iteration stalled at λ = {lambda:.6e} with residual {r:.3e}"
    )))
}
