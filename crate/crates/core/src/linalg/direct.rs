use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{dot, NormalSystem};
use crate::error::{DwdError, Result};

/// Cholesky factor of the full `(d+1) × (d+1)` matrix `A` (with `𝒯 = 0`).
#[derive(Debug, Clone)]
pub struct DirectFactor {
    chol: Cholesky<f64, Dyn>,
}

impl DirectFactor {
    pub fn new(sys: &NormalSystem<'_>) -> Result<Self> {
        let chol = Cholesky::new(sys.assemble()).ok_or_else(|| {
            DwdError::Numerical("Cholesky factorization of the normal matrix failed".into())
        })?;
        Ok(Self { chol })
    }

    pub fn solve(&self, h: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(h)).as_slice().to_vec()
    }
}

/// Sherman-Morrison-Woodbury form of `A⁻¹`.
///
/// Writing `A = D̂ + U E Uᵀ` with `D̂ = diag(μ²I_d, ‖y‖²)`,
/// `U = [Z 0; yᵀ ‖y‖]`, `E = diag(I_n, −1)` gives
/// `A⁻¹ = D̂⁻¹ − D̂⁻¹ U H⁻¹ Uᵀ D̂⁻¹` where `H = J + ȳȳᵀ`,
/// `J = diag(G, −1)`, `G = I_n + ZᵀZ/μ²` and `ȳ = [y/‖y‖; 1]`.
/// Only `G` is factored.
#[derive(Debug, Clone)]
pub struct SmwFactor {
    g_chol: Cholesky<f64, Dyn>,
    /// `J⁻¹ȳ`.
    j_inv_ybar: Vec<f64>,
    /// `1 + ȳᵀJ⁻¹ȳ`.
    denom: f64,
    y_norm: f64,
    mu2: f64,
}

impl SmwFactor {
    pub fn new(sys: &NormalSystem<'_>) -> Result<Self> {
        let n = sys.n();
        let y_norm = sys.yty().sqrt();
        if y_norm == 0.0 {
            return Err(DwdError::invalid("label vector is zero"));
        }
        let mu2 = sys.mu * sys.mu;
        let g = Self::inner_matrix(sys);
        let g_chol = Cholesky::new(g)
            .ok_or_else(|| DwdError::Numerical("Cholesky factorization of I + ZᵀD⁻²Z failed".into()))?;
        let yb = DVector::from_iterator(n, sys.y.iter().map(|v| v / y_norm));
        let g_inv_y = g_chol.solve(&yb);
        let mut j_inv_ybar = g_inv_y.as_slice().to_vec();
        j_inv_ybar.push(-1.0);
        let ybar_j_ybar = dot(yb.as_slice(), g_inv_y.as_slice()) - 1.0;
        let denom = 1.0 + ybar_j_ybar;
        if !(denom > 0.0) {
            return Err(DwdError::Numerical(format!("SMW denominator {denom} is not positive")));
        }
        Ok(Self {
            g_chol,
            j_inv_ybar,
            denom,
            y_norm,
            mu2,
        })
    }

    /// `G = I_n + ZᵀZ/μ²`.
    pub fn inner_matrix(sys: &NormalSystem<'_>) -> DMatrix<f64> {
        let mu2 = sys.mu * sys.mu;
        let mut g = sys.z.gram_cols() / mu2;
        for i in 0..sys.n() {
            g[(i, i)] += 1.0;
        }
        g
    }

    /// Dense `H = [G + yyᵀ/‖y‖²  y/‖y‖; yᵀ/‖y‖  0]`.
    pub fn assemble_h(sys: &NormalSystem<'_>) -> DMatrix<f64> {
        let n = sys.n();
        let y_norm = sys.yty().sqrt();
        let g = Self::inner_matrix(sys);
        let mut h = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = g[(i, j)] + sys.y[i] * sys.y[j] / sys.yty();
            }
            h[(i, n)] = sys.y[i] / y_norm;
            h[(n, i)] = sys.y[i] / y_norm;
        }
        h
    }

    pub fn solve(&self, sys: &NormalSystem<'_>, h: &[f64]) -> Vec<f64> {
        let d = sys.d();
        let n = sys.n();
        let yty = self.y_norm * self.y_norm;

        // t = D̂⁻¹ h
        let t_w: Vec<f64> = h[..d].iter().map(|v| v / self.mu2).collect();
        let t_b = h[d] / yty;

        // v = Uᵀ t
        let mut v = sys.z.tr_mul_vec(&t_w);
        for (vi, yi) in v.iter_mut().zip(sys.y) {
            *vi += yi * t_b;
        }
        let v_last = self.y_norm * t_b;

        // s = H⁻¹ v = J⁻¹v − (J⁻¹ȳ)(J⁻¹ȳ)ᵀv / (1 + ȳᵀJ⁻¹ȳ)
        let g_inv_v = self.g_chol.solve(&DVector::from_vec(v.clone()));
        let mut s: Vec<f64> = g_inv_v.as_slice().to_vec();
        s.push(-v_last);
        let proj = (dot(&self.j_inv_ybar[..n], &v) + self.j_inv_ybar[n] * v_last) / self.denom;
        for (si, ji) in s.iter_mut().zip(&self.j_inv_ybar) {
            *si -= proj * ji;
        }

        // x = t − D̂⁻¹ U s
        let zs = sys.z.mul_vec(&s[..n]);
        let mut x: Vec<f64> = t_w.iter().zip(&zs).map(|(t, u)| t - u / self.mu2).collect();
        let us_last = dot(sys.y, &s[..n]) + self.y_norm * s[n];
        x.push(t_b - us_last / yty);
        x
    }
}
