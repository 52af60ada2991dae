//! Closed-form solve of the normal system augmented with
//! `𝒯 = λ_ℓ I + Σ_{i<ℓ} (λ_i − λ_ℓ) v_i v_iᵀ − ZZᵀ`.
//!
//! With `𝒯` in place the leading block becomes
//! `M = (μ² + λ_ℓ) I + Σ_{i<ℓ} (λ_i − λ_ℓ) v_i v_iᵀ`, whose inverse is
//! `(μ² + λ_ℓ)⁻¹ I + Σ_{i<ℓ} ((μ² + λ_i)⁻¹ − (μ² + λ_ℓ)⁻¹) v_i v_iᵀ`.
//! `β` then comes from a scalar Schur complement.

use super::{axpy, dot, NormalSystem, TopEigs};
use crate::error::{DwdError, Result};

#[derive(Debug, Clone)]
pub struct ProximalTerm {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    mu2: f64,
    /// `M⁻¹ Zy`.
    m_inv_zy: Vec<f64>,
    /// `yᵀy − (Zy)ᵀ M⁻¹ Zy`.
    schur: f64,
}

impl ProximalTerm {
    /// Builds the term from computed eigenpairs. `λ_ℓ` is raised by its
    /// Ritz residual so that `𝒯` stays positive semidefinite when the pair
    /// is only approximate.
    pub fn new(sys: &NormalSystem<'_>, eigs: TopEigs) -> Result<Self> {
        let TopEigs {
            mut values,
            vectors,
            residuals,
        } = eigs;
        let ell = values.len();
        if ell == 0 {
            return Err(DwdError::invalid("proximal term needs at least one eigenpair"));
        }
        let last = (values[ell - 1] + residuals[ell - 1]).max(0.0);
        values[ell - 1] = last;
        for v in values[..ell - 1].iter_mut() {
            *v = v.max(last);
        }
        Self::from_parts(sys, values, vectors)
    }

    /// Builds the term from exact eigenpairs `λ₁ ≥ … ≥ λ_ℓ ≥ 0` with
    /// orthonormal `v_i`.
    pub fn from_parts(sys: &NormalSystem<'_>, values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let ell = values.len();
        if ell == 0 || vectors.len() != ell {
            return Err(DwdError::invalid("eigenvalue and eigenvector counts differ or are zero"));
        }
        if vectors.iter().any(|v| v.len() != sys.d()) {
            return Err(DwdError::invalid("eigenvector length differs from d"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) || values[ell - 1] < 0.0 {
            return Err(DwdError::invalid("eigenvalues must be nonnegative and descending"));
        }
        for i in 0..ell {
            for j in 0..=i {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(&vectors[i], &vectors[j]) - want).abs() > 1e-8 {
                    return Err(DwdError::invalid("eigenvectors are not orthonormal"));
                }
            }
        }
        let mut p = Self {
            values,
            vectors,
            mu2: sys.mu * sys.mu,
            m_inv_zy: Vec::new(),
            schur: 0.0,
        };
        p.m_inv_zy = p.block_inverse_apply(sys.zy());
        p.schur = sys.yty() - dot(sys.zy(), &p.m_inv_zy);
        if !(p.schur > 0.0) || !p.schur.is_finite() {
            return Err(DwdError::Numerical(format!(
                "Schur complement {:.3e} is not positive",
                p.schur
            )));
        }
        Ok(p)
    }

    pub fn ell(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    fn lambda_ell(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `M x = (ZZᵀ + μ²I + 𝒯) x`.
    pub fn block_apply(&self, x: &[f64]) -> Vec<f64> {
        let base = self.mu2 + self.lambda_ell();
        let mut out: Vec<f64> = x.iter().map(|v| base * v).collect();
        let ell = self.ell();
        for (v, lam) in self.vectors[..ell - 1].iter().zip(&self.values) {
            axpy((lam - self.lambda_ell()) * dot(v, x), v, &mut out);
        }
        out
    }

    /// `M⁻¹ x` in closed form.
    pub fn block_inverse_apply(&self, x: &[f64]) -> Vec<f64> {
        let base = 1.0 / (self.mu2 + self.lambda_ell());
        let mut out: Vec<f64> = x.iter().map(|v| base * v).collect();
        let ell = self.ell();
        for (v, lam) in self.vectors[..ell - 1].iter().zip(&self.values) {
            axpy((1.0 / (self.mu2 + lam) - base) * dot(v, x), v, &mut out);
        }
        out
    }

    /// `𝒯 w = M w − μ² w − ZZᵀ w`.
    pub fn t_apply(&self, sys: &NormalSystem<'_>, w: &[f64]) -> Vec<f64> {
        let mut out = self.block_apply(w);
        let mut g = vec![0.0; w.len()];
        sys.apply_gram(w, &mut g);
        for i in 0..w.len() {
            out[i] -= self.mu2 * w[i] + g[i];
        }
        out
    }

    /// `A_𝒯 x` for `x = [w; β]`.
    pub fn apply_augmented(&self, sys: &NormalSystem<'_>, x: &[f64]) -> Vec<f64> {
        let d = sys.d();
        let (w, beta) = (&x[..d], x[d]);
        let mut out = self.block_apply(w);
        axpy(beta, sys.zy(), &mut out);
        out.push(dot(sys.zy(), w) + sys.yty() * beta);
        out
    }

    /// Exact solve of `A_𝒯 [w; β] = h`.
    pub fn solve(&self, sys: &NormalSystem<'_>, h: &[f64]) -> Result<Vec<f64>> {
        let d = sys.d();
        let beta = (h[d] - dot(&self.m_inv_zy, &h[..d])) / self.schur;
        let mut rhs = h[..d].to_vec();
        axpy(-beta, sys.zy(), &mut rhs);
        let mut x = self.block_inverse_apply(&rhs);
        x.push(beta);
        Ok(x)
    }
}
