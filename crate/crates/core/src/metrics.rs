//! Relative KKT residuals, objective values and classification error.
//!
//! Every residual is divided by `1 + C`. All quantities are evaluated on the
//! scaled problem, where `w̃ = Z_scale·w` lives in the ball of radius
//! `Z_scale`.

use crate::linalg::{axpy, dot, norm};
use crate::model::{sign, ScaledProblem};
use crate::solver::SolverState;
use crate::sparse::SparseColMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_c3: f64,
    pub eta_p1: f64,
    pub eta_p2: f64,
    pub eta_p3: f64,
    pub eta_d1: f64,
    pub eta_d2: f64,
    /// `‖Z̃α + Dρ‖/(1+C)`, stationarity in `w̃`. Not part of `η_D`; it
    /// balances `σ` against `η_P`.
    pub eta_d3: f64,
    pub eta_gap: f64,
    pub eta_c: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl Residuals {
    pub fn is_finite(&self) -> bool {
        [
            self.eta_c,
            self.eta_p,
            self.eta_d,
            self.eta_gap,
            self.primal_objective,
            self.dual_objective,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// `κ = (q+1)/q · q^{1/(q+1)}`.
pub fn kappa(q: f64) -> f64 {
    (q + 1.0) / q * q.powf(1.0 / (q + 1.0))
}

/// `Σ τ_i^q / r_i^q + C⟨e, ξ⟩`.
pub fn primal_objective(r: &[f64], xi: &[f64], sp: &ScaledProblem) -> f64 {
    let theta: f64 = r.iter().zip(&sp.tau_pow_q).map(|(ri, t)| t / ri.powf(sp.q)).sum();
    theta + sp.c * dot(&sp.e, xi)
}

/// `κ Σ (τ_i^q)^{1/(q+1)} max(α_i, 0)^{q/(q+1)} − Z_scale ‖Z̃α‖`.
///
/// Negative entries of `α` are clamped to zero here; they show up in `η_D1`.
pub fn dual_objective(alpha: &[f64], sp: &ScaledProblem) -> f64 {
    let q = sp.q;
    let power: f64 = alpha
        .iter()
        .zip(&sp.tau_pow_q)
        .map(|(a, t)| t.powf(1.0 / (q + 1.0)) * a.max(0.0).powf(q / (q + 1.0)))
        .sum();
    kappa(q) * power - sp.z_scale * norm(&sp.z.mul_vec(alpha))
}

/// `|p − d| / (1 + |p| + |d|)`.
pub fn duality_gap(primal: f64, dual: f64) -> f64 {
    (primal - dual).abs() / (1.0 + primal.abs() + dual.abs())
}

pub fn kkt_residuals(state: &SolverState, sp: &ScaledProblem) -> Residuals {
    let scale = 1.0 + sp.c;
    let q = sp.q;

    let mut feas = sp.z.tr_mul_vec(&state.w);
    for i in 0..feas.len() {
        feas[i] += state.beta * sp.y[i] + state.xi[i] - state.r[i];
    }
    let eta_p1 = norm(&feas) / scale;
    let diff: Vec<f64> = state.w.iter().zip(&state.u).map(|(a, b)| sp.mu * (a - b)).collect();
    let eta_p2 = norm(&diff) / scale;
    let eta_p3 = (norm(&state.w) - sp.z_scale).max(0.0) / scale;

    let neg: Vec<f64> = state.alpha.iter().map(|a| a.min(0.0)).collect();
    let eta_d1 = norm(&neg) / scale;
    let over: Vec<f64> = state
        .alpha
        .iter()
        .zip(&sp.e)
        .map(|(a, e)| (a - sp.c * e).max(0.0))
        .collect();
    let eta_d2 = norm(&over) / scale;
    let mut stat_w = sp.z.mul_vec(&state.alpha);
    axpy(sp.mu, &state.rho, &mut stat_w);
    let eta_d3 = norm(&stat_w) / scale;

    let eta_c1 = dot(&sp.y, &state.alpha).abs() / scale;
    let comp: f64 = state
        .xi
        .iter()
        .zip(&state.alpha)
        .zip(&sp.e)
        .map(|((x, a), e)| x * (sp.c * e - a))
        .sum();
    let eta_c2 = comp.abs() / scale;
    let stat: f64 = state
        .alpha
        .iter()
        .zip(&state.r)
        .zip(&sp.tau_pow_q)
        .map(|((a, r), t)| {
            let s = q * t / r.powf(q + 1.0);
            (a - s) * (a - s)
        })
        .sum();
    let eta_c3 = stat / scale;

    let primal_objective = primal_objective(&state.r, &state.xi, sp);
    let dual_objective = dual_objective(&state.alpha, sp);

    Residuals {
        eta_c1,
        eta_c2,
        eta_c3,
        eta_p1,
        eta_p2,
        eta_p3,
        eta_d1,
        eta_d2,
        eta_d3,
        eta_gap: duality_gap(primal_objective, dual_objective),
        eta_c: eta_c1.max(eta_c2).max(eta_c3),
        eta_p: eta_p1.max(eta_p2).max(eta_p3),
        eta_d: eta_d1.max(eta_d2),
        primal_objective,
        dual_objective,
    }
}

/// Percentage of columns of `x` with `y_i sgn(xᵢᵀw + β) ≤ 0`; a point on the
/// hyperplane counts as an error.
pub fn classification_error(w: &[f64], beta: f64, x: &SparseColMatrix, y: &[f64]) -> f64 {
    assert_eq!(x.nrows(), w.len(), "feature dimension differs from w");
    assert_eq!(x.ncols(), y.len(), "label count differs from sample count");
    if y.is_empty() {
        return 0.0;
    }
    let wrong = (0..x.ncols())
        .filter(|&j| y[j] * sign(x.col_dot(j, w) + beta) <= 0.0)
        .count();
    100.0 * wrong as f64 / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{scale_problem, ProblemData};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> ScaledProblem {
        let x = SparseColMatrix::from_dense(&DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        let p = ProblemData::new(x, vec![1.0, -1.0], 1.0, 10.0).unwrap();
        scale_problem(&p, 1.0).unwrap()
    }

    fn kkt_point(sp: &ScaledProblem) -> SolverState {
        let zs = sp.z_scale;
        let alpha = vec![1.0, 1.0];
        let za = sp.z.mul_vec(&alpha);
        SolverState {
            r: vec![1.0, 1.0],
            xi: vec![0.0, 0.0],
            alpha,
            w: vec![zs],
            u: vec![zs],
            rho: za.iter().map(|v| -v / sp.mu).collect(),
            beta: 0.0,
            sigma: 1.0,
            ..SolverState::zeros(2, 1)
        }
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(1.0), 2.0);
        assert_relative_eq!(kappa(2.0), 1.5 * 2f64.powf(1.0 / 3.0), max_relative = 1e-15);
        assert_relative_eq!(kappa(2.0), 1.88988, max_relative = 1e-5);
    }

    #[test]
    fn exact_kkt_point_has_zero_residuals() {
        let sp = toy();
        let st = kkt_point(&sp);
        let res = kkt_residuals(&st, &sp);
        assert!(res.eta_p < 1e-15, "{res:?}");
        assert!(res.eta_d == 0.0 && res.eta_c == 0.0);
        assert_relative_eq!(res.primal_objective, 2.0, max_relative = 1e-15);
        assert_relative_eq!(res.dual_objective, 2.0, max_relative = 1e-14);
        assert!(res.eta_gap < 1e-14);
    }

    #[test]
    fn single_negative_multiplier() {
        let sp = toy();
        let mut st = kkt_point(&sp);
        st.alpha = vec![-0.3, 1.0];
        let res = kkt_residuals(&st, &sp);
        assert_relative_eq!(res.eta_d1, 0.3 / 11.0, max_relative = 1e-15);
    }

    #[test]
    fn unit_point_objective() {
        let sp = toy();
        assert_eq!(primal_objective(&[1.0, 1.0], &[1.0, 1.0], &sp), 2.0 + 10.0 * 2.0);
    }

    #[test]
    fn gap_is_symmetric() {
        assert_eq!(duality_gap(3.0, -1.5), duality_gap(-1.5, 3.0));
        assert_eq!(duality_gap(2.0, 2.0), 0.0);
    }

    /// Straight transcription of the residual definitions on dense matrices.
    fn oracle(st: &SolverState, sp: &ScaledProblem) -> [f64; 8] {
        let z = sp.z.to_dense();
        let c1 = 1.0 + sp.c;
        let n = st.r.len();
        let wv = nalgebra::DVector::from_column_slice(&st.w);
        let ztw = z.transpose() * &wv;
        let mut p1 = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let mut yta = 0.0;
        let mut c2 = 0.0;
        let mut c3 = 0.0;
        for i in 0..n {
            let f = ztw[i] + st.beta * sp.y[i] + st.xi[i] - st.r[i];
            p1 += f * f;
            if st.alpha[i] < 0.0 {
                d1 += st.alpha[i] * st.alpha[i];
            }
            if st.alpha[i] > sp.c * sp.e[i] {
                d2 += (st.alpha[i] - sp.c * sp.e[i]).powi(2);
            }
            yta += sp.y[i] * st.alpha[i];
            c2 += st.xi[i] * (sp.c * sp.e[i] - st.alpha[i]);
            let s = sp.q * sp.tau[i].powf(sp.q) / st.r[i].powf(sp.q + 1.0);
            c3 += (st.alpha[i] - s).powi(2);
        }
        let p2 = sp.mu * (&wv - nalgebra::DVector::from_column_slice(&st.u)).norm();
        let p3 = (wv.norm() - sp.z_scale).max(0.0);
        [
            p1.sqrt() / c1,
            p2 / c1,
            p3 / c1,
            d1.sqrt() / c1,
            d2.sqrt() / c1,
            yta.abs() / c1,
            c2.abs() / c1,
            c3 / c1,
        ]
    }

    #[test]
    fn residuals_match_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let xd = DMatrix::from_fn(10, 5, |_, _| rng.gen_range(-1.0..1.0));
        let y = vec![1.0, -1.0, 1.0, 1.0, -1.0];
        let p = ProblemData::new(SparseColMatrix::from_dense(&xd), y, 2.0, 3.0)
            .unwrap()
            .with_class_weights(vec![0.5, 1.0, 0.5, 0.5, 1.0])
            .unwrap();
        let sp = scale_problem(&p, 1.3).unwrap();
        let mut st = SolverState::zeros(5, 10);
        st.r = (0..5).map(|_| rng.gen_range(0.1..3.0)).collect();
        st.xi = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
        st.alpha = (0..5).map(|_| rng.gen_range(-1.0..5.0)).collect();
        st.w = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
        st.u = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        st.beta = 0.4;
        let res = kkt_residuals(&st, &sp);
        let want = oracle(&st, &sp);
        let got = [
            res.eta_p1, res.eta_p2, res.eta_p3, res.eta_d1, res.eta_d2, res.eta_c1, res.eta_c2, res.eta_c3,
        ];
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(*g, *w, max_relative = 1e-12, epsilon = 1e-15);
        }
        assert_eq!(res.eta_p, res.eta_p1.max(res.eta_p2).max(res.eta_p3));
        assert_eq!(res.eta_d, res.eta_d1.max(res.eta_d2));
        assert_eq!(res.eta_c, res.eta_c1.max(res.eta_c2).max(res.eta_c3));
    }

    #[test]
    fn weighted_dual_reduces_to_unweighted() {
        let sp = toy();
        let mut weighted = sp.clone();
        weighted.tau = vec![1.0, 1.0];
        weighted.tau_pow_q = vec![1.0, 1.0];
        let a = [0.3, 0.7];
        assert_eq!(dual_objective(&a, &sp), dual_objective(&a, &weighted));
    }

    #[test]
    fn dual_power_term_is_the_conjugate() {
        // min_t τ^q/t^q + α t over a fine grid equals κ (τ^q)^{1/(q+1)} α^{q/(q+1)}
        for &(q, tau, a) in &[(1.0, 1.0, 0.5), (2.0, 0.7, 1.3), (0.5, 0.3, 2.0)] {
            let w: f64 = f64::powf(tau, q);
            let t_star = (q * w / a).powf(1.0 / (q + 1.0));
            let min_val = w / t_star.powf(q) + a * t_star;
            let grid = (1..20000)
                .map(|i| i as f64 * 1e-3)
                .map(|t| w / t.powf(q) + a * t)
                .fold(f64::INFINITY, f64::min);
            assert!(grid >= min_val - 1e-12 && grid - min_val < 1e-5);
            let formula = kappa(q) * w.powf(1.0 / (q + 1.0)) * a.powf(q / (q + 1.0));
            assert_relative_eq!(formula, min_val, max_relative = 1e-12);
        }
    }

    #[test]
    fn classification_error_counts() {
        let x = SparseColMatrix::from_dense(&DMatrix::from_row_slice(1, 10, &[1.0; 10]));
        let mut y = vec![1.0; 10];
        assert_eq!(classification_error(&[1.0], 0.0, &x, &y), 0.0);
        y[0] = -1.0;
        y[4] = -1.0;
        y[9] = -1.0;
        assert_eq!(classification_error(&[1.0], 0.0, &x, &y), 30.0);
        // on the hyperplane
        assert_eq!(classification_error(&[1.0], -1.0, &x, &vec![1.0; 10]), 100.0);
    }

    proptest! {
        #[test]
        fn weak_duality(seed in 0u64..500, q in prop::sample::select(vec![0.5, 1.0, 2.0, 4.0])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.gen_range(1..6);
            let n = 2 * rng.gen_range(1..5);
            let xd = DMatrix::from_fn(d, n, |_, _| rng.gen_range(-1.0..1.0));
            let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let c = rng.gen_range(0.1..10.0);
            let p = ProblemData::new(SparseColMatrix::from_dense(&xd), y.clone(), q, c).unwrap();
            let sp = scale_problem(&p, 1.0).unwrap();

            // dual feasible: pairs (i, i+1) with opposite labels share a value
            let alpha: Vec<f64> = (0..n / 2)
                .flat_map(|_| { let v = rng.gen_range(0.0..c); [v, v] })
                .collect();
            // primal feasible: pick w̃ in the ball, β, ξ ≥ 0, then r
            let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nw = norm(&w);
            let radius = sp.z_scale * rng.gen_range(0.0..1.0);
            w.iter_mut().for_each(|v| *v *= radius / nw);
            let beta = rng.gen_range(-1.0..1.0);
            let base: Vec<f64> = sp.z.tr_mul_vec(&w).iter().zip(&y).map(|(v, yi)| v + beta * yi).collect();
            let xi: Vec<f64> = base.iter().map(|b| (0.1 - b).max(0.0) + rng.gen_range(0.0..0.5)).collect();
            let r: Vec<f64> = base.iter().zip(&xi).map(|(b, x)| b + x).collect();
            prop_assert!(r.iter().all(|&v| v > 0.0));
            let pobj = primal_objective(&r, &xi, &sp);
            let dobj = dual_objective(&alpha, &sp);
            prop_assert!(pobj >= dobj - 1e-8 * (1.0 + pobj.abs()), "{pobj} < {dobj}");
        }

        #[test]
        fn error_invariant_under_positive_rescaling(seed in 0u64..200, s in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xd = DMatrix::from_fn(3, 12, |_, _| rng.gen_range(-1.0..1.0));
            let x = SparseColMatrix::from_dense(&xd);
            let y: Vec<f64> = (0..12).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let beta = rng.gen_range(-0.5..0.5);
            let ws: Vec<f64> = w.iter().map(|v| v * s).collect();
            prop_assert_eq!(
                classification_error(&w, beta, &x, &y),
                classification_error(&ws, beta * s, &x, &y)
            );
        }
    }
}
