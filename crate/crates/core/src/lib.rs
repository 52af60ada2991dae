//! Generalized distance weighted discrimination (DWD) at scale.
//!
//! The primal problem is
//!
//! ```text
//! min  Σ τ_i^q / r_i^q + C⟨e, ξ⟩
//! s.t. Zᵀw + βy + ξ − r = 0,  ‖w‖ ≤ 1,  ξ ≥ 0,  r > 0
//! ```
//!
//! with `Z = X diag(y)`. It is solved by a three-block semi-proximal ADMM whose
//! `(w, β)` and `r` blocks are swept in symmetric Gauss-Seidel order, with the
//! `(d+1)×(d+1)` normal system handled by a dense Cholesky factor, a
//! Sherman-Morrison-Woodbury reduction or an unpreconditioned symmetric QMR
//! iteration depending on the shape of the data.
//!
//! ```ignore
//! let (x, raw) = dwd::ingest::read_libsvm_path("train.svm", None)?;
//! let (labels, y) = dwd::ingest::binarize_labels(&raw)?;
//! let problem = dwd::model::ProblemData::new(x, y, 1.0, 100.0)?;
//! let result = dwd::solver::solve(&problem, &dwd::solver::SolverOptions::default())?;
//! println!("{:?} after {} iterations", result.status, result.log.len());
//! ```

pub mod error;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod solver;
pub mod sparse;
pub mod subproblems;

pub use error::{DwdError, Result};
pub use model::{ProblemData, ScaledProblem, TrainedModel};
pub use solver::{solve, SolveResult, SolveStatus, SolverOptions, Variant};
pub use sparse::SparseColMatrix;
