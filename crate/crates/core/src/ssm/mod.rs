//! Linear Gaussian state space model.
//!
//! ```text
//! z_0 ~ N(mu_0, P_0)
//! z_t = A z_{t-1} + e_t,   e_t ~ N(0, Q)
//! y_t = C z_t     + d_t,   d_t ~ N(0, R)      t = 1..T
//! ```
//!
//! The initial belief describes `z_0`, so the first observation is absorbed
//! after one prediction step. Observation sequences are passed as flat
//! row-major slices of `T × m` values; for the univariate case that is just
//! the series itself.

mod em;
mod kalman;
mod simulate;

pub use em::{em_fit, lag_one_covariances, EmFit, EmSequence, ParamSubset};
pub use kalman::{
    filter, log_likelihood, predict_step, smooth, update_step, FilterOutput, SmoothOutput,
};
pub use simulate::{simulate, simulate_batch, Simulation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Initial state variance used when the belief is anchored on the first observation.
pub const DEFAULT_INITIAL_VARIANCE: f64 = 2.0;

const SYMMETRY_TOL: f64 = 1e-9;

/// Model parameters `(A, C, Q, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmParams {
    a: Matrix,
    c: Matrix,
    q: Matrix,
    r: Matrix,
}

impl SsmParams {
    pub fn new(a: Matrix, c: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let n = a.rows();
        if n == 0 || !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let m = c.rows();
        if m == 0 || c.cols() != n {
            return Err(Error::Dimension(format!(
                "C must be m x {n}, got {}x{}",
                c.rows(),
                c.cols()
            )));
        }
        if q.shape() != (n, n) {
            return Err(Error::Dimension(format!("Q must be {n}x{n}")));
        }
        if r.shape() != (m, m) {
            return Err(Error::Dimension(format!("R must be {m}x{m}")));
        }
        for (name, mat) in [("A", &a), ("C", &c), ("Q", &q), ("R", &r)] {
            if !mat.is_finite() {
                return Err(Error::Invalid(format!("{name} has non-finite entries")));
            }
        }
        for (name, cov) in [("Q", &q), ("R", &r)] {
            if cov.asymmetry() > SYMMETRY_TOL {
                return Err(Error::Invalid(format!("{name} is not symmetric")));
            }
            if cov.diag().iter().any(|d| *d < 0.0) {
                return Err(Error::Invalid(format!("{name} has a negative variance")));
            }
        }
        Ok(SsmParams { a, c, q, r })
    }

    /// Univariate model (n = m = 1).
    pub fn scalar(a: f64, c: f64, q: f64, r: f64) -> Result<Self> {
        SsmParams::new(
            Matrix::scalar(a),
            Matrix::scalar(c),
            Matrix::scalar(q),
            Matrix::scalar(r),
        )
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.rows()
    }
}

/// Gaussian belief over the latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    /// n×1
    pub mean: Matrix,
    /// n×n
    pub cov: Matrix,
}

/// Belief over `z_0`; excluded from EM unless explicitly requested.
pub type InitialBelief = GaussianBelief;

impl GaussianBelief {
    pub fn new(mean: &[f64], cov: Matrix) -> Result<Self> {
        let n = mean.len();
        if n == 0 || cov.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "belief mean of length {n} with {}x{} covariance",
                cov.rows(),
                cov.cols()
            )));
        }
        if !cov.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("belief has non-finite entries".into()));
        }
        if cov.asymmetry() > SYMMETRY_TOL || cov.diag().iter().any(|d| *d < -1e-12) {
            return Err(Error::Invalid("belief covariance is not PSD".into()));
        }
        Ok(GaussianBelief {
            mean: Matrix::column(mean),
            cov: cov.symmetrized(),
        })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        GaussianBelief::new(&[mean], Matrix::scalar(var))
    }

    /// Initial belief centred on the first observation with `variance · I`.
    pub fn anchored(first_observation: &[f64], variance: f64) -> Result<Self> {
        GaussianBelief::new(
            first_observation,
            Matrix::identity(first_observation.len()).scale(variance),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.rows()
    }

    pub fn mean_vec(&self) -> Vec<f64> {
        self.mean.as_slice().to_vec()
    }

    /// Per-dimension standard deviations.
    pub fn std_devs(&self) -> Vec<f64> {
        self.cov.diag().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Per-step quantities of the measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStepStats {
    /// Innovation `y_t − C ẑ_{t|t−1}` (m×1).
    pub residual: Matrix,
    /// Innovation covariance `C Σ Cᵀ + R` (m×m).
    pub innovation_cov: Matrix,
    /// Kalman gain (n×m).
    pub gain: Matrix,
}

/// Backward-pass gain `J_t = Σ_{t|t} Aᵀ Σ_{t+1|t}⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothStepStats {
    pub gain: Matrix,
}

fn check_belief(belief: &GaussianBelief, params: &SsmParams) -> Result<()> {
    let n = params.state_dim();
    if belief.mean.shape() != (n, 1) || belief.cov.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "belief of dimension {} for a state of dimension {n}",
            belief.dim()
        )));
    }
    Ok(())
}
