//! Central-difference Jacobians of black-box generators.
//!
//! Column `j` of `J_f(z)` is `(f(z + eps e_j) - f(z - eps e_j)) / (2 eps)`,
//! which costs exactly `2m` generator evaluations. The divisor is the step
//! actually realized in floating point, `(z_j + eps) - (z_j - eps)`, so the
//! identity map differentiates exactly.
//!
//! Truncation error is `eps^2 / 6 * |f'''|` per entry; roundoff is about
//! `u * |f| / eps`. For affine maps only the roundoff term remains.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::generator::GeneratorHandle;
use crate::{Error, Result};

/// Default central-difference step in latent units.
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    epsilon: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { epsilon: DEFAULT_EPSILON }
    }
}

impl FdConfig {
    /// `epsilon` must lie in `(0, 1)`; latent priors are unit-scale.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(FdConfig { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    /// `output_dim x latent_dim`.
    pub entries: DMatrix<f64>,
    pub base_point: Vec<f64>,
    pub epsilon_used: f64,
}

pub fn jacobian(g: &GeneratorHandle, z: &[f64], cfg: &FdConfig) -> Result<JacobianMatrix> {
    g.check_latent(z)?;
    let m = g.latent_dim();
    let n = g.output_dim();
    let eps = cfg.epsilon;
    let mut entries = DMatrix::zeros(n, m);
    let base = DVector::from_column_slice(z);
    for j in 0..m {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[j] += eps;
        minus[j] -= eps;
        let step = plus[j] - minus[j];
        let fp = g.evaluate_vector(&plus);
        let fm = g.evaluate_vector(&minus);
        let column = (fp - fm) / step;
        if column.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteColumn { column: j });
        }
        entries.set_column(j, &column);
    }
    Ok(JacobianMatrix { entries, base_point: z.to_vec(), epsilon_used: eps })
}
