//! Singular value decomposition of the Jacobian and what it tells us locally.
//!
//! `J = U S V^T`. Right singular vectors with surviving singular values span
//! the tangent space of the latent manifold; the matching left vectors span
//! the tangent space of the output manifold. The remaining right vectors are
//! collapsed by `f`. Restricted to the manifolds, volumes scale by the product
//! of the surviving singular values.
//!
//! Rank is decided per point: `sigma_i` survives when
//! `sigma_i >= relative_threshold * sigma_1` (ties count as nonzero).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::differentiation::JacobianMatrix;
use crate::{Error, Result};

/// Default relative singular-value threshold.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankPolicy {
    relative_threshold: f64,
    fixed_rank: Option<usize>,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy { relative_threshold: DEFAULT_RELATIVE_THRESHOLD, fixed_rank: None }
    }
}

impl RankPolicy {
    pub fn new(relative_threshold: f64) -> Result<Self> {
        if !(relative_threshold > 0.0 && relative_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "relative threshold must lie in (0, 1), got {relative_threshold}"
            )));
        }
        Ok(RankPolicy { relative_threshold, fixed_rank: None })
    }

    /// Overrides the per-point rank with a fixed value (sensitivity studies).
    pub fn with_fixed_rank(mut self, rank: usize) -> Self {
        self.fixed_rank = Some(rank);
        self
    }

    pub fn relative_threshold(&self) -> f64 {
        self.relative_threshold
    }

    pub fn fixed_rank(&self) -> Option<usize> {
        self.fixed_rank
    }

    /// Rank of a non-increasing list of singular values under this policy.
    pub fn rank_of(&self, singular_values: &[f64]) -> usize {
        if let Some(r) = self.fixed_rank {
            return r.min(singular_values.len());
        }
        match singular_values.first() {
            Some(&top) if top > 0.0 => {
                let cut = self.relative_threshold * top;
                singular_values.iter().take_while(|&&s| s >= cut).count()
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Non-increasing, length `min(m, n)`.
    pub singular_values: Vec<f64>,
    /// `n x min(m, n)`, orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// `m x min(m, n)`, orthonormal columns.
    pub right_vectors: DMatrix<f64>,
    pub rank: usize,
    pub threshold_used: f64,
}

pub fn svd_spectrum(jac: &JacobianMatrix, policy: &RankPolicy) -> Result<SpectrumResult> {
    svd_of_matrix(&jac.entries, policy)
}

pub fn svd_of_matrix(matrix: &DMatrix<f64>, policy: &RankPolicy) -> Result<SpectrumResult> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("matrix has non-finite entries".into()));
    }
    if let Some(r) = policy.fixed_rank {
        let limit = matrix.nrows().min(matrix.ncols());
        if r > limit {
            return Err(Error::InvalidConfig(format!("fixed rank {r} exceeds min(m, n) = {limit}")));
        }
    }
    let svd = matrix.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(Error::SvdNoConvergence)?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let values = svd.singular_values;

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let left_vectors = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let right_vectors = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    let rank = policy.rank_of(&singular_values);

    Ok(SpectrumResult { singular_values, left_vectors, right_vectors, rank, threshold_used: policy.relative_threshold })
}

impl SpectrumResult {
    pub fn top_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// `sum_{i < rank} ln sigma_i`, the log of the volume factor.
    pub fn log_volume_factor(&self) -> Result<f64> {
        if self.rank == 0 {
            return Err(Error::DegeneratePoint);
        }
        let kept = &self.singular_values[..self.rank];
        if kept.iter().any(|&s| s <= 0.0) {
            return Err(Error::DegeneratePoint);
        }
        Ok(kept.iter().map(|s| s.ln()).sum())
    }

    /// Right singular vector `index` as a latent direction.
    pub fn direction(&self, index: usize) -> Option<Vec<f64>> {
        (index < self.right_vectors.ncols()).then(|| self.right_vectors.column(index).iter().copied().collect())
    }
}

/// Product of the surviving singular values.
///
/// Errors on rank-0 spectra: the density there is unbounded.
pub fn volume_factor(s: &SpectrumResult) -> Result<f64> {
    Ok(s.log_volume_factor()?.exp())
}

/// Right singular vectors with surviving singular values, largest first.
pub fn nondegenerate_directions(s: &SpectrumResult) -> Vec<Vec<f64>> {
    (0..s.rank).filter_map(|i| s.direction(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(rows: usize, cols: usize, data: &[f64]) -> SpectrumResult {
        svd_of_matrix(&DMatrix::from_row_slice(rows, cols, data), &RankPolicy::default()).unwrap()
    }

    #[test]
    fn diagonal_case() {
        let s = spectrum(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!((s.singular_values[0] - 2.0).abs() < 1e-15);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-15);
        assert_eq!(s.rank, 2);
        assert!((volume_factor(&s).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let s = spectrum(3, 2, &[0.0; 6]);
        assert!(s.singular_values.iter().all(|&v| v == 0.0));
        assert_eq!(s.rank, 0);
        assert!(matches!(volume_factor(&s), Err(Error::DegeneratePoint)));
        assert!(nondegenerate_directions(&s).is_empty());
    }

    #[test]
    fn tiny_singular_value_is_thresholded_out() {
        let s = spectrum(2, 2, &[3.0, 0.0, 0.0, 1e-12]);
        assert_eq!(s.rank, 1);
        assert!((volume_factor(&s).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn threshold_tie_counts_as_nonzero() {
        let policy = RankPolicy::new(0.5).unwrap();
        assert_eq!(policy.rank_of(&[2.0, 1.0, 0.999]), 2);
    }

    #[test]
    fn embedded_diagonal_volume_is_determinant() {
        let mut data = vec![0.0; 10];
        data[0] = 2.0;
        data[3] = 3.0;
        let s = spectrum(5, 2, &data);
        assert!((volume_factor(&s).unwrap() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn directions_follow_singular_value_order() {
        let s = spectrum(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let dirs = nondegenerate_directions(&s);
        assert_eq!(dirs.len(), 2);
        assert!((dirs[0][1].abs() - 1.0).abs() < 1e-14 && dirs[0][0].abs() < 1e-14);
        assert!((dirs[1][0].abs() - 1.0).abs() < 1e-14 && dirs[1][1].abs() < 1e-14);
    }

    #[test]
    fn single_latent_direction() {
        let s = spectrum(2, 1, &[-0.3, 0.7]);
        let dirs = nondegenerate_directions(&s);
        assert_eq!(dirs.len(), 1);
        assert!((dirs[0][0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_rank_overrides_threshold() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1e-12]);
        let s = svd_of_matrix(&m, &RankPolicy::default().with_fixed_rank(2)).unwrap();
        assert_eq!(s.rank, 2);
        assert!(svd_of_matrix(&m, &RankPolicy::default().with_fixed_rank(3)).is_err());
    }

    #[test]
    fn wide_matrix_shapes() {
        // m > n: more latent than output dimensions
        let s = spectrum(1, 3, &[0.0, 3.0, 4.0]);
        assert_eq!(s.singular_values.len(), 1);
        assert_eq!(s.right_vectors.shape(), (3, 1));
        assert_eq!(s.left_vectors.shape(), (1, 1));
        assert!((s.singular_values[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn policy_bounds() {
        assert!(RankPolicy::new(0.0).is_err());
        assert!(RankPolicy::new(1.0).is_err());
        assert!(RankPolicy::new(1e-3).is_ok());
    }
}
