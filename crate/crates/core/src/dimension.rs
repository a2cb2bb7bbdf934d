//! Intrinsic-dimension diagnostics.
//!
//! Two SVD-based views: the index-wise mean of Jacobian spectra over many
//! latent points (how many directions the generator actually uses), and the
//! singular values of a centered latent point cloud (how many directions the
//! latent codes occupy). `suggested_dimension` is a heuristic: the number of
//! mean singular values at or above `relative_threshold * mean sigma_1`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::differentiation::{jacobian, FdConfig};
use crate::generator::GeneratorHandle;
use crate::spectrum::{svd_of_matrix, RankPolicy};
use crate::{Error, Result};

/// Number of leading singular values averaged by default.
pub const DEFAULT_SPECTRUM_LENGTH: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub mean_singular_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_point_spectra: Option<Vec<Vec<f64>>>,
    pub suggested_dimension: usize,
    pub relative_threshold: f64,
    pub n_points: usize,
    pub n_skipped: usize,
}

impl SpectrumSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,mean_sigma\n");
        for (i, s) in self.mean_singular_values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, s);
        }
        out
    }
}

/// Count of leading values at or above `relative_threshold` times the first.
pub fn suggested_dimension(values: &[f64], relative_threshold: f64) -> usize {
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().take_while(|&&v| v >= relative_threshold * top).count(),
        _ => 0,
    }
}

/// Index-wise mean of the first `k` Jacobian singular values over `points`.
///
/// Points whose Jacobian is not finite are skipped and counted.
pub fn mean_spectrum(
    g: &GeneratorHandle,
    points: &[Vec<f64>],
    k: usize,
    fd: &FdConfig,
    policy: &RankPolicy,
    keep_per_point: bool,
) -> Result<SpectrumSummary> {
    let limit = g.latent_dim().min(g.output_dim());
    if k == 0 || k > limit {
        return Err(Error::InvalidConfig(format!("spectrum length must lie in 1..={limit}, got {k}")));
    }
    for p in points {
        g.check_latent(p)?;
    }
    let spectra: Vec<Option<Vec<f64>>> = points
        .par_iter()
        .map(|z| match jacobian(g, z, fd) {
            Ok(j) => svd_of_matrix(&j.entries, policy).map(|s| Some(s.singular_values[..k].to_vec())),
            Err(Error::NonFiniteColumn { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let kept: Vec<Vec<f64>> = spectra.into_iter().flatten().collect();
    let n_skipped = points.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::InvalidConfig("no point produced a finite Jacobian".into()));
    }
    let mut mean = vec![0.0; k];
    for s in &kept {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= kept.len() as f64;
    }
    Ok(SpectrumSummary {
        suggested_dimension: suggested_dimension(&mean, policy.relative_threshold()),
        mean_singular_values: mean,
        per_point_spectra: keep_per_point.then_some(kept.clone()),
        relative_threshold: policy.relative_threshold(),
        n_points: kept.len(),
        n_skipped,
    })
}

/// Singular values of the mean-centered `count x m` matrix of latent codes.
pub fn pointcloud_svd(latents: &[Vec<f64>]) -> Result<Vec<f64>> {
    if latents.len() < 2 {
        return Err(Error::InvalidConfig("point cloud needs at least two points".into()));
    }
    let m = latents[0].len();
    if let Some(bad) = latents.iter().find(|z| z.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
    }
    let count = latents.len();
    let mut data = DMatrix::from_fn(count, m, |i, j| latents[i][j]);
    let mean = data.row_mean();
    for i in 0..count {
        let mut r = data.row_mut(i);
        r -= &mean;
    }
    Ok(svd_of_matrix(&data, &RankPolicy::default())?.singular_values)
}
