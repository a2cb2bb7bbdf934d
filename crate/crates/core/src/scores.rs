//! Mean dip and mean decay: two scalar memorization scores.
//!
//! **Dip.** Along the latent segment joining an anchor to its nearest
//! neighbor, `delta = log p~(s_first) + log p~(s_last) - 2 log p~(s_mid)`,
//! where `s_mid` is the sample closest to the arclength midpoint. A positive
//! dip means the density sags between the endpoints.
//!
//! **Decay.** Along the ray through an anchor in its largest singular
//! direction, `eta(r) = (log p~(r) + log p~(-r) - 2 log p~(0)) / r`, with the
//! values at `+-r` interpolated linearly in arclength. Strongly negative
//! values mean the density is peaked on the anchor.
//!
//! Both are second differences of `log p~`, so multiplying the density by a
//! constant leaves them unchanged. The default radii (0.5, 1.0) assume
//! outputs normalized to roughly `[-1, 1]` per coordinate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::InducedDensity;
use crate::differentiation::FdConfig;
use crate::generator::GeneratorHandle;
use crate::paths::{
    decay_profile, path_density, DensityProfile, DEFAULT_RAY_SAMPLES_PER_SIDE, DEFAULT_SEGMENT_SAMPLES, DEFAULT_T_MAX,
};
use crate::spectrum::RankPolicy;
use crate::{Error, Result};

pub const DEFAULT_RADII: [f64; 2] = [0.5, 1.0];

/// Space in which nearest neighbors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMetric {
    /// L2 distance between generator outputs.
    #[default]
    Output,
    /// L2 distance between latent codes.
    Latent,
}

/// Latent codes of known samples and their images under the generator.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub latents: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

impl AnchorSet {
    pub fn new(g: &GeneratorHandle, latents: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != latents.len() {
                return Err(Error::InvalidConfig(format!("{} labels for {} anchors", l.len(), latents.len())));
            }
        }
        let outputs = latents.iter().map(|z| g.evaluate(z)).collect::<Result<Vec<_>>>()?;
        Ok(AnchorSet { latents, outputs, labels })
    }

    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// For each anchor, its nearest other anchor; ties go to the smaller index.
pub fn nearest_neighbor_pairs(anchors: &AnchorSet, metric: NeighborMetric) -> Result<Vec<(usize, usize)>> {
    if anchors.len() < 2 {
        return Err(Error::InvalidConfig("nearest neighbors need at least two anchors".into()));
    }
    let points = match metric {
        NeighborMetric::Output => &anchors.outputs,
        NeighborMetric::Latent => &anchors.latents,
    };
    Ok((0..points.len())
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for (j, p) in points.iter().enumerate() {
                if j != i {
                    let d = l2(&points[i], p);
                    if d < best.0 {
                        best = (d, j);
                    }
                }
            }
            (i, best.1)
        })
        .collect())
}

/// Second difference of `log p~` between the endpoints and the arclength midpoint.
pub fn dip_score(profile: &DensityProfile) -> Result<f64> {
    let last = profile.len() - 1;
    let mid = profile.arclength_midpoint_index();
    for (what, k) in [("first", 0), ("last", last), ("midpoint", mid)] {
        if !profile.is_ok(k) {
            return Err(Error::ScoreUndefined(format!("{what} sample is {}", profile.flags[k].as_str())));
        }
    }
    let lp = &profile.log_densities;
    Ok(lp[0] + lp[last] - 2.0 * lp[mid])
}

/// `eta(r)` for each radius; `None` where the profile does not reach `+-r`
/// or a bracketing sample is flagged.
pub fn decay_terms(profile: &DensityProfile, radii: &[f64]) -> Vec<Option<f64>> {
    let origin = profile.origin;
    if !profile.is_ok(origin) {
        return vec![None; radii.len()];
    }
    let center = profile.log_densities[origin];
    radii
        .iter()
        .map(|&r| {
            let plus = profile.log_density_at(r)?;
            let minus = profile.log_density_at(-r)?;
            Some((plus + minus - 2.0 * center) / r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScore {
    pub mean: f64,
    /// `per_point[i][j] = eta_i(r_j)`.
    pub per_point: Vec<Vec<Option<f64>>>,
    pub n_excluded: usize,
}

/// Mean of `eta_i(r_j)` over points and radii, skipping unreachable terms.
pub fn decay_score(profiles: &[DensityProfile], radii: &[f64]) -> Result<DecayScore> {
    check_radii(radii)?;
    let per_point: Vec<Vec<Option<f64>>> = profiles.iter().map(|p| decay_terms(p, radii)).collect();
    let kept: Vec<f64> = per_point.iter().flatten().flatten().copied().collect();
    let n_excluded = per_point.iter().flatten().filter(|t| t.is_none()).count();
    if kept.is_empty() {
        return Err(Error::ScoreUndefined("no profile reaches any radius".into()));
    }
    Ok(DecayScore { mean: mean(&kept), per_point, n_excluded })
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
        return Err(Error::InvalidConfig("radii must be a non-empty list of positive values".into()));
    }
    Ok(())
}

// summed in index order so the result does not depend on scheduling
fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreConfig {
    pub fd: FdConfig,
    pub policy: RankPolicy,
    pub path_samples: usize,
    pub t_max: f64,
    pub ray_samples_per_side: usize,
    pub neighbor_metric: NeighborMetric,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            fd: FdConfig::default(),
            policy: RankPolicy::default(),
            path_samples: DEFAULT_SEGMENT_SAMPLES,
            t_max: DEFAULT_T_MAX,
            ray_samples_per_side: DEFAULT_RAY_SAMPLES_PER_SIDE,
            neighbor_metric: NeighborMetric::Output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDip {
    pub from: usize,
    pub to: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub dip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDecay {
    pub anchor: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub direction_index: usize,
    pub sigma: Option<f64>,
    pub etas: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub mean_dip: f64,
    pub mean_decay: f64,
    pub per_path_dips: Vec<PathDip>,
    pub per_point_decays: Vec<PointDecay>,
    pub radii_used: Vec<f64>,
    pub n_paths: usize,
    /// Excluded paths plus excluded `(point, radius)` decay terms.
    pub n_excluded: usize,
    pub n_excluded_paths: usize,
    pub n_excluded_decay_terms: usize,
}

/// Pairs each anchor with its nearest neighbor for the dip, and runs a decay
/// ray along each anchor's largest singular direction.
pub fn score_run(
    density: &InducedDensity<'_>,
    anchors: &AnchorSet,
    radii: &[f64],
    cfg: &ScoreConfig,
) -> Result<ScoreReport> {
    if anchors.is_empty() {
        return Err(Error::InvalidConfig("anchor set is empty".into()));
    }
    check_radii(radii)?;
    let pairs = nearest_neighbor_pairs(anchors, cfg.neighbor_metric)?;
    let label = |i: usize| anchors.label(i).map(str::to_string);

    let per_path_dips: Vec<PathDip> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let result = path_density(density, &anchors.latents[i], &anchors.latents[j], cfg.path_samples)
                .and_then(|p| dip_score(&p));
            match result {
                Ok(d) => Ok(PathDip { from: i, to: j, label: label(i), dip: Some(d), excluded_reason: None }),
                Err(e @ (Error::ScoreUndefined(_) | Error::EmptyProfile)) => {
                    Ok(PathDip { from: i, to: j, label: label(i), dip: None, excluded_reason: Some(e.to_string()) })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let per_point_decays: Vec<PointDecay> = (0..anchors.len())
        .into_par_iter()
        .map(|i| {
            let excluded = |reason: String| PointDecay {
                anchor: i,
                label: label(i),
                direction_index: 0,
                sigma: None,
                etas: vec![None; radii.len()],
                excluded_reason: Some(reason),
            };
            match decay_profile(density, &anchors.latents[i], 0, cfg.t_max, cfg.ray_samples_per_side, false) {
                Ok(d) => Ok(PointDecay {
                    anchor: i,
                    label: label(i),
                    direction_index: d.direction_index,
                    sigma: Some(d.sigma),
                    etas: decay_terms(&d.profile, radii),
                    excluded_reason: None,
                }),
                Err(e @ (Error::DegenerateDirection { .. } | Error::EmptyProfile)) => Ok(excluded(e.to_string())),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let dips: Vec<f64> = per_path_dips.iter().filter_map(|p| p.dip).collect();
    let n_excluded_paths = per_path_dips.len() - dips.len();
    if dips.is_empty() {
        return Err(Error::ScoreUndefined("every path was excluded".into()));
    }
    let etas: Vec<f64> = per_point_decays.iter().flat_map(|p| p.etas.iter().flatten().copied()).collect();
    let n_excluded_decay_terms = per_point_decays.len() * radii.len() - etas.len();
    if etas.is_empty() {
        return Err(Error::ScoreUndefined("every decay term was excluded".into()));
    }

    Ok(ScoreReport {
        mean_dip: mean(&dips),
        mean_decay: mean(&etas),
        n_paths: per_path_dips.len(),
        per_path_dips,
        per_point_decays,
        radii_used: radii.to_vec(),
        n_excluded: n_excluded_paths + n_excluded_decay_terms,
        n_excluded_paths,
        n_excluded_decay_terms,
    })
}
