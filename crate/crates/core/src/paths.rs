//! Density profiles along latent paths, parametrized by output-space arclength.
//!
//! A latent path `gamma(t)` is sampled at times `t_k`, mapped through the
//! generator, and reparametrized by the cumulative L2 chord length `s_k` of
//! the output samples. Each sample carries the induced log-density at
//! `gamma(t_k)`. Two path shapes are supported:
//!
//! - segments `(1 - t) z1 + t z2`, `t in [0, 1]`, with `s = 0` at `z1`;
//! - rays `z0 + t v`, `t in [-t_max, t_max]`, with `s = 0` at `z0` and negative
//!   arclength for `t < 0`. `v` is a right singular vector at `z0`.
//!
//! Samples where no singular value survives the rank threshold are kept and
//! flagged [`SampleFlag::Degenerate`] (the density is unbounded there); samples
//! whose log-density is not finite for any other reason are flagged
//! [`SampleFlag::Overflow`]. Flagged samples appear in emitted data but never in
//! score arithmetic.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::InducedDensity;
use crate::{Error, Result};

/// Default sample count along a segment.
pub const DEFAULT_SEGMENT_SAMPLES: usize = 101;
/// Default samples on each side of the ray origin (step `t_max / 60 = 0.05`).
pub const DEFAULT_RAY_SAMPLES_PER_SIDE: usize = 60;
/// Default ray half-extent, three prior standard deviations.
pub const DEFAULT_T_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFlag {
    Ok,
    Degenerate,
    Overflow,
}

impl SampleFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleFlag::Ok => "ok",
            SampleFlag::Degenerate => "degenerate",
            SampleFlag::Overflow => "overflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathShape {
    Segment,
    Ray,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath {
    shape: PathShape,
    start: Vec<f64>,
    /// Segment: `z2 - z1`. Ray: the direction `v`.
    velocity: Vec<f64>,
    times: Vec<f64>,
    origin: usize,
}

impl LatentPath {
    /// `samples` uniform times on `[0, 1]`.
    pub fn segment(z1: &[f64], z2: &[f64], samples: usize) -> Result<Self> {
        if z1.len() != z2.len() {
            return Err(Error::DimensionMismatch { expected: z1.len(), got: z2.len() });
        }
        if samples < 2 {
            return Err(Error::InvalidConfig(format!("a segment needs at least 2 samples, got {samples}")));
        }
        let last = (samples - 1) as f64;
        let times = (0..samples).map(|k| k as f64 / last).collect();
        let velocity = z1.iter().zip(z2).map(|(a, b)| b - a).collect();
        Ok(LatentPath { shape: PathShape::Segment, start: z1.to_vec(), velocity, times, origin: 0 })
    }

    /// Times `t_max * k / per_side` for `k = -per_side..=per_side`.
    pub fn ray(z0: &[f64], direction: &[f64], t_max: f64, per_side: usize) -> Result<Self> {
        if z0.len() != direction.len() {
            return Err(Error::DimensionMismatch { expected: z0.len(), got: direction.len() });
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidConfig(format!("t_max must be positive, got {t_max}")));
        }
        if per_side == 0 {
            return Err(Error::InvalidConfig("a ray needs at least one sample per side".into()));
        }
        let n = per_side as i64;
        let times = (-n..=n).map(|k| t_max * k as f64 / per_side as f64).collect();
        Ok(LatentPath {
            shape: PathShape::Ray,
            start: z0.to_vec(),
            velocity: direction.to_vec(),
            times,
            origin: per_side,
        })
    }

    pub fn shape(&self) -> PathShape {
        self.shape
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        match self.shape {
            // (1 - t) z1 + t z2 evaluated directly so that t = 1 lands exactly on z2
            PathShape::Segment => {
                self.start.iter().zip(&self.velocity).map(|(a, d)| (1.0 - t) * a + t * (a + d)).collect()
            }
            PathShape::Ray => self.start.iter().zip(&self.velocity).map(|(a, v)| a + t * v).collect(),
        }
    }
}

/// Samples before reparametrization: times, output points, log-densities.
#[derive(Debug, Clone)]
pub struct RawSamples {
    pub shape: PathShape,
    pub times: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
    pub log_densities: Vec<f64>,
    pub flags: Vec<SampleFlag>,
    /// Index whose arclength is pinned to zero.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub shape: PathShape,
    pub times: Vec<f64>,
    pub arclengths: Vec<f64>,
    /// Natural log of the induced density; `+inf` at degenerate samples.
    pub log_densities: Vec<f64>,
    pub flags: Vec<SampleFlag>,
    pub origin: usize,
}

/// Cumulative chord lengths `|x_{k+1} - x_k|`, signed away from `origin`.
pub fn arclength_reparametrize(raw: RawSamples) -> Result<DensityProfile> {
    let n = raw.times.len();
    if n < 2 {
        return Err(Error::InvalidConfig("arclength needs at least two samples".into()));
    }
    if raw.outputs.len() != n || raw.log_densities.len() != n || raw.flags.len() != n || raw.origin >= n {
        return Err(Error::InvalidConfig("raw sample arrays disagree in length".into()));
    }
    let chord = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt() };
    let mut s = vec![0.0; n];
    for k in raw.origin + 1..n {
        s[k] = s[k - 1] + chord(&raw.outputs[k - 1], &raw.outputs[k]);
    }
    for k in (0..raw.origin).rev() {
        s[k] = s[k + 1] - chord(&raw.outputs[k], &raw.outputs[k + 1]);
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOutput);
    }
    Ok(DensityProfile {
        shape: raw.shape,
        times: raw.times,
        arclengths: s,
        log_densities: raw.log_densities,
        flags: raw.flags,
        origin: raw.origin,
    })
}

fn sample_path(density: &InducedDensity<'_>, path: &LatentPath) -> Result<DensityProfile> {
    density.generator.check_latent(&path.start)?;
    let samples: Vec<Result<(Vec<f64>, f64, SampleFlag)>> = path
        .times
        .par_iter()
        .map(|&t| {
            let z = path.point(t);
            let x = density.generator.evaluate(&z)?;
            let (log_p, flag) = match density.at(&z) {
                Ok((v, _)) if v.log_p_tilde.is_finite() => (v.log_p_tilde, SampleFlag::Ok),
                Ok((v, _)) => (v.log_p_tilde, SampleFlag::Overflow),
                Err(Error::DegeneratePoint) => (f64::INFINITY, SampleFlag::Degenerate),
                Err(Error::NonFiniteColumn { .. }) | Err(Error::SvdNoConvergence) | Err(Error::InvalidConfig(_)) => {
                    (f64::NAN, SampleFlag::Overflow)
                }
                Err(e) => return Err(e),
            };
            Ok((x, log_p, flag))
        })
        .collect();

    let mut outputs = Vec::with_capacity(samples.len());
    let mut log_densities = Vec::with_capacity(samples.len());
    let mut flags = Vec::with_capacity(samples.len());
    for s in samples {
        let (x, lp, flag) = s?;
        outputs.push(x);
        log_densities.push(lp);
        flags.push(flag);
    }
    if !flags.contains(&SampleFlag::Ok) {
        return Err(Error::EmptyProfile);
    }
    arclength_reparametrize(RawSamples {
        shape: path.shape,
        times: path.times.clone(),
        outputs,
        log_densities,
        flags,
        origin: path.origin,
    })
}

/// Density along the latent segment from `z1` to `z2`.
pub fn path_density(density: &InducedDensity<'_>, z1: &[f64], z2: &[f64], samples: usize) -> Result<DensityProfile> {
    if samples < 3 {
        return Err(Error::InvalidConfig(format!("path needs at least 3 samples, got {samples}")));
    }
    density.generator.check_latent(z1)?;
    density.generator.check_latent(z2)?;
    sample_path(density, &LatentPath::segment(z1, z2, samples)?)
}

/// Density along the ray `z0 + t v`, `t` in `[-t_max, t_max]`, with `s = 0` at `z0`.
pub fn ray_density(
    density: &InducedDensity<'_>,
    z0: &[f64],
    direction: &[f64],
    t_max: f64,
    per_side: usize,
) -> Result<DensityProfile> {
    density.generator.check_latent(z0)?;
    sample_path(density, &LatentPath::ray(z0, direction, t_max, per_side)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayProfile {
    pub profile: DensityProfile,
    pub direction_index: usize,
    pub direction: Vec<f64>,
    /// Singular value of the chosen direction at the ray origin.
    pub sigma: f64,
    /// Rank at the ray origin.
    pub rank: usize,
}

/// Density along the ray through `z0` in right singular direction `direction_index`.
///
/// Directions at or beyond the rank at `z0` are refused unless
/// `allow_degenerate` is set; along them `f` is (nearly) constant and the
/// profile carries no information about concentration.
pub fn decay_profile(
    density: &InducedDensity<'_>,
    z0: &[f64],
    direction_index: usize,
    t_max: f64,
    per_side: usize,
    allow_degenerate: bool,
) -> Result<DecayProfile> {
    let spectrum = density.spectrum(z0)?;
    let available = spectrum.right_vectors.ncols();
    if direction_index >= spectrum.rank && !allow_degenerate {
        return Err(Error::DegenerateDirection { index: direction_index, rank: spectrum.rank });
    }
    let direction =
        spectrum.direction(direction_index).ok_or(Error::DirectionOutOfRange { index: direction_index, available })?;
    let profile = ray_density(density, z0, &direction, t_max, per_side)?;
    Ok(DecayProfile {
        profile,
        direction_index,
        direction,
        sigma: spectrum.singular_values[direction_index],
        rank: spectrum.rank,
    })
}

impl DensityProfile {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_ok(&self, k: usize) -> bool {
        self.flags[k] == SampleFlag::Ok
    }

    pub fn total_arclength(&self) -> f64 {
        self.arclengths[self.len() - 1] - self.arclengths[0]
    }

    /// Index whose arclength is closest to `(s_first + s_last) / 2`; ties go to the earlier sample.
    pub fn arclength_midpoint_index(&self) -> usize {
        let target = 0.5 * (self.arclengths[0] + self.arclengths[self.len() - 1]);
        let mut best = 0;
        for k in 1..self.len() {
            if (self.arclengths[k] - target).abs() < (self.arclengths[best] - target).abs() {
                best = k;
            }
        }
        best
    }

    /// Log-density at arclength `s`, linear in `s` between bracketing samples.
    ///
    /// `None` when `s` lies outside the profile or a bracketing sample is flagged.
    pub fn log_density_at(&self, s: f64) -> Option<f64> {
        let arc = &self.arclengths;
        if let Some(k) = arc.iter().position(|&v| v == s) {
            return self.is_ok(k).then(|| self.log_densities[k]);
        }
        let k = arc.windows(2).position(|w| w[0] <= s && s <= w[1])?;
        if !(self.is_ok(k) && self.is_ok(k + 1)) {
            return None;
        }
        let w = (s - arc[k]) / (arc[k + 1] - arc[k]);
        Some((1.0 - w) * self.log_densities[k] + w * self.log_densities[k + 1])
    }

    /// The same samples traversed in the opposite direction.
    ///
    /// Segments restart at `s = 0`; rays keep `s = 0` at the origin and flip sign.
    pub fn reversed(&self) -> DensityProfile {
        let n = self.len();
        let rev = |v: &[f64]| -> Vec<f64> { v.iter().rev().copied().collect() };
        let (times, arclengths) = match self.shape {
            PathShape::Segment => {
                let last = self.arclengths[n - 1];
                (
                    self.times.iter().rev().map(|t| 1.0 - t).collect(),
                    self.arclengths.iter().rev().map(|s| last - s).collect(),
                )
            }
            PathShape::Ray => {
                (self.times.iter().rev().map(|t| -t).collect(), self.arclengths.iter().rev().map(|s| -s).collect())
            }
        };
        DensityProfile {
            shape: self.shape,
            times,
            arclengths,
            log_densities: rev(&self.log_densities),
            flags: self.flags.iter().rev().copied().collect(),
            origin: n - 1 - self.origin,
        }
    }

    /// CSV rows `t,s,log_density,flag` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,log_density,flag\n");
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.times[k],
                self.arclengths[k],
                self.log_densities[k],
                self.flags[k].as_str()
            );
        }
        out
    }
}
