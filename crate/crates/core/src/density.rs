//! Latent priors and the induced log-density on the output manifold.
//!
//! All arithmetic is in log space: products of dozens of singular values
//! leave the representable range quickly.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::differentiation::{jacobian, FdConfig};
use crate::generator::GeneratorHandle;
use crate::spectrum::{svd_spectrum, RankPolicy, SpectrumResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentPrior {
    /// Independent `N(0, 1)` coordinates.
    StandardNormal { dim: usize },
    /// Independent `U(lo, hi)` coordinates.
    UniformBox { dim: usize, lo: f64, hi: f64 },
}

impl LatentPrior {
    pub fn standard_normal(dim: usize) -> Self {
        LatentPrior::StandardNormal { dim }
    }

    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!("uniform box needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(LatentPrior::UniformBox { dim, lo, hi })
    }

    /// Parses `normal` or `uniform:LO:HI` for a latent space of dimension `dim`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            ["normal"] | ["standard_normal"] => Ok(Self::standard_normal(dim)),
            ["uniform", lo, hi] => {
                let lo = lo.parse().map_err(|_| Error::InvalidConfig(format!("bad prior bound '{lo}'")))?;
                let hi = hi.parse().map_err(|_| Error::InvalidConfig(format!("bad prior bound '{hi}'")))?;
                Self::uniform_box(dim, lo, hi)
            }
            _ => Err(Error::InvalidConfig(format!("unknown prior '{text}' (use normal or uniform:LO:HI)"))),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            LatentPrior::StandardNormal { dim } | LatentPrior::UniformBox { dim, .. } => dim,
        }
    }

    /// Draws one latent vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match *self {
            LatentPrior::StandardNormal { dim } => (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            LatentPrior::UniformBox { dim, lo, hi } => (0..dim).map(|_| rng.random_range(lo..hi)).collect(),
        }
    }

    /// Natural log of the prior density; `-inf` outside a uniform box.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        Ok(match *self {
            LatentPrior::StandardNormal { dim } => {
                let sq: f64 = z.iter().map(|v| v * v).sum();
                -0.5 * sq - 0.5 * dim as f64 * (2.0 * PI).ln()
            }
            LatentPrior::UniformBox { dim, lo, hi } => {
                if z.iter().all(|&v| (lo..=hi).contains(&v)) {
                    -(dim as f64) * (hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
    }
}

/// `log p~ = log_prior - log_volume_factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogDensityValue {
    pub log_p_tilde: f64,
    pub log_prior: f64,
    pub log_volume_factor: f64,
    pub rank_used: usize,
}

/// Induced log-density at `f(z)`, with respect to volume on the image manifold.
pub fn induced_log_density(
    g: &GeneratorHandle,
    z: &[f64],
    prior: &LatentPrior,
    fd: &FdConfig,
    policy: &RankPolicy,
) -> Result<LogDensityValue> {
    InducedDensity::new(g, *prior, *fd, *policy)?.at(z).map(|(v, _)| v)
}

/// A generator paired with the settings needed to evaluate its induced density.
#[derive(Debug, Clone, Copy)]
pub struct InducedDensity<'a> {
    pub generator: &'a GeneratorHandle,
    pub prior: LatentPrior,
    pub fd: FdConfig,
    pub policy: RankPolicy,
}

impl<'a> InducedDensity<'a> {
    pub fn new(generator: &'a GeneratorHandle, prior: LatentPrior, fd: FdConfig, policy: RankPolicy) -> Result<Self> {
        if prior.dim() != generator.latent_dim() {
            return Err(Error::DimensionMismatch { expected: generator.latent_dim(), got: prior.dim() });
        }
        Ok(InducedDensity { generator, prior, fd, policy })
    }

    pub fn spectrum(&self, z: &[f64]) -> Result<SpectrumResult> {
        svd_spectrum(&jacobian(self.generator, z, &self.fd)?, &self.policy)
    }

    /// Log-density at `f(z)` and the spectrum it was computed from.
    pub fn at(&self, z: &[f64]) -> Result<(LogDensityValue, SpectrumResult)> {
        let log_prior = self.prior.log_density(z)?;
        let spectrum = self.spectrum(z)?;
        let log_volume_factor = spectrum.log_volume_factor()?;
        let value = LogDensityValue {
            log_p_tilde: log_prior - log_volume_factor,
            log_prior,
            log_volume_factor,
            rank_used: spectrum.rank,
        };
        Ok((value, spectrum))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    const LN_2PI: f64 = 1.8378770664093453;

    #[test]
    fn standard_normal_at_origin() {
        let p = LatentPrior::standard_normal(2);
        assert!((p.log_density(&[0.0, 0.0]).unwrap() + LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn uniform_box_inside_and_outside() {
        let p = LatentPrior::uniform_box(1, -1.0, 1.0).unwrap();
        assert!((p.log_density(&[0.5]).unwrap() + 2f64.ln()).abs() < 1e-15);
        assert_eq!(p.log_density(&[1.5]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn high_dimensional_normal_closed_form() {
        let p = LatentPrior::standard_normal(100);
        let z = vec![1.0; 100];
        let expected = -50.0 - 50.0 * LN_2PI;
        assert!((p.log_density(&z).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn prior_rejects_wrong_length() {
        assert!(LatentPrior::standard_normal(2).log_density(&[0.0]).is_err());
    }

    #[test]
    fn prior_parsing() {
        assert_eq!(LatentPrior::parse("normal", 3).unwrap(), LatentPrior::standard_normal(3));
        assert_eq!(LatentPrior::parse("uniform:-1:1", 2).unwrap(), LatentPrior::uniform_box(2, -1.0, 1.0).unwrap());
        assert!(LatentPrior::parse("uniform:1:-1", 2).is_err());
        assert!(LatentPrior::parse("cauchy", 2).is_err());
    }

    #[test]
    fn identity_under_normal_prior() {
        let g = GeneratorHandle::identity(2);
        let v = induced_log_density(
            &g,
            &[0.0, 0.0],
            &LatentPrior::standard_normal(2),
            &FdConfig::default(),
            &RankPolicy::default(),
        )
        .unwrap();
        assert!((v.log_p_tilde + LN_2PI).abs() < 1e-12);
        assert_eq!(v.rank_used, 2);
    }

    #[test]
    fn constant_stretch_under_uniform_prior() {
        let g = GeneratorHandle::linear(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        let prior = LatentPrior::uniform_box(2, -1.0, 1.0).unwrap();
        let v = induced_log_density(&g, &[0.2, -0.4], &prior, &FdConfig::default(), &RankPolicy::default()).unwrap();
        let expected = -(4f64.ln()) - 6f64.ln();
        assert!((v.log_p_tilde - expected).abs() < 1e-9);
        assert_eq!(v.log_p_tilde, v.log_prior - v.log_volume_factor);
    }

    #[test]
    fn rank_zero_point_is_an_error() {
        let g = GeneratorHandle::linear(DMatrix::zeros(3, 2));
        let r = induced_log_density(
            &g,
            &[0.0, 0.0],
            &LatentPrior::standard_normal(2),
            &FdConfig::default(),
            &RankPolicy::default(),
        );
        assert!(matches!(r, Err(Error::DegeneratePoint)));
    }

    #[test]
    fn prior_dimension_must_match_generator() {
        let g = GeneratorHandle::identity(2);
        assert!(InducedDensity::new(&g, LatentPrior::standard_normal(3), FdConfig::default(), RankPolicy::default())
            .is_err());
    }
}
