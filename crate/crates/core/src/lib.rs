//! # gendensity
//!
//! Probability densities induced by a generative model on its output manifold,
//! and memorization measures built on them.
//!
//! A generator `f: R^m -> R^n` pushes a latent prior `p(z)` forward onto its
//! image. The image is a low-dimensional submanifold of `R^n`, so the usual
//! change-of-variables formula with `det J` degenerates. Restricted to the
//! manifold, the local volume scale is the product of the nonzero singular
//! values of the Jacobian, which gives
//!
//! ```text
//! log p~(f(z)) = log p(z) - sum_{i <= rank} log sigma_i(J_f(z))
//! ```
//!
//! where `rank` counts singular values at or above `threshold * sigma_1`.
//! `p~` is a density with respect to volume on the image manifold, not on
//! `R^n`; do not integrate it over the ambient space.
//!
//! ## Modules
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`generator`] | Analytic builtins and feed-forward networks loaded from JSON |
//! | [`differentiation`] | Central-difference Jacobians |
//! | [`spectrum`] | SVD, effective rank, volume factor, singular directions |
//! | [`density`] | Latent priors and the induced log-density |
//! | [`paths`] | Density profiles along latent segments and rays, by output arclength |
//! | [`scores`] | Mean dip and mean decay memorization scores |
//! | [`dimension`] | Mean Jacobian spectrum and latent point-cloud SVD |
//! | [`cli`] | The `gendensity` command-line tool |
//!
//! ## Quick Start
//!
//! ```rust
//! use gendensity::density::{induced_log_density, LatentPrior};
//! use gendensity::differentiation::FdConfig;
//! use gendensity::generator::GeneratorHandle;
//! use gendensity::spectrum::RankPolicy;
//!
//! let g = GeneratorHandle::circle_embed();
//! let prior = LatentPrior::standard_normal(1);
//! let v = induced_log_density(&g, &[0.3], &prior, &FdConfig::default(), &RankPolicy::default()).unwrap();
//! // the unit circle is traversed at unit speed, so p~ equals the prior
//! assert!((v.log_p_tilde - prior.log_density(&[0.3]).unwrap()).abs() < 1e-9);
//! ```

pub mod cli;
pub mod density;
pub mod differentiation;
pub mod dimension;
mod error;
pub mod generator;
pub mod paths;
pub mod scores;
pub mod spectrum;

pub use error::{Error, Result};
