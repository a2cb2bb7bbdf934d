//! Closed-form generators with exact Jacobians.
//!
//! These serve two roles: synthetic stand-ins for trained generators (the
//! memorizer and the smooth interpolator share anchors and centers so they can
//! be compared head to head) and oracles for the finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Default logistic slope of the memorizer's cell transitions.
pub const DEFAULT_SHARPNESS: f64 = 50.0;

#[derive(Debug, Clone)]
pub enum AnalyticGenerator {
    /// `z -> z` on `R^m`.
    Identity {
        dim: usize,
    },
    /// `z -> A z` with `A` of shape `n x m`.
    Linear {
        matrix: DMatrix<f64>,
    },
    /// `z -> (cos z, sin z)`, the unit circle traversed at unit speed.
    CircleEmbed,
    Memorizer(Memorizer),
    SmoothInterpolator(SmoothInterpolator),
}

impl AnalyticGenerator {
    pub fn latent_dim(&self) -> usize {
        match self {
            AnalyticGenerator::Identity { dim } => *dim,
            AnalyticGenerator::Linear { matrix } => matrix.ncols(),
            AnalyticGenerator::CircleEmbed => 1,
            AnalyticGenerator::Memorizer(g) => g.anchors.ncols(),
            AnalyticGenerator::SmoothInterpolator(g) => g.anchors.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            AnalyticGenerator::Identity { dim } => *dim,
            AnalyticGenerator::Linear { matrix } => matrix.nrows(),
            AnalyticGenerator::CircleEmbed => 2,
            AnalyticGenerator::Memorizer(g) => g.centers.ncols(),
            AnalyticGenerator::SmoothInterpolator(g) => g.linear.nrows(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticGenerator::Identity { .. } => "identity",
            AnalyticGenerator::Linear { .. } => "linear",
            AnalyticGenerator::CircleEmbed => "circle-embed",
            AnalyticGenerator::Memorizer(_) => "memorizer",
            AnalyticGenerator::SmoothInterpolator(_) => "smooth-interpolator",
        }
    }

    /// Caller guarantees `z.len() == latent_dim()`.
    pub(crate) fn evaluate(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            AnalyticGenerator::Identity { .. } => z.clone(),
            AnalyticGenerator::Linear { matrix } => matrix * z,
            AnalyticGenerator::CircleEmbed => DVector::from_vec(vec![z[0].cos(), z[0].sin()]),
            AnalyticGenerator::Memorizer(g) => g.evaluate(z),
            AnalyticGenerator::SmoothInterpolator(g) => g.evaluate(z),
        }
    }

    pub(crate) fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        match self {
            AnalyticGenerator::Identity { dim } => DMatrix::identity(*dim, *dim),
            AnalyticGenerator::Linear { matrix } => matrix.clone(),
            AnalyticGenerator::CircleEmbed => DMatrix::from_column_slice(2, 1, &[-z[0].sin(), z[0].cos()]),
            AnalyticGenerator::Memorizer(g) => g.jacobian(z),
            AnalyticGenerator::SmoothInterpolator(g) => g.jacobian(z),
        }
    }

    /// Latent anchors of the memorizer and smooth interpolator.
    pub fn anchors(&self) -> Option<Vec<Vec<f64>>> {
        let a = match self {
            AnalyticGenerator::Memorizer(g) => &g.anchors,
            AnalyticGenerator::SmoothInterpolator(g) => &g.anchors,
            _ => return None,
        };
        Some(rows(a))
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn stack_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidConfig(format!("{name}: empty list")));
    };
    let width = first.len();
    if width == 0 {
        return Err(Error::InvalidConfig(format!("{name}: zero-length vectors")));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::InvalidConfig(format!("{name}[{i}] has length {}, expected {width}", r.len())));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name}[{i}] is not finite")));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

/// Smallest pairwise distance between rows; errors when two rows coincide.
fn min_spacing(anchors: &DMatrix<f64>) -> Result<f64> {
    let k = anchors.nrows();
    let mut best = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = (anchors.row(i) - anchors.row(j)).norm();
            if d == 0.0 {
                return Err(Error::InvalidConfig(format!("anchors {i} and {j} coincide")));
            }
            best = best.min(d);
        }
    }
    Ok(best)
}

fn check_pairing(anchors: &DMatrix<f64>, centers: &DMatrix<f64>) -> Result<()> {
    if anchors.nrows() != centers.nrows() {
        return Err(Error::InvalidConfig(format!("{} anchors but {} centers", anchors.nrows(), centers.nrows())));
    }
    if anchors.nrows() < 2 {
        return Err(Error::InvalidConfig("need at least two anchors".into()));
    }
    Ok(())
}

/// Collapses each latent Voronoi cell onto one output center.
///
/// Cell membership is a softmax over `scale * (a_k . z - |a_k|^2 / 2)`, which
/// equals a softmax over `-scale/2 * |z - a_k|^2`. Across the boundary between
/// two neighboring cells the weight is a logistic ramp in the signed distance
/// to the bisector; `scale` is set so that for the closest anchor pair that
/// ramp has slope `sharpness` per latent unit. Inside a cell the map is
/// exponentially flat, so almost all latent volume lands near a center.
///
/// Latent directions orthogonal to the span of anchor differences never enter
/// the logits, which makes them exactly degenerate.
#[derive(Debug, Clone)]
pub struct Memorizer {
    anchors: DMatrix<f64>,
    centers: DMatrix<f64>,
    sharpness: f64,
    scale: f64,
    offsets: DVector<f64>,
}

impl Memorizer {
    pub fn new(anchors: &[Vec<f64>], centers: &[Vec<f64>], sharpness: f64) -> Result<Self> {
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(Error::InvalidConfig(format!("sharpness must be positive, got {sharpness}")));
        }
        let anchors = stack_rows("anchors", anchors)?;
        let centers = stack_rows("centers", centers)?;
        check_pairing(&anchors, &centers)?;
        let scale = sharpness / min_spacing(&anchors)?;
        let offsets = DVector::from_fn(anchors.nrows(), |k, _| 0.5 * anchors.row(k).norm_squared());
        Ok(Memorizer { anchors, centers, sharpness, scale, offsets })
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    fn weights(&self, z: &DVector<f64>) -> (DVector<f64>, usize) {
        let logits = (&self.anchors * z - &self.offsets) * self.scale;
        let near = logits.imax();
        let top = logits[near];
        let mut w = logits.map(|l| (l - top).exp());
        let total = w.sum();
        w /= total;
        (w, near)
    }

    fn evaluate(&self, z: &DVector<f64>) -> DVector<f64> {
        let (w, near) = self.weights(z);
        // accumulate relative to the dominant center so tiny weights survive rounding
        let base = self.centers.row(near);
        let mut out: DVector<f64> = base.transpose();
        for k in 0..w.len() {
            if k != near && w[k] != 0.0 {
                out += (self.centers.row(k) - base).transpose() * w[k];
            }
        }
        out
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (w, near) = self.weights(z);
        // dw_k/dz = scale * w_k * (a_k - sum_j w_j a_j)
        let mean_anchor = self.anchors.tr_mul(&w);
        let base = self.centers.row(near);
        let mut jac = DMatrix::zeros(self.centers.ncols(), self.anchors.ncols());
        for k in 0..w.len() {
            if k == near || w[k] == 0.0 {
                continue;
            }
            let grad = (self.anchors.row(k).transpose() - &mean_anchor) * (self.scale * w[k]);
            jac += (self.centers.row(k) - base).transpose() * grad.transpose();
        }
        jac
    }
}

/// Near-isometric map through the same centers.
///
/// A similarity transform `b + kappa * Q z` (orthogonal Procrustes fit of
/// anchors onto centers) carries the bulk of the map; Gaussian radial basis
/// functions centered on the anchors absorb the residuals so every anchor
/// lands exactly on its center. When the centers are a similar copy of the
/// anchors the residuals vanish and the map is exactly `kappa` times an
/// isometry.
#[derive(Debug, Clone)]
pub struct SmoothInterpolator {
    anchors: DMatrix<f64>,
    linear: DMatrix<f64>,
    offset: DVector<f64>,
    /// `K x n`: RBF coefficients, one row per anchor.
    coefficients: DMatrix<f64>,
    length_scale: f64,
    kappa: f64,
}

impl SmoothInterpolator {
    pub fn new(anchors: &[Vec<f64>], centers: &[Vec<f64>]) -> Result<Self> {
        let anchors = stack_rows("anchors", anchors)?;
        let centers = stack_rows("centers", centers)?;
        check_pairing(&anchors, &centers)?;
        let length_scale = min_spacing(&anchors)?;
        let k = anchors.nrows();

        let anchor_mean = anchors.row_mean();
        let center_mean = centers.row_mean();
        let mut a_c = anchors.clone();
        let mut c_c = centers.clone();
        for i in 0..k {
            let mut r = a_c.row_mut(i);
            r -= &anchor_mean;
            let mut r = c_c.row_mut(i);
            r -= &center_mean;
        }
        let cross = c_c.tr_mul(&a_c);
        let svd = cross.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(Error::SvdNoConvergence)?;
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let rotation = &u * &v_t;
        let spread = a_c.norm_squared();
        let kappa = svd.singular_values.sum() / spread;
        let linear = rotation * kappa;
        let offset = center_mean.transpose() - &linear * anchor_mean.transpose();

        let fitted = &anchors * linear.transpose();
        let mut residual = centers.clone();
        for i in 0..k {
            let mut r = residual.row_mut(i);
            r -= fitted.row(i) + offset.transpose();
        }
        let kernel =
            DMatrix::from_fn(k, k, |i, j| gaussian((anchors.row(i) - anchors.row(j)).norm_squared(), length_scale));
        let coefficients = kernel
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("RBF kernel matrix is not positive definite".into()))?
            .solve(&residual);

        Ok(SmoothInterpolator { anchors, linear, offset, coefficients, length_scale, kappa })
    }

    /// Scale factor of the similarity part.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn evaluate(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.linear * z + &self.offset;
        for k in 0..self.anchors.nrows() {
            let d2 = (self.anchors.row(k).transpose() - z).norm_squared();
            out += self.coefficients.row(k).transpose() * gaussian(d2, self.length_scale);
        }
        out
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = self.linear.clone();
        let inv_l2 = 1.0 / (self.length_scale * self.length_scale);
        for k in 0..self.anchors.nrows() {
            let diff = z - self.anchors.row(k).transpose();
            let phi = gaussian(diff.norm_squared(), self.length_scale);
            jac -= self.coefficients.row(k).transpose() * diff.transpose() * (phi * inv_l2);
        }
        jac
    }
}

fn gaussian(d2: f64, length_scale: f64) -> f64 {
    (-d2 / (2.0 * length_scale * length_scale)).exp()
}

/// `k` latent anchors spaced 0.5 apart along the first axis of `R^m`,
/// centered on the origin.
pub fn demo_anchors(k: usize, m: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let mut a = vec![0.0; m];
            a[0] = (i as f64 - (k as f64 - 1.0) / 2.0) * 0.5;
            a
        })
        .collect()
}

/// `k` output centers in `R^n` that behave like small images.
///
/// Consecutive centers differ by a pattern with entries of magnitude 0.25
/// (L2 step 2 when `n = 64`) plus a small deterministic wobble, so that
/// output-space nearest neighbors follow the latent ordering.
pub fn demo_centers(k: usize, n: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let shift = i as f64 - (k as f64 - 1.0) / 2.0;
            (0..n)
                .map(|j| {
                    let step = if j % 3 == 0 { -0.25 } else { 0.25 };
                    let wobble = 0.02 * (1.7 * (i as f64 + 1.0) * (j as f64 + 1.0)).sin();
                    shift * step + wobble
                })
                .collect()
        })
        .collect()
}
