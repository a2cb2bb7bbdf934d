//! The generator abstraction `f: R^m -> R^n`.
//!
//! A [`GeneratorHandle`] wraps either an analytic builtin (with a closed-form
//! Jacobian) or a feed-forward network loaded from the JSON interchange
//! format. Handles are immutable after construction and safe to evaluate from
//! many threads; the only shared state is an atomic evaluation counter used to
//! instrument the finite-difference code.

mod analytic;
mod network;

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

pub use analytic::{demo_anchors, demo_centers, AnalyticGenerator, Memorizer, SmoothInterpolator, DEFAULT_SHARPNESS};
pub use network::{Activation, Layer, NetworkSpec, ReferencePair};

use crate::{Error, Result};

/// Number of centers in the `builtin:memorizer` / `builtin:smooth` shorthands.
pub const DEMO_CENTERS: usize = 4;
/// Latent dimension of the shorthand demos.
pub const DEMO_LATENT_DIM: usize = 2;
/// Output dimension of the shorthand demos (8x8 "images").
pub const DEMO_OUTPUT_DIM: usize = 64;

#[derive(Debug, Clone)]
pub enum GeneratorKind {
    Analytic(AnalyticGenerator),
    Network(NetworkSpec),
}

pub struct GeneratorHandle {
    kind: GeneratorKind,
    evaluations: AtomicU64,
}

impl Clone for GeneratorHandle {
    fn clone(&self) -> Self {
        GeneratorHandle::new(self.kind.clone())
    }
}

impl fmt::Debug for GeneratorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorHandle")
            .field("kind", &self.kind_name())
            .field("latent_dim", &self.latent_dim())
            .field("output_dim", &self.output_dim())
            .finish()
    }
}

impl GeneratorHandle {
    pub fn new(kind: GeneratorKind) -> Self {
        GeneratorHandle { kind, evaluations: AtomicU64::new(0) }
    }

    pub fn analytic(g: AnalyticGenerator) -> Self {
        Self::new(GeneratorKind::Analytic(g))
    }

    pub fn network(spec: NetworkSpec) -> Self {
        Self::new(GeneratorKind::Network(spec))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "identity generator needs a positive dimension");
        Self::analytic(AnalyticGenerator::Identity { dim })
    }

    pub fn linear(matrix: DMatrix<f64>) -> Self {
        assert!(matrix.nrows() > 0 && matrix.ncols() > 0, "linear generator needs a non-empty matrix");
        Self::analytic(AnalyticGenerator::Linear { matrix })
    }

    pub fn circle_embed() -> Self {
        Self::analytic(AnalyticGenerator::CircleEmbed)
    }

    pub fn memorizer(anchors: &[Vec<f64>], centers: &[Vec<f64>], sharpness: f64) -> Result<Self> {
        Ok(Self::analytic(AnalyticGenerator::Memorizer(Memorizer::new(anchors, centers, sharpness)?)))
    }

    pub fn smooth_interpolator(anchors: &[Vec<f64>], centers: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::analytic(AnalyticGenerator::SmoothInterpolator(SmoothInterpolator::new(anchors, centers)?)))
    }

    /// Loads a network in the interchange format.
    pub fn load_network(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::network(NetworkSpec::load(path)?))
    }

    /// Builds a generator from a CLI-style source string.
    ///
    /// Accepted forms:
    /// - `builtin:identity:M`
    /// - `builtin:circle`
    /// - `builtin:linear:[[a11,a12],[a21,a22],...]` (inline JSON, rows of `A`)
    /// - `builtin:memorizer[:K[:SHARPNESS]]` and `builtin:smooth[:K]`, built
    ///   on [`demo_anchors`]`(K, 2)` and [`demo_centers`]`(K, 64)`
    /// - a path to a JSON file holding either a network in the interchange
    ///   format or a builtin description such as
    ///   `{"builtin": "memorizer", "anchors": [...], "centers": [...], "sharpness": 50}`
    pub fn from_source(source: &str) -> Result<Self> {
        if let Some(rest) = source.strip_prefix("builtin:") {
            return parse_builtin_shorthand(rest);
        }
        let text = std::fs::read_to_string(source)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Load(format!("{source}: malformed JSON: {e}")))?;
        if value.get("builtin").is_some() {
            let spec: BuiltinFile = serde_json::from_value(value)
                .map_err(|e| Error::InvalidConfig(format!("{source}: bad builtin description: {e}")))?;
            spec.build()
        } else {
            Ok(Self::network(NetworkSpec::from_json_str(&text)?))
        }
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            GeneratorKind::Analytic(g) => g.name(),
            GeneratorKind::Network(_) => "network",
        }
    }

    pub fn latent_dim(&self) -> usize {
        match &self.kind {
            GeneratorKind::Analytic(g) => g.latent_dim(),
            GeneratorKind::Network(n) => n.latent_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            GeneratorKind::Analytic(g) => g.output_dim(),
            GeneratorKind::Network(n) => n.output_dim(),
        }
    }

    pub fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch { expected: self.latent_dim(), got: z.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_latent(z)?;
        Ok(self.evaluate_vector(&DVector::from_column_slice(z)).data.into())
    }

    /// Unchecked evaluation on an nalgebra vector; counts toward the evaluation counter.
    pub(crate) fn evaluate_vector(&self, z: &DVector<f64>) -> DVector<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        match &self.kind {
            GeneratorKind::Analytic(g) => g.evaluate(z),
            GeneratorKind::Network(n) => n.evaluate(z),
        }
    }

    /// Closed-form Jacobian; only analytic builtins have one.
    pub fn analytic_jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_latent(z)?;
        match &self.kind {
            GeneratorKind::Analytic(g) => Ok(g.jacobian(&DVector::from_column_slice(z))),
            GeneratorKind::Network(_) => Err(Error::Unsupported("loaded networks have no closed-form Jacobian".into())),
        }
    }

    /// Latent anchors carried by the memorizer and smooth interpolator.
    pub fn anchors(&self) -> Option<Vec<Vec<f64>>> {
        match &self.kind {
            GeneratorKind::Analytic(g) => g.anchors(),
            GeneratorKind::Network(_) => None,
        }
    }

    pub fn evaluation_count(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluation_count(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "builtin", rename_all = "kebab-case")]
enum BuiltinFile {
    Identity {
        dim: usize,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    #[serde(alias = "circle")]
    CircleEmbed,
    Memorizer {
        anchors: Vec<Vec<f64>>,
        centers: Vec<Vec<f64>>,
        #[serde(default = "default_sharpness")]
        sharpness: f64,
    },
    #[serde(alias = "smooth")]
    SmoothInterpolator {
        anchors: Vec<Vec<f64>>,
        centers: Vec<Vec<f64>>,
    },
}

fn default_sharpness() -> f64 {
    DEFAULT_SHARPNESS
}

impl BuiltinFile {
    fn build(self) -> Result<GeneratorHandle> {
        match self {
            BuiltinFile::Identity { dim } => {
                if dim == 0 {
                    return Err(Error::InvalidConfig("identity dimension must be positive".into()));
                }
                Ok(GeneratorHandle::identity(dim))
            }
            BuiltinFile::Linear { matrix } => Ok(GeneratorHandle::linear(matrix_from_rows(&matrix)?)),
            BuiltinFile::CircleEmbed => Ok(GeneratorHandle::circle_embed()),
            BuiltinFile::Memorizer { anchors, centers, sharpness } => {
                GeneratorHandle::memorizer(&anchors, &centers, sharpness)
            }
            BuiltinFile::SmoothInterpolator { anchors, centers } => {
                GeneratorHandle::smooth_interpolator(&anchors, &centers)
            }
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig("linear matrix must be a non-empty rectangular list of rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn parse_builtin_shorthand(rest: &str) -> Result<GeneratorHandle> {
    let (name, params) = match rest.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (rest, None),
    };
    let bad = |what: &str| Error::InvalidConfig(format!("builtin:{rest}: {what}"));
    let parse_count = |p: Option<&str>, default: usize| -> Result<usize> {
        match p {
            None => Ok(default),
            Some(s) => s.parse::<usize>().map_err(|_| bad("expected an integer")),
        }
    };
    match name {
        "identity" => {
            let dim = parse_count(params, 0)?;
            if dim == 0 {
                return Err(bad("usage builtin:identity:M with M > 0"));
            }
            Ok(GeneratorHandle::identity(dim))
        }
        "circle" | "circle-embed" => Ok(GeneratorHandle::circle_embed()),
        "linear" => {
            let text = params.ok_or_else(|| bad("usage builtin:linear:[[...],...]"))?;
            let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
            Ok(GeneratorHandle::linear(matrix_from_rows(&rows)?))
        }
        "memorizer" => {
            let (k, sharpness) = match params.map(|p| p.split_once(':')) {
                None => (DEMO_CENTERS, DEFAULT_SHARPNESS),
                Some(None) => (parse_count(params, DEMO_CENTERS)?, DEFAULT_SHARPNESS),
                Some(Some((k, s))) => (
                    parse_count(Some(k), DEMO_CENTERS)?,
                    s.parse::<f64>().map_err(|_| bad("expected a sharpness value"))?,
                ),
            };
            GeneratorHandle::memorizer(&demo_anchors(k, DEMO_LATENT_DIM), &demo_centers(k, DEMO_OUTPUT_DIM), sharpness)
        }
        "smooth" | "smooth-interpolator" => {
            let k = parse_count(params, DEMO_CENTERS)?;
            GeneratorHandle::smooth_interpolator(&demo_anchors(k, DEMO_LATENT_DIM), &demo_centers(k, DEMO_OUTPUT_DIM))
        }
        other => Err(Error::InvalidConfig(format!("unknown builtin '{other}'"))),
    }
}
