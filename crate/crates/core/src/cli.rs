//! Command-line front end.
//!
//! Every output embeds the full run configuration: JSON outputs as a
//! `config` object next to `result`, CSV outputs as leading `# key: value`
//! lines. Identical invocations produce byte-identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::density::{InducedDensity, LatentPrior};
use crate::differentiation::FdConfig;
use crate::dimension::{mean_spectrum, pointcloud_svd, suggested_dimension, DEFAULT_SPECTRUM_LENGTH};
use crate::generator::GeneratorHandle;
use crate::paths::{
    decay_profile, path_density, DensityProfile, DEFAULT_RAY_SAMPLES_PER_SIDE, DEFAULT_SEGMENT_SAMPLES, DEFAULT_T_MAX,
};
use crate::scores::{score_run, AnchorSet, NeighborMetric, ScoreConfig, ScoreReport};
use crate::spectrum::{RankPolicy, DEFAULT_RELATIVE_THRESHOLD};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gendensity", version, about = "Induced pushforward density of generative models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    /// Markdown table (score only).
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricArg {
    Output,
    Latent,
}

impl From<MetricArg> for NeighborMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Output => NeighborMetric::Output,
            MetricArg::Latent => NeighborMetric::Latent,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Generator: a network JSON file, a builtin JSON file, or builtin:NAME[:ARGS]
    #[arg(long)]
    pub generator: String,
    /// Latent prior: normal or uniform:LO:HI
    #[arg(long, default_value = "normal", allow_hyphen_values = true)]
    pub prior: String,
    /// Central-difference step
    #[arg(long, default_value_t = crate::differentiation::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Relative singular-value threshold for the per-point rank
    #[arg(long, default_value_t = DEFAULT_RELATIVE_THRESHOLD)]
    pub sv_threshold: f64,
    /// Use this rank everywhere instead of the per-point rank
    #[arg(long)]
    pub fixed_rank: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for random anchor draws
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write output here instead of stdout
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jacobian spectrum, rank and induced log-density at one latent point
    Spectrum(SpectrumArgs),
    /// Density profile along the segment between two latent points
    Path(PathArgs),
    /// Density profile along a right singular direction through a point
    Decay(DecayArgs),
    /// Mean dip and mean decay memorization scores over an anchor set
    Score(ScoreArgs),
    /// Mean Jacobian spectrum and suggested intrinsic dimension
    Dim(DimArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Latent point, comma separated
    #[arg(long, allow_hyphen_values = true, required_unless_present = "anchors", conflicts_with = "anchors")]
    pub point: Option<String>,
    /// Spectra at every point of a JSON file, "generator", or random:N
    #[arg(long)]
    pub anchors: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PathArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
    /// Number of samples on the segment, endpoints included
    #[arg(long, default_value_t = DEFAULT_SEGMENT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecayArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Right singular direction index, 0 = largest
    #[arg(long, default_value_t = 0)]
    pub direction: usize,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
    /// Samples on each side of the origin
    #[arg(long, default_value_t = DEFAULT_RAY_SAMPLES_PER_SIDE)]
    pub ray_samples: usize,
    /// Permit directions at or beyond the local rank
    #[arg(long)]
    pub allow_degenerate: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Anchor latents: a JSON file, "generator" for the generator's own anchors, or random:N
    #[arg(long, default_value = "generator")]
    pub anchors: String,
    /// Second generator scored on the same anchors (adds a row to the table)
    #[arg(long)]
    pub baseline: Option<String>,
    /// Comma-separated output-space radii for the decay score
    #[arg(long, default_value = "0.5,1")]
    pub radii: String,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_RAY_SAMPLES_PER_SIDE)]
    pub ray_samples: usize,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Output)]
    pub neighbor_metric: MetricArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DimArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Latent points: a JSON file, "generator", or random:N
    #[arg(long, default_value = "random:1000")]
    pub anchors: String,
    /// Number of leading singular values to average [default: min(20, m, n)]
    #[arg(long)]
    pub k: Option<usize>,
    /// Also report singular values of the centered latent point cloud
    #[arg(long)]
    pub pointcloud: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AnchorEntry {
    Plain(Vec<f64>),
    Labeled {
        z: Vec<f64>,
        #[serde(default)]
        label: Option<String>,
    },
}

/// Latent points and optional labels.
pub type LabeledPoints = (Vec<Vec<f64>>, Option<Vec<String>>);

/// Parses a comma-separated vector.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidConfig(format!("bad number '{t}' in '{text}'")))
        })
        .collect()
}

/// Reads anchors from a JSON file holding `[[..], ..]` or `[{"z": [..], "label": ".."}, ..]`.
pub fn load_anchor_file(path: &Path) -> Result<LabeledPoints> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Load(format!("cannot read anchors {}: {e}", path.display())))?;
    let entries: Vec<AnchorEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Load(format!("bad anchor file {}: {e}", path.display())))?;
    let any_labeled = entries.iter().any(|e| matches!(e, AnchorEntry::Labeled { label: Some(_), .. }));
    let mut latents = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    for e in entries {
        match e {
            AnchorEntry::Plain(z) => {
                latents.push(z);
                labels.push(String::new());
            }
            AnchorEntry::Labeled { z, label } => {
                latents.push(z);
                labels.push(label.unwrap_or_default());
            }
        }
    }
    Ok((latents, any_labeled.then_some(labels)))
}

/// Resolves an anchor source: `generator`, `random:N`, or a file path.
pub fn resolve_anchors(source: &str, g: &GeneratorHandle, prior: &LatentPrior, seed: u64) -> Result<LabeledPoints> {
    if source == "generator" {
        let latents = g
            .anchors()
            .ok_or_else(|| Error::InvalidConfig(format!("generator '{}' has no built-in anchors", g.kind_name())))?;
        return Ok((latents, None));
    }
    if let Some(count) = source.strip_prefix("random:") {
        let n: usize = count.parse().map_err(|_| Error::InvalidConfig(format!("bad anchor count '{count}'")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(((0..n).map(|_| prior.sample(&mut rng)).collect(), None));
    }
    load_anchor_file(Path::new(source))
}

struct Setup {
    generator: GeneratorHandle,
    prior: LatentPrior,
    fd: FdConfig,
    policy: RankPolicy,
}

impl Setup {
    fn new(common: &CommonArgs) -> Result<Self> {
        Self::with_generator(common, &common.generator)
    }

    fn with_generator(common: &CommonArgs, source: &str) -> Result<Self> {
        let generator = GeneratorHandle::from_source(source)?;
        let prior = LatentPrior::parse(&common.prior, generator.latent_dim())?;
        let fd = FdConfig::new(common.epsilon)?;
        let mut policy = RankPolicy::new(common.sv_threshold)?;
        if let Some(r) = common.fixed_rank {
            policy = policy.with_fixed_rank(r);
        }
        Ok(Setup { generator, prior, fd, policy })
    }

    fn density(&self) -> Result<InducedDensity<'_>> {
        InducedDensity::new(&self.generator, self.prior, self.fd, self.policy)
    }

    fn metadata(&self) -> Value {
        json!({
            "generator_kind": self.generator.kind_name(),
            "latent_dim": self.generator.latent_dim(),
            "output_dim": self.generator.output_dim(),
            "prior": self.prior,
            "rank_mode": match self.policy.fixed_rank() {
                Some(_) => "fixed",
                None => "per_point",
            },
        })
    }
}

fn config_value<T: Serialize>(command: &str, args: &T, setup: &Setup) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "metadata": setup.metadata(),
    })
}

fn json_output(config: Value, result: Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&json!({ "config": config, "result": result }))?;
    s.push('\n');
    Ok(s)
}

fn csv_header(config: &Value) -> String {
    let mut out = String::new();
    if let Some(map) = config.as_object() {
        for (k, v) in map {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
    out
}

fn ensure_not_table(format: Format, command: &str) -> Result<()> {
    if format == Format::Table {
        return Err(Error::InvalidConfig(format!("table format is only available for score, not {command}")));
    }
    Ok(())
}

fn profile_result(profile: &DensityProfile) -> Value {
    // +inf does not survive JSON; the flag column says why the value is missing
    let log_densities: Vec<Option<f64>> = profile.log_densities.iter().map(|v| v.is_finite().then_some(*v)).collect();
    json!({
        "shape": profile.shape,
        "t": profile.times,
        "s": profile.arclengths,
        "log_density": log_densities,
        "flags": profile.flags,
        "origin": profile.origin,
        "total_arclength": profile.total_arclength(),
    })
}

struct PointSpectrum {
    z: Vec<f64>,
    singular_values: Vec<f64>,
    directions: Vec<Vec<f64>>,
    rank: usize,
    log_prior: f64,
    log_volume_factor: Option<f64>,
    log_p_tilde: Option<f64>,
}

fn point_spectrum(density: &InducedDensity<'_>, z: Vec<f64>) -> Result<PointSpectrum> {
    density.generator.check_latent(&z)?;
    let spectrum = density.spectrum(&z)?;
    let log_prior = density.prior.log_density(&z)?;
    let (log_volume_factor, log_p_tilde) = match spectrum.log_volume_factor() {
        Ok(v) => (Some(v), Some(log_prior - v)),
        Err(Error::DegeneratePoint) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(PointSpectrum {
        directions: (0..spectrum.right_vectors.ncols()).filter_map(|i| spectrum.direction(i)).collect(),
        singular_values: spectrum.singular_values,
        rank: spectrum.rank,
        z,
        log_prior,
        log_volume_factor,
        log_p_tilde,
    })
}

impl PointSpectrum {
    fn to_json(&self) -> Value {
        json!({
            "point": self.z,
            "singular_values": self.singular_values,
            "rank": self.rank,
            "right_vectors": self.directions,
            "log_prior": self.log_prior,
            "log_volume_factor": self.log_volume_factor,
            "log_p_tilde": self.log_p_tilde,
            "degenerate": self.log_p_tilde.is_none(),
        })
    }
}

fn run_spectrum(a: &SpectrumArgs) -> Result<String> {
    ensure_not_table(a.common.format, "spectrum")?;
    let setup = Setup::new(&a.common)?;
    let density = setup.density()?;
    let config = config_value("spectrum", a, &setup);
    let threshold = setup.policy.relative_threshold();
    match (&a.point, &a.anchors) {
        (Some(point), _) => {
            let p = point_spectrum(&density, parse_vector(point)?)?;
            match a.common.format {
                Format::Json => {
                    let mut result = p.to_json();
                    result["threshold_used"] = json!(threshold);
                    json_output(config, result)
                }
                _ => {
                    let mut out = csv_header(&config);
                    let _ = writeln!(out, "# rank: {}", p.rank);
                    let _ = writeln!(out, "# log_p_tilde: {}", fmt_opt(p.log_p_tilde));
                    out.push_str("index,sigma,kept\n");
                    for (i, s) in p.singular_values.iter().enumerate() {
                        let _ = writeln!(out, "{},{},{}", i + 1, s, i < p.rank);
                    }
                    Ok(out)
                }
            }
        }
        (None, Some(source)) => {
            let (latents, labels) = resolve_anchors(source, &setup.generator, &setup.prior, a.common.seed)?;
            if latents.is_empty() {
                return Err(Error::InvalidConfig("anchor set is empty".into()));
            }
            let points: Vec<PointSpectrum> =
                latents.into_iter().map(|z| point_spectrum(&density, z)).collect::<Result<_>>()?;
            let label = |i: usize| labels.as_ref().map(|l| l[i].clone()).unwrap_or_default();
            match a.common.format {
                Format::Json => {
                    let list: Vec<Value> = points
                        .iter()
                        .enumerate()
                        .map(|(i, p)| {
                            let mut v = p.to_json();
                            if labels.is_some() {
                                v["label"] = json!(label(i));
                            }
                            v
                        })
                        .collect();
                    json_output(config, json!({ "threshold_used": threshold, "points": list }))
                }
                _ => {
                    let mut out = csv_header(&config);
                    out.push_str("point,label,index,sigma,kept,log_p_tilde\n");
                    for (i, p) in points.iter().enumerate() {
                        for (j, s) in p.singular_values.iter().enumerate() {
                            let _ = writeln!(
                                out,
                                "{},{},{},{},{},{}",
                                i,
                                label(i),
                                j + 1,
                                s,
                                j < p.rank,
                                fmt_opt(p.log_p_tilde)
                            );
                        }
                    }
                    Ok(out)
                }
            }
        }
        (None, None) => Err(Error::InvalidConfig("spectrum needs --point or --anchors".into())),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_path(a: &PathArgs) -> Result<String> {
    ensure_not_table(a.common.format, "path")?;
    let setup = Setup::new(&a.common)?;
    let z1 = parse_vector(&a.from)?;
    let z2 = parse_vector(&a.to)?;
    let profile = path_density(&setup.density()?, &z1, &z2, a.samples)?;
    let config = config_value("path", a, &setup);
    match a.common.format {
        Format::Json => json_output(config, profile_result(&profile)),
        _ => Ok(csv_header(&config) + &profile.to_csv()),
    }
}

fn run_decay(a: &DecayArgs) -> Result<String> {
    ensure_not_table(a.common.format, "decay")?;
    let setup = Setup::new(&a.common)?;
    let z0 = parse_vector(&a.point)?;
    setup.generator.check_latent(&z0)?;
    let decay = decay_profile(&setup.density()?, &z0, a.direction, a.t_max, a.ray_samples, a.allow_degenerate)?;
    let config = config_value("decay", a, &setup);
    match a.common.format {
        Format::Json => {
            let mut result = profile_result(&decay.profile);
            result["direction_index"] = json!(decay.direction_index);
            result["direction"] = json!(decay.direction);
            result["sigma"] = json!(decay.sigma);
            result["rank_at_origin"] = json!(decay.rank);
            json_output(config, result)
        }
        _ => {
            let mut out = csv_header(&config);
            let _ = writeln!(out, "# sigma: {}", decay.sigma);
            let _ = writeln!(out, "# rank_at_origin: {}", decay.rank);
            out.push_str(&decay.profile.to_csv());
            Ok(out)
        }
    }
}

fn parse_radii(text: &str) -> Result<Vec<f64>> {
    let radii = parse_vector(text)?;
    if radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidConfig(format!("radii must be positive, got '{text}'")));
    }
    Ok(radii)
}

fn score_one(
    setup: &Setup,
    latents: &[Vec<f64>],
    labels: &Option<Vec<String>>,
    radii: &[f64],
    cfg: &ScoreConfig,
) -> Result<ScoreReport> {
    let anchors = AnchorSet::new(&setup.generator, latents.to_vec(), labels.clone())?;
    score_run(&setup.density()?, &anchors, radii, cfg)
}

fn run_score(a: &ScoreArgs) -> Result<String> {
    let setup = Setup::new(&a.common)?;
    let (latents, labels) = resolve_anchors(&a.anchors, &setup.generator, &setup.prior, a.common.seed)?;
    let radii = parse_radii(&a.radii)?;
    let cfg = ScoreConfig {
        fd: setup.fd,
        policy: setup.policy,
        path_samples: a.samples,
        t_max: a.t_max,
        ray_samples_per_side: a.ray_samples,
        neighbor_metric: a.neighbor_metric.into(),
    };
    let mut rows = vec![(a.common.generator.clone(), score_one(&setup, &latents, &labels, &radii, &cfg)?)];
    if let Some(baseline) = &a.baseline {
        let other = Setup::with_generator(&a.common, baseline)?;
        if other.generator.latent_dim() != setup.generator.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: setup.generator.latent_dim(),
                got: other.generator.latent_dim(),
            });
        }
        rows.push((baseline.clone(), score_one(&other, &latents, &labels, &radii, &cfg)?));
    }
    let config = config_value("score", a, &setup);
    match a.common.format {
        Format::Json => {
            let models: Vec<Value> =
                rows.iter().map(|(name, report)| json!({ "model": name, "report": report })).collect();
            json_output(config, json!({ "anchors": latents, "models": models }))
        }
        Format::Csv => {
            let mut out = csv_header(&config);
            out.push_str("model,mean_dip,mean_decay,n_paths,n_excluded\n");
            for (name, r) in &rows {
                let _ = writeln!(out, "{},{},{},{},{}", name, r.mean_dip, r.mean_decay, r.n_paths, r.n_excluded);
            }
            Ok(out)
        }
        Format::Table => {
            let mut out = String::from("| Model | Mean Dip | Mean Decay |\n|---|---:|---:|\n");
            for (name, r) in &rows {
                let _ = writeln!(out, "| {} | {:.3} | {:.3} |", name, r.mean_dip, r.mean_decay);
            }
            Ok(out)
        }
    }
}

fn run_dim(a: &DimArgs) -> Result<String> {
    ensure_not_table(a.common.format, "dim")?;
    let setup = Setup::new(&a.common)?;
    let (latents, _) = resolve_anchors(&a.anchors, &setup.generator, &setup.prior, a.common.seed)?;
    let limit = setup.generator.latent_dim().min(setup.generator.output_dim());
    let k = a.k.unwrap_or(DEFAULT_SPECTRUM_LENGTH.min(limit));
    let summary = mean_spectrum(&setup.generator, &latents, k, &setup.fd, &setup.policy, false)?;
    let cloud = if a.pointcloud { Some(pointcloud_svd(&latents)?) } else { None };
    let cloud_dim = cloud.as_ref().map(|c| suggested_dimension(c, setup.policy.relative_threshold()));
    let config = config_value("dim", a, &setup);
    match a.common.format {
        Format::Json => json_output(
            config,
            json!({
                "mean_spectrum": summary,
                "pointcloud_singular_values": cloud,
                "pointcloud_suggested_dimension": cloud_dim,
                "dimension_label": "heuristic",
            }),
        ),
        _ => {
            let mut out = csv_header(&config);
            let _ = writeln!(out, "# suggested_dimension (heuristic): {}", summary.suggested_dimension);
            let _ = writeln!(out, "# n_points: {}", summary.n_points);
            let _ = writeln!(out, "# n_skipped: {}", summary.n_skipped);
            if let Some(c) = &cloud {
                let values: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "# pointcloud_singular_values: {}", values.join(" "));
                let _ = writeln!(out, "# pointcloud_suggested_dimension (heuristic): {}", cloud_dim.unwrap_or(0));
            }
            out.push_str(&summary.to_csv());
            Ok(out)
        }
    }
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Spectrum(a) => a.common.out.as_ref(),
        Command::Path(a) => a.common.out.as_ref(),
        Command::Decay(a) => a.common.out.as_ref(),
        Command::Score(a) => a.common.out.as_ref(),
        Command::Dim(a) => a.common.out.as_ref(),
    }
}

/// Runs a parsed command and returns its rendered output.
pub fn render(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Spectrum(a) => run_spectrum(a),
        Command::Path(a) => run_path(a),
        Command::Decay(a) => run_decay(a),
        Command::Score(a) => run_score(a),
        Command::Dim(a) => run_dim(a),
    }
}

/// Runs a parsed command, writing to `--out` or stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let text = render(cli)?;
    match out_path(&cli.command) {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
