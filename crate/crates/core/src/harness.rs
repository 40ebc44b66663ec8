//! Declarative experiment runner: TOML configs, CSV tables, a JSON run
//! manifest and plot-data emission.

use crate::biot_savart::{
    convolution_decay_probe, ray_decay_exponent_3d, ray_decay_exponent_along, Flow2D, Scalar3D,
    SphereQuadrature,
};
use crate::cutoff_geometry::build_cutoff;
use crate::error::Error;
use crate::field_core::{norm2, norm3, DomainSpec, Point2, Point3, Shape};
use crate::norms_rates::{
    alpha, beta, fit_rate, fit_rate_with, l2_norm, proposition51_report, FitSemantics, ItemVerdict,
    NormOptions, RateFit, Region, ALPHA_3D, BETA_3D,
};
use crate::ns_disk::{theorem11_experiment, ConvergenceSurface, SurfaceOptions};
use crate::reference_flows::{catalog, lookup, FlowCase, PlanarFlow, ReferenceFlow};
use crate::truncation::{
    orthogonality_residuals, project_w_helmholtz, project_w_vorticity, truncate_2d,
    truncate_2d_mean_zero, truncate_3d, VelocityFn,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;
/// Default output directory when neither the config nor `--out` names one.
pub const OUT_DIR_ENV: &str = "VVLAB_OUT";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "truncation-rates-2d")]
    TruncationRates2d,
    #[serde(rename = "truncation-rates-3d")]
    TruncationRates3d,
    DecayProbe,
    Lemma81Probe,
    ProjectionEquivalence,
    Prop51Report,
    Theorem11Surface,
    NonDiskFailure,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::TruncationRates2d,
        ExperimentKind::TruncationRates3d,
        ExperimentKind::DecayProbe,
        ExperimentKind::Lemma81Probe,
        ExperimentKind::ProjectionEquivalence,
        ExperimentKind::Prop51Report,
        ExperimentKind::Theorem11Surface,
        ExperimentKind::NonDiskFailure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TruncationRates2d => "truncation-rates-2d",
            ExperimentKind::TruncationRates3d => "truncation-rates-3d",
            ExperimentKind::DecayProbe => "decay-probe",
            ExperimentKind::Lemma81Probe => "lemma81-probe",
            ExperimentKind::ProjectionEquivalence => "projection-equivalence",
            ExperimentKind::Prop51Report => "prop51-report",
            ExperimentKind::Theorem11Surface => "theorem11-surface",
            ExperimentKind::NonDiskFailure => "non-disk-failure",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::TruncationRates2d => {
                "L² rates of u − T_R u and its gradient on Ω_R (2D)"
            }
            ExperimentKind::TruncationRates3d => {
                "L² rates of u − T_R u and its gradient on B_R (3D)"
            }
            ExperimentKind::DecayProbe => {
                "ray-fitted far-field decay exponents of v, ∇v, ψ_v (or u in 3D)"
            }
            ExperimentKind::Lemma81Probe => {
                "collar norm growth of the Newtonian potential of 1_{|x|≤1}"
            }
            ExperimentKind::ProjectionEquivalence => {
                "vorticity vs Helmholtz route for W_R, orthogonality battery"
            }
            ExperimentKind::Prop51Report => {
                "all measurable a-priori truncation estimates over an R sweep"
            }
            ExperimentKind::Theorem11Surface => {
                "viscous disk error surface over (ν, R) with envelope fit"
            }
            ExperimentKind::NonDiskFailure => {
                "truncation error on an ellipse with m ≠ 0 (mean-zero ψ_σ)"
            }
        }
    }

    fn needs_rate_grid(self) -> bool {
        !matches!(
            self,
            ExperimentKind::ProjectionEquivalence | ExperimentKind::DecayProbe
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Seeds the probe directions.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

impl FlowSection {
    pub fn all(&self) -> Vec<String> {
        self.name
            .iter()
            .cloned()
            .chain(self.names.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_shape")]
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

fn default_shape() -> String {
    "disk".into()
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            shape: default_shape(),
            a: None,
            b: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSection {
    /// Radial cells across the core for the viscous solver.
    #[serde(default = "d_nodes")]
    pub nodes: usize,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Rays per decay fit.
    #[serde(default = "d_rays")]
    pub rays: usize,
    /// Radial, polar and azimuthal nodes of the 3D potential quadrature.
    #[serde(default = "d_sphere")]
    pub sphere: [usize; 3],
}

fn d_nodes() -> usize {
    256
}
fn d_steps() -> usize {
    1024
}
fn d_samples() -> usize {
    32
}
fn d_rays() -> usize {
    16
}
fn d_sphere() -> [usize; 3] {
    [24, 24, 48]
}

impl Default for ResolutionSection {
    fn default() -> Self {
        Self {
            nodes: d_nodes(),
            steps: d_steps(),
            samples: d_samples(),
            rays: d_rays(),
            sphere: d_sphere(),
        }
    }
}

impl ResolutionSection {
    /// Scale node and step counts; steps stay a multiple of the sample count.
    pub fn scaled(&self, x: f64) -> Self {
        let s = |n: usize| ((n as f64 * x).round() as usize).max(1);
        let samples = self.samples.max(1);
        let steps = (s(self.steps).div_ceil(samples)) * samples;
        Self {
            nodes: s(self.nodes).max(128),
            steps,
            samples,
            rays: self.rays,
            sphere: [s(self.sphere[0]), s(self.sphere[1]), s(self.sphere[2])],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// One experiment per file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub resolution: ResolutionSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug)]
pub enum HarnessError {
    Config { field: String, reason: String },
    Numeric { context: String, source: Error },
    Io(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config { field, reason } => {
                write!(f, "config error in {field}: {reason}")
            }
            HarnessError::Numeric { context, source } => write!(f, "{context}: {source}"),
            HarnessError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for HarnessError {}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Io(_) => EXIT_USAGE,
            HarnessError::Numeric { .. } => EXIT_NUMERIC,
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Core errors that stem from the inputs map to usage errors, the rest to
/// numeric failures.
fn wrap(context: &str) -> impl Fn(Error) -> HarnessError + '_ {
    move |e| match e {
        Error::InvalidInput { field, reason } => config_err(field, reason),
        Error::Unknown { .. } => config_err("flow.name", e.to_string()),
        Error::NonzeroMassOnNonDisk
        | Error::BelowFarField { .. }
        | Error::SupportExceeded { .. } => config_err("grid", e.to_string()),
        other => HarnessError::Numeric {
            context: context.to_string(),
            source: other,
        },
    }
}

pub type HResult<T> = std::result::Result<T, HarnessError>;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> HResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("unknown field") || msg.contains("missing field"))
                .unwrap_or("config")
                .to_string();
            config_err(&field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind
    }

    pub fn flows(&self) -> HResult<Vec<ReferenceFlow>> {
        self.flow
            .all()
            .iter()
            .map(|n| lookup(n).map_err(|e| config_err("flow.name", e.to_string())))
            .collect()
    }

    pub fn domain(&self) -> HResult<DomainSpec> {
        match self.domain.shape.as_str() {
            "disk" => Ok(DomainSpec::disk(1.0)),
            "ball" => Ok(DomainSpec::ball(1.0)),
            "ellipse" => {
                let a = self
                    .domain
                    .a
                    .ok_or_else(|| config_err("domain.a", "ellipse needs semi-axis a"))?;
                let b = self
                    .domain
                    .b
                    .ok_or_else(|| config_err("domain.b", "ellipse needs semi-axis b"))?;
                DomainSpec::new(Shape::Ellipse { a, b }, 1.0)
                    .map_err(|e| config_err("domain", e.to_string()))
            }
            other => Err(config_err(
                "domain.shape",
                format!("unknown shape '{other}' (disk, ellipse, ball)"),
            )),
        }
    }

    /// θ from the config, else 1 for case I and 1/3 for case II.
    pub fn theta(&self, flow: &ReferenceFlow) -> f64 {
        self.grid.theta.unwrap_or(match flow.case() {
            FlowCase::II => 1.0 / 3.0,
            _ => 1.0,
        })
    }

    pub fn validate(&self) -> HResult<()> {
        let kind = self.kind();
        if let Some(t) = self.grid.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(config_err(
                    "grid.theta",
                    format!("θ must lie in [0, 1], got {t}"),
                ));
            }
        }
        let flows = self.flows()?;
        if flows.is_empty() && kind != ExperimentKind::Lemma81Probe {
            return Err(config_err("flow.name", "no flow given"));
        }
        if flows.len() > 1 && kind != ExperimentKind::ProjectionEquivalence {
            return Err(config_err(
                "flow.names",
                "only projection-equivalence takes several flows",
            ));
        }
        let domain = self.domain()?;
        check_geometric("grid.r", &self.grid.r)?;
        let positive_nu: Vec<f64> = self.grid.nu.iter().cloned().filter(|&v| v != 0.0).collect();
        if self.grid.nu.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(config_err("grid.nu", "ν must be finite and non-negative"));
        }
        check_geometric("grid.nu", &positive_nu)?;
        if self.grid.r.is_empty() {
            return Err(config_err("grid.r", "empty R grid"));
        }
        if kind.needs_rate_grid() && self.grid.r.len() < 4 {
            return Err(config_err(
                "grid.r",
                "rate fits need at least 4 values of R",
            ));
        }
        if self.grid.r.iter().any(|&r| r < 1.0) {
            return Err(config_err("grid.r", "R must be at least 1"));
        }
        if let Some(t) = self.grid.t {
            if !(t > 0.0) {
                return Err(config_err("grid.t", "T must be positive"));
            }
        }
        let res = &self.resolution;
        if res.samples < 32 {
            return Err(config_err(
                "resolution.samples",
                "need at least 32 time samples",
            ));
        }
        if res.nodes < 128 {
            return Err(config_err(
                "resolution.nodes",
                "need at least 128 radial cells",
            ));
        }
        if res.rays == 0 || res.sphere.iter().any(|&n| n == 0) {
            return Err(config_err(
                "resolution",
                "ray and sphere counts must be positive",
            ));
        }
        let dim = |f: &ReferenceFlow| f.dimension();
        match kind {
            ExperimentKind::TruncationRates3d => {
                if flows.iter().any(|f| dim(f) != 3) || domain.shape != Shape::Ball {
                    return Err(config_err(
                        "flow.name",
                        "3D truncation needs a 3D flow on the ball",
                    ));
                }
            }
            ExperimentKind::TruncationRates2d
            | ExperimentKind::NonDiskFailure
            | ExperimentKind::ProjectionEquivalence => {
                if flows.iter().any(|f| dim(f) != 2) || domain.shape == Shape::Ball {
                    return Err(config_err(
                        "flow.name",
                        "needs a planar flow on a planar domain",
                    ));
                }
            }
            ExperimentKind::Theorem11Surface => {
                let f = &flows[0];
                if f.planar().is_none_or(|p| p.radial.is_none()) {
                    return Err(config_err(
                        "flow.name",
                        "the viscous disk experiment needs a centred radial flow",
                    ));
                }
                if domain.shape != Shape::Disk {
                    return Err(config_err(
                        "domain.shape",
                        "the viscous experiment runs on the disk",
                    ));
                }
                if positive_nu.len() < 4 && !positive_nu.is_empty() {
                    return Err(config_err(
                        "grid.nu",
                        "the ν marginal needs at least 4 positive values",
                    ));
                }
                if self.grid.nu.is_empty() {
                    return Err(config_err("grid.nu", "empty ν grid"));
                }
                if res.steps % res.samples != 0 {
                    return Err(config_err(
                        "resolution.steps",
                        "must be a multiple of resolution.samples",
                    ));
                }
            }
            _ => {}
        }
        if kind == ExperimentKind::NonDiskFailure {
            if !matches!(domain.shape, Shape::Ellipse { .. }) {
                return Err(config_err(
                    "domain.shape",
                    "the failure mode is measured on an ellipse",
                ));
            }
            if flows[0].mass() == 0.0 {
                return Err(config_err("flow.name", "the failure mode needs m ≠ 0"));
            }
        }
        Ok(())
    }
}

fn check_geometric(field: &str, values: &[f64]) -> HResult<()> {
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(config_err(field, "grid values must be positive"));
    }
    if values.len() < 2 {
        return Ok(());
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = v[1] / v[0];
    if q < 2.0 * (1.0 - 1e-12) {
        return Err(config_err(field, format!("grid ratio {q} is below 2")));
    }
    for w in v.windows(2) {
        if ((w[1] / w[0]) / q - 1.0).abs() > 1e-6 {
            return Err(config_err(field, "grid is not geometric"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: RateFit,
}

/// A scalar invariant check with its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=".into(),
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">=".into(),
            threshold,
            pass: value >= threshold,
        }
    }

    pub fn holds(name: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            relation: "==".into(),
            threshold: 1.0,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
    /// Quantities that vanish identically (their rates are vacuous).
    pub vacuous: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<ConvergenceSurface>,
    /// CSV files written next to the manifest.
    pub outputs: Vec<String>,
    pub pass: bool,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_VERDICT
        }
    }

    pub fn fit(&self, name: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.name == name).map(|f| &f.fit)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A CSV table held in memory until the run is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> HResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r)
                .map_err(|e| HarnessError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))
    }
}

/// Shortest round-trip formatting; identical inputs give identical bytes.
fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Result of an experiment before it touches the file system.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub tables: Vec<Table>,
    pub seconds: f64,
}

#[derive(Default)]
struct Collect {
    fits: Vec<NamedFit>,
    checks: Vec<Check>,
    vacuous: Vec<String>,
    surface: Option<ConvergenceSurface>,
    tables: Vec<Table>,
}

impl Collect {
    fn fit(
        &mut self,
        name: &str,
        points: &[(f64, f64)],
        predicted: f64,
        semantics: FitSemantics,
        tol: Option<f64>,
    ) -> HResult<()> {
        let res = match tol {
            Some(t) => fit_rate_with(points, predicted, semantics, t),
            None => fit_rate(points, predicted, semantics),
        };
        match res {
            Ok(fit) => self.fits.push(NamedFit {
                name: name.into(),
                fit,
            }),
            Err(Error::DegenerateFit(_)) => self.vacuous.push(name.into()),
            Err(e) => return Err(wrap(name)(e)),
        }
        Ok(())
    }
}

/// Run one experiment in memory.
pub fn execute(config: &ExperimentConfig) -> HResult<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let mut c = Collect::default();
    match config.kind() {
        ExperimentKind::TruncationRates2d => truncation_rates_2d(config, &mut c)?,
        ExperimentKind::TruncationRates3d => truncation_rates_3d(config, &mut c)?,
        ExperimentKind::DecayProbe => decay_probe(config, &mut c)?,
        ExperimentKind::Lemma81Probe => lemma81_probe(config, &mut c)?,
        ExperimentKind::ProjectionEquivalence => projection_equivalence(config, &mut c)?,
        ExperimentKind::Prop51Report => prop51(config, &mut c)?,
        ExperimentKind::Theorem11Surface => surface(config, &mut c)?,
        ExperimentKind::NonDiskFailure => non_disk_failure(config, &mut c)?,
    }
    let pass = c.fits.iter().all(|f| f.fit.pass) && c.checks.iter().all(|k| k.pass);
    let mut echo = config.clone();
    echo.output.dir = None;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: echo,
        fits: c.fits,
        checks: c.checks,
        vacuous: c.vacuous,
        surface: c.surface,
        outputs: c.tables.iter().map(|t| t.file.clone()).collect(),
        pass,
    };
    Ok(RunOutput {
        manifest,
        tables: c.tables,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Output directory: explicit, else the config's, else `$VVLAB_OUT`, else `./vvlab-out`.
pub fn resolve_out_dir(explicit: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("vvlab-out"))
}

/// Write CSVs and the manifest; wall-clock time goes to a sidecar so the
/// manifest itself stays reproducible.
pub fn write_output(out: &RunOutput, dir: &Path) -> HResult<PathBuf> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for t in &out.tables {
        std::fs::write(dir.join(&t.file), t.to_csv()?).map_err(io)?;
    }
    let path = dir.join(MANIFEST_FILE);
    let json =
        serde_json::to_string_pretty(&out.manifest).map_err(|e| HarnessError::Io(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(io)?;
    let timings = serde_json::json!({ "total_seconds": out.seconds });
    std::fs::write(dir.join(TIMINGS_FILE), timings.to_string() + "\n").map_err(io)?;
    Ok(path)
}

/// Validate, execute and persist.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> HResult<RunManifest> {
    let out = execute(config)?;
    write_output(&out, out_dir)?;
    Ok(out.manifest)
}

/// As [`run`], on a dedicated pool of `jobs` threads.
pub fn run_with_jobs(
    config: &ExperimentConfig,
    out_dir: &Path,
    jobs: Option<usize>,
) -> HResult<RunManifest> {
    match jobs {
        None => run(config, out_dir),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| config_err("--jobs", e.to_string()))?;
            pool.install(|| run(config, out_dir))
        }
    }
}

fn planar<'a>(flow: &'a ReferenceFlow) -> HResult<&'a PlanarFlow> {
    flow.planar()
        .ok_or_else(|| config_err("flow.name", "expected a planar flow"))
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// (‖u − T_R u‖, ‖∇(u − T_R u)‖) in L²(Ω_R), both supported in Σ_R.
pub fn truncation_errors_2d(
    flow: &PlanarFlow,
    domain: &DomainSpec,
    theta: f64,
    r: f64,
    mean_zero: bool,
) -> crate::Result<(f64, f64)> {
    let cut = build_cutoff(domain, theta, r)?;
    let t = if mean_zero {
        truncate_2d_mean_zero(flow, &cut)?
    } else {
        truncate_2d(flow, &cut)?
    };
    let w = cut.collar_width();
    let opts = NormOptions {
        absolute_tolerance: 1e-14,
        ..NormOptions::with_breaks(&[r - w, r - 0.5 * w])
    };
    let collar = Region::collar(&cut);
    let e = l2_norm(|p: &[f64]| t.error([p[0], p[1]]).to_vec(), &collar, &opts)?;
    let g = l2_norm(
        |p: &[f64]| {
            let m = t.error_gradient([p[0], p[1]]);
            vec![m[0][0], m[0][1], m[1][0], m[1][1]]
        },
        &collar,
        &opts,
    )?;
    Ok((e, g))
}

pub fn truncation_errors_3d(
    flow: &crate::reference_flows::HillVortex3D,
    r: f64,
) -> crate::Result<(f64, f64)> {
    let cut = build_cutoff(&DomainSpec::ball(1.0), 1.0, r)?;
    let t = truncate_3d(flow, &cut)?;
    let opts = NormOptions {
        absolute_tolerance: 1e-14,
        ..NormOptions::with_breaks(&[r * (1.0 - cut.delta1), r * (1.0 - 0.5 * cut.delta1)])
    };
    let collar = Region::collar(&cut);
    let e = l2_norm(
        |p: &[f64]| t.error([p[0], p[1], p[2]]).to_vec(),
        &collar,
        &opts,
    )?;
    let g = l2_norm(
        |p: &[f64]| {
            t.error_gradient([p[0], p[1], p[2]])
                .iter()
                .flat_map(|r| r.iter().cloned())
                .collect()
        },
        &collar,
        &opts,
    )?;
    Ok((e, g))
}

fn rates_table(c: &mut Collect, rs: &[f64], rows: &[(f64, f64)], file: &str) {
    let mut t = Table::new(file, &["R", "error_l2", "error_grad_l2"]);
    for (r, (e, g)) in rs.iter().zip(rows) {
        t.push(vec![num(*r), num(*e), num(*g)]);
    }
    c.tables.push(t);
}

fn truncation_rates_2d(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    use rayon::prelude::*;
    let flow = &cfg.flows()?[0];
    let p = planar(flow)?;
    let domain = cfg.domain()?;
    let theta = cfg.theta(flow);
    let rs = sorted(&cfg.grid.r);
    let rows: Vec<(f64, f64)> = rs
        .par_iter()
        .map(|&r| truncation_errors_2d(p, &domain, theta, r, false))
        .collect::<crate::Result<_>>()
        .map_err(wrap("truncation-rates-2d"))?;
    let zm = p.is_zero_mass();
    let e: Vec<(f64, f64)> = rs.iter().zip(&rows).map(|(r, v)| (*r, v.0)).collect();
    let g: Vec<(f64, f64)> = rs.iter().zip(&rows).map(|(r, v)| (*r, v.1)).collect();
    c.fit(
        "alpha",
        &e,
        -alpha(theta, zm),
        FitSemantics::UpperBound,
        None,
    )?;
    c.fit("beta", &g, -beta(theta, zm), FitSemantics::UpperBound, None)?;
    rates_table(c, &rs, &rows, "rates.csv");
    Ok(())
}

fn truncation_rates_3d(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    use rayon::prelude::*;
    let flow = &cfg.flows()?[0];
    let hill = flow
        .hill()
        .ok_or_else(|| config_err("flow.name", "expected a 3D flow"))?;
    let rs = sorted(&cfg.grid.r);
    let rows: Vec<(f64, f64)> = rs
        .par_iter()
        .map(|&r| truncation_errors_3d(hill, r))
        .collect::<crate::Result<_>>()
        .map_err(wrap("truncation-rates-3d"))?;
    let e: Vec<(f64, f64)> = rs.iter().zip(&rows).map(|(r, v)| (*r, v.0)).collect();
    let g: Vec<(f64, f64)> = rs.iter().zip(&rows).map(|(r, v)| (*r, v.1)).collect();
    c.fit("alpha", &e, -ALPHA_3D, FitSemantics::UpperBound, None)?;
    c.fit("beta", &g, -BETA_3D, FitSemantics::UpperBound, None)?;
    rates_table(c, &rs, &rows, "rates.csv");
    Ok(())
}

fn seeded_angles(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
}

fn seeded_directions(seed: u64, n: usize) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let t: f64 = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).sqrt();
            [s * t.cos(), s * t.sin(), z]
        })
        .collect()
}

/// Far-field exponent thresholds: v ≤ −2, ∇v ≤ −3, ψ_v ≤ −1 (2D) and
/// u ≤ −2 (3D), each with the 0.1 slack.
fn decay_probe(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    let flow = &cfg.flows()?[0];
    let rays = cfg.resolution.rays;
    let seed = cfg.experiment.seed;
    let r0 = flow.r0().max(1.0);
    let mut t = Table::new("decay.csv", &["quantity", "exponent", "threshold", "pass"]);
    let mut record = |c: &mut Collect, name: &str, v: f64, thr: f64| {
        if v == f64::NEG_INFINITY || v.is_nan() {
            c.vacuous.push(name.into());
            return;
        }
        let k = Check::at_most(name, v, thr);
        t.push(vec![name.into(), num(v), num(thr), k.pass.to_string()]);
        c.checks.push(k);
    };
    if let Some(p) = flow.planar() {
        let angles = seeded_angles(seed, rays);
        let gamma = p.mass / (2.0 * PI);
        let v = |x: Point2| {
            let u = p.velocity(x);
            let r2 = x[0] * x[0] + x[1] * x[1];
            [u[0] + gamma * x[1] / r2, u[1] - gamma * x[0] / r2]
        };
        let grad_v = |x: Point2| {
            let g = p.stream().jet(x).velocity_gradient();
            // ∇ of the point-vortex field γ(−y, x)/r²
            let (xx, yy) = (x[0], x[1]);
            let r4 = (xx * xx + yy * yy).powi(2);
            let s = [
                [2.0 * gamma * xx * yy / r4, gamma * (yy * yy - xx * xx) / r4],
                [
                    gamma * (yy * yy - xx * xx) / r4,
                    -2.0 * gamma * xx * yy / r4,
                ],
            ];
            let d = [
                [g[0][0] - s[0][0], g[0][1] - s[0][1]],
                [g[1][0] - s[1][0], g[1][1] - s[1][1]],
            ];
            (d[0][0].powi(2) + d[0][1].powi(2) + d[1][0].powi(2) + d[1][1].powi(2)).sqrt()
        };
        let psi_v = |x: Point2| p.stream().psi(x) - gamma * norm2(x).ln();
        let e_v = ray_decay_exponent_along(|x| norm2(v(x)), r0, &angles);
        let e_g = ray_decay_exponent_along(grad_v, r0, &angles);
        let e_p = ray_decay_exponent_along(psi_v, r0, &angles);
        record(c, "v", e_v, -2.0 + 0.1);
        record(c, "grad_v", e_g, -3.0 + 0.1);
        record(c, "psi_v", e_p, -1.0 + 0.1);
    } else if let Some(h) = flow.hill() {
        let dirs = seeded_directions(seed, rays);
        let e = ray_decay_exponent_3d(|x| norm3(h.velocity(x)), r0, &dirs);
        record(c, "u", e, -2.0 + 0.1);
    }
    c.tables.push(t);
    Ok(())
}

/// Exponents of ‖E∗f‖_{L²}, ‖∇E∗f‖_{L²}, ‖E∗f‖_∞, ‖∇E∗f‖_∞ over the ball
/// collar for f = 1_{|x|≤1}.
pub const LEMMA81_EXPONENTS: [f64; 4] = [0.5, -0.5, -1.0, -2.0];

fn lemma81_probe(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    let f = Scalar3D::new(1.0, vec![1.0], |y| if norm3(y) <= 1.0 { 1.0 } else { 0.0 });
    let [radial, polar, azimuthal] = cfg.resolution.sphere;
    let q = SphereQuadrature {
        radial,
        polar,
        azimuthal,
    };
    let rs = sorted(&cfg.grid.r);
    let probe = convolution_decay_probe(&f, 1.0, &rs, q).map_err(wrap("lemma81-probe"))?;
    let mut t = Table::new("lemma81.csv", &["R", "l2", "l2_grad", "linf", "linf_grad"]);
    for row in &probe.rows {
        t.push(vec![
            num(row.r),
            num(row.l2),
            num(row.l2_grad),
            num(row.linf),
            num(row.linf_grad),
        ]);
    }
    c.tables.push(t);
    let names = ["l2", "l2_grad", "linf", "linf_grad"];
    for (k, name) in names.iter().enumerate() {
        let pts: Vec<(f64, f64)> = probe
            .rows
            .iter()
            .map(|r| (r.r, [r.l2, r.l2_grad, r.linf, r.linf_grad][k]))
            .collect();
        c.fit(name, &pts, LEMMA81_EXPONENTS[k], FitSemantics::Sharp, None)?;
    }
    Ok(())
}

pub const ROUTE_TOLERANCE: f64 = 1e-6;
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// Relative L²(Ω_R) discrepancy between the two W_R routes and the largest
/// orthogonality residual of the gradient part.
pub fn projection_discrepancy(flow: &PlanarFlow, radius: f64) -> crate::Result<(f64, f64)> {
    let wv = project_w_vorticity(&flow.vorticity, radius)?;
    let f = flow.clone();
    let u: VelocityFn = Arc::new(move |x| f.velocity(x));
    let wh = project_w_helmholtz(u, radius)?;
    let mut breaks = flow.breakpoints.clone();
    breaks.push(flow.vorticity.support_radius());
    let disk = Region::Disk { radius };
    let unorm = l2_norm(
        |p: &[f64]| flow.velocity([p[0], p[1]]).to_vec(),
        &disk,
        &NormOptions {
            tolerance: 1e-4,
            max_level: 64,
            ..NormOptions::with_breaks(&breaks)
        },
    )?;
    let opts = NormOptions {
        tolerance: 1e-3,
        max_level: 64,
        absolute_tolerance: 1e-3 * ROUTE_TOLERANCE * unorm,
        ..NormOptions::with_breaks(&breaks)
    };
    let diff = l2_norm(
        |p: &[f64]| {
            let x = [p[0], p[1]];
            let (a, b) = (wv.velocity(x), wh.velocity(x));
            vec![a[0] - b[0], a[1] - b[1]]
        },
        &disk,
        &opts,
    )?;
    let ov = orthogonality_residuals(&|x| wv.pressure_gradient(x).unwrap(), radius, unorm)?;
    let oh = orthogonality_residuals(&|x| wh.pressure_gradient(x).unwrap(), radius, unorm)?;
    let worst = ov.iter().chain(&oh).cloned().fold(0.0, f64::max);
    Ok((diff / unorm, worst))
}

fn projection_equivalence(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    let mut t = Table::new(
        "projection.csv",
        &["flow", "R", "route_discrepancy", "orthogonality"],
    );
    for flow in cfg.flows()? {
        let p = planar(&flow)?;
        for &r in &sorted(&cfg.grid.r) {
            let (d, o) = projection_discrepancy(p, r).map_err(wrap("projection-equivalence"))?;
            t.push(vec![p.name.clone(), num(r), num(d), num(o)]);
            c.checks.push(Check::at_most(
                format!("{}@R={r}:routes", p.name),
                d,
                ROUTE_TOLERANCE,
            ));
            c.checks.push(Check::at_most(
                format!("{}@R={r}:orthogonality", p.name),
                o,
                ORTHOGONALITY_TOLERANCE,
            ));
        }
    }
    c.tables.push(t);
    Ok(())
}

fn prop51(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    let flow = &cfg.flows()?[0];
    let theta = cfg.theta(flow);
    let rs = sorted(&cfg.grid.r);
    let rep =
        proposition51_report(flow, &cfg.domain()?, theta, &rs).map_err(wrap("prop51-report"))?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut t = Table::new(
        "prop51.csv",
        &[
            "R",
            "grad_l2",
            "linf",
            "grad_linf",
            "pressure_collar",
            "laplacian_l2",
            "error_l2",
            "stream_term_l2",
            "error_grad_l2",
        ],
    );
    for r in &rep.rows {
        t.push(vec![
            num(r.r),
            num(r.grad_l2),
            num(r.linf),
            num(r.grad_linf),
            opt(r.pressure_collar),
            opt(r.laplacian_l2),
            num(r.error_l2),
            num(r.stream_term_l2),
            num(r.error_grad_l2),
        ]);
    }
    c.tables.push(t);
    for it in &rep.items {
        let name = format!("item-{}", it.item);
        match &it.verdict {
            ItemVerdict::Bounded { ratio, .. } => c.checks.push(Check::at_most(
                name,
                *ratio,
                crate::norms_rates::BOUNDED_RATIO,
            )),
            ItemVerdict::Rate(f) => c.fits.push(NamedFit {
                name,
                fit: f.clone(),
            }),
            ItemVerdict::Vacuous { .. } => c.vacuous.push(name),
            ItemVerdict::NotApplicable { .. } => {}
        }
    }
    Ok(())
}

fn surface(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    let flow = &cfg.flows()?[0];
    let p = planar(flow)?;
    let theta = cfg.theta(flow);
    let res = &cfg.resolution;
    let opts = SurfaceOptions {
        resolution: res.nodes,
        steps: res.steps,
        samples: res.samples,
    };
    let s = theorem11_experiment(
        p,
        flow.case(),
        &cfg.grid.nu,
        &sorted(&cfg.grid.r),
        cfg.grid.t.unwrap_or(1.0),
        theta,
        &opts,
    )
    .map_err(wrap("theorem11-surface"))?;
    let mut t = Table::new(
        "surface.csv",
        &[
            "case", "theta", "nu", "R", "T", "error", "F", "envelope", "pass",
        ],
    );
    for cell in &s.cells {
        t.push(vec![
            cell.case.to_string(),
            num(cell.theta),
            num(cell.nu),
            num(cell.r),
            num(cell.t),
            num(cell.error),
            num(cell.f),
            num(cell.envelope),
            cell.pass.to_string(),
        ]);
    }
    c.tables.push(t);
    c.checks.push(Check::holds("envelope", s.envelope_pass()));
    c.checks
        .push(Check::holds("monotone-in-nu", s.monotone_in_nu));
    c.checks
        .push(Check::holds("diagonal-decreases", s.diagonal_decreases));
    for cell in s.cells.iter().filter(|c| c.nu == 0.0) {
        c.checks.push(Check::at_most(
            format!("nu0@R={}", cell.r),
            cell.error,
            cell.f,
        ));
    }
    if let Some(f) = &s.nu_marginal {
        c.fits.push(NamedFit {
            name: "nu-marginal".into(),
            fit: f.clone(),
        });
    }
    if let Some(f) = &s.r_marginal {
        c.fits.push(NamedFit {
            name: "r-marginal".into(),
            fit: f.clone(),
        });
    }
    c.surface = Some(s);
    Ok(())
}

/// Non-decay threshold for the ellipse failure mode.
pub const NON_DECAY_SLOPE: f64 = -0.05;

fn non_disk_failure(cfg: &ExperimentConfig, c: &mut Collect) -> HResult<()> {
    use rayon::prelude::*;
    let flow = &cfg.flows()?[0];
    let p = planar(flow)?;
    let domain = cfg.domain()?;
    let theta = cfg.grid.theta.unwrap_or(1.0);
    let rs = sorted(&cfg.grid.r);
    let rows: Vec<(f64, f64)> = rs
        .par_iter()
        .map(|&r| truncation_errors_2d(p, &domain, theta, r, true))
        .collect::<crate::Result<_>>()
        .map_err(wrap("non-disk-failure"))?;
    let pts: Vec<(f64, f64)> = rs.iter().zip(&rows).map(|(r, v)| (*r, v.0)).collect();
    c.fit(
        "non-decay",
        &pts,
        NON_DECAY_SLOPE,
        FitSemantics::LowerBound,
        Some(0.0),
    )?;
    rates_table(c, &rs, &rows, "nondisk.csv");
    Ok(())
}

/// Plot-ready files derived from a manifest: per fit a two-column log–log
/// series with the fitted line in its header, per surface a long table.
/// Returns the files written and notices for skipped sections.
pub fn emit_plotdata(
    manifest_path: &Path,
    out_dir: Option<&Path>,
) -> HResult<(Vec<PathBuf>, Vec<String>)> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", manifest_path.display())))?;
    let m: RunManifest =
        serde_json::from_str(&text).map_err(|e| config_err("manifest", e.to_string()))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(config_err(
            "manifest.schema_version",
            format!("expected {SCHEMA_VERSION}, got {}", m.schema_version),
        ));
    }
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| {
        manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .join("plot")
    });
    let mut files = vec![];
    let mut notices = vec![];
    if m.fits.is_empty() && m.surface.is_none() {
        notices.push("manifest has no rate fits or surfaces; nothing to emit".to_string());
        return Ok((files, notices));
    }
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(&dir).map_err(io)?;
    if m.fits.is_empty() {
        notices.push("no rate fits".into());
    }
    for f in &m.fits {
        let mut s = format!(
            "# ln(x) ln(y); fit ln(y) = {} + {} ln(x); predicted {} ({:?})\n",
            f.fit.intercept, f.fit.slope, f.fit.predicted, f.fit.semantics
        );
        for (x, y) in f.fit.abscissae.iter().zip(&f.fit.values) {
            s.push_str(&format!("{} {}\n", x.ln(), y.ln()));
        }
        let path = dir.join(format!("{}.dat", f.name));
        std::fs::write(&path, s).map_err(io)?;
        files.push(path);
    }
    match &m.surface {
        Some(surf) => {
            let mut t = Table::new("surface_long.csv", &["nu", "R", "error"]);
            for cell in &surf.cells {
                t.push(vec![num(cell.nu), num(cell.r), num(cell.error)]);
            }
            let path = dir.join(&t.file);
            std::fs::write(&path, t.to_csv()?).map_err(io)?;
            files.push(path);
        }
        None => notices.push("no surface".into()),
    }
    Ok((files, notices))
}

/// (name, case, dimension, description) for every catalog flow.
pub fn list_flows() -> Vec<(String, FlowCase, usize, &'static str)> {
    catalog()
        .iter()
        .map(|f| {
            (
                f.name().to_string(),
                f.case(),
                f.dimension(),
                f.description(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> HResult<ExperimentConfig> {
        ExperimentConfig::from_toml(text)
    }

    #[test]
    fn theta_out_of_range_names_the_field() {
        let e = cfg(r#"
            [experiment]
            kind = "truncation-rates-2d"
            [flow]
            name = "patch-I"
            [grid]
            theta = 1.5
            r = [16, 32, 64, 128]
            "#)
        .unwrap_err();
        match e {
            HarnessError::Config { field, .. } => assert_eq!(field, "grid.theta"),
            other => panic!("{other}"),
        }
        assert_eq!(
            e_code(&cfg("[experiment]\nkind = \"nope\"").unwrap_err()),
            EXIT_USAGE
        );
    }

    fn e_code(e: &HarnessError) -> i32 {
        e.exit_code()
    }

    #[test]
    fn grid_and_name_validation() {
        let base = |grid: &str, flow: &str| {
            format!("[experiment]\nkind = \"truncation-rates-2d\"\n[flow]\nname = \"{flow}\"\n[grid]\n{grid}\n")
        };
        assert!(cfg(&base("r = [16, 32, 64, 128]", "patch-I")).is_ok());
        let field = |t: String| match cfg(&t).unwrap_err() {
            HarnessError::Config { field, .. } => field,
            other => panic!("{other}"),
        };
        assert_eq!(field(base("r = [16, 24, 36, 54]", "patch-I")), "grid.r");
        assert_eq!(field(base("r = [16, 32, 64, 100]", "patch-I")), "grid.r");
        assert_eq!(field(base("r = [16, 32, 64]", "patch-I")), "grid.r");
        assert_eq!(
            field(base("r = [16, 32, 64, 128]", "no-such-flow")),
            "flow.name"
        );
        assert_eq!(
            field(base("r = [16, 32, 64, 128]\nbogus = 1", "patch-I")),
            "bogus"
        );
    }

    #[test]
    fn resolution_scaling_keeps_sample_multiple() {
        let r = ResolutionSection::default().scaled(0.3);
        assert_eq!(r.steps % r.samples, 0);
        assert!(r.nodes >= 128);
    }

    #[test]
    fn zero_mass_dipole_rates_pass() {
        let c = cfg(r#"
            [experiment]
            kind = "truncation-rates-2d"
            [flow]
            name = "dipole-I"
            [grid]
            theta = 1.0
            r = [16, 32, 64, 128]
            "#)
        .unwrap();
        let out = execute(&c).unwrap();
        assert!(out.manifest.pass, "{:?}", out.manifest.fits);
        assert_eq!(out.tables[0].rows.len(), 4);
    }

    #[test]
    fn radial_zero_mass_is_vacuous_not_failed() {
        let c = cfg(r#"
            [experiment]
            kind = "truncation-rates-2d"
            [flow]
            name = "patch-I"
            [grid]
            r = [16, 32, 64, 128]
            "#)
        .unwrap();
        let m = execute(&c).unwrap().manifest;
        assert!(m.pass);
        assert_eq!(m.vacuous, vec!["alpha".to_string(), "beta".to_string()]);
    }

    #[test]
    fn write_and_emit_plots() {
        let c = cfg(r#"
            [experiment]
            kind = "truncation-rates-2d"
            [flow]
            name = "smooth-dipole-I"
            [grid]
            r = [16, 32, 64, 128]
            "#)
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = run(&c, dir.path()).unwrap();
        assert_eq!(m.exit_code(), EXIT_PASS);
        let (files, notices) = emit_plotdata(&dir.path().join(MANIFEST_FILE), None).unwrap();
        assert_eq!(files.len(), 2);
        assert!(notices.iter().any(|n| n.contains("surface")));
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn empty_manifest_emits_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            "[experiment]\nkind = \"decay-probe\"\n[flow]\nname = \"patch-I\"\n[grid]\nr = [8]",
        )
        .unwrap();
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            code_version: "0".into(),
            config: c,
            fits: vec![],
            checks: vec![],
            vacuous: vec![],
            surface: None,
            outputs: vec![],
            pass: true,
        };
        let p = dir.path().join(MANIFEST_FILE);
        std::fs::write(&p, serde_json::to_string(&m).unwrap()).unwrap();
        let (files, notices) = emit_plotdata(&p, None).unwrap();
        assert!(files.is_empty());
        assert_eq!(notices.len(), 1);
    }

    #[test]
    fn seeded_directions_are_reproducible() {
        assert_eq!(seeded_angles(7, 5), seeded_angles(7, 5));
        assert_ne!(seeded_angles(7, 5), seeded_angles(8, 5));
        for d in seeded_directions(3, 10) {
            assert!((norm3(d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn verdict_failure_maps_to_exit_one() {
        // the smooth m ≠ 0 flow at θ = 1 violates no bound, so force a failing check instead
        let mut m = execute(
            &cfg("[experiment]\nkind = \"decay-probe\"\n[flow]\nname = \"smooth-dipole-I\"\n[grid]\nr = [8]").unwrap(),
        )
        .unwrap()
        .manifest;
        assert_eq!(m.exit_code(), EXIT_PASS);
        m.checks.push(Check::at_most("x", 2.0, 1.0));
        m.pass = m.checks.iter().all(|c| c.pass);
        assert_eq!(m.exit_code(), EXIT_VERDICT);
    }
}
