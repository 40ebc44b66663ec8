//! Norms over Ω_R, Σ_R and annuli, and log–log rate fits.

use crate::cutoff_geometry::{CutoffFunction, CutoffVariant, TubularChart};
use crate::error::{invalid, Error, Result};
use crate::field_core::{DomainSpec, Shape};
use crate::quadrature::{breakpoints_within, GaussLegendre};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ordinary least-squares slope of log(values) against log(abscissae).
pub fn ols_slope(abscissae: &[f64], values: &[f64]) -> f64 {
    ols(abscissae, values).0
}

/// (slope, intercept, max residual) of the log–log regression.
fn ols(abscissae: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let n = abscissae.len() as f64;
    let xs: Vec<f64> = abscissae.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    (slope, intercept, res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    L2,
    Linf,
    H1Semi,
}

/// Integration regions. 2D regions live in the plane, 3D ones in space.
#[derive(Debug, Clone)]
pub enum Region {
    Disk {
        radius: f64,
    },
    Annulus {
        inner: f64,
        outer: f64,
    },
    Ball {
        radius: f64,
    },
    Shell {
        inner: f64,
        outer: f64,
    },
    /// Whole Ω_R.
    Domain(DomainSpec),
    /// Σ_R of the cutoff.
    Collar(Box<CutoffFunction>),
    /// Ω_R \ Σ_R.
    Interior(Box<CutoffFunction>),
}

impl Region {
    pub fn collar(cutoff: &CutoffFunction) -> Self {
        Region::Collar(Box::new(cutoff.clone()))
    }

    pub fn interior(cutoff: &CutoffFunction) -> Self {
        Region::Interior(Box::new(cutoff.clone()))
    }

    pub fn label(&self) -> String {
        match self {
            Region::Disk { radius } => format!("disk(R={radius})"),
            Region::Annulus { inner, outer } => format!("annulus({inner},{outer})"),
            Region::Ball { radius } => format!("ball(R={radius})"),
            Region::Shell { inner, outer } => format!("shell({inner},{outer})"),
            Region::Domain(d) => format!("domain(R={})", d.scale),
            Region::Collar(c) => format!("collar(R={},theta={})", c.radius, c.theta),
            Region::Interior(c) => format!("interior(R={},theta={})", c.radius, c.theta),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Region::Disk { .. } | Region::Annulus { .. } => 2,
            Region::Ball { .. } | Region::Shell { .. } => 3,
            Region::Domain(d) => d.dimension(),
            Region::Collar(c) | Region::Interior(c) => match c.variant {
                CutoffVariant::Collar2D => 2,
                CutoffVariant::Dilation3D => 3,
            },
        }
    }

    /// Simpler equivalent region when one exists (disks, balls, shells).
    fn reduce(&self) -> Option<Region> {
        match self {
            Region::Domain(d) => match d.shape {
                Shape::Disk => Some(Region::Disk { radius: d.scale }),
                Shape::Ball => Some(Region::Ball { radius: d.scale }),
                _ => None,
            },
            Region::Collar(c) => {
                let (r, w) = (c.radius, c.collar_width());
                match c.variant {
                    CutoffVariant::Dilation3D => Some(Region::Shell {
                        inner: r * (1.0 - c.delta1),
                        outer: r,
                    }),
                    _ if is_disk(c) => Some(Region::Annulus {
                        inner: r - w,
                        outer: r,
                    }),
                    _ => None,
                }
            }
            Region::Interior(c) => {
                let (r, w) = (c.radius, c.collar_width());
                match c.variant {
                    CutoffVariant::Dilation3D => Some(Region::Ball {
                        radius: r * (1.0 - c.delta1),
                    }),
                    _ if is_disk(c) => Some(Region::Disk { radius: r - w }),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

fn is_disk(c: &CutoffFunction) -> bool {
    c.chart
        .as_ref()
        .is_some_and(|ch| ch.domain.shape == Shape::Disk)
}

pub type Evaluator<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

/// A field to be measured: point values and, optionally, the flattened
/// gradient (∂_k f_i at index i·d + k).
#[derive(Clone, Copy)]
pub struct FieldEval<'a> {
    pub value: Evaluator<'a>,
    pub gradient: Option<Evaluator<'a>>,
}

impl<'a> FieldEval<'a> {
    pub fn new(value: Evaluator<'a>) -> Self {
        Self {
            value,
            gradient: None,
        }
    }

    pub fn with_gradient(value: Evaluator<'a>, gradient: Evaluator<'a>) -> Self {
        Self {
            value,
            gradient: Some(gradient),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Radii (|x|, or ρ for elliptic regions) where the integrand has kinks.
    pub radial_breaks: Vec<f64>,
    /// Relative change tolerated between successive resolutions.
    pub tolerance: f64,
    pub max_level: usize,
    /// Length scale for finite-difference gradients.
    pub fd_step: f64,
    /// Changes below this are accepted regardless of the relative test.
    #[serde(default)]
    pub absolute_tolerance: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            radial_breaks: vec![],
            tolerance: 0.005,
            max_level: 16,
            fd_step: 1e-3,
            absolute_tolerance: 0.0,
        }
    }
}

impl NormOptions {
    pub fn with_breaks(breaks: &[f64]) -> Self {
        Self {
            radial_breaks: breaks.to_vec(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub region: String,
    pub kind: NormKind,
    pub value: f64,
    /// Refinement level of the accepted quadrature.
    pub resolution: usize,
    pub estimated_error: f64,
}

const GL_POINTS: usize = 12;

/// Radial panels on [lo, hi]: split at breakpoints, then geometrically so
/// that no panel spans more than a factor 1.5, then `level` times more.
fn radial_panels(lo: f64, hi: f64, breaks: &[f64], level: usize) -> Vec<(f64, f64)> {
    let edges = breakpoints_within(lo, hi, breaks);
    let mut out = vec![];
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a > 0.0 && b / a > 1.5 {
            let n = ((b / a).ln() / 1.5f64.ln()).ceil() as usize * level;
            let q = (b / a).powf(1.0 / n as f64);
            for k in 0..n {
                let x0 = a * q.powi(k as i32);
                let x1 = if k + 1 == n {
                    b
                } else {
                    a * q.powi(k as i32 + 1)
                };
                out.push((x0, x1));
            }
        } else {
            let n = level.max(1);
            let h = (b - a) / n as f64;
            for k in 0..n {
                out.push((
                    a + k as f64 * h,
                    if k + 1 == n {
                        b
                    } else {
                        a + (k + 1) as f64 * h
                    },
                ));
            }
        }
    }
    out
}

fn angle_nodes(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| (2.0 * PI * (k as f64 + 0.25) / n as f64, 2.0 * PI / n as f64))
        .collect()
}

/// Quadrature nodes (point, weight) of a region at a refinement level.
fn nodes(region: &Region, level: usize, breaks: &[f64]) -> Vec<(Vec<f64>, f64)> {
    if let Some(r) = region.reduce() {
        return nodes(&r, level, breaks);
    }
    let gl = GaussLegendre::new(GL_POINTS);
    let mut out = vec![];
    match region {
        Region::Disk { radius } => {
            return nodes(
                &Region::Annulus {
                    inner: 0.0,
                    outer: *radius,
                },
                level,
                breaks,
            )
        }
        Region::Ball { radius } => {
            return nodes(
                &Region::Shell {
                    inner: 0.0,
                    outer: *radius,
                },
                level,
                breaks,
            )
        }
        Region::Annulus { inner, outer } => {
            let ang = angle_nodes(32 * level);
            for (a, b) in radial_panels(*inner, *outer, breaks, level) {
                for (r, wr) in gl.mapped(a, b) {
                    for &(t, wt) in &ang {
                        out.push((vec![r * t.cos(), r * t.sin()], wr * wt * r));
                    }
                }
            }
        }
        Region::Shell { inner, outer } => {
            let pol = GaussLegendre::new(8 * level);
            let az = angle_nodes(16 * level);
            for (a, b) in radial_panels(*inner, *outer, breaks, level) {
                for (r, wr) in gl.mapped(a, b) {
                    for (ct, wc) in pol.mapped(-1.0, 1.0) {
                        let st = (1.0 - ct * ct).sqrt();
                        for &(p, wp) in &az {
                            out.push((
                                vec![r * st * p.cos(), r * st * p.sin(), r * ct],
                                wr * wc * wp * r * r,
                            ));
                        }
                    }
                }
            }
        }
        Region::Domain(d) => {
            // elliptic polar coordinates x = R(aρ cos t, bρ sin t)
            let (a, b) = d.unit_axes();
            let sc = d.scale;
            let ang = angle_nodes(64 * level);
            for (lo, hi) in radial_panels(0.0, 1.0, breaks, 4 * level) {
                for (rho, wr) in gl.mapped(lo, hi) {
                    for &(t, wt) in &ang {
                        out.push((
                            vec![sc * a * rho * t.cos(), sc * b * rho * t.sin()],
                            wr * wt * sc * sc * a * b * rho,
                        ));
                    }
                }
            }
        }
        Region::Collar(c) => {
            let chart = c.chart.as_ref().expect("2D collar");
            collar_nodes(chart, level, &mut out);
        }
        Region::Interior(_) => unreachable!("handled by subtraction"),
    }
    out
}

/// Nodes on Σ_R in chart coordinates: dA = |γ′(t)|(1 − κr) dt dr.
fn collar_nodes(chart: &TubularChart, level: usize, out: &mut Vec<(Vec<f64>, f64)>) {
    let gl = GaussLegendre::new(GL_POINTS);
    let w = chart.width;
    let (a, b) = chart.domain.unit_axes();
    let sc = chart.domain.scale;
    for (t, wt) in angle_nodes(128 * level) {
        let d = [-a * t.sin(), b * t.cos()];
        let speed = sc * (d[0] * d[0] + d[1] * d[1]).sqrt();
        let tangent = [d[0] * sc / speed, d[1] * sc / speed];
        let n = [-tangent[1], tangent[0]];
        let kappa = a * b * sc * sc * sc / (speed * speed * speed) / sc;
        let p = chart.domain.boundary_point(t);
        for (lo, hi) in radial_panels(0.0, w, &[0.5 * w], 2 * level) {
            for (r, wr) in gl.mapped(lo, hi) {
                out.push((
                    vec![p[0] + r * n[0], p[1] + r * n[1]],
                    wt * wr * speed * (1.0 - kappa * r),
                ));
            }
        }
    }
}

/// Integrand components for a norm kind.
fn integrand(field: &FieldEval, kind: NormKind, x: &[f64], h: f64) -> Vec<f64> {
    match kind {
        NormKind::L2 | NormKind::Linf => (field.value)(x),
        NormKind::H1Semi => match field.gradient {
            Some(g) => g(x),
            None => fd_gradient(field.value, x, h),
        },
    }
}

/// Fourth-order central differences; index i·d + k holds ∂_k f_i.
pub fn fd_gradient(f: Evaluator, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let mut parts: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s * h;
            f(&y)
        };
        let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
        parts.push(
            (0..m1.len())
                .map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h))
                .collect(),
        );
    }
    let m = parts[0].len();
    let mut out = vec![0.0; m * d];
    for i in 0..m {
        for k in 0..d {
            out[i * d + k] = parts[k][i];
        }
    }
    out
}

fn raw_norm(
    field: &FieldEval,
    region: &Region,
    kind: NormKind,
    level: usize,
    opts: &NormOptions,
) -> f64 {
    if let Region::Interior(c) = region {
        if region.reduce().is_none() {
            // Ω_R \ Σ_R by subtraction over the full domain
            let chart = c.chart.as_ref().expect("2D interior");
            let whole = Region::Domain(chart.domain);
            let collar = Region::Collar(c.clone());
            return match kind {
                NormKind::Linf => {
                    let pts = nodes(&whole, level, &opts.radial_breaks);
                    pts.par_iter()
                        .filter(|(x, _)| !c.in_collar2([x[0], x[1]]))
                        .map(|(x, _)| sup(&integrand(field, kind, x, opts.fd_step)))
                        .reduce(|| 0.0, f64::max)
                }
                _ => {
                    let a = raw_norm(field, &whole, kind, level, opts);
                    let b = raw_norm(field, &collar, kind, level, opts);
                    (a * a - b * b).max(0.0).sqrt()
                }
            };
        }
    }
    let pts = nodes(region, level, &opts.radial_breaks);
    match kind {
        NormKind::Linf => pts
            .par_iter()
            .map(|(x, _)| sup(&integrand(field, kind, x, opts.fd_step)))
            .reduce(|| 0.0, f64::max),
        _ => {
            // ordered reduction keeps results bitwise reproducible
            let parts: Vec<f64> = pts
                .par_iter()
                .map(|(x, w)| {
                    w * integrand(field, kind, x, opts.fd_step)
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                })
                .collect();
            parts.iter().sum::<f64>().sqrt()
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm of `field` over `region`, refining until two successive levels
/// agree to `opts.tolerance`.
pub fn norm_on_region(
    field: &FieldEval,
    region: &Region,
    kind: NormKind,
    opts: &NormOptions,
) -> Result<NormReport> {
    let mut level = 1;
    let mut prev = raw_norm(field, region, kind, level, opts);
    loop {
        let next_level = 2 * level;
        if next_level > opts.max_level {
            return Err(Error::Numeric(format!(
                "norm on {} did not converge by level {}",
                region.label(),
                level
            )));
        }
        let cur = raw_norm(field, region, kind, next_level, opts);
        if !cur.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite norm on {}",
                region.label()
            )));
        }
        let err = (cur - prev).abs();
        if err <= opts.tolerance * cur.abs() || err <= opts.absolute_tolerance || cur.abs() < 1e-300
        {
            return Ok(NormReport {
                region: region.label(),
                kind,
                value: cur,
                resolution: next_level,
                estimated_error: err,
            });
        }
        prev = cur;
        level = next_level;
    }
}

/// Convenience: L² norm of a closure.
pub fn l2_norm<F: Fn(&[f64]) -> Vec<f64> + Sync>(
    f: F,
    region: &Region,
    opts: &NormOptions,
) -> Result<f64> {
    Ok(norm_on_region(&FieldEval::new(&f), region, NormKind::L2, opts)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitSemantics {
    /// Pass iff slope ≤ predicted + tol.
    UpperBound,
    /// Pass iff |slope − predicted| ≤ tol.
    Sharp,
    /// Pass iff slope ≥ predicted − tol.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    /// log C of the fitted C·x^slope.
    pub intercept: f64,
    pub max_residual: f64,
    pub predicted: f64,
    pub semantics: FitSemantics,
    pub tolerance: f64,
    /// Signed distance to the verdict threshold; ≥ 0 means pass.
    pub margin: f64,
    pub pass: bool,
}

pub const SLOPE_TOLERANCE: f64 = 0.1;

pub fn fit_rate(points: &[(f64, f64)], predicted: f64, semantics: FitSemantics) -> Result<RateFit> {
    fit_rate_with(points, predicted, semantics, SLOPE_TOLERANCE)
}

pub fn fit_rate_with(
    points: &[(f64, f64)],
    predicted: f64,
    semantics: FitSemantics,
    tolerance: f64,
) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(invalid(
            "points",
            format!("need at least 4, got {}", points.len()),
        ));
    }
    if points.iter().any(|&(x, _)| !(x > 0.0)) {
        return Err(invalid("points", "abscissae must be positive"));
    }
    let q = points[1].0 / points[0].0;
    if q <= 1.0
        || points
            .windows(2)
            .any(|w| ((w[1].0 / w[0].0) / q - 1.0).abs() > 1e-6)
    {
        return Err(invalid(
            "points",
            "abscissae must form an increasing geometric grid",
        ));
    }
    if points.iter().any(|&(_, y)| !(y > 0.0)) {
        return Err(Error::DegenerateFit(
            "identically zero, rate vacuous".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, intercept, max_residual) = ols(&xs, &ys);
    let margin = match semantics {
        FitSemantics::UpperBound => predicted + tolerance - slope,
        FitSemantics::Sharp => tolerance - (slope - predicted).abs(),
        FitSemantics::LowerBound => slope - (predicted - tolerance),
    };
    Ok(RateFit {
        abscissae: xs,
        values: ys,
        slope,
        intercept,
        max_residual,
        predicted,
        semantics,
        tolerance,
        margin,
        pass: margin >= 0.0,
    })
}

/// α of the velocity error rate: 1/2 + θ/2 when m = 0, 1/2 − θ/2 otherwise.
pub fn alpha(theta: f64, zero_mass: bool) -> f64 {
    if zero_mass {
        0.5 + 0.5 * theta
    } else {
        0.5 - 0.5 * theta
    }
}

/// β of the gradient error rate: 1/2 + 3θ/2 when m = 0, 1/2 + θ/2 otherwise.
pub fn beta(theta: f64, zero_mass: bool) -> f64 {
    if zero_mass {
        0.5 + 1.5 * theta
    } else {
        0.5 + 0.5 * theta
    }
}

pub const ALPHA_3D: f64 = 0.5;
pub const BETA_3D: f64 = 1.5;

/// Measured quantities of the a-priori truncation estimates at one R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop51Row {
    pub r: f64,
    /// ‖∇u^R‖_{L²(Ω_R)}
    pub grad_l2: f64,
    /// ‖u^R‖_{L^∞(Ω_R)}
    pub linf: f64,
    /// ‖∇u^R‖_{L^∞(Ω_R)}
    pub grad_linf: f64,
    /// ‖p∇φ^R‖_{L²(Σ_R)}; ∂_tψ = 0 for the steady references.
    pub pressure_collar: Option<f64>,
    /// ‖Δu^R‖_{L²(Ω_R)} for s ≥ 2.
    pub laplacian_l2: Option<f64>,
    /// ‖u^R − u‖_{L²(Ω_R)}
    pub error_l2: f64,
    /// ‖u^R − φ^R u‖_{L²(Ω_R)}
    pub stream_term_l2: f64,
    /// ‖∇(u − u^R)‖_{L²(Ω_R)}
    pub error_grad_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ItemVerdict {
    /// max/min over the sweep, which must stay ≤ 1.25.
    Bounded {
        ratio: f64,
        pass: bool,
    },
    Rate(RateFit),
    Vacuous {
        reason: String,
    },
    NotApplicable {
        reason: String,
    },
}

impl ItemVerdict {
    pub fn pass(&self) -> bool {
        match self {
            ItemVerdict::Bounded { pass, .. } => *pass,
            ItemVerdict::Rate(f) => f.pass,
            ItemVerdict::Vacuous { .. } | ItemVerdict::NotApplicable { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop51Item {
    pub item: String,
    pub verdict: ItemVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop51Report {
    pub flow: String,
    pub theta: f64,
    pub rows: Vec<Prop51Row>,
    pub items: Vec<Prop51Item>,
}

impl Prop51Report {
    pub fn item(&self, name: &str) -> Option<&ItemVerdict> {
        self.items
            .iter()
            .find(|i| i.item == name)
            .map(|i| &i.verdict)
    }

    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.verdict.pass())
    }
}

pub const BOUNDED_RATIO: f64 = 1.25;

fn bounded(values: &[f64]) -> ItemVerdict {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    if max <= 0.0 {
        return ItemVerdict::Vacuous {
            reason: "identically zero".into(),
        };
    }
    let ratio = max / min;
    ItemVerdict::Bounded {
        ratio,
        pass: ratio <= BOUNDED_RATIO,
    }
}

fn rate(rs: &[f64], values: &[f64], predicted: f64) -> Result<ItemVerdict> {
    let pts: Vec<(f64, f64)> = rs.iter().cloned().zip(values.iter().cloned()).collect();
    match fit_rate(&pts, predicted, FitSemantics::UpperBound) {
        Ok(f) => Ok(ItemVerdict::Rate(f)),
        Err(Error::DegenerateFit(reason)) => Ok(ItemVerdict::Vacuous { reason }),
        Err(e) => Err(e),
    }
}

fn l2(f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync), region: &Region, opts: &NormOptions) -> Result<f64> {
    Ok(norm_on_region(&FieldEval::new(f), region, NormKind::L2, opts)?.value)
}

fn linf(
    f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    region: &Region,
    opts: &NormOptions,
) -> Result<f64> {
    Ok(norm_on_region(&FieldEval::new(f), region, NormKind::Linf, opts)?.value)
}

fn flat<const N: usize>(g: [[f64; N]; N]) -> Vec<f64> {
    g.iter().flat_map(|r| r.iter().cloned()).collect()
}

fn planar_row(
    flow: &crate::reference_flows::PlanarFlow,
    domain: &DomainSpec,
    theta: f64,
    r: f64,
) -> Result<Prop51Row> {
    use crate::cutoff_geometry::build_cutoff;
    use crate::truncation::truncate_2d;
    let cut = build_cutoff(domain, theta, r)?;
    let t = truncate_2d(flow, &cut)?;
    let w = cut.collar_width();
    let mut breaks = flow.breakpoints.clone();
    breaks.extend([r - w, r - 0.5 * w]);
    let opts = NormOptions {
        absolute_tolerance: 1e-14,
        ..NormOptions::with_breaks(&breaks)
    };
    let whole = Region::Domain(domain.with_scale(r));
    let collar = Region::collar(&cut);
    let p2 = |p: &[f64]| [p[0], p[1]];
    let pressure_collar = if flow.radial.is_some() {
        Some(l2(
            &|p: &[f64]| {
                let x = p2(p);
                let pr = flow.pressure(x).unwrap_or(0.0);
                let g = cut.jet2(x).grad;
                vec![pr * g[0], pr * g[1]]
            },
            &collar,
            &opts,
        )?)
    } else {
        None
    };
    let laplacian_l2 = if flow.smoothness >= 2.0 {
        Some(l2(&|p: &[f64]| t.laplacian(p2(p)).to_vec(), &whole, &opts)?)
    } else {
        None
    };
    Ok(Prop51Row {
        r,
        grad_l2: l2(&|p: &[f64]| flat(t.gradient(p2(p))), &whole, &opts)?,
        linf: linf(&|p: &[f64]| t.velocity(p2(p)).to_vec(), &whole, &opts)?,
        grad_linf: linf(&|p: &[f64]| flat(t.gradient(p2(p))), &whole, &opts)?,
        pressure_collar,
        laplacian_l2,
        error_l2: l2(&|p: &[f64]| t.error(p2(p)).to_vec(), &collar, &opts)?,
        stream_term_l2: l2(&|p: &[f64]| t.parts(p2(p)).1.to_vec(), &collar, &opts)?,
        error_grad_l2: l2(&|p: &[f64]| flat(t.error_gradient(p2(p))), &collar, &opts)?,
    })
}

fn spatial_row(hill: &crate::reference_flows::HillVortex3D, r: f64) -> Result<Prop51Row> {
    use crate::cutoff_geometry::build_cutoff;
    use crate::truncation::truncate_3d;
    let cut = build_cutoff(&DomainSpec::ball(1.0), 1.0, r)?;
    let t = truncate_3d(hill, &cut)?;
    let a = hill.support_radius();
    let opts = NormOptions {
        absolute_tolerance: 1e-14,
        ..NormOptions::with_breaks(&[
            hill.a * (1.0 - hill.epsilon),
            hill.a,
            a,
            r * (1.0 - 0.5 * cut.delta1),
            r * (1.0 - cut.delta1),
        ])
    };
    let whole = Region::Ball { radius: r };
    let collar = Region::collar(&cut);
    let p3 = |p: &[f64]| [p[0], p[1], p[2]];
    let laplacian_l2 = if hill.epsilon > 0.0 {
        Some(l2(&|p: &[f64]| t.laplacian(p3(p)).to_vec(), &whole, &opts)?)
    } else {
        None
    };
    Ok(Prop51Row {
        r,
        grad_l2: l2(&|p: &[f64]| flat(t.gradient(p3(p))), &whole, &opts)?,
        linf: linf(&|p: &[f64]| t.velocity(p3(p)).to_vec(), &whole, &opts)?,
        grad_linf: linf(&|p: &[f64]| flat(t.gradient(p3(p))), &whole, &opts)?,
        pressure_collar: None,
        laplacian_l2,
        error_l2: l2(&|p: &[f64]| t.error(p3(p)).to_vec(), &collar, &opts)?,
        stream_term_l2: l2(&|p: &[f64]| t.parts(p3(p)).1.to_vec(), &collar, &opts)?,
        error_grad_l2: l2(&|p: &[f64]| flat(t.error_gradient(p3(p))), &collar, &opts)?,
    })
}

/// All measurable truncation estimates over an R sweep. Rows are computed
/// in parallel and returned in abscissa order.
pub fn proposition51_report(
    flow: &crate::reference_flows::ReferenceFlow,
    domain: &DomainSpec,
    theta: f64,
    r_grid: &[f64],
) -> Result<Prop51Report> {
    let rows: Vec<Prop51Row> = r_grid
        .par_iter()
        .map(|&r| match (flow.planar(), flow.hill()) {
            (Some(p), _) => planar_row(p, domain, theta, r),
            (_, Some(h)) => spatial_row(h, r),
            _ => unreachable!(),
        })
        .collect::<Result<_>>()?;
    let col = |f: &dyn Fn(&Prop51Row) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let three_d = flow.dimension() == 3;
    let (a, b, p_rate) = if three_d {
        (ALPHA_3D, BETA_3D, -1.0)
    } else {
        let zm = flow.mass() == 0.0;
        (alpha(theta, zm), beta(theta, zm), -theta)
    };
    let mut items = vec![
        Prop51Item {
            item: "1".into(),
            verdict: bounded(&col(&|r| r.grad_l2)),
        },
        Prop51Item {
            item: "2".into(),
            verdict: bounded(&col(&|r| r.linf)),
        },
        Prop51Item {
            item: "3".into(),
            verdict: bounded(&col(&|r| r.grad_linf)),
        },
    ];
    let pressure = if rows.iter().all(|r| r.pressure_collar.is_some()) {
        rate(r_grid, &col(&|r| r.pressure_collar.unwrap()), p_rate)?
    } else {
        ItemVerdict::NotApplicable {
            reason: "no closed-form pressure for this flow".into(),
        }
    };
    items.push(Prop51Item {
        item: if three_d { "4b" } else { "4a" }.into(),
        verdict: pressure,
    });
    let lap = if rows.iter().all(|r| r.laplacian_l2.is_some()) {
        bounded(&col(&|r| r.laplacian_l2.unwrap()))
    } else {
        ItemVerdict::NotApplicable {
            reason: "smoothness below 2".into(),
        }
    };
    items.push(Prop51Item {
        item: "5".into(),
        verdict: lap,
    });
    items.push(Prop51Item {
        item: "6".into(),
        verdict: rate(r_grid, &col(&|r| r.error_l2 + r.stream_term_l2), -a)?,
    });
    items.push(Prop51Item {
        item: "7".into(),
        verdict: rate(r_grid, &col(&|r| r.error_grad_l2), -b)?,
    });
    Ok(Prop51Report {
        flow: flow.name().to_string(),
        theta,
        rows,
        items,
    })
}
