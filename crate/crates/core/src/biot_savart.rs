//! Stream functions and Biot–Savart velocity reconstruction in 2D and 3D.
//!
//! Analytic 2D vorticities are sums of radial blobs, so ψ and all of its
//! derivatives follow from the one-dimensional radial moments by
//! superposition. Sampled vorticities go through [`KernelQuadrature`]; 3D
//! fields use spherical quadrature either centred on the evaluation point
//! (rays, for points inside the support) or on the source (exterior points).

use crate::error::{invalid, Error, Result};
use crate::field_core::{
    cross, norm2, norm3, Blob, CompactVorticity, Coordinates, Point2, Point3, SampledField,
};
use crate::norms_rates::ols_slope;
use crate::quadrature::{breakpoints_within, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// ψ together with its first two derivatives and ∇Δψ = ∇ω.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Point2,
    pub hess: [[f64; 2]; 2],
    pub grad_lap: Point2,
}

impl Jet2 {
    fn add_scaled(&mut self, w: f64, o: &Jet2) {
        self.value += w * o.value;
        for i in 0..2 {
            self.grad[i] += w * o.grad[i];
            self.grad_lap[i] += w * o.grad_lap[i];
            for j in 0..2 {
                self.hess[i][j] += w * o.hess[i][j];
            }
        }
    }

    /// u = ∇⊥ψ = (−∂₂ψ, ∂₁ψ).
    pub fn velocity(&self) -> Point2 {
        [-self.grad[1], self.grad[0]]
    }

    /// ∇u as [row i = component, col k = ∂_k].
    pub fn velocity_gradient(&self) -> [[f64; 2]; 2] {
        [
            [-self.hess[1][0], -self.hess[1][1]],
            [self.hess[0][0], self.hess[0][1]],
        ]
    }

    /// Δu = ∇⊥ω.
    pub fn velocity_laplacian(&self) -> Point2 {
        [-self.grad_lap[1], self.grad_lap[0]]
    }

    pub fn vorticity(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }
}

/// Jet of the log-kernel stream function of one radial blob.
fn blob_jet(blob: &Blob, x: Point2) -> Jet2 {
    let d = [x[0] - blob.center[0], x[1] - blob.center[1]];
    let rho = norm2(d);
    let p = &blob.profile;
    let omega = p.omega(rho);
    let value = if rho > 0.0 {
        p.enclosed(rho) * rho.ln() + p.log_tail(rho)
    } else {
        p.log_tail(0.0)
    };
    if rho < 1e-12 {
        // ψ is locally ψ(0) + ω(0) r²/4
        let h = 0.5 * omega;
        return Jet2 {
            value: blob.weight * value,
            grad: [0.0, 0.0],
            hess: [[blob.weight * h, 0.0], [0.0, blob.weight * h]],
            grad_lap: [0.0, 0.0],
        };
    }
    let f1 = p.enclosed(rho) / rho;
    let f2 = omega - f1 / rho;
    let e = [d[0] / rho, d[1] / rho];
    let dw = p.omega_prime(rho);
    let w = blob.weight;
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            hess[i][j] = w * (f2 * e[i] * e[j] + f1 / rho * (delta - e[i] * e[j]));
        }
    }
    Jet2 {
        value: w * value,
        grad: [w * f1 * e[0], w * f1 * e[1]],
        hess,
        grad_lap: [w * dw * e[0], w * dw * e[1]],
    }
}

/// Anything that exposes a 2D stream-function jet.
pub trait Flow2D: Send + Sync {
    fn jet(&self, x: Point2) -> Jet2;

    fn velocity(&self, x: Point2) -> Point2 {
        self.jet(x).velocity()
    }

    fn psi(&self, x: Point2) -> f64 {
        self.jet(x).value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    AnalyticRadial,
    Quadrature,
}

/// ψ = (2π)⁻¹ ∫ log|x − y| ω(y) dy − `offset`.
#[derive(Debug, Clone)]
pub struct StreamFunction2D {
    pub vorticity: CompactVorticity,
    pub provenance: Provenance,
    /// Constant subtracted from the kernel normalization.
    pub offset: f64,
    quadrature: Option<KernelQuadrature>,
}

impl StreamFunction2D {
    /// Same stream function shifted so that `psi(x) == old_psi(x) − c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.offset += c;
        s
    }

    pub fn gradient(&self, x: Point2) -> Point2 {
        self.jet(x).grad
    }
}

impl Flow2D for StreamFunction2D {
    fn jet(&self, x: Point2) -> Jet2 {
        match &self.vorticity {
            CompactVorticity::Analytic { blobs, .. } => {
                let mut j = Jet2::default();
                for b in blobs {
                    j.add_scaled(1.0, &blob_jet(b, x));
                }
                j.value -= self.offset;
                j
            }
            CompactVorticity::Sampled { field, .. } => {
                let q = self.quadrature.unwrap_or_default();
                // first derivatives only; higher jets are not available by quadrature
                let u = q.velocity(field, x).unwrap_or([f64::NAN; 2]);
                let value = q.stream(field, x).unwrap_or(f64::NAN) - self.offset;
                Jet2 {
                    value,
                    grad: [u[1], -u[0]],
                    hess: [[f64::NAN; 2]; 2],
                    grad_lap: [f64::NAN; 2],
                }
            }
        }
    }
}

pub fn stream_2d(omega: &CompactVorticity) -> StreamFunction2D {
    let provenance = match omega {
        CompactVorticity::Analytic { .. } => Provenance::AnalyticRadial,
        CompactVorticity::Sampled { .. } => Provenance::Quadrature,
    };
    StreamFunction2D {
        vorticity: omega.clone(),
        provenance,
        offset: 0.0,
        quadrature: None,
    }
}

pub fn stream_2d_with(omega: &CompactVorticity, quadrature: KernelQuadrature) -> StreamFunction2D {
    let mut s = stream_2d(omega);
    s.quadrature = Some(quadrature);
    s
}

/// (K ∗ ω)(x) with K(z) = z⊥/(2π|z|²). Exact radial formula for analytic
/// data; default cell-exclusion quadrature for sampled data.
pub fn velocity_2d(omega: &CompactVorticity, x: Point2) -> Result<Point2> {
    match omega {
        CompactVorticity::Analytic { .. } => Ok(stream_2d(omega).velocity(x)),
        CompactVorticity::Sampled { field, .. } => KernelQuadrature::default().velocity(field, x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SingularityRule {
    /// Skip the coincident cell and add its analytic contribution.
    #[default]
    CellExclusion,
    /// Replace |x − y| by sqrt(|x − y|² + ε²).
    Regularized { epsilon: f64 },
}

/// Midpoint/trapezoid convolution over a cartesian source grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelQuadrature {
    pub rule: SingularityRule,
}

/// ∫_{[−a,a]²} ln|y| dy.
fn log_self_cell(a: f64) -> f64 {
    a * a * (2.0 * 2f64.ln() - 6.0 + PI + 4.0 * a.ln())
}

/// ∫_{[0,1]³} |y|⁻¹ dy.
const INV_DIST_UNIT_CUBE: f64 = 1.190_038_681_989_776_4;

impl KernelQuadrature {
    pub fn regularized(epsilon: f64) -> Self {
        Self {
            rule: SingularityRule::Regularized { epsilon },
        }
    }

    fn check(&self, field: &SampledField) -> Result<()> {
        if field.grid.coordinates != Coordinates::Cartesian {
            return Err(invalid(
                "source grid",
                "kernel quadrature needs a cartesian grid",
            ));
        }
        let h = field.grid.spacing(0);
        for k in 1..field.grid.dimension() {
            if (field.grid.spacing(k) - h).abs() > 1e-12 * h {
                return Err(invalid("source grid", "cells must be square/cubic"));
            }
        }
        if let SingularityRule::Regularized { epsilon } = self.rule {
            if !(epsilon > 0.0 && epsilon <= 0.5 * h) {
                return Err(invalid("epsilon", "must lie in (0, h/2]"));
            }
        }
        Ok(())
    }

    /// Index of the node coincident with x, or an error if x is within one
    /// spacing of a nonzero source node without coinciding.
    fn self_node(&self, field: &SampledField, x: &[f64]) -> Result<Option<usize>> {
        if matches!(self.rule, SingularityRule::Regularized { .. }) {
            return Ok(None);
        }
        let g = &field.grid;
        let h = g.spacing(0);
        let mut near = vec![];
        for k in 0..g.dimension() {
            let t = (x[k] - g.lo[k]) / h;
            let i = t.round();
            near.push((i, (t - i).abs() < 1e-9));
        }
        let on_node = near.iter().all(|&(_, exact)| exact)
            && near
                .iter()
                .zip(&g.counts)
                .all(|(&(i, _), &n)| i >= 0.0 && i < n as f64);
        if on_node {
            let ijk: Vec<usize> = near.iter().map(|&(i, _)| i as usize).collect();
            return Ok(Some(g.flatten(&ijk)));
        }
        for idx in 0..g.node_count() {
            if (0..field.components).all(|c| field.at(idx, c) == 0.0) {
                continue;
            }
            let y = g.position(idx);
            let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < h * h {
                return Err(Error::TooCloseToSource);
            }
        }
        Ok(None)
    }

    fn weights(field: &SampledField, idx: usize) -> f64 {
        let g = &field.grid;
        let h = g.spacing(0);
        g.unflatten(idx)
            .iter()
            .zip(&g.counts)
            .map(|(&i, &n)| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .product()
    }

    pub fn velocity(&self, field: &SampledField, x: Point2) -> Result<Point2> {
        self.check(field)?;
        let me = self.self_node(field, &x)?;
        let eps2 = match self.rule {
            SingularityRule::Regularized { epsilon } => epsilon * epsilon,
            _ => 0.0,
        };
        let g = &field.grid;
        let mut u = [0.0; 2];
        for idx in 0..g.node_count() {
            let w = field.at(idx, 0);
            if w == 0.0 || Some(idx) == me {
                continue;
            }
            let y = g.position(idx);
            let z = [x[0] - y[0], x[1] - y[1]];
            let f = Self::weights(field, idx) * w / (2.0 * PI * (z[0] * z[0] + z[1] * z[1] + eps2));
            u[0] -= f * z[1];
            u[1] += f * z[0];
        }
        Ok(u)
    }

    pub fn stream(&self, field: &SampledField, x: Point2) -> Result<f64> {
        self.check(field)?;
        let me = self.self_node(field, &x)?;
        let eps2 = match self.rule {
            SingularityRule::Regularized { epsilon } => epsilon * epsilon,
            _ => 0.0,
        };
        let g = &field.grid;
        let mut psi = 0.0;
        for idx in 0..g.node_count() {
            let w = field.at(idx, 0);
            if w == 0.0 {
                continue;
            }
            if Some(idx) == me {
                psi += w * log_self_cell(0.5 * g.spacing(0)) / (2.0 * PI);
                continue;
            }
            let y = g.position(idx);
            let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + eps2;
            psi += Self::weights(field, idx) * w * r2.ln() / (4.0 * PI);
        }
        Ok(psi)
    }

    /// 3D Biot–Savart velocity from a sampled 3-vector vorticity.
    pub fn velocity_3d(&self, field: &SampledField, x: Point3) -> Result<Point3> {
        self.check(field)?;
        if field.components != 3 {
            return Err(invalid("field", "3D vorticity needs three components"));
        }
        let me = self.self_node(field, &x)?;
        let eps2 = match self.rule {
            SingularityRule::Regularized { epsilon } => epsilon * epsilon,
            _ => 0.0,
        };
        let g = &field.grid;
        let mut u = [0.0; 3];
        for idx in 0..g.node_count() {
            if Some(idx) == me {
                continue;
            }
            let w = [field.at(idx, 0), field.at(idx, 1), field.at(idx, 2)];
            if w == [0.0; 3] {
                continue;
            }
            let y = g.position(idx);
            let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] + eps2;
            let f = -Self::weights(field, idx) / (4.0 * PI * r2 * r2.sqrt());
            let c = cross(z, w);
            for k in 0..3 {
                u[k] += f * c[k];
            }
        }
        Ok(u)
    }

    /// Newtonian potential (E ∗ f)(x), E = (4π|x|)⁻¹, of a sampled scalar.
    pub fn newton_potential_3d(&self, field: &SampledField, x: Point3) -> Result<f64> {
        self.check(field)?;
        let me = self.self_node(field, &x)?;
        let eps2 = match self.rule {
            SingularityRule::Regularized { epsilon } => epsilon * epsilon,
            _ => 0.0,
        };
        let g = &field.grid;
        let mut acc = 0.0;
        for idx in 0..g.node_count() {
            let f = field.at(idx, 0);
            if f == 0.0 {
                continue;
            }
            if Some(idx) == me {
                let a = 0.5 * g.spacing(0);
                acc += f * 8.0 * a * a * INV_DIST_UNIT_CUBE / (4.0 * PI);
                continue;
            }
            let y = g.position(idx);
            let r2: f64 = (0..3).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>() + eps2;
            acc += Self::weights(field, idx) * f / (4.0 * PI * r2.sqrt());
        }
        Ok(acc)
    }
}

/// A 3D velocity with its vector stream function Ψ (u = ∇ × Ψ) and
/// first derivatives; gradients are indexed [component][direction].
pub trait Flow3D: Send + Sync {
    fn velocity(&self, x: Point3) -> Point3;
    fn velocity_gradient(&self, x: Point3) -> [[f64; 3]; 3];
    fn stream(&self, x: Point3) -> Point3;
    fn stream_gradient(&self, x: Point3) -> [[f64; 3]; 3];
}

/// Compactly supported 3D field given by a closure, supported in B_L.
#[derive(Clone)]
pub struct Compact3D<T> {
    pub support_radius: f64,
    /// Radii |y| where the field is non-smooth.
    pub breakpoints: Vec<f64>,
    pub eval: Arc<dyn Fn(Point3) -> T + Send + Sync>,
}

pub type Vorticity3D = Compact3D<Point3>;
pub type Scalar3D = Compact3D<f64>;

impl<T> Compact3D<T> {
    pub fn new(
        support_radius: f64,
        breakpoints: Vec<f64>,
        eval: impl Fn(Point3) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            support_radius,
            breakpoints,
            eval: Arc::new(eval),
        }
    }
}

/// Resolution of the spherical quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self {
            radial: 24,
            polar: 24,
            azimuthal: 48,
        }
    }
}

impl SphereQuadrature {
    pub fn doubled(self) -> Self {
        Self {
            radial: 2 * self.radial,
            polar: 2 * self.polar,
            azimuthal: 2 * self.azimuthal,
        }
    }

    /// Unit directions with solid-angle weights (GL in cos θ, trapezoid in φ).
    fn directions(&self) -> Vec<(Point3, f64)> {
        let gl = GaussLegendre::new(self.polar);
        let mut out = Vec::with_capacity(self.polar * self.azimuthal);
        for (ct, wt) in gl.mapped(-1.0, 1.0) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for k in 0..self.azimuthal {
                let ph = 2.0 * PI * (k as f64 + 0.5) / self.azimuthal as f64;
                out.push((
                    [st * ph.cos(), st * ph.sin(), ct],
                    wt * 2.0 * PI / self.azimuthal as f64,
                ));
            }
        }
        out
    }
}

/// Ray parameters ρ ≥ 0 where x + ρe crosses the sphere |y| = radius.
fn ray_sphere(x: Point3, e: Point3, radius: f64) -> Option<(f64, f64)> {
    let b = x[0] * e[0] + x[1] * e[1] + x[2] * e[2];
    let c = norm3(x).powi(2) - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (lo, hi) = (-b - s, -b + s);
    if hi <= 0.0 {
        None
    } else {
        Some((lo.max(0.0), hi))
    }
}

/// ∫_{S²}∫ g(ρ, e) dρ dΩ over the part of each ray x + ρe inside B_L, with
/// panel breaks where the ray crosses the field's breakpoint spheres.
fn ray_integral<T, F>(field: &Compact3D<T>, x: Point3, q: SphereQuadrature, mut g: F) -> [f64; 3]
where
    F: FnMut(f64, Point3, &T) -> [f64; 3],
{
    let gl = GaussLegendre::new(q.radial);
    let mut acc = [0.0; 3];
    for (e, w_dir) in q.directions() {
        let Some((a, b)) = ray_sphere(x, e, field.support_radius) else {
            continue;
        };
        let mut cuts = vec![];
        for &r in &field.breakpoints {
            if let Some((p, q)) = ray_sphere(x, e, r) {
                cuts.push(p);
                cuts.push(q);
            }
        }
        let pts = breakpoints_within(a, b, &cuts);
        for win in pts.windows(2) {
            for (rho, w) in gl.mapped(win[0], win[1]) {
                let y = [x[0] + rho * e[0], x[1] + rho * e[1], x[2] + rho * e[2]];
                let v = g(rho, e, &(field.eval)(y));
                for k in 0..3 {
                    acc[k] += w * w_dir * v[k];
                }
            }
        }
    }
    acc
}

/// ∫_{B_L} g(y) dy in spherical coordinates about the origin.
fn source_integral<T, F>(field: &Compact3D<T>, q: SphereQuadrature, mut g: F) -> [f64; 3]
where
    F: FnMut(Point3, &T) -> [f64; 3],
{
    let gl = GaussLegendre::new(q.radial);
    let pts = breakpoints_within(0.0, field.support_radius, &field.breakpoints);
    let dirs = q.directions();
    let mut acc = [0.0; 3];
    for win in pts.windows(2) {
        for (r, wr) in gl.mapped(win[0], win[1]) {
            for &(e, wd) in &dirs {
                let y = [r * e[0], r * e[1], r * e[2]];
                let v = g(y, &(field.eval)(y));
                let w = wr * wd * r * r;
                for k in 0..3 {
                    acc[k] += w * v[k];
                }
            }
        }
    }
    acc
}

/// Biot–Savart velocity u(x) = −(4π)⁻¹ ∫ (x − y)/|x − y|³ × ω(y) dy.
///
/// Points outside 1.5 L use source-centred quadrature (smooth kernel);
/// points closer in use rays from x, on which the kernel singularity is
/// absorbed by the ρ² Jacobian.
pub fn velocity_3d(omega: &Vorticity3D, x: Point3, q: SphereQuadrature) -> Point3 {
    if norm3(x) > 1.5 * omega.support_radius {
        source_integral(omega, q, |y, w| {
            let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r = norm3(z);
            let c = cross(z, *w);
            let f = -1.0 / (4.0 * PI * r * r * r);
            [f * c[0], f * c[1], f * c[2]]
        })
    } else {
        // y = x + ρe, x − y = −ρe: integrand (4π)⁻¹ e × ω
        ray_integral(omega, x, q, |_, e, w| {
            let c = cross(e, *w);
            [c[0] / (4.0 * PI), c[1] / (4.0 * PI), c[2] / (4.0 * PI)]
        })
    }
}

/// Ψ(x) = (4π)⁻¹ ∫ ω(y)/|x − y| dy.
pub fn stream_3d(omega: &Vorticity3D, x: Point3, q: SphereQuadrature) -> Point3 {
    if norm3(x) > 1.5 * omega.support_radius {
        source_integral(omega, q, |y, w| {
            let r = norm3([x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
            [
                w[0] / (4.0 * PI * r),
                w[1] / (4.0 * PI * r),
                w[2] / (4.0 * PI * r),
            ]
        })
    } else {
        ray_integral(omega, x, q, |rho, _, w| {
            let f = rho / (4.0 * PI);
            [f * w[0], f * w[1], f * w[2]]
        })
    }
}

/// (E ∗ f)(x) and ∇(E ∗ f)(x) for E = (4π|x|)⁻¹.
pub fn newton_potential(f: &Scalar3D, x: Point3, q: SphereQuadrature) -> (f64, Point3) {
    if norm3(x) > 1.5 * f.support_radius {
        let v = source_integral(f, q, |y, &fy| {
            let r = norm3([x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
            [fy / (4.0 * PI * r), 0.0, 0.0]
        })[0];
        let g = source_integral(f, q, |y, &fy| {
            let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r = norm3(z);
            let c = -fy / (4.0 * PI * r * r * r);
            [c * z[0], c * z[1], c * z[2]]
        });
        (v, g)
    } else {
        let v = ray_integral(f, x, q, |rho, _, &fy| [rho * fy / (4.0 * PI), 0.0, 0.0])[0];
        let g = ray_integral(f, x, q, |_, e, &fy| {
            let c = fy / (4.0 * PI);
            [c * e[0], c * e[1], c * e[2]]
        });
        (v, g)
    }
}

/// One row of the convolution decay table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbeRow {
    pub r: f64,
    pub l2: f64,
    pub l2_grad: f64,
    pub linf: f64,
    pub linf_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    pub rows: Vec<DecayProbeRow>,
    /// Fitted exponents for (L², ∇L², L∞, ∇L∞).
    pub exponents: [f64; 4],
}

/// Norms of E ∗ f and ∇(E ∗ f) over the ball collar Σ_R = {R/2 < |x| < R}
/// for each R; requires Σ_R ⊂ B_{2L}^c, i.e. R ≥ 4L.
pub fn convolution_decay_probe(
    f: &Scalar3D,
    support: f64,
    r_grid: &[f64],
    resolution: SphereQuadrature,
) -> Result<DecayProbe> {
    use rayon::prelude::*;
    if f.support_radius > support * (1.0 + 1e-12) {
        return Err(Error::SupportExceeded {
            found: f.support_radius,
            declared: support,
        });
    }
    for &r in r_grid {
        if r < 4.0 * support {
            return Err(Error::BelowFarField {
                r,
                min: 4.0 * support,
            });
        }
    }
    let shell = SphereQuadrature {
        radial: 16,
        polar: 16,
        azimuthal: 8,
    };
    let rows: Vec<DecayProbeRow> = r_grid
        .iter()
        .map(|&r| {
            let gl = GaussLegendre::new(shell.radial);
            let nodes: Vec<(Point3, f64)> = gl
                .mapped(0.5 * r, r)
                .flat_map(|(rad, wr)| {
                    shell.directions().into_iter().map(move |(e, wd)| {
                        ([rad * e[0], rad * e[1], rad * e[2]], wr * wd * rad * rad)
                    })
                })
                .collect();
            let vals: Vec<(f64, f64, f64)> = nodes
                .par_iter()
                .map(|&(x, w)| {
                    let (v, g) = newton_potential(f, x, resolution);
                    (w, v, norm3(g))
                })
                .collect();
            let mut row = DecayProbeRow {
                r,
                l2: 0.0,
                l2_grad: 0.0,
                linf: 0.0,
                linf_grad: 0.0,
            };
            for (w, v, g) in vals {
                row.l2 += w * v * v;
                row.l2_grad += w * g * g;
                row.linf = row.linf.max(v.abs());
                row.linf_grad = row.linf_grad.max(g);
            }
            // the maximum sits on the inner sphere, which the GL nodes miss
            let inner = [0.5 * r, 0.0, 0.0];
            let (v, g) = newton_potential(f, inner, resolution);
            row.linf = row.linf.max(v.abs());
            row.linf_grad = row.linf_grad.max(norm3(g));
            row.l2 = row.l2.sqrt();
            row.l2_grad = row.l2_grad.sqrt();
            row
        })
        .collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.r).collect();
    let zero = rows.iter().all(|r| r.l2 == 0.0);
    let exponents = if zero || rows.len() < 2 {
        [f64::NAN; 4]
    } else {
        [
            ols_slope(&rs, &rows.iter().map(|r| r.l2).collect::<Vec<_>>()),
            ols_slope(&rs, &rows.iter().map(|r| r.l2_grad).collect::<Vec<_>>()),
            ols_slope(&rs, &rows.iter().map(|r| r.linf).collect::<Vec<_>>()),
            ols_slope(&rs, &rows.iter().map(|r| r.linf_grad).collect::<Vec<_>>()),
        ]
    };
    Ok(DecayProbe { rows, exponents })
}

/// Radii for far-field decay fits: `n` (≥ 6) geometric points on [2R₀, 64R₀].
pub fn decay_radii(r0: f64, n: usize) -> Vec<f64> {
    let n = n.max(6);
    (0..n)
        .map(|i| 2.0 * r0 * 32f64.powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Largest fitted log–log slope of |f| along a set of rays (upper-bound
/// semantics: the decay is at least this fast in every direction).
pub fn ray_decay_exponent<F: Fn(Point2) -> f64>(f: F, r0: f64, directions: usize) -> f64 {
    let angles: Vec<f64> = (0..directions)
        .map(|k| 2.0 * PI * (k as f64 + 0.3) / directions as f64)
        .collect();
    ray_decay_exponent_along(f, r0, &angles)
}

pub fn ray_decay_exponent_along<F: Fn(Point2) -> f64>(f: F, r0: f64, angles: &[f64]) -> f64 {
    let radii = decay_radii(r0, 8);
    angles
        .iter()
        .map(|t| {
            let vals: Vec<f64> = radii
                .iter()
                .map(|&r| f([r * t.cos(), r * t.sin()]).abs())
                .collect();
            ols_slope(&radii, &vals)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// As [`ray_decay_exponent_along`], along unit vectors in space.
pub fn ray_decay_exponent_3d<F: Fn(Point3) -> f64>(f: F, r0: f64, directions: &[Point3]) -> f64 {
    let radii = decay_radii(r0, 8);
    directions
        .iter()
        .map(|e| {
            let vals: Vec<f64> = radii
                .iter()
                .map(|&r| f([r * e[0], r * e[1], r * e[2]]).abs())
                .collect();
            ols_slope(&radii, &vals)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_core::{GridSpec, PolyPiece, RadialProfile};

    fn unit_patch() -> CompactVorticity {
        CompactVorticity::radial(RadialProfile::patch(1.0, 1.0))
    }

    fn annulus() -> CompactVorticity {
        CompactVorticity::radial(RadialProfile::Pieces {
            pieces: vec![
                PolyPiece::constant(0.0, 1.0, 1.0),
                PolyPiece::constant(1.0, 2.0, -1.0 / 3.0),
            ],
        })
    }

    #[test]
    fn patch_velocity_and_stream_closed_forms() {
        let u = velocity_2d(&unit_patch(), [2.0, 0.0]).unwrap();
        assert!(u[0].abs() < 1e-15 && (u[1] - 0.25).abs() < 1e-15);
        let s = stream_2d(&unit_patch());
        assert!(s.psi([1.0, 0.0]).abs() < 1e-15);
        assert!((s.psi([0.0, 0.0]) + 0.25).abs() < 1e-15);
        assert!((s.psi([0.0, std::f64::consts::E]) - 0.5).abs() < 1e-14);
        assert!((s.psi([10.0, 0.0]) - 0.5 * 10f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_vorticity_gives_zero_velocity() {
        let z = CompactVorticity::analytic(vec![]);
        assert_eq!(velocity_2d(&z, [0.3, 1.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn zero_mass_annulus_is_quiet_outside() {
        let u = velocity_2d(&annulus(), [3.0 / 2f64.sqrt(), 3.0 / 2f64.sqrt()]).unwrap();
        assert!(norm2(u) <= 1e-12);
        let s = stream_2d(&annulus());
        for r in [2.0, 2.5, 7.0] {
            assert!(s.psi([r, 0.0]).abs() < 1e-14);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let w = CompactVorticity::analytic(vec![
            Blob {
                profile: RadialProfile::bump(0.6, 1.0),
                center: [0.4, 0.1],
                weight: 1.0,
            },
            Blob {
                profile: RadialProfile::bump(0.5, 1.0),
                center: [-0.4, 0.0],
                weight: -0.7,
            },
        ]);
        let s = stream_2d(&w);
        let h = 1e-5;
        for x in [[0.3, 0.2], [1.5, -0.4], [-0.2, 0.05]] {
            let j = s.jet(x);
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let (jp, jm) = (s.jet(xp), s.jet(xm));
                assert!(((jp.value - jm.value) / (2.0 * h) - j.grad[k]).abs() < 1e-8);
                for i in 0..2 {
                    let fd = (jp.grad[i] - jm.grad[i]) / (2.0 * h);
                    assert!((fd - j.hess[i][k]).abs() < 1e-7);
                }
                let lap_fd = (jp.vorticity() - jm.vorticity()) / (2.0 * h);
                assert!((lap_fd - j.grad_lap[k]).abs() < 1e-6);
            }
            assert!((j.vorticity() - w.value(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn perp_gradient_equals_velocity() {
        let s = stream_2d(&unit_patch());
        for x in [[0.5, 0.2], [3.0, -1.0]] {
            let g = s.gradient(x);
            let u = velocity_2d(&unit_patch(), x).unwrap();
            assert!((u[0] + g[1]).abs() < 1e-10 && (u[1] - g[0]).abs() < 1e-10);
        }
    }

    fn sampled_bump(n: usize) -> (SampledField, CompactVorticity) {
        let w = CompactVorticity::radial(RadialProfile::bump(1.0, 1.0));
        let g = GridSpec::cartesian(&[-1.0, -1.0], &[1.0, 1.0], &[n, n]).unwrap();
        let f = SampledField::from_fn(g, 1, |x| vec![w.value([x[0], x[1]])]).unwrap();
        (f, w)
    }

    #[test]
    fn quadrature_matches_radial_formula_off_support() {
        let (field, w) = sampled_bump(161);
        let q = KernelQuadrature::default();
        for x in [[1.5, 0.0], [2.0, 1.0], [0.0, -4.0]] {
            let exact = velocity_2d(&w, x).unwrap();
            let num = q.velocity(&field, x).unwrap();
            let rel = norm2([num[0] - exact[0], num[1] - exact[1]]) / norm2(exact);
            assert!(rel < 1e-6, "rel {rel}");
            let ps = stream_2d(&w).psi(x);
            assert!((q.stream(&field, x).unwrap() - ps).abs() < 1e-6 * ps.abs().max(1e-3));
        }
    }

    #[test]
    fn self_cell_quadrature_converges_at_second_order() {
        let mut hs = vec![];
        let mut errs = vec![];
        for n in [41, 81, 161] {
            let (field, w) = sampled_bump(n);
            let h = field.grid.spacing(0);
            // node at (0.25, 0.25) exists for these grids
            let x = [0.25, 0.25];
            let num = KernelQuadrature::default().stream(&field, x).unwrap();
            hs.push(h);
            errs.push((num - stream_2d(&w).psi(x)).abs());
        }
        let slope = ols_slope(&hs, &errs);
        assert!(slope > 1.8, "slope {slope} errs {errs:?}");
    }

    #[test]
    fn quadrature_refuses_near_source_points() {
        let (field, _) = sampled_bump(21);
        let h = field.grid.spacing(0);
        let x = [0.1 + 0.3 * h, 0.0];
        assert_eq!(
            KernelQuadrature::default().velocity(&field, x),
            Err(Error::TooCloseToSource)
        );
        assert!(KernelQuadrature::regularized(0.4 * h)
            .velocity(&field, x)
            .is_ok());
        assert!(KernelQuadrature::regularized(0.9 * h)
            .velocity(&field, x)
            .is_err());
    }

    #[test]
    fn self_cell_constants() {
        // brute force midpoint sums
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut s2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 + 0.5) * h - 0.5, (j as f64 + 0.5) * h - 0.5);
                s2 += 0.5 * (x * x + y * y).ln() * h * h;
            }
        }
        assert!((log_self_cell(0.5) - s2).abs() < 1e-5);
        let n = 200;
        let h = 1.0 / n as f64;
        let mut s3 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [
                        (i as f64 + 0.5) * h,
                        (j as f64 + 0.5) * h,
                        (k as f64 + 0.5) * h,
                    ];
                    s3 += h * h * h / norm3(p);
                }
            }
        }
        assert!((INV_DIST_UNIT_CUBE - s3).abs() < 1e-3);
    }

    #[test]
    fn newton_potential_of_unit_ball_is_point_mass_outside() {
        let f = Scalar3D::new(1.0, vec![1.0], |y| if norm3(y) <= 1.0 { 1.0 } else { 0.0 });
        for x in [[2.0, 0.0, 0.0], [3.0, 1.0, -2.0], [0.5, 0.5, 0.5]] {
            let (v, g) = newton_potential(&f, x, SphereQuadrature::default());
            let r = norm3(x);
            if r > 1.0 {
                assert!((v - 1.0 / (3.0 * r)).abs() < 1e-10, "{v}");
                let gr = -1.0 / (3.0 * r * r * r);
                for k in 0..3 {
                    assert!((g[k] - gr * x[k]).abs() < 1e-10);
                }
            } else {
                // inside: (3 − r²)/6
                assert!((v - (3.0 - r * r) / 6.0).abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn decay_probe_rejects_near_grid() {
        let f = Scalar3D::new(1.0, vec![1.0], |_| 1.0);
        assert!(matches!(
            convolution_decay_probe(&f, 1.0, &[2.0, 8.0], SphereQuadrature::default()),
            Err(Error::BelowFarField { .. })
        ));
    }

    #[test]
    fn zero_source_gives_zero_probe() {
        let f = Scalar3D::new(1.0, vec![], |_| 0.0);
        let p = convolution_decay_probe(
            &f,
            1.0,
            &[4.0, 8.0, 16.0, 32.0],
            SphereQuadrature::default(),
        )
        .unwrap();
        assert!(p.rows.iter().all(|r| r.l2 == 0.0 && r.linf_grad == 0.0));
    }

    #[test]
    fn linf_ratio_halves_between_8_and_16() {
        let f = Scalar3D::new(1.0, vec![1.0], |y| if norm3(y) <= 1.0 { 1.0 } else { 0.0 });
        let p =
            convolution_decay_probe(&f, 1.0, &[8.0, 16.0], SphereQuadrature::default()).unwrap();
        let ratio = p.rows[1].linf / p.rows[0].linf;
        assert!((ratio - 0.5).abs() < 0.05);
    }
}
