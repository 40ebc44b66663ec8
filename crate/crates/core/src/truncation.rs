//! The truncation operators T_R (2D and 3D), the projection W_R onto
//! H(Ω_R) on the disk by two independent routes, and the steady Euler
//! identity check.

use crate::biot_savart::{stream_2d, Flow2D, Flow3D, StreamFunction2D};
use crate::cutoff_geometry::{CutoffFunction, CutoffVariant};
use crate::error::{invalid, Error, Result};
use crate::field_core::{
    cross, norm2, norm3, CompactVorticity, Coordinates, Point2, Point3, SampledField, Shape,
};
use crate::norms_rates::{l2_norm, NormOptions, Region};
use crate::quadrature::GaussLegendre;
use crate::reference_flows::PlanarFlow;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamNormalization {
    /// ψ_σ = 0 on Γ_R (disk).
    BoundaryZero,
    /// ψ_σ has zero mean over Σ_R.
    MeanZeroOnCollar,
}

/// u^R = ∇⊥(φ^R ψ) = φ^R u + ψ∇⊥φ^R.
#[derive(Debug, Clone)]
pub struct TruncatedField2D {
    pub cutoff: CutoffFunction,
    pub stream: StreamFunction2D,
    pub normalization: StreamNormalization,
    pub mass: f64,
}

fn cutoff_shape(cutoff: &CutoffFunction) -> Result<Shape> {
    match (&cutoff.chart, cutoff.variant) {
        (Some(c), CutoffVariant::Collar2D) => Ok(c.domain.shape),
        _ => Err(invalid("cutoff", "expected a 2D collar cutoff")),
    }
}

/// T_R u on a disk or, for zero-mass flows, any supported domain.
pub fn truncate_2d(flow: &PlanarFlow, cutoff: &CutoffFunction) -> Result<TruncatedField2D> {
    let shape = cutoff_shape(cutoff)?;
    let zero_mass = flow.is_zero_mass();
    if shape != Shape::Disk && !zero_mass {
        return Err(Error::NonzeroMassOnNonDisk);
    }
    // σ is centred at the origin with support inside B_{R₀}; on Γ_R, ψ_σ = (m/2π) ln R
    let offset = if zero_mass {
        0.0
    } else {
        flow.mass / (2.0 * PI) * cutoff.radius.ln()
    };
    Ok(TruncatedField2D {
        cutoff: cutoff.clone(),
        stream: flow.stream().shifted(offset),
        normalization: StreamNormalization::BoundaryZero,
        mass: flow.mass,
    })
}

/// T_R u with ψ_σ normalized to mean zero over Σ_R. This is the setting in
/// which non-disk domains fail to converge for m ≠ 0.
pub fn truncate_2d_mean_zero(
    flow: &PlanarFlow,
    cutoff: &CutoffFunction,
) -> Result<TruncatedField2D> {
    cutoff_shape(cutoff)?;
    let chart = cutoff.chart.as_ref().unwrap();
    let offset = if flow.is_zero_mass() {
        0.0
    } else {
        flow.mass / (2.0 * PI) * collar_mean(chart, |x| norm2(x).ln())
    };
    Ok(TruncatedField2D {
        cutoff: cutoff.clone(),
        stream: flow.stream().shifted(offset),
        normalization: StreamNormalization::MeanZeroOnCollar,
        mass: flow.mass,
    })
}

/// Area average of f over Σ_R.
fn collar_mean<F: Fn(Point2) -> f64>(chart: &crate::cutoff_geometry::TubularChart, f: F) -> f64 {
    let gl = GaussLegendre::new(16);
    let n = 2048;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        let p = chart.domain.boundary_point(t);
        let (a, b) = chart.domain.unit_axes();
        let sc = chart.domain.scale;
        let d = [-a * t.sin(), b * t.cos()];
        let sp = norm2(d);
        let nrm = [-d[1] / sp, d[0] / sp];
        let kappa = a * b / (sp * sp * sp) / sc;
        for (r, w) in gl.mapped(0.0, chart.width) {
            let jac = sc * sp * (1.0 - kappa * r) * w;
            num += jac * f([p[0] + r * nrm[0], p[1] + r * nrm[1]]);
            den += jac;
        }
    }
    num / den
}

impl TruncatedField2D {
    fn inside(&self, x: Point2) -> bool {
        self.cutoff.chart.as_ref().unwrap().domain.contains2(x)
    }

    /// (φ^R u, ψ∇⊥φ^R).
    pub fn parts(&self, x: Point2) -> (Point2, Point2) {
        if !self.inside(x) {
            return ([0.0; 2], [0.0; 2]);
        }
        let c = self.cutoff.jet2(x);
        if c.value == 1.0 && c.grad == [0.0, 0.0] {
            return (self.stream.velocity(x), [0.0; 2]);
        }
        let j = self.stream.jet(x);
        let u = j.velocity();
        (
            [c.value * u[0], c.value * u[1]],
            [-j.value * c.grad[1], j.value * c.grad[0]],
        )
    }

    pub fn velocity(&self, x: Point2) -> Point2 {
        let (a, b) = self.parts(x);
        [a[0] + b[0], a[1] + b[1]]
    }

    /// Composite evaluation ∇⊥(φψ) from the jets of the product.
    pub fn velocity_composite(&self, x: Point2) -> Point2 {
        if !self.inside(x) {
            return [0.0; 2];
        }
        let c = self.cutoff.jet2(x);
        let j = self.stream.jet(x);
        let g = [
            c.grad[0] * j.value + c.value * j.grad[0],
            c.grad[1] * j.value + c.value * j.grad[1],
        ];
        [-g[1], g[0]]
    }

    /// ∂_k u^R_i at [i][k].
    pub fn gradient(&self, x: Point2) -> [[f64; 2]; 2] {
        if !self.inside(x) {
            return [[0.0; 2]; 2];
        }
        let c = self.cutoff.jet2(x);
        let j = self.stream.jet(x);
        if c.value == 1.0 && c.grad == [0.0, 0.0] {
            return j.velocity_gradient();
        }
        let mut f = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                f[a][b] = c.hess[a][b] * j.value
                    + c.grad[a] * j.grad[b]
                    + c.grad[b] * j.grad[a]
                    + c.value * j.hess[a][b];
            }
        }
        [[-f[1][0], -f[1][1]], [f[0][0], f[0][1]]]
    }

    pub fn divergence(&self, x: Point2) -> f64 {
        let g = self.gradient(x);
        g[0][0] + g[1][1]
    }

    /// Δu^R by central differences of the exact gradient.
    pub fn laplacian(&self, x: Point2) -> Point2 {
        let h = 1e-4 * self.cutoff.collar_width().min(1.0);
        let mut out = [0.0; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (self.gradient(xp), self.gradient(xm));
            for i in 0..2 {
                out[i] += (gp[i][k] - gm[i][k]) / (2.0 * h);
            }
        }
        out
    }

    /// u − u^R on Ω_R.
    pub fn error(&self, x: Point2) -> Point2 {
        if !self.inside(x) {
            return [0.0; 2];
        }
        let u = self.stream.velocity(x);
        let v = self.velocity(x);
        [u[0] - v[0], u[1] - v[1]]
    }

    pub fn error_gradient(&self, x: Point2) -> [[f64; 2]; 2] {
        if !self.inside(x) {
            return [[0.0; 2]; 2];
        }
        let g = self.stream.jet(x).velocity_gradient();
        let h = self.gradient(x);
        [
            [g[0][0] - h[0][0], g[0][1] - h[0][1]],
            [g[1][0] - h[1][0], g[1][1] - h[1][1]],
        ]
    }

    /// Normalized ψ.
    pub fn psi(&self, x: Point2) -> f64 {
        self.stream.psi(x)
    }
}

/// u^R = ∇ × (φ^R Ψ) = φ^R u + ∇φ^R × Ψ.
#[derive(Debug, Clone)]
pub struct TruncatedField3D<F> {
    pub cutoff: CutoffFunction,
    pub flow: F,
}

pub fn truncate_3d<F: Flow3D + Clone>(
    flow: &F,
    cutoff: &CutoffFunction,
) -> Result<TruncatedField3D<F>> {
    if cutoff.variant != CutoffVariant::Dilation3D || cutoff.theta != 1.0 {
        return Err(invalid(
            "cutoff",
            "3D truncation needs the ball dilation cutoff with theta = 1",
        ));
    }
    Ok(TruncatedField3D {
        cutoff: cutoff.clone(),
        flow: flow.clone(),
    })
}

impl<F: Flow3D> TruncatedField3D<F> {
    fn inside(&self, x: Point3) -> bool {
        norm3(x) < self.cutoff.radius
    }

    /// (φ^R u, ∇φ^R × Ψ).
    pub fn parts(&self, x: Point3) -> (Point3, Point3) {
        if !self.inside(x) {
            return ([0.0; 3], [0.0; 3]);
        }
        let c = self.cutoff.jet3(x);
        let u = self.flow.velocity(x);
        if c.grad == [0.0; 3] {
            return ([c.value * u[0], c.value * u[1], c.value * u[2]], [0.0; 3]);
        }
        let t = cross(c.grad, self.flow.stream(x));
        ([c.value * u[0], c.value * u[1], c.value * u[2]], t)
    }

    pub fn velocity(&self, x: Point3) -> Point3 {
        let (a, b) = self.parts(x);
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    /// ∂_k u^R = φ∂_k u + ∇∂_kφ × Ψ + (∂_kφ)u + ∇φ × ∂_kΨ, at [i][k].
    pub fn gradient(&self, x: Point3) -> [[f64; 3]; 3] {
        if !self.inside(x) {
            return [[0.0; 3]; 3];
        }
        let c = self.cutoff.jet3(x);
        let du = self.flow.velocity_gradient(x);
        if c.grad == [0.0; 3] {
            let mut out = du;
            for row in out.iter_mut() {
                for v in row.iter_mut() {
                    *v *= c.value;
                }
            }
            return out;
        }
        let u = self.flow.velocity(x);
        let psi = self.flow.stream(x);
        let dpsi = self.flow.stream_gradient(x);
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            let hk = [c.hess[0][k], c.hess[1][k], c.hess[2][k]];
            let a = cross(hk, psi);
            let dk_psi = [dpsi[0][k], dpsi[1][k], dpsi[2][k]];
            let b = cross(c.grad, dk_psi);
            for i in 0..3 {
                out[i][k] = c.value * du[i][k] + a[i] + c.grad[k] * u[i] + b[i];
            }
        }
        out
    }

    /// Δu^R by central differences of the gradient.
    pub fn laplacian(&self, x: Point3) -> Point3 {
        let h = 1e-4 * (self.cutoff.radius * self.cutoff.delta1).min(1.0);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (self.gradient(xp), self.gradient(xm));
            for i in 0..3 {
                out[i] += (gp[i][k] - gm[i][k]) / (2.0 * h);
            }
        }
        out
    }

    pub fn error(&self, x: Point3) -> Point3 {
        if !self.inside(x) {
            return [0.0; 3];
        }
        let u = self.flow.velocity(x);
        let v = self.velocity(x);
        [u[0] - v[0], u[1] - v[1], u[2] - v[2]]
    }

    pub fn error_gradient(&self, x: Point3) -> [[f64; 3]; 3] {
        if !self.inside(x) {
            return [[0.0; 3]; 3];
        }
        let g = self.flow.velocity_gradient(x);
        let h = self.gradient(x);
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                out[i][k] = g[i][k] - h[i][k];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionRoute {
    VorticityRoute,
    HelmholtzRoute,
}

pub type VelocityFn = Arc<dyn Fn(Point2) -> Point2 + Send + Sync>;

#[derive(Clone)]
enum Projection {
    /// Biot–Savart velocity of ω minus the disk images of each blob.
    Images {
        stream: StreamFunction2D,
        images: Vec<(Point2, f64)>,
    },
    Spectral(PolarPoisson),
    /// u − ∇p with p harmonic, ∂p/∂n = u·n; p′(z) = Σ c_k (z/R)^{k−1}.
    Neumann {
        u: VelocityFn,
        coeffs: Vec<(f64, f64)>,
    },
}

/// W_R u on the disk of radius `radius`.
#[derive(Clone)]
pub struct ProjectionResult {
    pub route: ProjectionRoute,
    pub radius: f64,
    inner: Projection,
}

impl std::fmt::Debug for ProjectionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectionResult")
            .field("route", &self.route)
            .field("radius", &self.radius)
            .finish()
    }
}

fn point_vortex(x: Point2, c: Point2, m: f64) -> Point2 {
    let d = [x[0] - c[0], x[1] - c[1]];
    let r2 = d[0] * d[0] + d[1] * d[1];
    let f = m / (2.0 * PI * r2);
    [-f * d[1], f * d[0]]
}

impl ProjectionResult {
    pub fn velocity(&self, x: Point2) -> Point2 {
        if norm2(x) > self.radius {
            return [0.0; 2];
        }
        match &self.inner {
            Projection::Images { stream, images } => {
                let mut u = stream.velocity(x);
                for &(c, m) in images {
                    let v = point_vortex(x, c, m);
                    u[0] -= v[0];
                    u[1] -= v[1];
                }
                u
            }
            Projection::Spectral(p) => p.velocity(x),
            Projection::Neumann { u, .. } => {
                let v = u(x);
                let g = self.neumann_gradient(x);
                [v[0] - g[0], v[1] - g[1]]
            }
        }
    }

    fn neumann_gradient(&self, x: Point2) -> Point2 {
        let Projection::Neumann { coeffs, .. } = &self.inner else {
            return [0.0; 2];
        };
        let z = [x[0] / self.radius, x[1] / self.radius];
        // Horner for Σ c_k z^{k−1}
        let mut acc = [0.0, 0.0];
        for &(re, im) in coeffs.iter().rev() {
            acc = [
                acc[0] * z[0] - acc[1] * z[1] + re,
                acc[0] * z[1] + acc[1] * z[0] + im,
            ];
        }
        [acc[0], -acc[1]]
    }

    /// The gradient part ∇p = u − W_R u, where available from the route alone.
    pub fn pressure_gradient(&self, x: Point2) -> Option<Point2> {
        match &self.inner {
            Projection::Images { images, .. } => {
                let mut g = [0.0; 2];
                for &(c, m) in images {
                    let v = point_vortex(x, c, m);
                    g[0] += v[0];
                    g[1] += v[1];
                }
                Some(g)
            }
            Projection::Neumann { .. } => Some(self.neumann_gradient(x)),
            Projection::Spectral(_) => None,
        }
    }
}

/// W_R u as the unique field in H(Ω_R) sharing the vorticity of u.
pub fn project_w_vorticity(omega: &CompactVorticity, radius: f64) -> Result<ProjectionResult> {
    if !(radius > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    let inner = match omega {
        CompactVorticity::Analytic { blobs, .. } => {
            let mut images = vec![];
            for b in blobs {
                let c = norm2(b.center);
                if b.reach() > radius {
                    return Err(Error::SupportExceeded {
                        found: b.reach(),
                        declared: radius,
                    });
                }
                if c > 1e-14 * radius {
                    let s = radius * radius / (c * c);
                    images.push((
                        [s * b.center[0], s * b.center[1]],
                        b.weight * b.profile.mass(),
                    ));
                }
            }
            Projection::Images {
                stream: stream_2d(omega),
                images,
            }
        }
        CompactVorticity::Sampled { field, .. } => {
            Projection::Spectral(PolarPoisson::new(field, radius)?)
        }
    };
    Ok(ProjectionResult {
        route: ProjectionRoute::VorticityRoute,
        radius,
        inner,
    })
}

/// W_R u = u − ∇p with Δp = 0 and ∂p/∂n = u·n on Γ_R.
pub fn project_w_helmholtz(u: VelocityFn, radius: f64) -> Result<ProjectionResult> {
    if !(radius > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    let n = 1024;
    let g: Vec<f64> = (0..n)
        .map(|l| {
            let s = 2.0 * PI * l as f64 / n as f64;
            let e = [s.cos(), s.sin()];
            let v = u([radius * e[0], radius * e[1]]);
            v[0] * e[0] + v[1] * e[1]
        })
        .collect();
    let mean = g.iter().sum::<f64>() / n as f64;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if mean.abs() > 1e-10 * scale {
        return Err(Error::IncompatibleFlux(mean));
    }
    let kmax = n / 2 - 1;
    let mut coeffs = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let (mut re, mut im) = (0.0, 0.0);
        for (l, gv) in g.iter().enumerate() {
            let a = 2.0 * PI * (k * l % n) as f64 / n as f64;
            re += gv * a.cos();
            im -= gv * a.sin();
        }
        coeffs.push((2.0 * re / n as f64, 2.0 * im / n as f64));
    }
    // drop the numerically empty tail
    let big = coeffs.iter().fold(0.0f64, |m, c| m.max(c.0.hypot(c.1)));
    while coeffs.len() > 1
        && coeffs
            .last()
            .is_some_and(|c| c.0.hypot(c.1) < 1e-18 * big.max(1e-300))
    {
        coeffs.pop();
    }
    Ok(ProjectionResult {
        route: ProjectionRoute::HelmholtzRoute,
        radius,
        inner: Projection::Neumann { u, coeffs },
    })
}

/// Exponents (a, b) of the polynomials P = (x/R)^a (y/R)^b generating the
/// test fields w = ∇⊥((R² − r²)P) ∈ H(Ω_R).
pub const BATTERY: [(i32, i32); 12] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (0, 4),
];

fn battery_field(a: i32, b: i32, r: f64, x: Point2) -> Point2 {
    let (xs, ys) = (x[0] / r, x[1] / r);
    let p = xs.powi(a) * ys.powi(b);
    let px = if a > 0 {
        a as f64 * xs.powi(a - 1) * ys.powi(b) / r
    } else {
        0.0
    };
    let py = if b > 0 {
        b as f64 * xs.powi(a) * ys.powi(b - 1) / r
    } else {
        0.0
    };
    let q = r * r - x[0] * x[0] - x[1] * x[1];
    [-(-2.0 * x[1] * p + q * py), -2.0 * x[0] * p + q * px]
}

/// Normalized pairings |⟨g, w_i⟩| / (‖g‖‖w_i‖) of the gradient part
/// g = u − W_R u against the battery. All zero when ‖g‖ is below 1e-12·scale,
/// where g is rounding noise.
pub fn orthogonality_residuals(
    gradient_part: &(dyn Fn(Point2) -> Point2 + Sync),
    radius: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    let disk = Region::Disk { radius };
    let opts = NormOptions {
        tolerance: 1e-12,
        max_level: 64,
        absolute_tolerance: 1e-14 * scale,
        ..NormOptions::default()
    };
    let gn = l2_norm(
        |p: &[f64]| gradient_part([p[0], p[1]]).to_vec(),
        &disk,
        &opts,
    )?;
    if gn <= 1e-12 * scale {
        return Ok(vec![0.0; BATTERY.len()]);
    }
    let opts = NormOptions {
        absolute_tolerance: 1e-300,
        ..opts
    };
    BATTERY
        .iter()
        .map(|&(a, b)| {
            let wn = l2_norm(
                |p: &[f64]| battery_field(a, b, radius, [p[0], p[1]]).to_vec(),
                &disk,
                &opts,
            )?;
            let pair = |sign: f64| {
                l2_norm(
                    |p: &[f64]| {
                        let x = [p[0], p[1]];
                        let g = gradient_part(x);
                        let w = battery_field(a, b, radius, x);
                        vec![g[0] / gn + sign * w[0] / wn, g[1] / gn + sign * w[1] / wn]
                    },
                    &disk,
                    &opts,
                )
            };
            let (plus, minus) = (pair(1.0)?, pair(-1.0)?);
            Ok(((plus * plus - minus * minus) / 4.0).abs())
        })
        .collect()
}

/// Dirichlet Poisson solve Δψ = ω on the disk from polar samples:
/// Fourier in angle, exact radial Green's function per mode.
#[derive(Debug, Clone)]
struct PolarPoisson {
    radius: f64,
    rho: Vec<f64>,
    h: f64,
    /// modes[k][j] = ω_k(ρ_j), k = 0..=kmax.
    modes: Vec<Vec<(f64, f64)>>,
}

const MAX_MODES: usize = 64;

impl PolarPoisson {
    fn new(field: &SampledField, radius: f64) -> Result<Self> {
        let g = &field.grid;
        if g.coordinates != Coordinates::Polar
            || g.lo[0] != 0.0
            || (g.hi[0] - radius).abs() > 1e-12 * radius
        {
            return Err(invalid("vorticity grid", "need a polar grid on [0, R]"));
        }
        let (nr, ns) = (g.counts[0], g.counts[1]);
        if nr > 2048 {
            return Err(invalid("vorticity grid", "at most 2048 radial nodes"));
        }
        let kmax = MAX_MODES.min(ns / 2);
        let h = g.spacing(0);
        let rho: Vec<f64> = (0..nr).map(|j| (j as f64 + 0.5) * h).collect();
        let mut modes = vec![vec![(0.0, 0.0); nr]; kmax + 1];
        for j in 0..nr {
            for l in 0..ns {
                let w = field.at(g.flatten(&[j, l]), 0);
                if w == 0.0 {
                    continue;
                }
                let s = 2.0 * PI * l as f64 / ns as f64;
                for (k, m) in modes.iter_mut().enumerate() {
                    let a = k as f64 * s;
                    m[j].0 += w * a.cos() / ns as f64;
                    m[j].1 -= w * a.sin() / ns as f64;
                }
            }
        }
        Ok(Self {
            radius,
            rho,
            h,
            modes,
        })
    }

    /// (G_k(r, ρ), ∂_r G_k(r, ρ)).
    fn green(&self, k: usize, r: f64, rho: f64) -> (f64, f64) {
        let rr = self.radius;
        if k == 0 {
            return if r > rho {
                ((r / rr).ln(), 1.0 / r)
            } else {
                ((rho / rr).ln(), 0.0)
            };
        }
        let kf = k as f64;
        let q = (r * rho / (rr * rr)).powi(k as i32);
        if r < rho {
            let a = (r / rho).powi(k as i32);
            (-(a - q) / (2.0 * kf), -(a - q) / (2.0 * r))
        } else {
            let a = (rho / r).powi(k as i32);
            (-(a - q) / (2.0 * kf), (a + q) / (2.0 * r))
        }
    }

    fn velocity(&self, x: Point2) -> Point2 {
        let r = norm2(x);
        if r < 1e-14 {
            let e = 1e-7;
            let a = self.velocity([e, 0.0]);
            let b = self.velocity([-e, 0.0]);
            return [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        }
        let s = x[1].atan2(x[0]);
        let (mut psi_r, mut psi_s) = (0.0, 0.0);
        for (k, m) in self.modes.iter().enumerate() {
            let (mut gr_re, mut gr_im, mut g_re, mut g_im) = (0.0, 0.0, 0.0, 0.0);
            for (j, &rho) in self.rho.iter().enumerate() {
                let (gv, gd) = self.green(k, r, rho);
                let w = rho * self.h;
                g_re += gv * m[j].0 * w;
                g_im += gv * m[j].1 * w;
                gr_re += gd * m[j].0 * w;
                gr_im += gd * m[j].1 * w;
            }
            let (c, sn) = ((k as f64 * s).cos(), (k as f64 * s).sin());
            let f = if k == 0 { 1.0 } else { 2.0 };
            psi_r += f * (gr_re * c - gr_im * sn);
            psi_s += f * k as f64 * (-g_re * sn - g_im * c);
        }
        let e_r = [s.cos(), s.sin()];
        let e_s = [-s.sin(), s.cos()];
        let grad = [
            psi_r * e_r[0] + psi_s / r * e_s[0],
            psi_r * e_r[1] + psi_s / r * e_s[1],
        ];
        [-grad[1], grad[0]]
    }
}

/// L² norm of −φ^R(u·∇u + ∇p) for a steady radial flow, the right-hand
/// side of the evolution identity for u^R (∂_tψ = 0). With a grid, the
/// pressure is sampled at the nodes and differentiated at second order.
pub fn euler_identity_residual(
    flow: &PlanarFlow,
    cutoff: &CutoffFunction,
    grid: Option<&crate::field_core::GridSpec>,
) -> Result<f64> {
    let radial = flow
        .radial
        .as_ref()
        .ok_or_else(|| invalid("flow", "requires a steady flow (centred radial vorticity)"))?;
    let r_big = cutoff.radius;
    let advect = |x: Point2| {
        let j = flow.stream().jet(x);
        let u = j.velocity();
        let g = j.velocity_gradient();
        [
            u[0] * g[0][0] + u[1] * g[0][1],
            u[0] * g[1][0] + u[1] * g[1][1],
        ]
    };
    match grid {
        None => {
            let f = |p: &[f64]| {
                let x = [p[0], p[1]];
                let r = norm2(x);
                let a = advect(x);
                let ut = radial.u_theta(r);
                let dp = if r > 0.0 { ut * ut / r } else { 0.0 };
                let gp = if r > 0.0 {
                    [dp * x[0] / r, dp * x[1] / r]
                } else {
                    [0.0; 2]
                };
                let phi = cutoff.value2(x);
                vec![-phi * (a[0] + gp[0]), -phi * (a[1] + gp[1])]
            };
            let mut breaks = flow.breakpoints.clone();
            breaks.push(r_big - cutoff.collar_width());
            breaks.push(r_big - 0.5 * cutoff.collar_width());
            let opts = NormOptions {
                absolute_tolerance: 1e-12 * flow.max_speed().max(1.0) * r_big,
                ..NormOptions::with_breaks(&breaks)
            };
            l2_norm(f, &Region::Disk { radius: r_big }, &opts)
        }
        Some(g) => {
            if g.coordinates != Coordinates::Cartesian || g.dimension() != 2 {
                return Err(invalid(
                    "grid",
                    "sampled pressure path needs a 2D cartesian grid",
                ));
            }
            let p = SampledField::from_fn(g.clone(), 1, |x| {
                vec![flow.pressure([x[0], x[1]]).unwrap_or(0.0)]
            })?;
            let (hx, hy) = (g.spacing(0), g.spacing(1));
            let (nx, ny) = (g.counts[0], g.counts[1]);
            let mut acc = 0.0;
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let idx = g.flatten(&[i, j]);
                    let pos = g.position(idx);
                    let x = [pos[0], pos[1]];
                    if norm2(x) >= r_big {
                        continue;
                    }
                    let gp = [
                        (p.at(g.flatten(&[i + 1, j]), 0) - p.at(g.flatten(&[i - 1, j]), 0))
                            / (2.0 * hx),
                        (p.at(g.flatten(&[i, j + 1]), 0) - p.at(g.flatten(&[i, j - 1]), 0))
                            / (2.0 * hy),
                    ];
                    let a = advect(x);
                    let phi = cutoff.value2(x);
                    acc += phi * phi * ((a[0] + gp[0]).powi(2) + (a[1] + gp[1]).powi(2)) * hx * hy;
                }
            }
            Ok(acc.sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff_geometry::build_cutoff;
    use crate::field_core::{Blob, DomainSpec, GridSpec, RadialProfile};
    use crate::norms_rates::ols_slope;
    use crate::reference_flows::{lookup, off_center_patch, HillVortex3D};

    fn planar(name: &str) -> PlanarFlow {
        lookup(name).unwrap().planar().unwrap().clone()
    }

    fn disk_cut(theta: f64, r: f64) -> CutoffFunction {
        build_cutoff(&DomainSpec::disk(1.0), theta, r).unwrap()
    }

    #[test]
    fn identity_away_from_collar_and_zero_on_boundary() {
        let t = truncate_2d(&planar("patch-II"), &disk_cut(1.0 / 3.0, 40.0)).unwrap();
        let x = [2.0, 0.0];
        assert_eq!(t.velocity(x), planar("patch-II").velocity(x));
        for k in 0..16 {
            let s = 2.0 * PI * k as f64 / 16.0;
            let v = t.velocity([40.0 * s.cos(), 40.0 * s.sin()]);
            assert!(norm2(v) <= 1e-10);
        }
    }

    #[test]
    fn two_term_expansion_matches_composite() {
        let dom = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 1.0).unwrap();
        let cut = build_cutoff(&dom, 0.5, 20.0).unwrap();
        let t = truncate_2d(&planar("smooth-dipole-I"), &cut).unwrap();
        let chart = cut.chart.as_ref().unwrap();
        for k in 0..10 {
            let x = chart.point_at(
                chart.perimeter() * k as f64 / 10.0,
                0.2 * cut.collar_width(),
            );
            let (a, b) = (t.velocity(x), t.velocity_composite(x));
            assert!(norm2([a[0] - b[0], a[1] - b[1]]) <= 1e-14 * (1.0 + norm2(a)));
            assert!(t.divergence(x).abs() < 1e-12);
        }
    }

    #[test]
    fn nonzero_mass_rejected_off_disk() {
        let dom = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 1.0).unwrap();
        let cut = build_cutoff(&dom, 1.0, 20.0).unwrap();
        assert_eq!(
            truncate_2d(&planar("patch-II"), &cut).unwrap_err(),
            Error::NonzeroMassOnNonDisk
        );
        assert!(truncate_2d_mean_zero(&planar("patch-II"), &cut).is_ok());
    }

    #[test]
    fn error_is_local_to_the_collar() {
        let cut = disk_cut(1.0, 16.0);
        let t = truncate_2d(&planar("dipole-I"), &cut).unwrap();
        for r in [1.0, 5.0, 7.9] {
            assert_eq!(t.error([r, 0.3]), [0.0, 0.0]);
        }
        assert!(norm2(t.error([15.0, 0.0])) > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = truncate_2d(&planar("patch-II"), &disk_cut(1.0 / 3.0, 27.0)).unwrap();
        let h = 1e-6;
        let x = [25.5, 1.0];
        let g = t.gradient(x);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (a, b) = (t.velocity(xp), t.velocity(xm));
            for i in 0..2 {
                assert!(((a[i] - b[i]) / (2.0 * h) - g[i][k]).abs() < 1e-7);
            }
        }
    }

    fn trunc_error(flow: &PlanarFlow, cut: &CutoffFunction) -> f64 {
        let t = truncate_2d(flow, cut).unwrap();
        let w = cut.collar_width();
        let opts = NormOptions::with_breaks(&[cut.radius - w, cut.radius - 0.5 * w]);
        l2_norm(
            |p: &[f64]| t.error([p[0], p[1]]).to_vec(),
            &Region::collar(cut),
            &opts,
        )
        .unwrap()
    }

    #[test]
    fn zero_mass_dipole_rate_constant_is_stable() {
        let f = planar("dipole-I");
        let rs = [16.0, 32.0, 64.0];
        let cs: Vec<f64> = rs
            .iter()
            .map(|&r| trunc_error(&f, &disk_cut(1.0, r)) * r)
            .collect();
        for c in &cs {
            assert!((c / cs[1] - 1.0).abs() < 0.2, "{cs:?}");
        }
    }

    #[test]
    fn patch_ii_rate_at_theta_one_third() {
        let f = planar("patch-II");
        let rs = [27.0, 81.0, 243.0, 729.0];
        let e: Vec<f64> = rs
            .iter()
            .map(|&r| trunc_error(&f, &disk_cut(1.0 / 3.0, r)))
            .collect();
        let slope = ols_slope(&rs, &e);
        assert!(slope <= -1.0 / 3.0 + 0.1, "{slope}");
    }

    #[test]
    fn hill_truncation_interior_and_boundary() {
        let h = HillVortex3D::mollified(1.0, 1.0, 0.1);
        let cut = build_cutoff(&DomainSpec::ball(1.0), 1.0, 16.0).unwrap();
        let t = truncate_3d(&h, &cut).unwrap();
        let x = [2.0, 0.0, 0.0];
        assert_eq!(t.velocity(x), h.velocity(x));
        let on = [16.0 * 0.6, 0.0, 16.0 * 0.8];
        assert!(norm3(t.velocity(on)) < 1e-10);
        // gradient expansion vs finite differences inside the collar
        let y = [8.0, 4.0, 9.0];
        let g = t.gradient(y);
        let d = 1e-5;
        for k in 0..3 {
            let mut yp = y;
            let mut ym = y;
            yp[k] += d;
            ym[k] -= d;
            let (a, b) = (t.velocity(yp), t.velocity(ym));
            for i in 0..3 {
                assert!(((a[i] - b[i]) / (2.0 * d) - g[i][k]).abs() < 1e-9);
            }
        }
        assert!((g[0][0] + g[1][1] + g[2][2]).abs() < 1e-12);
        assert!(truncate_3d(&h, &disk_cut(1.0, 16.0)).is_err());
    }

    #[test]
    fn radial_vortex_is_fixed_by_both_routes() {
        let f = planar("patch-II");
        let r = 8.0;
        let wv = project_w_vorticity(&f.vorticity, r).unwrap();
        let ff = f.clone();
        let wh = project_w_helmholtz(Arc::new(move |x| ff.velocity(x)), r).unwrap();
        for x in [[0.5, 0.2], [3.0, -2.0], [7.0, 1.0]] {
            let u = f.velocity(x);
            for w in [wv.velocity(x), wh.velocity(x)] {
                assert!(norm2([w[0] - u[0], w[1] - u[1]]) < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_fields_project_to_zero() {
        let uniform: VelocityFn = Arc::new(|_| [1.0, 0.0]);
        let w = project_w_helmholtz(uniform, 3.0).unwrap();
        for x in [[0.0, 0.0], [1.0, 2.0], [-2.0, 0.5]] {
            assert!(norm2(w.velocity(x)) < 1e-12);
        }
        let wv = project_w_vorticity(&CompactVorticity::analytic(vec![]), 3.0).unwrap();
        assert_eq!(wv.velocity([1.0, 1.0]), [0.0, 0.0]);
        let monopole: VelocityFn = Arc::new(|x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            [x[0] / r2, x[1] / r2]
        });
        assert!(matches!(
            project_w_helmholtz(monopole, 3.0),
            Err(Error::IncompatibleFlux(_))
        ));
    }

    #[test]
    fn off_center_patch_routes_agree() {
        let r = 6.0;
        let f = off_center_patch("p", [r / 2.0, 0.0], 1.0);
        let wv = project_w_vorticity(&f.vorticity, r).unwrap();
        let ff = f.clone();
        let wh = project_w_helmholtz(Arc::new(move |x| ff.velocity(x)), r).unwrap();
        let opts = NormOptions::with_breaks(&[2.0, 4.0]);
        let diff = l2_norm(
            |p: &[f64]| {
                let x = [p[0], p[1]];
                let (a, b) = (wv.velocity(x), wh.velocity(x));
                vec![a[0] - b[0], a[1] - b[1]]
            },
            &Region::Disk { radius: r },
            &opts,
        )
        .unwrap();
        let unorm = l2_norm(
            |p: &[f64]| f.velocity([p[0], p[1]]).to_vec(),
            &Region::Disk { radius: r },
            &opts,
        )
        .unwrap();
        assert!(diff <= 1e-6 * unorm, "{diff} {unorm}");
        // tangency on Γ_R
        for k in 0..32 {
            let s = 2.0 * PI * k as f64 / 32.0;
            let x = [r * s.cos(), r * s.sin()];
            let v = wv.velocity(x);
            assert!((v[0] * s.cos() + v[1] * s.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn support_beyond_disk_is_rejected() {
        let f = off_center_patch("p", [2.5, 0.0], 1.0);
        assert!(matches!(
            project_w_vorticity(&f.vorticity, 3.0),
            Err(Error::SupportExceeded { .. })
        ));
    }

    #[test]
    fn spectral_route_on_sampled_vorticity() {
        let r = 4.0;
        let w = CompactVorticity::analytic(vec![Blob {
            profile: RadialProfile::bump(1.0, 1.0),
            center: [1.5, 0.5],
            weight: 1.0,
        }]);
        let grid = GridSpec::polar(0.0, r, 512, 128).unwrap();
        let field = SampledField::from_fn(grid, 1, |x| vec![w.value([x[0], x[1]])]).unwrap();
        let sampled = CompactVorticity::Sampled {
            field,
            support_radius: 3.0,
        };
        let ws = project_w_vorticity(&sampled, r).unwrap();
        let wa = project_w_vorticity(&w, r).unwrap();
        for x in [[0.3, 0.1], [2.0, -1.0], [3.5, 1.0]] {
            let (a, b) = (ws.velocity(x), wa.velocity(x));
            let rel = norm2([a[0] - b[0], a[1] - b[1]]) / norm2(b);
            assert!(rel < 1e-4, "{x:?} {rel}");
        }
    }

    #[test]
    fn euler_residual_vanishes_for_steady_flows() {
        let cut = disk_cut(1.0, 16.0);
        let f = planar("patch-II");
        let unorm = l2_norm(
            |p: &[f64]| f.velocity([p[0], p[1]]).to_vec(),
            &Region::Disk { radius: 16.0 },
            &NormOptions::with_breaks(&[1.0]),
        )
        .unwrap();
        let res = euler_identity_residual(&f, &cut, None).unwrap();
        assert!(res <= 1e-8 * unorm, "{res}");
        let zero = crate::reference_flows::PlanarFlow::radial(
            "zero",
            crate::reference_flows::FlowCase::I,
            RadialProfile::Pieces { pieces: vec![] },
        );
        assert_eq!(euler_identity_residual(&zero, &cut, None).unwrap(), 0.0);
        assert!(euler_identity_residual(&planar("dipole-I"), &cut, None).is_err());
    }

    #[test]
    fn sampled_pressure_residual_is_second_order() {
        let f = planar("smooth-II");
        let cut = disk_cut(1.0, 4.0);
        let mut hs = vec![];
        let mut res = vec![];
        for n in [41, 81, 161] {
            let g = GridSpec::cartesian(&[-2.0, -2.0], &[2.0, 2.0], &[n, n]).unwrap();
            hs.push(g.spacing(0));
            res.push(euler_identity_residual(&f, &cut, Some(&g)).unwrap());
        }
        let slope = ols_slope(&hs, &res);
        assert!(slope >= 1.9, "{slope} {res:?}");
    }

    #[test]
    fn gradient_part_is_orthogonal_to_the_battery() {
        let r = 6.0;
        let f = off_center_patch("p", [2.0, 1.0], 1.0);
        let wv = project_w_vorticity(&f.vorticity, r).unwrap();
        let res = orthogonality_residuals(&|x| wv.pressure_gradient(x).unwrap(), r, 1.0).unwrap();
        assert_eq!(res.len(), 12);
        assert!(res.iter().all(|&v| v <= 1e-8), "{res:?}");
        // a field that is not a gradient is caught
        let bad = orthogonality_residuals(&|x| battery_field(1, 0, r, x), r, 1.0).unwrap();
        assert!(bad[1] > 0.5);
    }
}
