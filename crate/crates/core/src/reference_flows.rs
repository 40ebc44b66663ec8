//! Closed-form reference flows used as ground truth.

use crate::biot_savart::{stream_2d, Flow2D, Flow3D, StreamFunction2D};
use crate::cutoff_geometry::smooth_step;
use crate::error::{Error, Result};
use crate::field_core::{
    norm2, norm3, Blob, CompactVorticity, Point2, Point3, PolyPiece, RadialProfile, RadialVortex2D,
};
use crate::quadrature::{breakpoints_within, GaussLegendre};
use serde::{Deserialize, Serialize};

/// The three classes of initial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowCase {
    I,
    II,
    III,
}

impl std::fmt::Display for FlowCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlowCase::I => "I",
            FlowCase::II => "II",
            FlowCase::III => "III",
        };
        f.write_str(s)
    }
}

/// A planar flow generated by compactly supported vorticity.
#[derive(Debug, Clone)]
pub struct PlanarFlow {
    pub name: String,
    pub case: FlowCase,
    pub vorticity: CompactVorticity,
    /// Set for flows that are radial about the origin.
    pub radial: Option<RadialVortex2D>,
    pub r0: f64,
    pub mass: f64,
    /// Velocity smoothness class s.
    pub smoothness: f64,
    /// Radii where ω is not smooth, for quadrature panels.
    pub breakpoints: Vec<f64>,
    stream: StreamFunction2D,
}

impl PlanarFlow {
    pub fn radial(name: &str, case: FlowCase, profile: RadialProfile) -> Self {
        let v = RadialVortex2D::new(profile.clone());
        let vorticity = CompactVorticity::radial(profile.clone());
        Self {
            name: name.into(),
            case,
            stream: stream_2d(&vorticity),
            r0: v.r0,
            mass: v.mass,
            smoothness: v.smoothness,
            breakpoints: profile.breakpoints(),
            vorticity,
            radial: Some(v),
        }
    }

    pub fn from_blobs(name: &str, case: FlowCase, blobs: Vec<Blob>) -> Self {
        let smoothness = blobs
            .iter()
            .map(|b| b.profile.smoothness())
            .fold(f64::INFINITY, f64::min);
        let vorticity = CompactVorticity::analytic(blobs);
        Self {
            name: name.into(),
            case,
            stream: stream_2d(&vorticity),
            r0: vorticity.support_radius(),
            mass: vorticity.mass(),
            smoothness,
            breakpoints: vec![],
            vorticity,
            radial: None,
        }
    }

    pub fn is_zero_mass(&self) -> bool {
        self.mass.abs() < 1e-12 * (1.0 + self.vorticity.l1_norm())
    }

    pub fn stream(&self) -> &StreamFunction2D {
        &self.stream
    }

    pub fn velocity(&self, x: Point2) -> Point2 {
        self.stream.velocity(x)
    }

    pub fn omega(&self, x: Point2) -> f64 {
        self.vorticity.value(x)
    }

    /// Bernoulli pressure for radial flows, `None` otherwise.
    pub fn pressure(&self, x: Point2) -> Option<f64> {
        self.radial
            .as_ref()
            .map(|v| bernoulli_pressure(v, norm2(x)))
    }

    /// Sup of |u| by dense sampling.
    pub fn max_speed(&self) -> f64 {
        if let Some(v) = &self.radial {
            let n = 20000;
            let dense = (0..=n).map(|k| 3.0 * v.r0.max(1e-3) * k as f64 / n as f64);
            return dense
                .chain(v.profile.breakpoints())
                .map(|r| v.u_theta(r).abs())
                .fold(0.0, f64::max);
        }
        let n = 400;
        let l = 2.0 * self.r0;
        let mut m: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let x = [
                    -l + 2.0 * l * i as f64 / n as f64,
                    -l + 2.0 * l * j as f64 / n as f64,
                ];
                m = m.max(norm2(self.velocity(x)));
            }
        }
        m
    }
}

/// Hill's spherical vortex (lab frame, translating with speed U along e_z),
/// optionally with the radial vorticity profile mollified over
/// [a(1 − ε), a(1 + ε)].
///
/// ω = A χ(r)(−y, x, 0), Ψ = G(r)(−y, x, 0) with (r⁴G′)′ = −A r⁴ χ,
/// A = 15U/(2a²); the classical case has χ = 1_{r<a}.
#[derive(Debug, Clone, PartialEq)]
pub struct HillVortex3D {
    pub a: f64,
    pub speed: f64,
    /// Mollification half-width as a fraction of a (0 for the classical vortex).
    pub epsilon: f64,
    /// ∫₀^∞ s⁴χ(s) ds.
    m4: f64,
    /// ∫₀^r s⁴χ and G on a uniform grid over the transition zone.
    m4_tab: Vec<f64>,
    g_tab: Vec<f64>,
}

const HILL_TABLE: usize = 2048;

fn hermite(x0: f64, h: f64, f: [f64; 2], d: [f64; 2], x: f64) -> f64 {
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    f[0] * (2.0 * t3 - 3.0 * t2 + 1.0)
        + h * d[0] * (t3 - 2.0 * t2 + t)
        + f[1] * (3.0 * t2 - 2.0 * t3)
        + h * d[1] * (t3 - t2)
}

impl HillVortex3D {
    pub fn classical(a: f64, speed: f64) -> Self {
        Self::mollified(a, speed, 0.0)
    }

    pub fn mollified(a: f64, speed: f64, epsilon: f64) -> Self {
        let mut h = Self {
            a,
            speed,
            epsilon,
            m4: a.powi(5) / 5.0,
            m4_tab: vec![],
            g_tab: vec![],
        };
        if epsilon > 0.0 {
            let gl = GaussLegendre::new(8);
            let (r1, dx) = (h.r1(), h.table_step());
            let mut m = vec![r1.powi(5) / 5.0];
            for k in 0..HILL_TABLE {
                let lo = r1 + k as f64 * dx;
                let v = m[k] + gl.integrate(lo, lo + dx, |s| s.powi(4) * h.chi(s).0);
                m.push(v);
            }
            h.m4 = m[HILL_TABLE];
            h.m4_tab = m;
            let c = h.coef();
            let mut g = vec![0.0; HILL_TABLE + 1];
            g[HILL_TABLE] = c * h.m4 / (3.0 * h.r2().powi(3));
            for k in (0..HILL_TABLE).rev() {
                let lo = r1 + k as f64 * dx;
                g[k] = g[k + 1] + gl.integrate(lo, lo + dx, |s| c * h.moment4(s) / s.powi(4));
            }
            h.g_tab = g;
        }
        h
    }

    fn coef(&self) -> f64 {
        7.5 * self.speed / (self.a * self.a)
    }

    fn r1(&self) -> f64 {
        self.a * (1.0 - self.epsilon)
    }

    fn r2(&self) -> f64 {
        self.a * (1.0 + self.epsilon)
    }

    fn table_step(&self) -> f64 {
        (self.r2() - self.r1()) / HILL_TABLE as f64
    }

    pub fn support_radius(&self) -> f64 {
        self.r2()
    }

    /// Radial profile χ and χ′.
    pub fn chi(&self, r: f64) -> (f64, f64) {
        if self.epsilon == 0.0 {
            return (if r < self.a { 1.0 } else { 0.0 }, 0.0);
        }
        let w = self.r2() - self.r1();
        let [s, ds, _] = smooth_step((r - self.r1()) / w);
        (1.0 - s, -ds / w)
    }

    fn cell(&self, r: f64) -> (usize, f64) {
        let dx = self.table_step();
        let k = (((r - self.r1()) / dx) as usize).min(HILL_TABLE - 1);
        (k, self.r1() + k as f64 * dx)
    }

    /// ∫₀^r s⁴χ(s) ds.
    fn moment4(&self, r: f64) -> f64 {
        if self.epsilon == 0.0 || r <= self.r1() {
            return r.min(self.a).powi(5) / 5.0;
        }
        if r >= self.r2() {
            return self.m4;
        }
        // inside the table construction the tail entries are not there yet
        if self.m4_tab.len() <= HILL_TABLE {
            let gl = GaussLegendre::new(16);
            return self.r1().powi(5) / 5.0
                + gl.integrate(self.r1(), r, |s| s.powi(4) * self.chi(s).0);
        }
        let (k, x0) = self.cell(r);
        let dx = self.table_step();
        let d = |x: f64| x.powi(4) * self.chi(x).0;
        hermite(
            x0,
            dx,
            [self.m4_tab[k], self.m4_tab[k + 1]],
            [d(x0), d(x0 + dx)],
            r,
        )
    }

    /// (G, G′, G″).
    pub fn g_jet(&self, r: f64) -> [f64; 3] {
        let c = self.coef();
        let (r1, r2) = (self.r1(), self.r2());
        if r >= r2 {
            let g = c * self.m4 / (3.0 * r.powi(3));
            return [g, -c * self.m4 / r.powi(4), 4.0 * c * self.m4 / r.powi(5)];
        }
        let g_r1 = if self.epsilon == 0.0 {
            c * self.m4 / (3.0 * r2.powi(3))
        } else {
            self.g_tab[0]
        };
        if r <= r1 {
            return [g_r1 + c * (r1 * r1 - r * r) / 10.0, -c * r / 5.0, -c / 5.0];
        }
        let gp = -c * self.moment4(r) / r.powi(4);
        let (k, x0) = self.cell(r);
        let dx = self.table_step();
        let dg = |x: f64| -c * self.moment4(x) / x.powi(4);
        let g = hermite(
            x0,
            dx,
            [self.g_tab[k], self.g_tab[k + 1]],
            [dg(x0), dg(x0 + dx)],
            r,
        );
        [g, gp, -c * self.chi(r).0 - 4.0 * gp / r]
    }

    /// H = G′/r and H′.
    fn h_jet(&self, r: f64) -> (f64, f64, [f64; 3]) {
        let g = self.g_jet(r);
        if r < 1e-12 {
            return (-self.coef() / 5.0, 0.0, g);
        }
        let h = g[1] / r;
        (h, (g[2] - h) / r, g)
    }

    pub fn velocity(&self, x: Point3) -> Point3 {
        let r = norm3(x);
        let (h, _, g) = self.h_jet(r);
        let w2 = x[0] * x[0] + x[1] * x[1];
        [-h * x[2] * x[0], -h * x[2] * x[1], 2.0 * g[0] + h * w2]
    }

    /// Velocity in the frame moving with the vortex.
    pub fn comoving_velocity(&self, x: Point3) -> Point3 {
        let u = self.velocity(x);
        [u[0], u[1], u[2] - self.speed]
    }

    /// ∂_k u_i at [i][k].
    pub fn velocity_gradient(&self, x: Point3) -> [[f64; 3]; 3] {
        let r = norm3(x);
        let (h, hp, g) = self.h_jet(r);
        let e = if r > 0.0 {
            [x[0] / r, x[1] / r, x[2] / r]
        } else {
            [0.0; 3]
        };
        let w2 = x[0] * x[0] + x[1] * x[1];
        let z = x[2];
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            let dz = if k == 2 { 1.0 } else { 0.0 };
            for i in 0..2 {
                let di = if k == i { 1.0 } else { 0.0 };
                out[i][k] = -hp * e[k] * z * x[i] - h * (dz * x[i] + z * di);
            }
            let dw2 = if k < 2 { 2.0 * x[k] } else { 0.0 };
            out[2][k] = 2.0 * g[1] * e[k] + hp * e[k] * w2 + h * dw2;
        }
        out
    }

    pub fn vorticity(&self, x: Point3) -> Point3 {
        let f = self.coef() * self.chi(norm3(x)).0;
        [-f * x[1], f * x[0], 0.0]
    }

    /// Δu = −∇ × ω.
    pub fn velocity_laplacian(&self, x: Point3) -> Point3 {
        let r = norm3(x);
        let (chi, dchi) = self.chi(r);
        let (f, fp) = (self.coef() * chi, self.coef() * dchi);
        let q = if r > 0.0 { fp / r } else { 0.0 };
        let w2 = x[0] * x[0] + x[1] * x[1];
        [q * x[2] * x[0], q * x[2] * x[1], -(2.0 * f + q * w2)]
    }

    pub fn stream(&self, x: Point3) -> Point3 {
        let g = self.g_jet(norm3(x))[0];
        [-g * x[1], g * x[0], 0.0]
    }

    /// ∂_k Ψ_i at [i][k].
    pub fn stream_gradient(&self, x: Point3) -> [[f64; 3]; 3] {
        let r = norm3(x);
        let g = self.g_jet(r);
        let e = if r > 0.0 {
            [x[0] / r, x[1] / r, x[2] / r]
        } else {
            [0.0; 3]
        };
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            out[0][k] = -g[1] * e[k] * x[1] - if k == 1 { g[0] } else { 0.0 };
            out[1][k] = g[1] * e[k] * x[0] + if k == 0 { g[0] } else { 0.0 };
        }
        out
    }

    pub fn max_speed(&self) -> f64 {
        let n = 300;
        let l = 2.0 * self.r2();
        let mut m: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let x = [
                    l * i as f64 / n as f64,
                    0.0,
                    -l + 2.0 * l * j as f64 / n as f64,
                ];
                m = m.max(norm3(self.velocity(x)));
            }
        }
        m
    }
}

impl Flow3D for HillVortex3D {
    fn velocity(&self, x: Point3) -> Point3 {
        HillVortex3D::velocity(self, x)
    }

    fn velocity_gradient(&self, x: Point3) -> [[f64; 3]; 3] {
        HillVortex3D::velocity_gradient(self, x)
    }

    fn stream(&self, x: Point3) -> Point3 {
        HillVortex3D::stream(self, x)
    }

    fn stream_gradient(&self, x: Point3) -> [[f64; 3]; 3] {
        HillVortex3D::stream_gradient(self, x)
    }
}

#[derive(Debug, Clone)]
pub enum ReferenceFlow {
    Planar(PlanarFlow),
    Spatial { name: String, hill: HillVortex3D },
}

impl ReferenceFlow {
    pub fn name(&self) -> &str {
        match self {
            ReferenceFlow::Planar(p) => &p.name,
            ReferenceFlow::Spatial { name, .. } => name,
        }
    }

    pub fn case(&self) -> FlowCase {
        match self {
            ReferenceFlow::Planar(p) => p.case,
            ReferenceFlow::Spatial { .. } => FlowCase::III,
        }
    }

    pub fn r0(&self) -> f64 {
        match self {
            ReferenceFlow::Planar(p) => p.r0,
            ReferenceFlow::Spatial { hill, .. } => hill.support_radius(),
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            ReferenceFlow::Planar(p) => p.mass,
            ReferenceFlow::Spatial { .. } => 0.0,
        }
    }

    pub fn smoothness(&self) -> f64 {
        match self {
            ReferenceFlow::Planar(p) => p.smoothness,
            ReferenceFlow::Spatial { hill, .. } => {
                if hill.epsilon > 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                }
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ReferenceFlow::Planar(_) => 2,
            ReferenceFlow::Spatial { .. } => 3,
        }
    }

    pub fn planar(&self) -> Option<&PlanarFlow> {
        match self {
            ReferenceFlow::Planar(p) => Some(p),
            _ => None,
        }
    }

    pub fn hill(&self) -> Option<&HillVortex3D> {
        match self {
            ReferenceFlow::Spatial { hill, .. } => Some(hill),
            _ => None,
        }
    }

    pub fn description(&self) -> &'static str {
        match self.name() {
            "patch-I" => "radial annular patch, omega = 1 on r<1 and -1/3 on 1<r<2, zero mass",
            "smooth-I" => "radial smooth zero-mass pair of bumps (radii 1 and 2)",
            "dipole-I" => "two opposite unit patches of radius 0.4 at (+-0.5, 0), zero mass",
            "smooth-dipole-I" => "two opposite bumps of radius 0.5 at (+-0.5, 0), zero mass",
            "patch-II" => "unit vortex patch, mass pi",
            "smooth-II" => "radial C-infinity bump of radius 1, amplitude 1",
            "offcenter-patch-II" => "patch of radius 0.5 centred at (1, 0)",
            "hill-III" => "Hill's spherical vortex a = 1, U = 1, profile mollified over 0.1a",
            "hill-classical" => "classical Hill's spherical vortex a = 1, U = 1",
            _ => "",
        }
    }
}

/// All named reference flows.
pub fn catalog() -> Vec<ReferenceFlow> {
    let patch_i = RadialProfile::Pieces {
        pieces: vec![
            PolyPiece::constant(0.0, 1.0, 1.0),
            PolyPiece::constant(1.0, 2.0, -1.0 / 3.0),
        ],
    };
    let b1 = RadialProfile::bump(1.0, 1.0);
    let smooth_i = RadialProfile::Sum {
        terms: vec![
            (1.0, b1.clone()),
            (-1.0, RadialProfile::bump_with_mass(2.0, b1.mass())),
        ],
    };
    let pair = |p: RadialProfile| {
        vec![
            Blob {
                profile: p.clone(),
                center: [0.5, 0.0],
                weight: 1.0,
            },
            Blob {
                profile: p,
                center: [-0.5, 0.0],
                weight: -1.0,
            },
        ]
    };
    vec![
        ReferenceFlow::Planar(PlanarFlow::radial("patch-I", FlowCase::I, patch_i)),
        ReferenceFlow::Planar(PlanarFlow::radial("smooth-I", FlowCase::I, smooth_i)),
        ReferenceFlow::Planar(PlanarFlow::from_blobs(
            "dipole-I",
            FlowCase::I,
            pair(RadialProfile::patch(0.4, 1.0)),
        )),
        ReferenceFlow::Planar(PlanarFlow::from_blobs(
            "smooth-dipole-I",
            FlowCase::I,
            pair(RadialProfile::bump(0.5, 1.0)),
        )),
        ReferenceFlow::Planar(PlanarFlow::radial(
            "patch-II",
            FlowCase::II,
            RadialProfile::patch(1.0, 1.0),
        )),
        ReferenceFlow::Planar(PlanarFlow::radial("smooth-II", FlowCase::II, b1)),
        ReferenceFlow::Planar(off_center_patch("offcenter-patch-II", [1.0, 0.0], 0.5)),
        ReferenceFlow::Spatial {
            name: "hill-III".into(),
            hill: HillVortex3D::mollified(1.0, 1.0, 0.1),
        },
        ReferenceFlow::Spatial {
            name: "hill-classical".into(),
            hill: HillVortex3D::classical(1.0, 1.0),
        },
    ]
}

/// Unit-strength patch of the given radius centred at `center`.
pub fn off_center_patch(name: &str, center: Point2, radius: f64) -> PlanarFlow {
    PlanarFlow::from_blobs(
        name,
        FlowCase::II,
        vec![Blob {
            profile: RadialProfile::patch(radius, 1.0),
            center,
            weight: 1.0,
        }],
    )
}

pub fn lookup(name: &str) -> Result<ReferenceFlow> {
    catalog()
        .into_iter()
        .find(|f| f.name() == name)
        .ok_or_else(|| Error::Unknown {
            kind: "flow",
            name: name.into(),
        })
}

/// p(r) = −∫_r^∞ u_θ(ρ)²/ρ dρ.
pub fn bernoulli_pressure(flow: &RadialVortex2D, r: f64) -> f64 {
    let rs = flow.r0;
    let gamma = flow.far_circulation();
    let tail = |r: f64| gamma * gamma / (2.0 * r * r);
    if r >= rs {
        return -tail(r);
    }
    let gl = GaussLegendre::new(20);
    let edges = breakpoints_within(r, rs, &flow.profile.breakpoints());
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let n = 8;
        let h = (w[1] - w[0]) / n as f64;
        for k in 0..n {
            let lo = w[0] + k as f64 * h;
            acc += gl.integrate(lo, lo + h, |p| {
                let u = flow.u_theta(p);
                if p > 0.0 {
                    u * u / p
                } else {
                    0.0
                }
            });
        }
    }
    -(acc + tail(rs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBound {
    /// R₀ + ‖u‖_∞ T.
    pub bound: f64,
    /// Exact R(T) for steady flows.
    pub exact: Option<f64>,
}

pub fn support_radius_bound(flow: &ReferenceFlow, t: f64) -> Result<SupportBound> {
    if !(t >= 0.0) {
        return Err(crate::error::invalid("T", "must be non-negative"));
    }
    let (speed, steady) = match flow {
        ReferenceFlow::Planar(p) => (p.max_speed(), p.radial.is_some()),
        ReferenceFlow::Spatial { hill, .. } => (hill.max_speed(), true),
    };
    let r0 = flow.r0();
    let bound = r0 + speed * t;
    let exact = steady.then_some(r0);
    if let Some(e) = exact {
        assert!(e <= bound, "support radius exceeds the transport bound");
    }
    Ok(SupportBound { bound, exact })
}
