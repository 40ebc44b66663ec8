//! Boundary collar Σ_R, tubular coordinates and the cutoff φ^R.

use crate::error::{invalid, Result};
use crate::field_core::{norm2, norm3, DomainSpec, GridSpec, Point2, Point3, SampledField, Shape};
use crate::quadrature::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

const STEP_TABLE: usize = 2048;

fn unit_bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn unit_bump_prime(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let q = u * (1.0 - u);
        unit_bump(u) * (1.0 - 2.0 * u) / (q * q)
    }
}

struct StepTable {
    rule: GaussLegendre,
    cumulative: Vec<f64>,
    total: f64,
}

fn step_table() -> &'static StepTable {
    static T: OnceLock<StepTable> = OnceLock::new();
    T.get_or_init(|| {
        let rule = GaussLegendre::new(10);
        let h = 1.0 / STEP_TABLE as f64;
        let mut cumulative = vec![0.0; STEP_TABLE + 1];
        for i in 0..STEP_TABLE {
            let lo = i as f64 * h;
            cumulative[i + 1] = cumulative[i] + rule.integrate(lo, lo + h, unit_bump);
        }
        let total = cumulative[STEP_TABLE];
        StepTable {
            rule,
            cumulative,
            total,
        }
    })
}

/// Smooth step S with S = 0 on (−∞, 0], S = 1 on [1, ∞); S′ ∝ exp(−1/(u(1−u))).
pub(crate) fn smooth_step(u: f64) -> [f64; 3] {
    if u <= 0.0 {
        return [0.0; 3];
    }
    if u >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let t = step_table();
    let i = ((u * STEP_TABLE as f64) as usize).min(STEP_TABLE - 1);
    let lo = i as f64 / STEP_TABLE as f64;
    let v = (t.cumulative[i] + t.rule.integrate(lo, u, unit_bump)) / t.total;
    [v, unit_bump(u) / t.total, unit_bump_prime(u) / t.total]
}

/// Collar profile g on [0, δ₁]: g(t) = S(2t/δ₁), so g ≡ 1 on [δ₁/2, δ₁] and
/// every derivative vanishes at 0. Returns (g, g′, g″).
pub fn g_profile_jet(t: f64, delta1: f64) -> [f64; 3] {
    let h = 0.5 * delta1;
    let [v, d1, d2] = smooth_step(t / h);
    [v, d1 / h, d2 / (h * h)]
}

pub fn g_profile(t: f64, delta1: f64) -> Result<f64> {
    if !(delta1 > 0.0) || !(0.0..=delta1).contains(&t) {
        return Err(invalid("t", format!("{t} outside [0, {delta1}]")));
    }
    Ok(g_profile_jet(t, delta1)[0])
}

/// Foot-point data of x in the collar chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    /// Arc length of the foot point on Γ_R.
    pub s: f64,
    /// Inward distance to Γ_R.
    pub r: f64,
    /// Curve parameter of the foot point.
    pub t: f64,
    pub normal_in: Point2,
    pub tangent: Point2,
    /// Curvature of Γ_R at the foot point.
    pub curvature: f64,
}

/// (s, r) coordinates on a collar of Γ_R for the disk and ellipse.
#[derive(Debug, Clone)]
pub struct TubularChart {
    pub domain: DomainSpec,
    /// max curvature of the unit boundary Γ₁
    pub kappa_bar: f64,
    pub delta1: f64,
    /// Collar width δ₁R^θ.
    pub width: f64,
    /// Arc length at uniformly spaced curve parameters (scaled domain).
    arc: Vec<f64>,
}

impl TubularChart {
    pub fn new(domain: &DomainSpec, theta: f64) -> Result<Self> {
        if domain.dimension() != 2 {
            return Err(invalid("domain", "tubular chart is two-dimensional"));
        }
        let kappa_bar = domain.max_unit_curvature();
        let r = domain.scale;
        let (a, b) = domain.unit_axes();
        let mut delta1 = 1.0 / (2.0 * kappa_bar);
        // origin must stay outside the collar
        while delta1 * r.powf(theta) >= r * a.min(b) {
            delta1 *= 0.5;
        }
        let n = 4096;
        let rule = GaussLegendre::new(8);
        let mut arc = vec![0.0; n + 1];
        let dt = 2.0 * PI / n as f64;
        for i in 0..n {
            let lo = i as f64 * dt;
            arc[i + 1] = arc[i]
                + r * rule.integrate(lo, lo + dt, |t| {
                    (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
                });
        }
        Ok(Self {
            domain: *domain,
            kappa_bar,
            delta1,
            width: delta1 * r.powf(theta),
            arc,
        })
    }

    pub fn perimeter(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    fn speed(&self, t: f64) -> f64 {
        let (a, b) = self.domain.unit_axes();
        self.domain.scale * (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
    }

    fn arc_length(&self, t: f64) -> f64 {
        let t = t.rem_euclid(2.0 * PI);
        let n = self.arc.len() - 1;
        let dt = 2.0 * PI / n as f64;
        let i = ((t / dt) as usize).min(n - 1);
        let rule = GaussLegendre::new(8);
        self.arc[i] + rule.integrate(i as f64 * dt, t, |x| self.speed(x))
    }

    /// Curve parameter of the boundary point with arc length s.
    pub fn parameter_at(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.perimeter());
        let n = self.arc.len() - 1;
        let i = self.arc.partition_point(|&v| v <= s).clamp(1, n) - 1;
        let dt = 2.0 * PI / n as f64;
        let mut t = i as f64 * dt + dt * (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        for _ in 0..4 {
            t -= (self.arc_length(t) - s) / self.speed(t);
        }
        t
    }

    fn frame(&self, t: f64) -> (Point2, Point2, f64) {
        let (a, b) = self.domain.unit_axes();
        let r = self.domain.scale;
        let d = [-a * t.sin(), b * t.cos()];
        let sp = norm2(d);
        let tangent = [d[0] / sp, d[1] / sp];
        let normal_in = [-tangent[1], tangent[0]];
        let curvature = a * b / (sp * sp * sp) / r;
        (tangent, normal_in, curvature)
    }

    /// Point with chart coordinates (s, r).
    pub fn point_at(&self, s: f64, r: f64) -> Point2 {
        let t = self.parameter_at(s);
        let p = self.domain.boundary_point(t);
        let (_, n, _) = self.frame(t);
        [p[0] + r * n[0], p[1] + r * n[1]]
    }

    /// Jacobian of (s, r) ↦ x.
    pub fn jacobian(&self, s: f64, r: f64) -> f64 {
        let (_, _, k) = self.frame(self.parameter_at(s));
        1.0 - k * r
    }

    /// Nearest boundary point of x (inside Ω_R). The inward distance is
    /// negative outside.
    pub fn nearest(&self, x: Point2) -> ChartPoint {
        let (a, b) = self.domain.unit_axes();
        let sc = self.domain.scale;
        let t = if (a - b).abs() < 1e-15 {
            x[1].atan2(x[0])
        } else {
            let mut best = (f64::INFINITY, 0.0);
            let m = 64;
            for k in 0..m {
                let t = 2.0 * PI * k as f64 / m as f64;
                let p = self.domain.boundary_point(t);
                let d = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
                if d < best.0 {
                    best = (d, t);
                }
            }
            let mut t = best.1;
            for _ in 0..50 {
                let (c, s) = (t.cos(), t.sin());
                let p = [sc * a * c, sc * b * s];
                let d1 = [-sc * a * s, sc * b * c];
                let d2 = [-p[0], -p[1]];
                let e = [x[0] - p[0], x[1] - p[1]];
                let h = e[0] * d1[0] + e[1] * d1[1];
                let hp = -(d1[0] * d1[0] + d1[1] * d1[1]) + e[0] * d2[0] + e[1] * d2[1];
                let step = if hp < 0.0 {
                    h / hp
                } else {
                    -h / (d1[0] * d1[0] + d1[1] * d1[1])
                };
                let step = step.clamp(-0.2, 0.2);
                t -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            t
        };
        let t = t.rem_euclid(2.0 * PI);
        let p = self.domain.boundary_point(t);
        let (tangent, normal_in, curvature) = self.frame(t);
        let r = (x[0] - p[0]) * normal_in[0] + (x[1] - p[1]) * normal_in[1];
        ChartPoint {
            s: self.arc_length(t),
            r,
            t,
            normal_in,
            tangent,
            curvature,
        }
    }

    pub fn in_collar(&self, x: Point2) -> bool {
        if !self.domain.contains2(x) {
            return false;
        }
        let c = self.nearest(x);
        c.r >= 0.0 && c.r < self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffVariant {
    Collar2D,
    Dilation3D,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CutoffJet2 {
    pub value: f64,
    pub grad: Point2,
    pub hess: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CutoffJet3 {
    pub value: f64,
    pub grad: Point3,
    pub hess: [[f64; 3]; 3],
}

/// φ^R with exact first and second derivatives.
#[derive(Debug, Clone)]
pub struct CutoffFunction {
    pub theta: f64,
    pub radius: f64,
    pub delta1: f64,
    pub variant: CutoffVariant,
    pub chart: Option<TubularChart>,
}

pub fn build_cutoff(domain: &DomainSpec, theta: f64, r: f64) -> Result<CutoffFunction> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid("theta", format!("{theta} is outside [0, 1]")));
    }
    if !(r >= 1.0) {
        return Err(invalid("R", format!("{r} is below 1")));
    }
    let domain = domain.with_scale(r);
    match domain.shape {
        Shape::Ball => {
            if theta != 1.0 {
                return Err(invalid(
                    "theta",
                    "the 3D dilation cutoff requires theta = 1",
                ));
            }
            Ok(CutoffFunction {
                theta,
                radius: r,
                delta1: 0.5,
                variant: CutoffVariant::Dilation3D,
                chart: None,
            })
        }
        _ => {
            let chart = TubularChart::new(&domain, theta)?;
            Ok(CutoffFunction {
                theta,
                radius: r,
                delta1: chart.delta1,
                variant: CutoffVariant::Collar2D,
                chart: Some(chart),
            })
        }
    }
}

impl CutoffFunction {
    /// Width of Σ_R.
    pub fn collar_width(&self) -> f64 {
        self.delta1 * self.radius.powf(self.theta)
    }

    pub fn jet2(&self, x: Point2) -> CutoffJet2 {
        let chart = self.chart.as_ref().expect("2D cutoff");
        if !chart.domain.contains2(x) {
            return CutoffJet2::default();
        }
        // g ≡ 1 beyond half the collar; skip the chart there
        let quick = match chart.domain.shape {
            Shape::Disk => self.radius - norm2(x),
            _ => {
                let (a, b) = chart.domain.unit_axes();
                let rr = self.radius;
                let q = (x[0] / (a * rr)).powi(2) + (x[1] / (b * rr)).powi(2);
                // lower bound on the distance to the boundary
                (1.0 - q.sqrt()) * a.min(b) * rr
            }
        };
        let half = 0.5 * chart.width;
        if quick >= half {
            return CutoffJet2 {
                value: 1.0,
                ..Default::default()
            };
        }
        let c = chart.nearest(x);
        if c.r >= half {
            return CutoffJet2 {
                value: 1.0,
                ..Default::default()
            };
        }
        let scale = self.radius.powf(-self.theta);
        let [g, g1, g2] = g_profile_jet(c.r.max(0.0) * scale, self.delta1);
        let n = c.normal_in;
        let tau = c.tangent;
        let lam = -c.curvature / (1.0 - c.curvature * c.r);
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = g2 * scale * scale * n[i] * n[j] + g1 * scale * lam * tau[i] * tau[j];
            }
        }
        CutoffJet2 {
            value: g,
            grad: [g1 * scale * n[0], g1 * scale * n[1]],
            hess,
        }
    }

    pub fn jet3(&self, x: Point3) -> CutoffJet3 {
        let rr = self.radius;
        let rho = norm3(x);
        if rho >= rr {
            return CutoffJet3::default();
        }
        let t = 1.0 - rho / rr;
        if t >= 0.5 * self.delta1 {
            return CutoffJet3 {
                value: 1.0,
                ..Default::default()
            };
        }
        let [g, g1, g2] = g_profile_jet(t, self.delta1);
        let e = [x[0] / rho, x[1] / rho, x[2] / rho];
        let mut out = CutoffJet3 {
            value: g,
            grad: [-g1 * e[0] / rr, -g1 * e[1] / rr, -g1 * e[2] / rr],
            hess: [[0.0; 3]; 3],
        };
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                out.hess[i][j] =
                    g2 * e[i] * e[j] / (rr * rr) - g1 * (delta - e[i] * e[j]) / (rr * rho);
            }
        }
        out
    }

    pub fn value2(&self, x: Point2) -> f64 {
        self.jet2(x).value
    }

    pub fn value3(&self, x: Point3) -> f64 {
        self.jet3(x).value
    }

    /// Whether x lies in Σ_R.
    pub fn in_collar2(&self, x: Point2) -> bool {
        self.chart.as_ref().is_some_and(|c| c.in_collar(x))
    }

    pub fn in_collar3(&self, x: Point3) -> bool {
        let rho = norm3(x);
        rho < self.radius && rho > self.radius * (1.0 - self.delta1)
    }
}

/// Per-node collar membership with chart coordinates: components
/// (indicator, s, r); s and r are zero off the collar.
pub fn collar_mask(
    domain: &DomainSpec,
    theta: f64,
    r: f64,
    grid: &GridSpec,
) -> Result<SampledField> {
    let chart = TubularChart::new(&domain.with_scale(r), theta)?;
    SampledField::from_fn(grid.clone(), 3, |p| {
        let x = [p[0], p[1]];
        if !chart.domain.contains2(x) {
            return vec![0.0, 0.0, 0.0];
        }
        let c = chart.nearest(x);
        if c.r >= 0.0 && c.r < chart.width {
            vec![1.0, c.s, c.r]
        } else {
            vec![0.0, 0.0, 0.0]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms_rates::ols_slope;

    #[test]
    fn profile_endpoints_and_plateau() {
        let d = 0.5;
        assert_eq!(g_profile(0.0, d).unwrap(), 0.0);
        assert_eq!(g_profile(d, d).unwrap(), 1.0);
        assert_eq!(g_profile(0.5 * d, d).unwrap(), 1.0);
        assert_eq!(g_profile(0.6 * d, d).unwrap(), 1.0);
        assert!(g_profile(1.1 * d, d).is_err());
        for h in [1e-2, 1e-3] {
            assert!(g_profile(h, d).unwrap() / h <= h);
        }
    }

    #[test]
    fn profile_is_monotone_with_consistent_derivatives() {
        let d = 0.125;
        let mut prev = 0.0;
        for k in 1..400 {
            let t = 0.5 * d * k as f64 / 400.0;
            let [g, g1, g2] = g_profile_jet(t, d);
            assert!(g >= prev);
            prev = g;
            let h = 1e-7;
            let fd = (g_profile_jet(t + h, d)[0] - g_profile_jet(t - h, d)[0]) / (2.0 * h);
            assert!((fd - g1).abs() < 1e-5 * (1.0 + g1.abs()));
            let fd2 = (g_profile_jet(t + h, d)[1] - g_profile_jet(t - h, d)[1]) / (2.0 * h);
            assert!((fd2 - g2).abs() < 1e-4 * (1.0 + g2.abs()));
        }
        // symmetric smooth step: S(1/2) = 1/2
        assert!((g_profile(0.25 * d, d).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disk_chart_jacobian_and_width() {
        let dom = DomainSpec::disk(10.0);
        let c = TubularChart::new(&dom, 1.0).unwrap();
        assert_eq!(c.delta1, 0.5);
        assert!((c.width - 5.0).abs() < 1e-12);
        assert!((c.perimeter() - 20.0 * PI).abs() < 1e-9);
        for (s, r) in [(0.0, 1.0), (7.0, 3.0)] {
            assert!((c.jacobian(s, r) - (1.0 - r / 10.0)).abs() < 1e-12);
            let x = c.point_at(s, r);
            let back = c.nearest(x);
            assert!((back.r - r).abs() < 1e-10 && (back.s - s).abs() < 1e-8);
        }
    }

    #[test]
    fn ellipse_chart_roundtrip_and_injectivity() {
        let dom = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 20.0).unwrap();
        let c = TubularChart::new(&dom, 1.0).unwrap();
        assert!((c.kappa_bar - 4.0).abs() < 1e-12);
        assert!((c.delta1 - 0.125).abs() < 1e-12);
        let p = c.perimeter();
        for k in 0..50 {
            let s = p * k as f64 / 50.0;
            for r in [0.1, 0.5 * c.width, 0.95 * c.width] {
                let back = c.nearest(c.point_at(s, r));
                assert!((back.r - r).abs() < 1e-9, "r {r} -> {}", back.r);
                let ds = (back.s - s).abs();
                assert!(ds.min(p - ds) < 1e-7);
                let j = c.jacobian(s, r);
                assert!(j > 0.0 && j <= 1.0);
            }
        }
    }

    #[test]
    fn boundary_and_interior_values() {
        let cut = build_cutoff(&DomainSpec::disk(1.0), 1.0, 10.0).unwrap();
        let j = cut.jet2([10.0 * (0.3f64).cos(), 10.0 * (0.3f64).sin()]);
        assert!(j.value.abs() < 1e-14 && norm2(j.grad) < 1e-14);
        let j = cut.jet2([5.0, 0.0]);
        assert_eq!(j.value, 1.0);
        assert_eq!(j.grad, [0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_cutoff(&DomainSpec::disk(1.0), 1.5, 10.0).is_err());
        assert!(build_cutoff(&DomainSpec::disk(1.0), 0.5, 0.5).is_err());
        assert!(build_cutoff(&DomainSpec::ball(1.0), 0.5, 10.0).is_err());
    }

    #[test]
    fn exact_derivatives_match_finite_differences() {
        let dom = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 1.0).unwrap();
        let cut = build_cutoff(&dom, 0.5, 16.0).unwrap();
        let chart = cut.chart.as_ref().unwrap();
        let h = 1e-6;
        for k in 0..12 {
            let s = chart.perimeter() * (k as f64 + 0.2) / 12.0;
            let x = chart.point_at(s, 0.3 * cut.collar_width());
            let j = cut.jet2(x);
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let (jp, jm) = (cut.jet2(xp), cut.jet2(xm));
                let fd = (jp.value - jm.value) / (2.0 * h);
                assert!((fd - j.grad[a]).abs() < 1e-6, "{fd} {}", j.grad[a]);
                for b in 0..2 {
                    let fd = (jp.grad[b] - jm.grad[b]) / (2.0 * h);
                    assert!((fd - j.hess[b][a]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn gradient_bound_scales_like_r_to_minus_theta() {
        let theta = 0.5;
        let rs = [8.0, 16.0, 32.0, 64.0];
        let mut sup = vec![];
        for &r in &rs {
            let cut = build_cutoff(&DomainSpec::disk(1.0), theta, r).unwrap();
            let w = cut.collar_width();
            let m = (0..2000)
                .map(|k| {
                    let d = 0.5 * w * k as f64 / 2000.0;
                    norm2(cut.jet2([r - d, 0.0]).grad)
                })
                .fold(0.0, f64::max);
            sup.push(m);
        }
        let slope = ols_slope(&rs, &sup);
        assert!((-0.6..=-0.4).contains(&slope), "{slope}");
    }

    #[test]
    fn dilation_scaling_is_exact() {
        let c1 = build_cutoff(&DomainSpec::ball(1.0), 1.0, 1.0).unwrap();
        let c = build_cutoff(&DomainSpec::ball(1.0), 1.0, 16.0).unwrap();
        for x in [[0.9, 0.0, 0.1], [0.5, 0.5, 0.6], [0.0, 0.0, 0.99]] {
            let xr = [16.0 * x[0], 16.0 * x[1], 16.0 * x[2]];
            assert!((c.value3(xr) - c1.value3(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn dilation_derivatives_match_finite_differences() {
        let c = build_cutoff(&DomainSpec::ball(1.0), 1.0, 8.0).unwrap();
        let x = [4.0, 3.0, 4.5];
        let j = c.jet3(x);
        let h = 1e-6;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let (jp, jm) = (c.jet3(xp), c.jet3(xm));
            assert!(((jp.value - jm.value) / (2.0 * h) - j.grad[a]).abs() < 1e-7);
            for b in 0..3 {
                assert!(((jp.grad[b] - jm.grad[b]) / (2.0 * h) - j.hess[b][a]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn collar_area_matches_annulus() {
        let r = 10.0;
        let n = 400;
        let grid = GridSpec::polar(0.0, r, n, 64).unwrap();
        let mask = collar_mask(&DomainSpec::disk(1.0), 1.0, r, &grid).unwrap();
        let dr = r / n as f64;
        let area: f64 = (0..grid.node_count())
            .map(|i| {
                let rad = grid.native(i)[0];
                mask.at(i, 0) * rad * dr * 2.0 * PI / 64.0
            })
            .sum();
        let exact = PI * (r * r - (r - 0.5 * r) * (r - 0.5 * r));
        assert!((area - exact).abs() < 1e-9 * exact, "{area} {exact}");
    }

    #[test]
    fn collar_width_independent_of_r_at_theta_zero() {
        for r in [4.0, 40.0] {
            let c = TubularChart::new(&DomainSpec::disk(r), 0.0).unwrap();
            assert_eq!(c.width, 0.5);
        }
    }

    #[test]
    fn ellipse_mask_distance_matches_brute_force() {
        let dom = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 1.0).unwrap();
        let r = 20.0;
        let grid = GridSpec::cartesian(&[-20.0, -10.0], &[20.0, 10.0], &[161, 81]).unwrap();
        let mask = collar_mask(&dom, 1.0, r, &grid).unwrap();
        let h = grid.spacing(0);
        let pts: Vec<Point2> = (0..20000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 20000.0;
                [r * t.cos(), 0.5 * r * t.sin()]
            })
            .collect();
        let mut members = 0;
        for i in 0..grid.node_count() {
            if mask.at(i, 0) == 0.0 {
                continue;
            }
            members += 1;
            let p = grid.position(i);
            let d = pts
                .iter()
                .map(|q| norm2([p[0] - q[0], p[1] - q[1]]))
                .fold(f64::INFINITY, f64::min);
            assert!((d - mask.at(i, 2)).abs() <= h);
        }
        assert!(members > 100);
    }

    #[test]
    fn collar_stays_away_from_origin() {
        let dom = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 1.0).unwrap();
        let mut ratios = vec![];
        for r in [8.0, 16.0, 32.0] {
            let c = TubularChart::new(&dom.with_scale(r), 1.0).unwrap();
            let p = c.perimeter();
            let m = (0..2000)
                .map(|k| norm2(c.point_at(p * k as f64 / 2000.0, c.width)))
                .fold(f64::INFINITY, f64::min);
            ratios.push(m / r);
        }
        assert!(ratios[0] > 0.0);
        for q in &ratios {
            assert!((q / ratios[0] - 1.0).abs() < 0.01);
        }
    }
}
