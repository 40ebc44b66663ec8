//! Domain types: points, the dilated domains Ω_R, structured grids, sampled
//! fields and compactly supported vorticities.

mod profile;
mod vorticity;

pub use profile::{PolyPiece, RadialProfile};
pub use vorticity::{
    em_decompose, make_sigma, Blob, CompactVorticity, EmDecomposition, RadialVortex2D,
    SIGMA_BUMP_DESCRIPTION,
};

use crate::error::{invalid, Result};
use crate::quadrature::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

#[inline]
pub fn norm2(x: Point2) -> f64 {
    x[0].hypot(x[1])
}

#[inline]
pub fn norm3(x: Point3) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// x^⊥ = (−x₂, x₁).
#[inline]
pub fn perp(x: Point2) -> Point2 {
    [-x[1], x[0]]
}

#[inline]
pub fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Unit disk (2D).
    Disk,
    /// Ellipse with semi-axes (a, b) (2D).
    Ellipse { a: f64, b: f64 },
    /// Unit ball (3D).
    Ball,
}

/// Ω_R = R·Ω₁ for one of the supported unit shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub scale: f64,
}

impl DomainSpec {
    pub fn new(shape: Shape, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("scale", format!("must be positive, got {scale}")));
        }
        if let Shape::Ellipse { a, b } = shape {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(invalid("shape", "ellipse semi-axes must be positive"));
            }
        }
        Ok(Self { shape, scale })
    }

    pub fn disk(scale: f64) -> Self {
        Self {
            shape: Shape::Disk,
            scale,
        }
    }

    pub fn ball(scale: f64) -> Self {
        Self {
            shape: Shape::Ball,
            scale,
        }
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            Shape::Ball => 3,
            _ => 2,
        }
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        Self { scale, ..*self }
    }

    /// Semi-axes of the 2D unit shape.
    pub fn unit_axes(&self) -> (f64, f64) {
        match self.shape {
            Shape::Ellipse { a, b } => (a, b),
            _ => (1.0, 1.0),
        }
    }

    /// Point of Γ_R at parameter t (the angle of the elliptic parametrization).
    pub fn boundary_point(&self, t: f64) -> Point2 {
        let (a, b) = self.unit_axes();
        [self.scale * a * t.cos(), self.scale * b * t.sin()]
    }

    /// Maximum curvature of the unit boundary Γ₁.
    pub fn max_unit_curvature(&self) -> f64 {
        match self.shape {
            Shape::Disk | Shape::Ball => 1.0,
            Shape::Ellipse { a, b } => (a / (b * b)).max(b / (a * a)),
        }
    }

    /// Length of Γ₁ (the constant `a` with |Γ_R| = aR).
    pub fn unit_perimeter(&self) -> f64 {
        match self.shape {
            Shape::Disk => 2.0 * PI,
            Shape::Ball => 4.0 * PI,
            Shape::Ellipse { a, b } => {
                let rule = GaussLegendre::new(48);
                crate::quadrature::composite(&rule, &[0.0, 2.0 * PI], 8, |t| {
                    (a * t.sin()).hypot(b * t.cos())
                })
            }
        }
    }

    pub fn contains2(&self, x: Point2) -> bool {
        let (a, b) = self.unit_axes();
        let (p, q) = (x[0] / (self.scale * a), x[1] / (self.scale * b));
        p * p + q * q <= 1.0
    }

    pub fn contains3(&self, x: Point3) -> bool {
        norm3(x) <= self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinates {
    Cartesian,
    /// (r, s): radius and angle; radial nodes sit at cell centres.
    Polar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub coordinates: Coordinates,
    pub counts: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl GridSpec {
    pub fn cartesian(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self> {
        let g = Self {
            coordinates: Coordinates::Cartesian,
            counts: counts.to_vec(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        };
        g.validate()?;
        Ok(g)
    }

    /// Polar grid over the annulus [r_lo, r_hi] × [0, 2π).
    pub fn polar(r_lo: f64, r_hi: f64, nr: usize, ns: usize) -> Result<Self> {
        let g = Self {
            coordinates: Coordinates::Polar,
            counts: vec![nr, ns],
            lo: vec![r_lo, 0.0],
            hi: vec![r_hi, 2.0 * PI],
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let d = self.counts.len();
        if !(d == 2 || d == 3) || self.lo.len() != d || self.hi.len() != d {
            return Err(invalid(
                "grid",
                "dimension must be 2 or 3 with matching extents",
            ));
        }
        if self.coordinates == Coordinates::Polar && d != 2 {
            return Err(invalid("grid", "polar grids are two-dimensional"));
        }
        for k in 0..d {
            if self.counts[k] < 2 {
                return Err(invalid("grid", "need at least 2 nodes per axis"));
            }
            if !(self.hi[k] > self.lo[k]) {
                return Err(invalid("grid", "extents must be positive"));
            }
        }
        if self.coordinates == Coordinates::Polar && self.lo[0] < 0.0 {
            return Err(invalid("grid", "polar radius must be non-negative"));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.counts.len()
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        match self.coordinates {
            Coordinates::Cartesian => {
                (self.hi[axis] - self.lo[axis]) / (self.counts[axis] - 1) as f64
            }
            Coordinates::Polar => (self.hi[axis] - self.lo[axis]) / self.counts[axis] as f64,
        }
    }

    /// Multi-index of a flat node index; axis 0 varies fastest.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.counts.len());
        for &n in &self.counts {
            out.push(idx % n);
            idx /= n;
        }
        out
    }

    pub fn flatten(&self, ijk: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (k, &i) in ijk.iter().enumerate() {
            idx += i * stride;
            stride *= self.counts[k];
        }
        idx
    }

    /// Cartesian position of a node.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        let ijk = self.unflatten(idx);
        match self.coordinates {
            Coordinates::Cartesian => ijk
                .iter()
                .enumerate()
                .map(|(k, &i)| self.lo[k] + i as f64 * self.spacing(k))
                .collect(),
            Coordinates::Polar => {
                let r = self.lo[0] + (ijk[0] as f64 + 0.5) * self.spacing(0);
                let s = self.lo[1] + ijk[1] as f64 * self.spacing(1);
                vec![r * s.cos(), r * s.sin()]
            }
        }
    }

    /// Coordinates of a node in the grid's own system.
    pub fn native(&self, idx: usize) -> Vec<f64> {
        let ijk = self.unflatten(idx);
        match self.coordinates {
            Coordinates::Cartesian => self.position(idx),
            Coordinates::Polar => vec![
                self.lo[0] + (ijk[0] as f64 + 0.5) * self.spacing(0),
                self.lo[1] + ijk[1] as f64 * self.spacing(1),
            ],
        }
    }
}

/// Values of a scalar or vector field on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub grid: GridSpec,
    pub components: usize,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, components: usize, values: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&components) {
            return Err(invalid("components", "must be 1, 2 or 3"));
        }
        if values.len() != grid.node_count() * components {
            return Err(invalid(
                "values",
                format!(
                    "length {} != nodes {} x components {}",
                    values.len(),
                    grid.node_count(),
                    components
                ),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite entry at {bad}")));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Sample `f` at every node.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(
        grid: GridSpec,
        components: usize,
        f: F,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count() * components);
        for idx in 0..grid.node_count() {
            let v = f(&grid.position(idx));
            debug_assert_eq!(v.len(), components);
            values.extend(v);
        }
        Self::new(grid, components, values)
    }

    pub fn at(&self, idx: usize, c: usize) -> f64 {
        self.values[idx * self.components + c]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Second-order derivative of component `c` along `axis`, one-sided at edges.
    fn derivative(&self, c: usize, axis: usize) -> Vec<f64> {
        let g = &self.grid;
        let h = g.spacing(axis);
        let n = g.counts[axis];
        (0..g.node_count())
            .map(|idx| {
                let mut ijk = g.unflatten(idx);
                let i = ijk[axis];
                let mut val = |k: usize| {
                    ijk[axis] = k;
                    self.at(g.flatten(&ijk), c)
                };
                if i == 0 {
                    (-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h)
                } else if i == n - 1 {
                    (3.0 * val(n - 1) - 4.0 * val(n - 2) + val(n - 3)) / (2.0 * h)
                } else {
                    (val(i + 1) - val(i - 1)) / (2.0 * h)
                }
            })
            .collect()
    }
}

/// Vorticity of a sampled velocity: ∂₁u² − ∂₂u¹ in 2D, curl u in 3D.
/// Cartesian grids only; needs three nodes per axis for the edge stencils.
pub fn curl(field: &SampledField) -> Result<SampledField> {
    if field.components == 1 {
        return Err(invalid("field", "curl of a scalar field is undefined"));
    }
    if field.grid.coordinates != Coordinates::Cartesian {
        return Err(invalid("field", "curl is implemented on cartesian grids"));
    }
    if field.grid.counts.iter().any(|&n| n < 3) {
        return Err(invalid("field", "need at least 3 nodes per axis"));
    }
    let d = field.grid.dimension();
    if field.components != d {
        return Err(invalid("field", "component count must match dimension"));
    }
    if d == 2 {
        let du2_dx1 = field.derivative(1, 0);
        let du1_dx2 = field.derivative(0, 1);
        let values = du2_dx1.iter().zip(&du1_dx2).map(|(a, b)| a - b).collect();
        SampledField::new(field.grid.clone(), 1, values)
    } else {
        let d = |c, a| field.derivative(c, a);
        let (d23, d32) = (d(2, 1), d(1, 2));
        let (d31, d13) = (d(0, 2), d(2, 0));
        let (d12, d21) = (d(1, 0), d(0, 1));
        let mut values = Vec::with_capacity(field.values.len());
        for i in 0..field.grid.node_count() {
            values.push(d23[i] - d32[i]);
            values.push(d31[i] - d13[i]);
            values.push(d12[i] - d21[i]);
        }
        SampledField::new(field.grid.clone(), 3, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_grid(n: usize, half: f64) -> GridSpec {
        GridSpec::cartesian(&[-half, -half], &[half, half], &[n, n]).unwrap()
    }

    #[test]
    fn rigid_rotation_has_vorticity_two() {
        let f = SampledField::from_fn(square_grid(9, 1.0), 2, |x| vec![-x[1], x[0]]).unwrap();
        let w = curl(&f).unwrap();
        assert!(w.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        // f = x1 x2 → ∇f = (x2, x1)
        let f = SampledField::from_fn(square_grid(11, 2.0), 2, |x| vec![x[1], x[0]]).unwrap();
        assert!(curl(&f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn curl_rejects_scalars() {
        let f = SampledField::from_fn(square_grid(5, 1.0), 1, |_| vec![1.0]).unwrap();
        assert!(curl(&f).is_err());
    }

    #[test]
    fn curl_3d_rigid_rotation() {
        let g = GridSpec::cartesian(&[-1.0; 3], &[1.0; 3], &[5, 5, 5]).unwrap();
        let f = SampledField::from_fn(g, 3, |x| vec![-x[1], x[0], 0.0]).unwrap();
        let w = curl(&f).unwrap();
        for i in 0..w.grid.node_count() {
            assert!(w.at(i, 0).abs() < 1e-12 && w.at(i, 1).abs() < 1e-12);
            assert!((w.at(i, 2) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curl_of_gradient_converges_at_second_order() {
        // nonpolynomial gradient field: f = sin(x1) cos(2 x2)
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for n in [11, 21, 41, 81] {
            let g = square_grid(n, 1.0);
            hs.push(g.spacing(0));
            let f = SampledField::from_fn(g, 2, |x| {
                vec![
                    x[0].cos() * (2.0 * x[1]).cos(),
                    -2.0 * x[0].sin() * (2.0 * x[1]).sin(),
                ]
            })
            .unwrap();
            errs.push(curl(&f).unwrap().max_abs());
        }
        let slope = crate::norms_rates::ols_slope(&hs, &errs);
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn dilation_maps_unit_boundary_exactly() {
        for shape in [Shape::Disk, Shape::Ellipse { a: 1.0, b: 0.5 }] {
            let unit = DomainSpec::new(shape, 1.0).unwrap();
            for r in [2.0, 8.0, 64.0] {
                let d = unit.with_scale(r);
                for k in 0..16 {
                    let t = k as f64 * 0.4;
                    let (p, q) = (d.boundary_point(t), unit.boundary_point(t));
                    assert!((p[0] - r * q[0]).abs() <= 1e-14 * r);
                    assert!((p[1] - r * q[1]).abs() <= 1e-14 * r);
                }
            }
        }
    }

    #[test]
    fn polar_nodes_avoid_origin() {
        let g = GridSpec::polar(0.0, 1.0, 4, 8).unwrap();
        let r0 = norm2([g.position(0)[0], g.position(0)[1]]);
        assert!((r0 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn ellipse_perimeter() {
        let d = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 1.0).unwrap();
        // Ramanujan II approximation is accurate to ~1e-9 here
        let (a, b) = (1.0f64, 0.5f64);
        let h = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((d.unit_perimeter() - ram).abs() < 1e-6);
        assert!((d.max_unit_curvature() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_field_rejects_bad_lengths() {
        let g = square_grid(3, 1.0);
        assert!(SampledField::new(g.clone(), 2, vec![0.0; 9]).is_err());
        assert!(SampledField::new(g, 1, vec![f64::NAN; 9]).is_err());
    }
}
