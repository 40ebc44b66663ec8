use super::{norm2, perp, Point2, RadialProfile, SampledField};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{breakpoints_within, composite, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Recorded in run metadata: the profile used for σ in the E_m split.
pub const SIGMA_BUMP_DESCRIPTION: &str = "exp(1 - 1/(1 - (r/R0)^2)) on [0, R0), scaled to mass m";

/// Centred radial vortex: the steady Euler solution generated by a radial
/// vorticity profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialVortex2D {
    pub profile: RadialProfile,
    /// Radius of the vorticity support.
    pub r0: f64,
    pub mass: f64,
    /// Velocity smoothness class s.
    pub smoothness: f64,
}

impl RadialVortex2D {
    pub fn new(profile: RadialProfile) -> Self {
        let r0 = profile.support_radius();
        let mass = profile.mass();
        let smoothness = profile.smoothness();
        Self {
            profile,
            r0,
            mass,
            smoothness,
        }
    }

    pub fn zero() -> Self {
        Self::new(RadialProfile::Pieces { pieces: vec![] })
    }

    pub fn omega(&self, r: f64) -> f64 {
        self.profile.omega(r)
    }

    /// u_θ(r) = r⁻¹ ∫₀^r s ω(s) ds.
    pub fn u_theta(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            self.profile.enclosed(r) / r
        }
    }

    /// ψ(r) = (2π)⁻¹ ∫ log|x − y| ω(y) dy, i.e. ln r ∫₀^r sω + ∫_r^∞ s ln s ω.
    pub fn psi(&self, r: f64) -> f64 {
        let head = if r > 0.0 {
            self.profile.enclosed(r) * r.ln()
        } else {
            0.0
        };
        head + self.profile.log_tail(r)
    }

    pub fn velocity(&self, x: Point2) -> Point2 {
        let r = norm2(x);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let f = self.u_theta(r) / r;
        let p = perp(x);
        [f * p[0], f * p[1]]
    }

    /// Circulation constant Γ = m/2π of the far field u_θ = Γ/r.
    pub fn far_circulation(&self) -> f64 {
        self.mass / (2.0 * PI)
    }
}

/// A radial profile placed at `center` with a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub profile: RadialProfile,
    pub center: Point2,
    pub weight: f64,
}

impl Blob {
    pub fn centered(profile: RadialProfile) -> Self {
        Self {
            profile,
            center: [0.0, 0.0],
            weight: 1.0,
        }
    }

    pub fn reach(&self) -> f64 {
        norm2(self.center) + self.profile.support_radius()
    }
}

/// Compactly supported 2D vorticity, analytic (sum of radial blobs) or sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompactVorticity {
    Analytic {
        blobs: Vec<Blob>,
        support_radius: f64,
    },
    Sampled {
        field: SampledField,
        support_radius: f64,
    },
}

impl CompactVorticity {
    pub fn analytic(blobs: Vec<Blob>) -> Self {
        let support_radius = blobs.iter().map(Blob::reach).fold(0.0, f64::max);
        Self::Analytic {
            blobs,
            support_radius,
        }
    }

    pub fn radial(profile: RadialProfile) -> Self {
        Self::analytic(vec![Blob::centered(profile)])
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Analytic { support_radius, .. } | Self::Sampled { support_radius, .. } => {
                *support_radius
            }
        }
    }

    pub fn value(&self, x: Point2) -> f64 {
        match self {
            Self::Analytic { blobs, .. } => blobs
                .iter()
                .map(|b| {
                    b.weight
                        * b.profile
                            .omega(norm2([x[0] - b.center[0], x[1] - b.center[1]]))
                })
                .sum(),
            Self::Sampled { .. } => f64::NAN,
        }
    }

    /// Total vorticity m = ∫ω.
    pub fn mass(&self) -> f64 {
        match self {
            Self::Analytic { blobs, .. } => blobs.iter().map(|b| b.weight * b.profile.mass()).sum(),
            Self::Sampled { field, .. } => sampled_integral(field, |v| v),
        }
    }

    /// ∫|ω|, by polar quadrature about the origin for analytic data.
    pub fn l1_norm(&self) -> f64 {
        match self {
            Self::Analytic {
                blobs,
                support_radius,
            } => {
                if let [b] = blobs.as_slice() {
                    if b.center == [0.0, 0.0] {
                        return b.weight.abs() * b.profile.l1_norm();
                    }
                }
                let rule = GaussLegendre::new(16);
                let n_theta = 1024;
                let mut bps = vec![];
                for b in blobs {
                    let c = norm2(b.center);
                    for r in b.profile.breakpoints() {
                        bps.push((c - r).abs());
                        bps.push(c + r);
                    }
                }
                let pts = breakpoints_within(0.0, *support_radius, &bps);
                let mut total = 0.0;
                for k in 0..n_theta {
                    let t = 2.0 * PI * k as f64 / n_theta as f64;
                    let (c, s) = (t.cos(), t.sin());
                    total += composite(&rule, &pts, 32, |r| r * self.value([r * c, r * s]).abs());
                }
                total * 2.0 * PI / n_theta as f64
            }
            Self::Sampled { field, .. } => sampled_integral(field, f64::abs),
        }
    }
}

fn sampled_integral(field: &SampledField, f: impl Fn(f64) -> f64) -> f64 {
    let g = &field.grid;
    let cell: f64 = (0..g.dimension()).map(|k| g.spacing(k)).product();
    (0..g.node_count())
        .map(|idx| {
            let ijk = g.unflatten(idx);
            // trapezoid weights
            let w: f64 = ijk
                .iter()
                .zip(&g.counts)
                .map(|(&i, &n)| if i == 0 || i == n - 1 { 0.5 } else { 1.0 })
                .product();
            w * f(field.at(idx, 0))
        })
        .sum::<f64>()
        * cell
}

/// σ with ω(σ) = φ(|x|): tangential speed r⁻¹∫₀^r sφ(s)ds.
pub fn make_sigma(profile: RadialProfile, r0: f64) -> Result<RadialVortex2D> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(invalid("R0", format!("must be positive, got {r0}")));
    }
    let support = profile.support_radius();
    if support > r0 * (1.0 + 1e-12) {
        return Err(Error::SupportExceeded {
            found: support,
            declared: r0,
        });
    }
    if !profile.is_single_signed() {
        return Err(Error::SignChangingProfile);
    }
    let mut v = RadialVortex2D::new(profile);
    v.r0 = r0;
    Ok(v)
}

/// u = v + σ split of an E_m field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmDecomposition {
    /// Zero-mass vorticity ω(v) = ω − ω(σ).
    pub v_part: CompactVorticity,
    pub sigma: RadialVortex2D,
    pub m: f64,
}

/// Split ω into a zero-mass part and the radial vortex σ built from the
/// standard bump rescaled to mass m and support radius R₀.
pub fn em_decompose(omega: &CompactVorticity, r0: f64) -> Result<EmDecomposition> {
    if !(r0 > 0.0) {
        return Err(invalid("R0", "must be positive"));
    }
    if omega.support_radius() > r0 * (1.0 + 1e-12) {
        return Err(Error::SupportExceeded {
            found: omega.support_radius(),
            declared: r0,
        });
    }
    let m = omega.mass();
    let scale = omega.l1_norm().max(1e-300);
    if m.abs() <= 1e-13 * scale {
        return Ok(EmDecomposition {
            v_part: omega.clone(),
            sigma: RadialVortex2D::zero(),
            m: 0.0,
        });
    }
    let sigma = make_sigma(RadialProfile::bump_with_mass(r0, m), r0)?;
    let v_part = match omega {
        CompactVorticity::Analytic { blobs, .. } => {
            let mut blobs = blobs.clone();
            blobs.push(Blob {
                profile: sigma.profile.clone(),
                center: [0.0, 0.0],
                weight: -1.0,
            });
            CompactVorticity::Analytic {
                blobs,
                support_radius: r0,
            }
        }
        CompactVorticity::Sampled { field, .. } => {
            let mut f = field.clone();
            for idx in 0..f.grid.node_count() {
                let p = f.grid.position(idx);
                f.values[idx] -= sigma.omega(norm2([p[0], p[1]]));
            }
            CompactVorticity::Sampled {
                field: f,
                support_radius: r0,
            }
        }
    };
    Ok(EmDecomposition { v_part, sigma, m })
}
