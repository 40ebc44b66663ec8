//! Radial vorticity profiles ω(r) with exact (polynomial) or high-order
//! quadrature (C^∞ bump) moments.

use crate::quadrature::{breakpoints_within, composite, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// ω(r) = Σ c_k r^k on [lo, hi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl PolyPiece {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Self {
            lo,
            hi,
            coeffs: vec![value],
        }
    }

    fn value(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * r + k as f64 * c)
    }

    /// ∫_a^b s ω(s) ds for [a, b] inside the piece.
    fn first_moment(&self, a: f64, b: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let p = k as i32 + 2;
                c * (b.powi(p) - a.powi(p)) / p as f64
            })
            .sum()
    }

    /// ∫_a^b s log(s) ω(s) ds.
    fn log_moment(&self, a: f64, b: f64) -> f64 {
        let prim = |s: f64, p: i32| -> f64 {
            if s == 0.0 {
                0.0
            } else {
                let pf = p as f64;
                s.powi(p) * (s.ln() / pf - 1.0 / (pf * pf))
            }
        };
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let p = k as i32 + 2;
                c * (prim(b, p) - prim(a, p))
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadialProfile {
    /// Piecewise polynomial, zero outside the pieces.
    Pieces { pieces: Vec<PolyPiece> },
    /// amplitude · exp(1 − 1/(1 − (r/radius)²)) on [0, radius), zero beyond.
    Bump { radius: f64, amplitude: f64 },
    /// Weighted sum of profiles.
    Sum { terms: Vec<(f64, RadialProfile)> },
}

fn bump_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(24))
}

const BUMP_PANELS: usize = 8;

/// ∫₀¹ q e^{1 − 1/(1−q²)} dq, the first moment of the unit bump.
fn unit_bump_first_moment() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| {
        let rule = GaussLegendre::new(40);
        composite(&rule, &[0.0, 1.0], 64, |q| q * unit_bump(q))
    })
}

#[inline]
fn unit_bump(q: f64) -> f64 {
    if q.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - q * q)).exp()
    }
}

impl RadialProfile {
    /// Constant patch ω = value on [0, radius].
    pub fn patch(radius: f64, value: f64) -> Self {
        Self::Pieces {
            pieces: vec![PolyPiece::constant(0.0, radius, value)],
        }
    }

    pub fn bump(radius: f64, amplitude: f64) -> Self {
        Self::Bump { radius, amplitude }
    }

    /// Bump of support radius `radius` with total mass `mass`.
    pub fn bump_with_mass(radius: f64, mass: f64) -> Self {
        let unit_mass = 2.0 * PI * radius * radius * unit_bump_first_moment();
        Self::bump(radius, mass / unit_mass)
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Pieces { pieces } => pieces.iter().map(|p| p.hi).fold(0.0, f64::max),
            Self::Bump { radius, .. } => *radius,
            Self::Sum { terms } => terms
                .iter()
                .map(|(_, p)| p.support_radius())
                .fold(0.0, f64::max),
        }
    }

    /// Radii where ω or its derivatives jump (quadrature breakpoints).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            Self::Pieces { pieces } => pieces.iter().flat_map(|p| [p.lo, p.hi]).collect(),
            Self::Bump { radius, .. } => vec![*radius],
            Self::Sum { terms } => terms.iter().flat_map(|(_, p)| p.breakpoints()).collect(),
        };
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// True when ω has a jump discontinuity.
    pub fn is_discontinuous(&self) -> bool {
        match self {
            Self::Pieces { pieces } => {
                let bps = self.breakpoints();
                bps.iter().filter(|&&r| r > 0.0).any(|&r| {
                    let left: f64 = pieces
                        .iter()
                        .filter(|p| p.hi == r)
                        .map(|p| p.value(r))
                        .sum();
                    let right: f64 = pieces
                        .iter()
                        .filter(|p| p.lo == r)
                        .map(|p| p.value(r))
                        .sum();
                    (left - right).abs() > 1e-14
                })
            }
            Self::Bump { .. } => false,
            Self::Sum { terms } => terms.iter().any(|(_, p)| p.is_discontinuous()),
        }
    }

    pub fn omega(&self, r: f64) -> f64 {
        match self {
            Self::Pieces { pieces } => pieces
                .iter()
                .filter(|p| r >= p.lo && r < p.hi)
                .map(|p| p.value(r))
                .sum(),
            Self::Bump { radius, amplitude } => amplitude * unit_bump(r / radius),
            Self::Sum { terms } => terms.iter().map(|(w, p)| w * p.omega(r)).sum(),
        }
    }

    /// dω/dr away from jumps.
    pub fn omega_prime(&self, r: f64) -> f64 {
        match self {
            Self::Pieces { pieces } => pieces
                .iter()
                .filter(|p| r >= p.lo && r < p.hi)
                .map(|p| p.derivative(r))
                .sum(),
            Self::Bump { radius, amplitude } => {
                let q = r / radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let d = 1.0 - q * q;
                    amplitude * unit_bump(q) * (-2.0 * q / (d * d)) / radius
                }
            }
            Self::Sum { terms } => terms.iter().map(|(w, p)| w * p.omega_prime(r)).sum(),
        }
    }

    /// ∫₀^r s ω(s) ds.
    pub fn enclosed(&self, r: f64) -> f64 {
        match self {
            Self::Pieces { pieces } => pieces
                .iter()
                .filter(|p| r > p.lo)
                .map(|p| p.first_moment(p.lo, r.min(p.hi)))
                .sum(),
            Self::Bump { radius, amplitude } => {
                let top = r.min(*radius);
                if top >= *radius {
                    amplitude * radius * radius * unit_bump_first_moment()
                } else {
                    composite(bump_rule(), &[0.0, top], BUMP_PANELS, |s| {
                        s * amplitude * unit_bump(s / radius)
                    })
                }
            }
            Self::Sum { terms } => terms.iter().map(|(w, p)| w * p.enclosed(r)).sum(),
        }
    }

    /// ∫_r^∞ s log(s) ω(s) ds.
    pub fn log_tail(&self, r: f64) -> f64 {
        match self {
            Self::Pieces { pieces } => pieces
                .iter()
                .filter(|p| p.hi > r)
                .map(|p| p.log_moment(r.max(p.lo), p.hi))
                .sum(),
            Self::Bump { radius, amplitude } => {
                if r >= *radius {
                    0.0
                } else {
                    // split at 0 avoids evaluating log at the origin
                    let pts = breakpoints_within(r, *radius, &[]);
                    composite(bump_rule(), &pts, BUMP_PANELS, |s| {
                        s * s.ln() * amplitude * unit_bump(s / radius)
                    })
                }
            }
            Self::Sum { terms } => terms.iter().map(|(w, p)| w * p.log_tail(r)).sum(),
        }
    }

    /// m = 2π ∫ s ω(s) ds.
    pub fn mass(&self) -> f64 {
        2.0 * PI * self.enclosed(self.support_radius())
    }

    /// ∫ |ω| over the plane.
    pub fn l1_norm(&self) -> f64 {
        let mut pts = vec![0.0];
        pts.extend(self.breakpoints());
        let pts = breakpoints_within(0.0, self.support_radius(), &pts);
        let rule = GaussLegendre::new(32);
        2.0 * PI * composite(&rule, &pts, 16, |s| s * self.omega(s).abs())
    }

    /// Sign check on a fine sample of [0, R₀]: true if ω ≥ 0 or ω ≤ 0 throughout.
    pub fn is_single_signed(&self) -> bool {
        let r0 = self.support_radius();
        let n = 4000;
        let (mut pos, mut neg) = (false, false);
        for i in 0..n {
            let v = self.omega(r0 * (i as f64 + 0.5) / n as f64);
            pos |= v > 0.0;
            neg |= v < 0.0;
        }
        !(pos && neg)
    }

    /// Velocity-side smoothness index s (u ∈ C^s): patches give u ∈ C^{0,1}.
    pub fn smoothness(&self) -> f64 {
        match self {
            Self::Bump { .. } => f64::INFINITY,
            _ if self.is_discontinuous() => 1.0,
            Self::Pieces { .. } => 2.0,
            Self::Sum { terms } => terms
                .iter()
                .map(|(_, p)| p.smoothness())
                .fold(f64::INFINITY, f64::min),
        }
    }
}
