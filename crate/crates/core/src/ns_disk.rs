//! Navier–Stokes on the disk Ω_R for radially symmetric data.
//!
//! For radial vorticity u·∇u = −(u_θ²/r)e_r is a gradient and is absorbed by
//! the pressure, so the unique solution stays azimuthal and obeys
//! ∂_t u_θ = ν(∂_rr u_θ + r⁻¹∂_r u_θ − r⁻²u_θ) with u_θ(R, t) = 0.

use crate::error::{invalid, Error, Result};
use crate::field_core::RadialVortex2D;
use crate::norms_rates::{fit_rate, l2_norm, FitSemantics, NormOptions, RateFit, Region};
use crate::reference_flows::{FlowCase, PlanarFlow};
use crate::truncation::project_w_vorticity;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// First positive zero of J₁.
pub const J11: f64 = 3.831_705_970_207_512;

/// J₁ by its power series; accurate to ~1e-12 for |x| ≤ 12.
pub fn bessel_j1(x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h;
    let mut sum = term;
    for k in 1..60 {
        let kf = k as f64;
        term *= -h * h / (kf * (kf + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Vertex grid on [0, R], refined near the vortex core and the wall.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(radius: f64, n: usize) -> Self {
        Self {
            nodes: (0..=n).map(|j| radius * j as f64 / n as f64).collect(),
        }
    }

    /// Spacing h(r) = min(R/n, h_core + g(r − core)⁺, h_wall + g(R − r)),
    /// with every length proportional to 1/n so doubling n halves all cells.
    pub fn graded(radius: f64, n: usize, core: f64, layer: f64) -> Self {
        let nf = n as f64;
        let h_far = radius / nf;
        let h_core = (core / nf).min(h_far);
        let h_wall = if layer > 0.0 {
            (8.0 * layer / nf).min(h_core)
        } else {
            h_core
        };
        let g = 12.8 / nf;
        let h = |r: f64| {
            h_far
                .min(h_core + g * (r - core).max(0.0))
                .min(h_wall + g * (radius - r).max(0.0))
        };
        let mut nodes = vec![0.0];
        let mut r = 0.0;
        while r < radius {
            r += h(r);
            nodes.push(r);
        }
        // pull the overshoot back onto R
        let last = *nodes.last().unwrap();
        if nodes.len() > 2 && last - radius > 0.5 * (last - nodes[nodes.len() - 2]) {
            nodes.pop();
        }
        let s = radius / *nodes.last().unwrap();
        for v in nodes.iter_mut() {
            *v *= s;
        }
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Control-volume weights r_j (r_{j+1/2} − r_{j−1/2}); ∫ f r dr ≈ Σ V_j f_j.
    pub fn volumes(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|j| {
                let lo = if j == 0 {
                    0.0
                } else {
                    0.5 * (self.nodes[j - 1] + self.nodes[j])
                };
                let hi = if j + 1 == n {
                    self.nodes[j]
                } else {
                    0.5 * (self.nodes[j] + self.nodes[j + 1])
                };
                // exact ∫ r dr over the cell, so constants integrate exactly
                0.5 * (hi * hi - lo * lo)
            })
            .collect()
    }
}

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct RadialNSProblem {
    pub radius: f64,
    pub nu: f64,
    /// u_θ(r, 0).
    pub initial: Profile,
    pub horizon: f64,
    pub grid: RadialGrid,
    pub steps: usize,
    /// Uniform snapshots in time (final time included).
    pub samples: usize,
}

impl std::fmt::Debug for RadialNSProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialNSProblem")
            .field("radius", &self.radius)
            .field("nu", &self.nu)
            .field("horizon", &self.horizon)
            .field("nodes", &self.grid.len())
            .field("steps", &self.steps)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialNSSolution {
    pub grid: RadialGrid,
    pub times: Vec<f64>,
    /// u_θ at every node, per sample time.
    pub snapshots: Vec<Vec<f64>>,
    /// Discrete energy Σ V_j u_j² after each step (index 0 = initial).
    pub energy: Vec<f64>,
    /// 2ν ∫₀^{t_n} D dt, accumulated per step.
    pub dissipation: Vec<f64>,
}

impl RadialNSSolution {
    /// ‖u_θ(t_k) − v‖ in L²(Ω_R) (factor 2π included).
    pub fn l2_distance(&self, k: usize, v: &[f64]) -> f64 {
        let w = self.grid.volumes();
        let s: f64 = (0..w.len())
            .map(|j| w[j] * (self.snapshots[k][j] - v[j]).powi(2))
            .sum();
        (2.0 * PI * s).sqrt()
    }

    pub fn energy_inequality_holds(&self) -> bool {
        let e0 = self.energy[0];
        self.energy
            .iter()
            .zip(&self.dissipation)
            .all(|(e, d)| e + d <= e0 * (1.0 + 1e-10) + 1e-300)
    }
}

/// Tridiagonal system a_j x_{j−1} + b_j x_j + c_j x_{j+1} = d_j.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) -> Result<()> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::Numeric("divergence of the tridiagonal solve".into()));
    }
    d[0] /= beta;
    for j in 1..n {
        cp[j - 1] = c[j - 1] / beta;
        beta = b[j] - a[j] * cp[j - 1];
        if beta.abs() < 1e-300 || !beta.is_finite() {
            return Err(Error::Numeric("divergence of the tridiagonal solve".into()));
        }
        d[j] = (d[j] - a[j] * d[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        d[j] -= cp[j] * d[j + 1];
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("divergence of the tridiagonal solve".into()));
    }
    Ok(())
}

/// Symmetric form V·L of the radial operator on the interior nodes:
/// (V L u)_j = F_{j+1/2} − F_{j−1/2} − (V_j / r_j²) u_j with
/// F_{j+1/2} = r_{j+1/2}(u_{j+1} − u_j)/(r_{j+1} − r_j).
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    volume: Vec<f64>,
}

impl Operator {
    fn new(grid: &RadialGrid) -> Self {
        let r = &grid.nodes;
        let vol = grid.volumes();
        let n = r.len() - 2;
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let j = i + 1;
            let kp = 0.5 * (r[j] + r[j + 1]) / (r[j + 1] - r[j]);
            let km = 0.5 * (r[j] + r[j - 1]) / (r[j] - r[j - 1]);
            lower[i] = km;
            upper[i] = kp;
            diag[i] = -kp - km - vol[j] / (r[j] * r[j]);
        }
        Self {
            lower,
            diag,
            upper,
            volume: vol[1..=n].to_vec(),
        }
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * u[i];
                if i > 0 {
                    s += self.lower[i] * u[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * u[i + 1];
                }
                s
            })
            .collect()
    }

    /// (V − w·A) x = V u + e·A u.
    fn step(&self, u: &[f64], implicit: f64, explicit: f64) -> Result<Vec<f64>> {
        let au = self.apply(u);
        let mut rhs: Vec<f64> = (0..u.len())
            .map(|i| self.volume[i] * u[i] + explicit * au[i])
            .collect();
        let a: Vec<f64> = self.lower.iter().map(|v| -implicit * v).collect();
        let b: Vec<f64> = (0..u.len())
            .map(|i| self.volume[i] - implicit * self.diag[i])
            .collect();
        let c: Vec<f64> = self.upper.iter().map(|v| -implicit * v).collect();
        thomas(&a, &b, &c, &mut rhs)?;
        Ok(rhs)
    }

    /// Dirichlet form −uᵀ(VL)u.
    fn dirichlet(&self, u: &[f64]) -> f64 {
        -self.apply(u).iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
    }
}

const RANNACHER_HALF_STEPS: usize = 4;

/// Crank–Nicolson with a Rannacher start (four backward-Euler half steps)
/// to damp the no-slip mismatch of the initial data.
pub fn solve_radial_ns(problem: &RadialNSProblem) -> Result<RadialNSSolution> {
    if !(problem.nu >= 0.0) || !problem.nu.is_finite() {
        return Err(invalid("nu", "must be non-negative"));
    }
    if problem.grid.len() < 129 {
        return Err(invalid("resolution", "need at least 128 radial cells"));
    }
    if !(problem.horizon > 0.0) || problem.steps == 0 {
        return Err(invalid(
            "T",
            "need a positive horizon and at least one step",
        ));
    }
    let samples = problem.samples.max(1);
    if problem.steps % samples != 0 {
        return Err(invalid("steps", "must be a multiple of the sample count"));
    }
    let grid = &problem.grid;
    let r = &grid.nodes;
    let full: Vec<f64> = r.iter().map(|&x| (problem.initial)(x)).collect();
    let op = Operator::new(grid);
    let vol = grid.volumes();
    let interior_energy = |u: &[f64]| {
        u.iter()
            .zip(&op.volume)
            .map(|(a, v)| v * a * a)
            .sum::<f64>()
    };

    let mut times = vec![0.0];
    let mut snapshots = vec![full.clone()];
    let e0 = full.iter().zip(&vol).map(|(a, v)| v * a * a).sum::<f64>();
    let mut energy = vec![e0];
    let mut dissipation = vec![0.0];
    let dt = problem.horizon / problem.steps as f64;
    let per_sample = problem.steps / samples;
    let last = r.len() - 1;
    let to_full = |u: &[f64]| {
        let mut v = Vec::with_capacity(last + 1);
        v.push(0.0);
        v.extend_from_slice(u);
        v.push(0.0);
        v
    };

    if problem.nu == 0.0 {
        for k in 1..=samples {
            times.push(problem.horizon * k as f64 / samples as f64);
            snapshots.push(full.clone());
        }
        energy.resize(problem.steps + 1, e0);
        dissipation.resize(problem.steps + 1, 0.0);
        return Ok(RadialNSSolution {
            grid: grid.clone(),
            times,
            snapshots,
            energy,
            dissipation,
        });
    }

    let nu = problem.nu;
    let mut u: Vec<f64> = full[1..last].to_vec();
    let mut diss = 0.0;
    for n in 1..=problem.steps {
        let prev = u.clone();
        if n * 2 <= RANNACHER_HALF_STEPS {
            for _ in 0..2 {
                let before = u.clone();
                u = op.step(&before, 0.5 * dt * nu, 0.0)?;
                diss += 2.0 * nu * 0.5 * dt * op.dirichlet(&u);
            }
        } else {
            u = op.step(&prev, 0.5 * dt * nu, 0.5 * dt * nu)?;
            let mid: Vec<f64> = u.iter().zip(&prev).map(|(a, b)| 0.5 * (a + b)).collect();
            diss += 2.0 * nu * dt * op.dirichlet(&mid);
        }
        // the boundary value drops to zero at t > 0
        energy.push(interior_energy(&u));
        dissipation.push(diss);
        if n % per_sample == 0 {
            times.push(dt * n as f64);
            snapshots.push(to_full(&u));
        }
    }
    Ok(RadialNSSolution {
        grid: grid.clone(),
        times,
        snapshots,
        energy,
        dissipation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMode {
    /// u₀^{ν,R} = W_R u₀.
    WR,
    /// u₀^{ν,R} = u₀ restricted to Ω_R.
    RawRestriction,
}

/// F(R) = ‖u₀^{ν,R} − u₀‖_{L²(Ω_R)} on the disk.
pub fn initial_gap_f(flow: &PlanarFlow, radius: f64, mode: GapMode) -> Result<f64> {
    let r0 = flow.r0;
    if radius < 2.0 * r0 {
        return Err(Error::BelowFarField {
            r: radius,
            min: 2.0 * r0,
        });
    }
    match mode {
        GapMode::RawRestriction => Ok(0.0),
        GapMode::WR => {
            let w = project_w_vorticity(&flow.vorticity, radius)?;
            let opts = NormOptions {
                absolute_tolerance: 1e-15,
                ..NormOptions::default()
            };
            l2_norm(
                |p: &[f64]| {
                    w.pressure_gradient([p[0], p[1]])
                        .unwrap_or([0.0; 2])
                        .to_vec()
                },
                &Region::Disk { radius },
                &opts,
            )
        }
    }
}

/// One (ν, R) cell of the convergence surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub case: FlowCase,
    pub theta: f64,
    pub nu: f64,
    pub r: f64,
    pub t: f64,
    /// sup_t ‖u^{ν,R}(t) − u‖_{L²(Ω_R)}.
    pub error: f64,
    pub f: f64,
    pub envelope: f64,
    pub pass: bool,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSurface {
    pub flow: String,
    pub case: FlowCase,
    pub theta: f64,
    pub alpha: f64,
    pub horizon: f64,
    /// Smallest C for which every cell lies under the envelope.
    pub constant: f64,
    pub cells: Vec<SurfaceCell>,
    /// Error against ν at the largest R (positive ν only).
    pub nu_marginal: Option<RateFit>,
    /// Error against R at the smallest positive ν.
    pub r_marginal: Option<RateFit>,
    /// sup-in-time error non-decreasing in ν at each R.
    pub monotone_in_nu: bool,
    /// Last diagonal cell below the first one and below 0.1‖u‖.
    pub diagonal_decreases: bool,
}

impl ConvergenceSurface {
    pub fn envelope_pass(&self) -> bool {
        self.constant.is_finite() && self.cells.iter().all(|c| c.pass)
    }

    pub fn pass(&self) -> bool {
        self.envelope_pass()
            && self.nu_marginal.as_ref().is_none_or(|f| f.pass)
            && self.r_marginal.as_ref().is_none_or(|f| f.pass)
            && self.monotone_in_nu
            && self.diagonal_decreases
    }

    pub fn cell(&self, nu: f64, r: f64) -> Option<&SurfaceCell> {
        self.cells.iter().find(|c| c.nu == nu && c.r == r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOptions {
    /// Cells across the core; doubles every spacing when doubled.
    pub resolution: usize,
    pub steps: usize,
    pub samples: usize,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self {
            resolution: 256,
            steps: 1024,
            samples: 32,
        }
    }
}

fn envelope(c: f64, nu: f64, r: f64, alpha: f64, f: f64, t: f64) -> f64 {
    (c * (nu.sqrt() + r.powf(-alpha)) + f) * (c * t).exp()
}

/// Smallest C ≥ 0 with error ≤ envelope(C).
fn minimal_constant(err: f64, nu: f64, r: f64, alpha: f64, f: f64, t: f64) -> f64 {
    if err <= f {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while envelope(hi, nu, r, alpha, f, t) < err {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if envelope(mid, nu, r, alpha, f, t) < err {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// sup-in-time error of the viscous disk solution started from W_R u₀
/// against the steady Euler flow, over a (ν, R) grid.
pub fn theorem11_experiment(
    flow: &PlanarFlow,
    case: FlowCase,
    nus: &[f64],
    rs: &[f64],
    horizon: f64,
    theta: f64,
    opts: &SurfaceOptions,
) -> Result<ConvergenceSurface> {
    let radial: RadialVortex2D = flow
        .radial
        .clone()
        .ok_or_else(|| invalid("flow", "needs a centred radially symmetric flow"))?;
    if case == FlowCase::III {
        return Err(invalid("case", "the disk experiment covers cases I and II"));
    }
    let zero_mass = flow.is_zero_mass();
    let alpha = crate::norms_rates::alpha(theta, zero_mass);
    let core = (2.0 * flow.r0).max(1.0);
    let jobs: Vec<(f64, f64)> = rs
        .iter()
        .flat_map(|&r| nus.iter().map(move |&nu| (nu, r)))
        .collect();
    let raw: Vec<(f64, f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(nu, r)| {
            let f = initial_gap_f(flow, r, GapMode::WR)?;
            let layer = (nu * horizon).sqrt();
            let grid = RadialGrid::graded(r, opts.resolution, core.min(r), layer);
            let rv = radial.clone();
            let problem = RadialNSProblem {
                radius: r,
                nu,
                initial: Arc::new(move |x| rv.u_theta(x)),
                horizon,
                grid,
                steps: opts.steps,
                samples: opts.samples,
            };
            let sol = solve_radial_ns(&problem)?;
            let reference: Vec<f64> = sol.grid.nodes.iter().map(|&x| radial.u_theta(x)).collect();
            let err = (0..sol.times.len())
                .map(|k| sol.l2_distance(k, &reference))
                .fold(0.0, f64::max);
            Ok((nu, r, err, f))
        })
        .collect::<Result<_>>()?;
    let constant = raw
        .iter()
        .map(|&(nu, r, e, f)| minimal_constant(e, nu, r, alpha, f, horizon))
        .fold(0.0, f64::max);
    let cells: Vec<SurfaceCell> = raw
        .iter()
        .map(|&(nu, r, error, f)| {
            let env = envelope(constant, nu, r, alpha, f, horizon);
            SurfaceCell {
                case,
                theta,
                nu,
                r,
                t: horizon,
                error,
                f,
                envelope: env,
                pass: error <= env * (1.0 + 1e-12),
                vacuous: error == 0.0,
            }
        })
        .collect();

    let positive: Vec<f64> = {
        let mut v: Vec<f64> = nus.iter().cloned().filter(|&n| n > 0.0).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let mut rs_sorted = rs.to_vec();
    rs_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let find = |nu: f64, r: f64| cells.iter().find(|c| c.nu == nu && c.r == r).unwrap();
    let nu_marginal = if positive.len() >= 4 {
        let r = *rs_sorted.last().unwrap();
        let pts: Vec<(f64, f64)> = positive.iter().map(|&nu| (nu, find(nu, r).error)).collect();
        let predicted = if flow.smoothness >= 2.0 { 1.0 } else { 0.5 };
        fit_rate(&pts, predicted, FitSemantics::LowerBound).ok()
    } else {
        None
    };
    let r_marginal = if rs_sorted.len() >= 4 && !positive.is_empty() {
        let nu = positive[0];
        let pts: Vec<(f64, f64)> = rs_sorted.iter().map(|&r| (r, find(nu, r).error)).collect();
        fit_rate(&pts, -alpha, FitSemantics::UpperBound).ok()
    } else {
        None
    };
    let monotone_in_nu = rs_sorted.iter().all(|&r| {
        positive
            .windows(2)
            .all(|w| find(w[0], r).error <= find(w[1], r).error * (1.0 + 1e-9))
    });
    // schedule R(ν) → ∞ as ν → 0: pair the largest ν with the smallest R
    let diagonal_decreases = if positive.len() >= 2 && rs_sorted.len() >= 2 {
        let k = positive.len().min(rs_sorted.len());
        let first = find(positive[positive.len() - 1], rs_sorted[0]);
        let last = find(positive[positive.len() - k], rs_sorted[k - 1]);
        let unorm = speed_norm(&radial, rs_sorted[k - 1]);
        last.error < first.error && last.error < 0.1 * unorm
    } else {
        true
    };
    Ok(ConvergenceSurface {
        flow: flow.name.clone(),
        case,
        theta,
        alpha,
        horizon,
        constant,
        cells,
        nu_marginal,
        r_marginal,
        monotone_in_nu,
        diagonal_decreases,
    })
}

/// ‖u‖_{L²(B_R)} of a radial vortex.
fn speed_norm(radial: &RadialVortex2D, r: f64) -> f64 {
    let grid = RadialGrid::graded(r, 1024, (2.0 * radial.r0).max(1.0).min(r), 0.0);
    let vol = grid.volumes();
    let s: f64 = grid
        .nodes
        .iter()
        .zip(&vol)
        .map(|(&x, v)| v * radial.u_theta(x).powi(2))
        .sum();
    (2.0 * PI * s).sqrt()
}
