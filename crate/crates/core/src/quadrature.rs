//! Gauss–Legendre rules and small composite integrators shared by the
//! norm, Biot–Savart and profile code.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss–Legendre over the sorted breakpoints, `panels` equal
/// sub-panels per interval.
pub fn composite<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    breakpoints: &[f64],
    panels: usize,
    mut f: F,
) -> f64 {
    let mut total = 0.0;
    for win in breakpoints.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            total += rule.integrate(lo, lo + h, &mut f);
        }
    }
    total
}

/// Sorted, deduplicated breakpoints restricted to [lo, hi] (endpoints included).
pub fn breakpoints_within(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    pts.extend(interior.iter().copied().filter(|&x| x > lo && x < hi));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    pts
}

/// Geometrically graded panel edges on [a, b]; panel widths grow by `ratio`
/// moving away from `b` (finest at `b` when ratio > 1).
pub fn graded_edges(a: f64, b: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n <= 1 || (ratio - 1.0).abs() < 1e-12 {
        return (0..=n.max(1))
            .map(|i| a + (b - a) * i as f64 / n.max(1) as f64)
            .collect();
    }
    let total: f64 = (0..n).map(|i| ratio.powi(i as i32)).sum();
    let mut edges = vec![b];
    let mut x = b;
    for i in 0..n {
        x -= (b - a) * ratio.powi(i as i32) / total;
        edges.push(x);
    }
    *edges.last_mut().unwrap() = a;
    edges.reverse();
    edges
}
