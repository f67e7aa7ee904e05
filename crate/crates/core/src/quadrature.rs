//! Gauss-Legendre rules and composite tensor-product integration.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
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
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over consecutive panels given by `breaks`.
    pub fn integrate_panels(&self, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        breaks
            .windows(2)
            .map(|p| self.integrate(p[0], p[1], &mut f))
            .sum()
    }

    /// All (node, weight) pairs of the composite rule over `breaks`.
    pub fn composite(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        breaks
            .windows(2)
            .flat_map(|p| self.mapped(p[0], p[1]).collect::<Vec<_>>())
            .collect()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Breakpoints on [lower, upper] that grade geometrically away from `focus`.
pub fn graded_breaks(focus: f64, scale: f64, lower: f64, upper: f64) -> Vec<f64> {
    let mut pts = vec![lower, upper];
    if focus > lower && focus < upper {
        pts.push(focus);
    }
    let mut step = scale;
    while focus - step > lower || focus + step < upper {
        for p in [focus - step, focus + step] {
            if p > lower && p < upper {
                pts.push(p);
            }
        }
        step *= 2.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * scale);
    pts
}

/// Tensor-product integral over the panel grids `bx`, `by`, `bz`.
pub fn tensor3(
    rule: &GaussLegendre,
    bx: &[f64],
    by: &[f64],
    bz: &[f64],
    f: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    let gx = rule.composite(bx);
    let gy = rule.composite(by);
    let gz = rule.composite(bz);
    let mut total = 0.0;
    for &(x, wx) in &gx {
        let mut sy = 0.0;
        for &(y, wy) in &gy {
            let sz: f64 = gz.iter().map(|&(z, wz)| wz * f(x, y, z)).sum();
            sy += wy * sz;
        }
        total += wx * sy;
    }
    total
}

/// Evaluates `eval` at increasing rule orders until successive values agree
/// to relative tolerance `tol`.
pub fn refine(
    what: &'static str,
    orders: &[usize],
    tol: f64,
    mut eval: impl FnMut(&GaussLegendre) -> f64,
) -> Result<f64> {
    let mut prev: Option<f64> = None;
    let mut change = f64::INFINITY;
    for &n in orders {
        let v = eval(&GaussLegendre::new(n));
        if let Some(p) = prev {
            change = ((v - p) / v).abs();
            if change <= tol || v == p {
                return Ok(v);
            }
        }
        prev = Some(v);
    }
    Err(Error::Quadrature { what, change, tol })
}
