//! Gauss–Legendre quadrature.
//!
//! Nodes come from Newton iteration on the Legendre recurrence. The adaptive
//! drivers double the node count (or the panel count) until two successive
//! estimates agree, and report the last change as the error indicator.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::bail;
use crate::Result;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            // Tricomi initial guess for the i-th largest root
            let mut x = ((i as f64 + 0.75) / (nf + 0.5) * PI).cos();
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

    /// Nodes and weights mapped onto `[a, b]`.
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
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Absolute change between the last two refinements.
    pub last_delta: f64,
    /// Nodes used by the accepted estimate.
    pub nodes: usize,
}

/// Panel width used by the composite rules.
const PANEL_NODES: usize = 32;

/// Composite Gauss–Legendre on `[a, b]`, doubling the number of equal panels
/// until the relative change drops below `rel_tol` (or the absolute change
/// below `abs_floor`).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
    max_panels: usize,
) -> Result<Estimate> {
    let rule = GaussLegendre::new(PANEL_NODES);
    let composite = |panels: usize, f: &mut F| -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                rule.integrate(lo, lo + h, &mut *f)
            })
            .sum()
    };
    let mut panels = 1;
    let mut prev = composite(panels, &mut f);
    while panels < max_panels {
        panels *= 2;
        let next = composite(panels, &mut f);
        let delta = (next - prev).abs();
        if delta <= rel_tol * next.abs() || delta <= abs_floor {
            return Ok(Estimate {
                value: next,
                last_delta: delta,
                nodes: panels * PANEL_NODES,
            });
        }
        prev = next;
    }
    bail!(
        Accuracy,
        "quadrature on [{a}, {b}] did not converge to relative {rel_tol:e} with {max_panels} panels"
    )
}

/// `∫_0^∞ f(r) dr` for a decaying integrand using geometrically growing
/// panels `[0, s], [s, 2s], [2s, 4s], …`, each integrated adaptively.
///
/// Stops when a panel contributes less than `rel_tol` of the running total;
/// the remaining tail is extrapolated from the ratio of the last two panels
/// (exact for power-law tails, negligible for faster decay).
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, scale: f64, rel_tol: f64) -> Result<Estimate> {
    const MAX_PANELS: usize = 4000;
    let first = integrate_adaptive(&mut f, 0.0, scale, 1e-13, 1e-300, 1 << 12)?;
    let mut total = first.value;
    let mut delta = first.last_delta;
    let mut nodes = first.nodes;
    let mut lo = scale;
    let mut prev_panel: Option<f64> = None;
    for _ in 0..MAX_PANELS {
        let hi = 2.0 * lo;
        let panel = integrate_adaptive(&mut f, lo, hi, 1e-13, 1e-300, 1 << 12)?;
        total += panel.value;
        delta += panel.last_delta;
        nodes += panel.nodes;
        lo = hi;
        if panel.value.abs() <= rel_tol * total.abs() {
            let tail = match prev_panel {
                Some(p) if p != 0.0 => {
                    let ratio = panel.value / p;
                    if ratio > 0.0 && ratio < 1.0 {
                        panel.value * ratio / (1.0 - ratio)
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            total += tail;
            return Ok(Estimate {
                value: total,
                last_delta: delta + tail.abs(),
                nodes,
            });
        }
        if !lo.is_finite() {
            break;
        }
        prev_panel = Some(panel.value);
    }
    bail!(
        Accuracy,
        "half-line quadrature did not settle (integrand decays too slowly)"
    )
}
