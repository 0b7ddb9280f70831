//! The frequency-domain bump `H`, its inverse transform `h`, and the
//! constants `h(0)` and `ζ` (the radius where `h` falls below `h(0)/2`).
//!
//! `H` is radial, so `h` is computed through the Hankel reduction
//! `h(r) = 2π r^{1−d/2} ∫₀¹ H(ρ) J_{d/2−1}(2πrρ) ρ^{d/2} dρ`
//! and tabulated on a uniform radial grid. Off-grid values use monotone
//! cubic (PCHIP) interpolation so interpolation never overshoots the
//! tabulated peak.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::bail;
use crate::quadrature::GaussLegendre;
use crate::special::{bessel_j_scaled, gamma};
use crate::Result;

pub const DEFAULT_R_MAX: f64 = 32.0;
pub const DEFAULT_N_R: usize = 4096;
pub const DEFAULT_N_QUAD: usize = 64;

const PROFILE_TOL: f64 = 1e-8;
const MAX_N_QUAD: usize = 8192;
const DECAY_TOL: f64 = 1e-6;

/// `H(ρ) = exp(−1/(1−ρ²))` on the unit ball, zero outside.
pub fn bump_radial(rho: f64) -> f64 {
    let s = rho * rho;
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s)).exp()
    }
}

pub fn bump_value(xi: &[f64]) -> f64 {
    bump_radial(crate::kernels::norm(xi))
}

/// Tabulated radial profile of `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    d: usize,
    r_max: f64,
    r_grid: Vec<f64>,
    h_values: Vec<f64>,
    slopes: Vec<f64>,
    h0: f64,
    zeta: f64,
    quadrature_nodes: usize,
}

impl BumpProfile {
    /// Tabulates `h` on `n_r` radii in `[0, r_max]`, starting from `n_quad`
    /// Gauss–Legendre nodes and doubling until successive profiles agree to
    /// `1e-8` in sup norm.
    pub fn build(d: usize, r_max: f64, n_r: usize, n_quad: usize) -> Result<Self> {
        if d == 0 {
            bail!(Parameter, "dimension must be at least 1");
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            bail!(Parameter, "r_max must be positive, got {r_max}");
        }
        if n_r < 64 || n_quad < 64 {
            bail!(Parameter, "need n_r >= 64 and n_quad >= 64 (got {n_r}, {n_quad})");
        }
        let step = r_max / (n_r - 1) as f64;
        let r_grid: Vec<f64> = (0..n_r).map(|i| i as f64 * step).collect();

        let mut nodes = n_quad;
        let mut current = hankel_profile(d, &r_grid, nodes);
        loop {
            if nodes * 2 > MAX_N_QUAD {
                bail!(
                    Accuracy,
                    "bump transform did not converge to {PROFILE_TOL:e} with {MAX_N_QUAD} nodes"
                );
            }
            let refined = hankel_profile(d, &r_grid, nodes * 2);
            let change = current
                .iter()
                .zip(&refined)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            nodes *= 2;
            current = refined;
            if change < PROFILE_TOL {
                break;
            }
        }

        let h0 = current[0];
        let tail_start = n_r - n_r / 20;
        let tail = current[tail_start..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        if tail >= DECAY_TOL * h0 {
            bail!(
                Domain,
                "h has not decayed by r_max = {r_max} (tail {tail:e} vs h(0) = {h0}); enlarge r_max"
            );
        }
        let slopes = pchip_slopes(step, &current);
        let mut profile = Self {
            d,
            r_max,
            r_grid,
            h_values: current,
            slopes,
            h0,
            zeta: f64::NAN,
            quadrature_nodes: nodes,
        };
        profile.zeta = profile.half_width()?;
        Ok(profile)
    }

    pub fn with_defaults(d: usize) -> Result<Self> {
        Self::build(d, DEFAULT_R_MAX, DEFAULT_N_R, DEFAULT_N_QUAD)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.quadrature_nodes
    }

    pub fn grid_step(&self) -> f64 {
        self.r_grid[1]
    }

    /// First tabulated radius beyond which every tabulated value is below
    /// `h(0)/2`.
    ///
    /// The grid point just past the last sample at or above the threshold is
    /// returned, so the continuous crossing lies strictly inside `[0, ζ)`.
    pub fn half_width(&self) -> Result<f64> {
        let threshold = 0.5 * self.h0;
        let last = self
            .h_values
            .iter()
            .rposition(|&v| v >= threshold)
            .expect("h(0) is always at or above h(0)/2");
        match self.r_grid.get(last + 1) {
            Some(&zeta) => Ok(zeta),
            None => bail!(
                Domain,
                "profile has not dropped below h(0)/2 by r_max = {}; enlarge r_max",
                self.r_max
            ),
        }
    }

    /// `h(r)` by monotone cubic interpolation; zero beyond `r_max`.
    pub fn value_at(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_max {
            return 0.0;
        }
        let step = self.grid_step();
        let i = ((r / step) as usize).min(self.r_grid.len() - 2);
        self.segment_value(i, r - self.r_grid[i])
    }

    fn segment_value(&self, i: usize, offset: f64) -> f64 {
        let step = self.grid_step();
        let t = offset / step;
        let (y0, y1) = (self.h_values[i], self.h_values[i + 1]);
        let (m0, m1) = (self.slopes[i] * step, self.slopes[i + 1] * step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    /// Minimum and maximum of the interpolant over `[lo, hi]`.
    ///
    /// Every PCHIP segment is monotone, so the extremes sit at the interval
    /// ends or at interior grid nodes.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        debug_assert!(0.0 <= lo && lo <= hi);
        let a = self.value_at(lo);
        let b = self.value_at(hi);
        let mut min = a.min(b);
        let mut max = a.max(b);
        if lo < self.r_max {
            let step = self.grid_step();
            let first = (lo / step).floor() as usize + 1;
            let last = ((hi.min(self.r_max) / step).ceil() as usize).min(self.r_grid.len());
            for &v in self.h_values.get(first..last).unwrap_or(&[]) {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if hi >= self.r_max {
            min = min.min(0.0);
            max = max.max(0.0);
        }
        (min, max)
    }

    /// `(r, h)` rows for export.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r_grid.iter().copied().zip(self.h_values.iter().copied())
    }
}

/// One pass of the Hankel quadrature at a fixed node count.
fn hankel_profile(d: usize, r_grid: &[f64], n_quad: usize) -> Vec<f64> {
    let two_nu = d as i32 - 2;
    let nu = two_nu as f64 / 2.0;
    // h(r) = 2 π^{ν+1} ∫₀¹ H(ρ) ρ^{d−1} Ĵ_ν(2πrρ) dρ with Ĵ_ν(z) = J_ν(z)(2/z)^ν
    let prefactor = 2.0 * PI.powf(nu + 1.0);
    let rule = GaussLegendre::new(n_quad);
    let (rhos, coeffs): (Vec<f64>, Vec<f64>) = rule
        .mapped(0.0, 1.0)
        .map(|(rho, w)| (rho, prefactor * w * bump_radial(rho) * rho.powi(d as i32 - 1)))
        .unzip();
    r_grid
        .iter()
        .map(|&r| {
            rhos.iter()
                .zip(&coeffs)
                .map(|(&rho, &c)| c * bessel_j_scaled(two_nu, 2.0 * PI * r * rho))
                .sum()
        })
        .collect()
}

/// Fritsch–Carlson slopes on a uniform grid. The slope at `r = 0` is zero
/// because `h` is even.
fn pchip_slopes(step: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / step).collect();
    let mut m = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            m[i] = 2.0 / (1.0 / a + 1.0 / b);
        }
    }
    // shape-preserving three-point end slope
    let (a, b) = (delta[n - 2], delta[n - 3]);
    let mut end = (3.0 * a - b) / 2.0;
    if end * a <= 0.0 {
        end = 0.0;
    } else if a * b <= 0.0 && end.abs() > 3.0 * a.abs() {
        end = 3.0 * a;
    }
    m[n - 1] = end;
    m
}

/// `h(0) = ∫ H(ξ) dξ` via the radial integral, for cross-checks.
pub fn h0_direct(d: usize, n_quad: usize) -> f64 {
    let half = d as f64 / 2.0;
    let area = 2.0 * PI.powf(half) / gamma(half);
    area * GaussLegendre::new(n_quad).integrate(0.0, 1.0, |rho| bump_radial(rho) * rho.powi(d as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_values() {
        assert_relative_eq!(bump_value(&[0.0]), (-1.0f64).exp(), max_relative = 1e-15);
        let x = (0.5f64).sqrt();
        assert_relative_eq!(bump_value(&[x]), (-2.0f64).exp(), max_relative = 1e-14);
        assert_eq!(bump_value(&[1.5]), 0.0);
        assert_eq!(bump_value(&[1.0]), 0.0);
        assert_eq!(bump_value(&[0.6, 0.8]), 0.0);
    }

    #[test]
    fn pchip_reproduces_nodes_and_stays_monotone() {
        let p = BumpProfile::build(1, 32.0, 512, 64).unwrap();
        for (i, &r) in p.r_grid().iter().enumerate().take(100) {
            assert_relative_eq!(p.value_at(r), p.h_values()[i], max_relative = 1e-12);
        }
        // first lobe is decreasing, so the interpolant must be too
        let mut prev = p.value_at(0.0);
        let mut r = 0.0;
        while r < 0.5 {
            r += 1e-3;
            let v = p.value_at(r);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn range_on_brackets_dense_samples() {
        let p = BumpProfile::build(1, 32.0, 1024, 64).unwrap();
        for &(lo, hi) in &[(0.0, 0.3), (0.4, 1.7), (0.9, 1.2), (30.0, 40.0)] {
            let (mn, mx) = p.range_on(lo, hi);
            for k in 0..=2000 {
                let r = lo + (hi - lo) * k as f64 / 2000.0;
                let v = p.value_at(r);
                assert!(
                    v >= mn - 1e-15 && v <= mx + 1e-15,
                    "r={r} v={v} range=({mn},{mx})"
                );
            }
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(BumpProfile::build(0, 20.0, 128, 64).is_err());
        assert!(BumpProfile::build(1, 20.0, 32, 64).is_err());
        assert!(BumpProfile::build(1, -1.0, 128, 64).is_err());
        // far too short a grid: h has not decayed
        assert!(matches!(
            BumpProfile::build(1, 2.0, 128, 64),
            Err(crate::Error::Domain(_))
        ));
    }
}
