//! Squared-exponential and Matérn kernels with their spectral densities.
//!
//! Both kernels are correlation-normalised (`k(x, x) = 1`). Spectral
//! densities use the `e^{-2πi x·ξ}` convention, so `∫ K(ξ) dξ = k(0) = 1`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::bail;
use crate::quadrature::{integrate_half_line, Estimate};
use crate::special::{bessel_k, half_integer_poly, ln_gamma, unit_sphere_area};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    SquaredExponential,
    Matern,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern => "matern",
        }
    }
}

/// Isotropic stationary kernel on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
    nu: f64,
    dim: usize,
}

impl KernelSpec {
    pub fn squared_exponential(lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, lengthscale, f64::NAN, dim)
    }

    pub fn matern(nu: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Matern, lengthscale, nu, dim)
    }

    /// `nu` is ignored for the squared-exponential family.
    pub fn new(family: KernelFamily, lengthscale: f64, nu: f64, dim: usize) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            bail!(
                Parameter,
                "lengthscale must be positive and finite, got {lengthscale}"
            );
        }
        if family == KernelFamily::Matern && !(nu > 0.0 && nu.is_finite()) {
            bail!(
                Parameter,
                "Matérn smoothness nu must be positive and finite, got {nu}"
            );
        }
        if dim == 0 {
            bail!(Parameter, "dimension must be at least 1");
        }
        let nu = if family == KernelFamily::Matern {
            nu
        } else {
            f64::NAN
        };
        Ok(Self {
            family,
            lengthscale,
            nu,
            dim,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Matérn smoothness; `NaN` for the squared-exponential kernel.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `k(τ)` as a function of the distance `τ = ‖x − x'‖`.
    pub fn eval_radial(&self, tau: f64) -> f64 {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => (-tau * tau / (2.0 * l * l)).exp(),
            KernelFamily::Matern => {
                if tau == 0.0 {
                    return 1.0;
                }
                let z = (2.0 * self.nu).sqrt() * tau / l;
                match half_integer_order(self.nu) {
                    Some(p) => matern_half_integer(p, z),
                    None => matern_general(self.nu, z),
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval_radial(distance(x, y))
    }

    /// Matérn constant `c₁ = 2^d π^{d/2} Γ(ν+d/2) (2ν)^ν / (Γ(ν) l^{2ν})`,
    /// computed in log space.
    pub fn matern_c1(&self) -> f64 {
        let d = self.dim as f64;
        let nu = self.nu;
        (d * 2f64.ln() + 0.5 * d * PI.ln() + ln_gamma(nu + 0.5 * d) + nu * (2.0 * nu).ln()
            - ln_gamma(nu)
            - 2.0 * nu * self.lengthscale.ln())
        .exp()
    }

    /// Spectral density `K(ρ)` at frequency radius `ρ = ‖ξ‖`.
    pub fn spectral_density_radial(&self, rho: f64) -> f64 {
        self.ln_spectral_density_radial(rho).exp()
    }

    /// `ln K(ρ)`; stays finite where `K` itself would underflow.
    pub fn ln_spectral_density_radial(&self, rho: f64) -> f64 {
        let d = self.dim as f64;
        let l = self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => {
                0.5 * d * (2.0 * PI * l * l).ln() - 2.0 * PI * PI * l * l * rho * rho
            }
            KernelFamily::Matern => {
                let base = 2.0 * self.nu / (l * l) + 4.0 * PI * PI * rho * rho;
                self.matern_c1().ln() - (self.nu + 0.5 * d) * base.ln()
            }
        }
    }

    pub fn spectral_density(&self, xi: &[f64]) -> f64 {
        self.spectral_density_radial(norm(xi))
    }

    /// `∫_{R^d} K(ξ) dξ` by radial quadrature. Equals `k(0) = 1` for a
    /// correctly normalised density.
    pub fn spectral_mass(&self) -> Result<Estimate> {
        let d = self.dim;
        let area = unit_sphere_area(d);
        let est = integrate_half_line(
            |rho| self.spectral_density_radial(rho) * rho.powi(d as i32 - 1),
            self.spectral_scale(),
            1e-11,
        )?;
        Ok(Estimate {
            value: area * est.value,
            last_delta: area * est.last_delta,
            nodes: est.nodes,
        })
    }

    /// Frequency scale over which the spectral density varies.
    pub(crate) fn spectral_scale(&self) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => 1.0 / (2.0 * PI * self.lengthscale),
            KernelFamily::Matern => (2.0 * self.nu).sqrt() / (2.0 * PI * self.lengthscale),
        }
    }
}

/// `Some(p)` when `ν = p + 1/2`.
fn half_integer_order(nu: f64) -> Option<u32> {
    let p = nu - 0.5;
    if p >= 0.0 && p.fract() == 0.0 && p < 64.0 {
        Some(p as u32)
    } else {
        None
    }
}

/// Matérn at `z = √(2ν) τ / l` for `ν = p + 1/2`:
/// `e^{-z} p!/(2p)! Σ_i (p+i)!/(i!(p−i)!) (2z)^{p−i}`.
fn matern_half_integer(p: u32, z: f64) -> f64 {
    // Same polynomial as K_{p+1/2}, rescaled by (2z)^p: equivalently
    // p!/(2p)! (2z)^p Σ_k a_k (2z)^{-k}.
    let p_fact_ratio = (ln_gamma(p as f64 + 1.0) - ln_gamma(2.0 * p as f64 + 1.0)).exp();
    let poly = half_integer_poly(p, 1.0 / (2.0 * z));
    (-z).exp() * p_fact_ratio * (2.0 * z).powi(p as i32) * poly
}

/// Matérn via the general Bessel route, `2^{1−ν}/Γ(ν) z^ν K_ν(z)`.
pub(crate) fn matern_general(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let k = bessel_k(nu, z);
    if k == 0.0 {
        return 0.0;
    }
    ((1.0 - nu) * 2f64.ln() - ln_gamma(nu) + nu * z.ln() + k.ln()).exp()
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Gram matrix of `points` (each of length `spec.dim()`), row-major.
pub fn kernel_matrix(spec: &KernelSpec, points: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        bail!(Usage, "kernel_matrix needs at least one point");
    }
    let n = points.len();
    let mut out = alloc::vec![alloc::vec![0.0; n]; n];
    for i in 0..n {
        out[i][i] = 1.0;
        for j in 0..i {
            let k = spec.eval(points[i], points[j]);
            out[i][j] = k;
            out[j][i] = k;
        }
    }
    Ok(out)
}
