//! RKHS norms from the spectral side and the needle norm certificate.
//!
//! For a stationary kernel with spectral density `K`,
//! `‖f‖_k² = ∫ |F(ξ)|² / K(ξ) dξ`. Everything here is radial, so the
//! integral reduces to `S_{d-1} ∫ |G(ρ)|² / K(ρ) ρ^{d-1} dρ`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::ensemble::{matern_c2, NeedleEnsemble};
use crate::error::bail;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::quadrature::{integrate_adaptive, integrate_half_line};
use crate::special::{ball_volume, unit_sphere_area};
use crate::spectral::bump_radial;
use crate::Result;

/// Relative change between node doublings at which quadrature stops.
pub const NORM_REL_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 1 << 12;
/// Multiplier turning the last doubling change into an error estimate.
pub const ERROR_INFLATION: f64 = 10.0;

/// Where the radial spectrum `G` can be non-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// `G(ρ) = 0` for `ρ > R`.
    Compact(f64),
    /// No cut-off; `|G|²/K` must decay integrably.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub norm: f64,
    pub norm_squared: f64,
    /// Change in `norm` between the last two refinements.
    pub last_delta: f64,
    pub nodes: usize,
}

/// `‖f‖_k` for the function whose radial spectrum is `spectrum`.
pub fn rkhs_norm_spectral<G: Fn(f64) -> f64>(
    spec: &KernelSpec,
    spectrum: G,
    support: Support,
) -> Result<NormEstimate> {
    let d = spec.dim() as i32;
    let integrand = |rho: f64| {
        let g = spectrum(rho);
        if g == 0.0 {
            return 0.0;
        }
        g * g * (-spec.ln_spectral_density_radial(rho)).exp() * rho.powi(d - 1)
    };
    let est = match support {
        Support::Compact(r) => {
            if !(r > 0.0 && r.is_finite()) {
                bail!(Parameter, "support radius must be positive and finite, got {r}");
            }
            integrate_adaptive(integrand, 0.0, r, NORM_REL_TOL, 0.0, MAX_PANELS)?
        }
        Support::Unbounded => integrate_half_line(integrand, spec.spectral_scale(), 1e-12)?,
    };
    let area = unit_sphere_area(spec.dim());
    let norm_squared = area * est.value;
    if !(norm_squared >= 0.0 && norm_squared.is_finite()) {
        bail!(
            Numeric,
            "spectral norm integral is not a finite non-negative number"
        );
    }
    let norm = norm_squared.sqrt();
    let last_delta = if norm > 0.0 {
        area * est.last_delta / (2.0 * norm)
    } else {
        (area * est.last_delta).sqrt()
    };
    Ok(NormEstimate {
        norm,
        norm_squared,
        last_delta,
        nodes: est.nodes,
    })
}

/// Radial spectrum of the needle, `G(ρ) = a₀ w₀^d H(w₀ ρ)`.
pub fn needle_spectrum(amplitude: f64, w0: f64, d: usize) -> impl Fn(f64) -> f64 {
    let scale = amplitude * w0.powi(d as i32);
    move |rho| scale * bump_radial(w0 * rho)
}

/// One inequality of the norm chain, as a squared-norm value.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    pub label: &'static str,
    pub value: f64,
    /// `false` when the step from the previous value relies on a side
    /// condition that does not hold at these parameters.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormCertificate {
    pub norm_numeric: f64,
    /// Tightest chain bound whose derivation holds at these parameters.
    pub norm_chain_bound: f64,
    pub budget: f64,
    pub margin: f64,
    pub quadrature_error_estimate: f64,
    pub quadrature_nodes: usize,
    /// Squared-norm values of each chain step, numeric value first.
    pub chain: Vec<ChainStep>,
    /// Whether the final step (equality with `B²`) is valid.
    pub chain_closes: bool,
}

impl NormCertificate {
    /// The certificate holds when the norm does not exceed `B` beyond the
    /// quadrature error.
    pub fn passes(&self) -> bool {
        self.margin >= -self.quadrature_error_estimate
    }

    /// Each chain value is at least its predecessor, up to relative `tol`.
    pub fn chain_is_monotone(&self, tol: f64) -> bool {
        self.chain
            .windows(2)
            .filter(|w| w[1].valid)
            .all(|w| w[1].value >= w[0].value * (1.0 - tol))
    }
}

/// Norm certificate for the uncropped needle `g`. Cropping to `[0, 1]^d`
/// cannot increase the RKHS norm, so it covers every member.
pub fn certify_ensemble_norm(ens: &NeedleEnsemble) -> Result<NormCertificate> {
    let spec = ens.spec();
    let d = spec.dim();
    let a0 = ens.amplitude();
    let w0 = ens.w0();
    let budget = ens.budget();
    let est = rkhs_norm_spectral(spec, needle_spectrum(a0, w0, d), Support::Compact(1.0 / w0))?;
    let numeric = ChainStep {
        label: "numeric",
        value: est.norm_squared,
        valid: true,
    };
    let side = ens.side_conditions();
    let area = unit_sphere_area(d);
    let volume = ball_volume(d, 1.0 / w0);
    let l = spec.lengthscale();
    let di = d as i32;
    let chain = match spec.family() {
        KernelFamily::SquaredExponential => {
            let pre = a0 * a0 / (2.0 * PI * l * l).powf(d as f64 / 2.0);
            let growth = 2.0 * PI * PI * l * l;
            let radial = integrate_adaptive(
                |rho| (growth * rho * rho).exp() * rho.powi(di - 1),
                0.0,
                1.0 / w0,
                1e-12,
                0.0,
                MAX_PANELS,
            )?;
            let edge = (growth / (w0 * w0)).exp();
            alloc::vec![
                numeric,
                ChainStep {
                    label: "drop bump factor",
                    value: pre * w0.powi(2 * di) * area * radial.value,
                    valid: true,
                },
                ChainStep {
                    label: "volume times edge value",
                    value: pre * w0.powi(2 * di) * volume * edge,
                    valid: true,
                },
                ChainStep {
                    label: "w0^(2d) V(1/w0) <= 1",
                    value: pre * edge,
                    valid: side.chain_closes(),
                },
            ]
        }
        KernelFamily::Matern => {
            let nu = spec.nu();
            let power = nu + d as f64 / 2.0;
            let c1 = spec.matern_c1();
            let c2 = matern_c2(spec);
            let shift = 2.0 * nu / (l * l);
            let radial = integrate_adaptive(
                |rho| (shift + 4.0 * PI * PI * rho * rho).powf(power) * rho.powi(di - 1),
                0.0,
                1.0 / w0,
                1e-12,
                0.0,
                MAX_PANELS,
            )?;
            let ratio = 2.0 * nu * w0 * w0 / (l * l);
            alloc::vec![
                numeric,
                ChainStep {
                    label: "drop bump factor",
                    value: a0 * a0 * w0.powi(2 * di) * area * radial.value / c1,
                    valid: true,
                },
                ChainStep {
                    label: "volume times edge value",
                    value: a0
                        * a0
                        * w0.powi(2 * di)
                        * volume
                        * (shift + 4.0 * PI * PI / (w0 * w0)).powf(power)
                        / c1,
                    valid: true,
                },
                ChainStep {
                    label: "factor w0^-2",
                    value: a0
                        * a0
                        * w0.powf(d as f64 - 2.0 * nu)
                        * volume
                        * (ratio + 4.0 * PI * PI).powf(power)
                        / c1,
                    valid: true,
                },
                ChainStep {
                    label: "constant c2",
                    value: c2 * a0 * a0 * w0.powf(-2.0 * nu) * (ratio + 4.0 * PI * PI).powf(power),
                    valid: true,
                },
                ChainStep {
                    label: "2 nu w0^2 / l^2 <= 4 pi^2",
                    value: c2 * a0 * a0 * w0.powf(-2.0 * nu) * (8.0 * PI * PI).powf(power),
                    valid: side.chain_closes(),
                },
            ]
        }
    };
    let bound_sq = chain
        .iter()
        .skip(1)
        .take_while(|s| s.valid)
        .last()
        .map_or(f64::INFINITY, |s| s.value);
    let quadrature_error_estimate = ERROR_INFLATION * est.last_delta;
    Ok(NormCertificate {
        norm_numeric: est.norm,
        norm_chain_bound: bound_sq.sqrt(),
        budget,
        margin: budget - est.norm,
        quadrature_error_estimate,
        quadrature_nodes: est.nodes,
        chain,
        chain_closes: side.chain_closes(),
    })
}

/// Like [`certify_ensemble_norm`] but turns a failed certificate into an
/// error.
pub fn require_certified(ens: &NeedleEnsemble) -> Result<NormCertificate> {
    let cert = certify_ensemble_norm(ens)?;
    if !cert.passes() {
        bail!(
            Certification,
            "needle RKHS norm {} exceeds budget {} (margin {}, quadrature error {})",
            cert.norm_numeric,
            cert.budget,
            cert.margin,
            cert.quadrature_error_estimate
        );
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::sync::Arc;
    use approx::assert_relative_eq;

    use crate::spectral::BumpProfile;

    #[test]
    fn kernel_section_has_unit_norm() {
        for spec in [
            KernelSpec::squared_exponential(0.7, 1).unwrap(),
            KernelSpec::squared_exponential(0.3, 2).unwrap(),
            KernelSpec::matern(2.5, 0.5, 1).unwrap(),
        ] {
            let est =
                rkhs_norm_spectral(&spec, |r| spec.spectral_density_radial(r), Support::Unbounded).unwrap();
            assert_relative_eq!(est.norm, 1.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn matern_with_w0_held_fixed_gains_margin_with_budget() {
        let p = Arc::new(BumpProfile::build(1, 32.0, 1024, 64).unwrap());
        let spec = KernelSpec::matern(1.5, 1.0, 1).unwrap();
        let ens = NeedleEnsemble::build(spec, 0.01, 1.0, Arc::clone(&p)).unwrap();
        let a = certify_ensemble_norm(&ens).unwrap();
        assert!(a.passes());
        assert!(a.chain_is_monotone(1e-9));
        assert_relative_eq!(a.norm_chain_bound, 1.0, max_relative = 1e-9);
        let wide = NeedleEnsemble::with_inner_width(spec, 0.01, 2.0, p, ens.w0()).unwrap();
        let b = certify_ensemble_norm(&wide).unwrap();
        assert_eq!(a.norm_numeric, b.norm_numeric);
        assert!(b.margin - a.margin >= 1.0 - 1e-12);
    }

    #[test]
    fn inflated_width_fails_certification() {
        let p = Arc::new(BumpProfile::build(1, 32.0, 1024, 64).unwrap());
        let spec = KernelSpec::matern(1.5, 1.0, 1).unwrap();
        let ens = NeedleEnsemble::build(spec, 0.01, 1.0, Arc::clone(&p)).unwrap();
        let tampered = NeedleEnsemble::with_inner_width(spec, 0.01, 1.0, p, ens.w0() / 50.0).unwrap();
        assert!(matches!(
            require_certified(&tampered),
            Err(crate::Error::Certification(_))
        ));
    }
}
