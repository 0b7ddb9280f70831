mod common;

use approx::assert_relative_eq;
use needlebound_core::ensemble::NeedleEnsemble;
use needlebound_core::kernels::KernelSpec;
use needlebound_core::rkhs::{certify_ensemble_norm, needle_spectrum, rkhs_norm_spectral, Support};
use needlebound_core::Error;

#[test]
fn norm_is_absolutely_homogeneous() {
    let spec = KernelSpec::matern(1.5, 0.5, 2).unwrap();
    let g = needle_spectrum(0.3, 0.4, 2);
    let base = rkhs_norm_spectral(&spec, &g, Support::Compact(2.5)).unwrap();
    for c in [-3.0, 0.25, 7.0] {
        let scaled = rkhs_norm_spectral(&spec, |r| c * g(r), Support::Compact(2.5)).unwrap();
        assert_relative_eq!(scaled.norm, c.abs() * base.norm, max_relative = 1e-12);
    }
}

#[test]
fn needle_norm_matches_independent_quadrature() {
    let h0 = common::h0_oracle(1);
    for (spec, eps) in [
        (KernelSpec::squared_exponential(1.0, 1).unwrap(), 0.01),
        (KernelSpec::squared_exponential(0.2, 1).unwrap(), 0.05),
        (KernelSpec::matern(2.5, 1.0, 1).unwrap(), 0.02),
    ] {
        let ens = NeedleEnsemble::build(spec, eps, 3.0, common::profile(1)).unwrap();
        let (a0, w0) = (2.0 * eps / h0, ens.w0());
        let integrand = |rho: f64| {
            let g = a0 * w0 * common::bump(w0 * rho);
            g * g / spec.spectral_density_radial(rho)
        };
        let oracle = (2.0 * common::simpson(&integrand, 0.0, 1.0 / w0, 1e-16)).sqrt();
        let cert = certify_ensemble_norm(&ens).unwrap();
        assert_relative_eq!(cert.norm_numeric, oracle, max_relative = 1e-7);
        assert!(cert.norm_numeric <= ens.budget());
    }
}

#[test]
fn reference_se_build_certifies() {
    let ens = NeedleEnsemble::build(
        KernelSpec::squared_exponential(1.0, 1).unwrap(),
        0.01,
        1.0,
        common::profile(1),
    )
    .unwrap();
    let cert = certify_ensemble_norm(&ens).unwrap();
    assert!(cert.margin >= 0.0 && cert.passes());
    assert!(cert.chain_is_monotone(1e-9));
}

#[test]
fn certificate_sweep() {
    let mut built = 0;
    for d in [1, 2] {
        let mut specs = vec![];
        for l in [0.1, 0.3, 1.0] {
            specs.push(KernelSpec::squared_exponential(l, d).unwrap());
            for nu in [1.5, 2.5] {
                specs.push(KernelSpec::matern(nu, l, d).unwrap());
            }
        }
        for spec in specs {
            for eps in [0.1, 0.05, 0.02, 0.01] {
                for b in [1.0, 3.0, 10.0] {
                    let ens = match NeedleEnsemble::build(spec, eps, b, common::profile(d)) {
                        Ok(e) => e,
                        Err(Error::Construction(_)) => continue,
                        Err(e) => panic!("{e}"),
                    };
                    let cert = certify_ensemble_norm(&ens).unwrap();
                    assert!(cert.margin >= -1e-6 * b, "{spec:?} eps={eps} B={b}: {cert:?}");
                    assert!(
                        cert.chain_is_monotone(1e-9),
                        "{spec:?} eps={eps} B={b}: {:?}",
                        cert.chain
                    );
                    if cert.chain_closes {
                        assert!(cert.norm_chain_bound <= b * (1.0 + 1e-9));
                    }
                    built += 1;
                }
            }
        }
    }
    assert!(built >= 60, "only {built} settings constructible");
}
