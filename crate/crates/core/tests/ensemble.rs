mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use needlebound_core::ensemble::{grid_cells, inner_width, member_count, NeedleEnsemble};
use needlebound_core::kernels::KernelSpec;
use needlebound_core::Error;
use proptest::prelude::*;

fn se(l: f64, d: usize, eps: f64, b: f64) -> NeedleEnsemble {
    NeedleEnsemble::build(
        KernelSpec::squared_exponential(l, d).unwrap(),
        eps,
        b,
        common::profile(d),
    )
    .unwrap()
}

/// Members whose value at `x` exceeds `ε`.
fn above(ens: &NeedleEnsemble, x: &[f64]) -> usize {
    (1..=ens.len())
        .filter(|&m| ens.eval(m, x).unwrap() > ens.epsilon())
        .count()
}

#[test]
fn se_inner_width_matches_closed_form() {
    let h0 = common::h0_oracle(1);
    let (l, b, eps) = (1.0f64, 1.0f64, 0.01f64);
    let big_l = (b * (2.0 * PI * l * l).powf(0.25) * h0 / (2.0 * eps)).ln();
    let oracle = PI * l / big_l.sqrt();
    let ens = se(l, 1, eps, b);
    assert_relative_eq!(ens.w0(), oracle, max_relative = 1e-9);
    assert_relative_eq!(ens.amplitude(), 2.0 * eps / h0, max_relative = 1e-9);
}

#[test]
fn matern_width_is_a_power_law_in_epsilon() {
    for nu in [0.7, 1.5, 2.5, 4.0] {
        let spec = KernelSpec::matern(nu, 1.0, 1).unwrap();
        let h0 = common::profile(1).h0();
        let a = inner_width(&spec, 0.02, 3.0, h0).unwrap();
        let b = inner_width(&spec, 0.01, 3.0, h0).unwrap();
        assert_relative_eq!(b / a, 2f64.powf(-1.0 / nu), max_relative = 1e-12);
    }
}

#[test]
fn grid_count_arithmetic() {
    assert_eq!(grid_cells(0.25, 2), 16);
    assert_eq!(grid_cells(0.3, 1), 3);
    assert_eq!(grid_cells(0.3, 3), 27);
}

#[test]
fn peaks_and_zero_member() {
    for ens in [
        se(1.0, 1, 0.05, 1.0),
        se(0.05, 1, 0.02, 5.0),
        se(0.1, 2, 0.05, 8.0),
    ] {
        let eps = ens.epsilon();
        for m in 1..=ens.len() {
            let c = ens.center(m).to_vec();
            assert!((ens.eval(m, &c).unwrap() - 2.0 * eps).abs() <= 1e-6 * eps);
            assert_eq!(ens.region_index(&c), m);
            assert_eq!(ens.vbar(m, m), 2.0 * eps);
            assert_eq!(ens.eval(0, &c).unwrap(), 0.0);
        }
        assert!((1..=ens.len()).all(|j| ens.vbar(0, j) == 0.0));
    }
}

#[test]
fn needle_is_below_epsilon_beyond_one_and_a_half_steps() {
    let ens = se(0.05, 1, 0.02, 5.0);
    let reach = 1.5 * ens.step();
    for m in 1..=ens.len() {
        let c = ens.center(m)[0];
        for x in [c - reach, c + reach] {
            if (0.0..=1.0).contains(&x) {
                assert!(ens.eval(m, &[x]).unwrap() < ens.epsilon());
            }
        }
    }
    // dense radial check of the same property on the uncropped needle
    for k in 0..2000 {
        let r = reach + k as f64 * 0.001;
        assert!(ens.needle_at_offset(&[r]) < ens.epsilon());
    }
}

#[test]
fn separation_on_dense_scans() {
    for ens in [
        se(0.05, 1, 0.05, 5.0),
        se(0.05, 1, 0.01, 5.0),
        se(1.0, 1, 0.01, 1.0),
    ] {
        assert!((0..10_000).all(|i| above(&ens, &[i as f64 / 9_999.0]) <= 1));
    }
    let ens = se(0.1, 2, 0.05, 8.0);
    assert!(ens.len() >= 4);
    for i in 0..100 {
        for k in 0..100 {
            assert!(above(&ens, &[i as f64 / 99.0, k as f64 / 99.0]) <= 1);
        }
    }
}

#[test]
fn members_are_translates() {
    let ens = se(0.05, 1, 0.02, 5.0);
    let c1 = ens.center(1)[0];
    for m in 2..=ens.len() {
        let cm = ens.center(m)[0];
        for k in 0..50 {
            let delta = (k as f64 / 49.0 - 0.5) * 0.1;
            let (a, b) = (c1 + delta, cm + delta);
            if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) {
                let diff = ens.eval(1, &[a]).unwrap() - ens.eval(m, &[b]).unwrap();
                assert!(diff.abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn member_count_grows_as_epsilon_shrinks() {
    let spec = KernelSpec::squared_exponential(0.05, 1).unwrap();
    let p = common::profile(1);
    let counts: Vec<usize> = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002]
        .iter()
        .map(|&e| member_count(&spec, e, 5.0, &p).unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
    let spec = KernelSpec::matern(1.5, 0.2, 2).unwrap();
    let counts: Vec<usize> = [0.1, 0.05, 0.02, 0.01]
        .iter()
        .map(|&e| member_count(&spec, e, 3.0, &common::profile(2)).unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
}

#[test]
fn region_maxima_dominate_dense_samples() {
    for ens in [se(0.05, 1, 0.02, 5.0), se(0.1, 2, 0.05, 8.0)] {
        let d = ens.dim();
        for m in 1..=ens.len() {
            for j in 1..=ens.len() {
                let (lo, hi) = ens.region_range(m, j);
                let bx = ens.region_box(j);
                let n: usize = if d == 1 { 400 } else { 25 };
                let total = n.pow(d as u32);
                for s in 0..total {
                    let mut rest = s;
                    let x: Vec<f64> = bx
                        .iter()
                        .map(|&(a, b)| {
                            let i = rest % n;
                            rest /= n;
                            a + (b - a) * i as f64 / (n - 1) as f64
                        })
                        .collect();
                    let v = ens.eval(m, &x).unwrap();
                    assert!(lo <= v + 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }
}

#[test]
fn region_sum_relations() {
    for eps in [0.1, 0.05, 0.02, 0.01] {
        let ens = se(0.05, 1, eps, 5.0);
        let s = ens.vbar_sums();
        assert!(s.max_over_regions_squared <= 2.0 * s.max_over_regions * (1.0 + 1e-12));
        assert!(s.max_over_members >= 2.0 && s.max_over_regions >= 2.0);
    }
}

#[test]
fn invalid_inputs() {
    let spec = KernelSpec::squared_exponential(1.0, 1).unwrap();
    let p = common::profile(1);
    assert!(matches!(
        NeedleEnsemble::build(spec, 0.0, 1.0, p.clone()),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        NeedleEnsemble::build(spec, 0.1, -1.0, p.clone()),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        NeedleEnsemble::build(spec, 0.9, 1.0, p.clone()),
        Err(Error::Construction(_))
    ));
    let ens = se(1.0, 1, 0.05, 1.0);
    assert!(matches!(ens.eval(1, &[1.2]), Err(Error::Domain(_))));
    assert!(matches!(ens.eval(2, &[0.2]), Err(Error::Parameter(_))));
    let two = KernelSpec::squared_exponential(1.0, 2).unwrap();
    assert!(matches!(
        NeedleEnsemble::build(two, 0.05, 1.0, p),
        Err(Error::Parameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn region_index_lands_in_its_box(x in prop::collection::vec(0.0f64..=1.0, 2)) {
        let ens = se(0.1, 2, 0.05, 8.0);
        let j = ens.region_index(&x);
        prop_assert!(j >= 1 && j <= ens.len());
        for (&c, (a, b)) in x.iter().zip(ens.region_box(j)) {
            prop_assert!(a <= c && c <= b);
        }
    }

    #[test]
    fn needles_peak_at_two_epsilon(eps in 0.005f64..0.2, x in 0.0f64..=1.0) {
        let ens = se(0.05, 1, eps, 5.0);
        for m in 1..=ens.len() {
            prop_assert!(ens.eval(m, &[x]).unwrap() <= 2.0 * eps * (1.0 + 1e-12));
        }
        prop_assert!(above(&ens, &[x]) <= 1);
        let ratio = ens.amplitude() / eps;
        prop_assert!((ratio - 2.0 / ens.profile().h0()).abs() <= 1e-12 * ratio);
    }
}
