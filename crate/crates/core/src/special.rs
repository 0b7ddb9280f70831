//! Special functions needed by the kernels and the radial transforms.
//!
//! Gamma functions come from `libm`. The modified Bessel function of the
//! second kind uses Temme's series for small arguments and Steed's continued
//! fraction for large ones, followed by forward recurrence in the order.

use core::f64::consts::PI;

const EPS: f64 = 1.0e-16;
const MAX_ITER: usize = 10_000;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Surface area of the unit sphere in `R^d`, `2 π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Volume of the `d`-ball of radius `r`, `π^{d/2} r^d / Γ(d/2 + 1)`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let half = d as f64 / 2.0;
    PI.powf(half) * r.powi(d as i32) / gamma(half + 1.0)
}

/// Taylor coefficients of `1/Γ(z) = Σ_k c_k z^k`, `k = 1..=26`.
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Temme's auxiliary gamma quantities for `|mu| <= 1/2`:
/// `(gam1, gam2, 1/Γ(1+mu), 1/Γ(1-mu))`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mu2 = mu * mu;
    // gam1 = -Σ_{k even} c_k mu^{k-2}, gam2 = Σ_{k odd} c_k mu^{k-1}
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    let mut pow = 1.0;
    for pair in RECIP_GAMMA.chunks(2) {
        gam2 += pair[0] * pow;
        if let Some(&even) = pair.get(1) {
            gam1 -= even * pow;
        }
        pow *= mu2;
    }
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

/// Modified Bessel function of the second kind `K_ν(x)` for `ν >= 0`, `x > 0`.
///
/// Returns `+inf` at `x = 0` and `0` once the value underflows.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    debug_assert!(nu >= 0.0);
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x > 705.0 {
        return 0.0;
    }
    let nl = (nu + 0.5).floor();
    let xmu = nu - nl;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    let (mut rkmu, mut rk1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let e = e.exp();
        let mut p = 0.5 * e / gampl;
        let mut q = 0.5 / (e * gammi);
        let mut c = 1.0;
        let d = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= d / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        rkmu = sum;
        rk1 = sum1 * xi2;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        rkmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    }
    for i in 1..=(nl as usize) {
        let next = (xmu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
    }
    rkmu
}

/// `K_{p+1/2}(x)` from the terminating closed form
/// `sqrt(π/(2x)) e^{-x} Σ_{k=0}^{p} (p+k)! / (k! (p-k)!) (2x)^{-k}`.
pub fn bessel_k_half_integer(p: u32, x: f64) -> f64 {
    (PI / (2.0 * x)).sqrt() * (-x).exp() * half_integer_poly(p, 1.0 / (2.0 * x))
}

/// `Σ_{k=0}^{p} (p+k)! / (k! (p-k)!) y^k`, evaluated by Horner.
pub(crate) fn half_integer_poly(p: u32, y: f64) -> f64 {
    let p = p as i64;
    let mut coeff = 1.0_f64;
    let mut coeffs = alloc::vec::Vec::with_capacity(p as usize + 1);
    coeffs.push(coeff);
    for k in 0..p {
        // a_{k+1} / a_k = (p+k+1)(p-k) / (k+1)
        coeff *= ((p + k + 1) * (p - k)) as f64 / (k + 1) as f64;
        coeffs.push(coeff);
    }
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * y + a)
}

/// `J_ν(z) · (2/z)^ν`, the Bessel function of the first kind with its
/// small-argument power stripped off. Smooth at `z = 0`, where it equals
/// `1/Γ(ν+1)`. `two_nu` is `2ν` and must be `>= -1`, so integer and
/// half-integer orders are covered, which is all the radial transforms need.
pub fn bessel_j_scaled(two_nu: i32, z: f64) -> f64 {
    debug_assert!(two_nu >= -1);
    let nu = two_nu as f64 / 2.0;
    let z = z.abs();
    if two_nu == -1 {
        return z.cos() / PI.sqrt();
    }
    if z <= 12.0 {
        return bessel_j_scaled_series(nu, z);
    }
    let scale = (2.0 / z).powf(nu);
    if two_nu % 2 == 0 {
        libm::jn(two_nu / 2, z) * scale
    } else {
        // J_{n+1/2}(z) = sqrt(2z/π) j_n(z), spherical Bessel by upward recurrence
        let n = ((two_nu - 1) / 2) as usize;
        let (s, c) = (z.sin(), z.cos());
        let mut jm = s / z;
        let mut j = s / (z * z) - c / z;
        if n == 0 {
            j = jm;
        } else {
            for k in 1..n {
                let next = (2 * k + 1) as f64 / z * j - jm;
                jm = j;
                j = next;
            }
        }
        (2.0 * z / PI).sqrt() * j * scale
    }
}

fn bessel_j_scaled_series(nu: f64, z: f64) -> f64 {
    let y = -0.25 * z * z;
    let mut term = 1.0 / gamma(nu + 1.0);
    let mut sum = term;
    for k in 1..200 {
        let fk = k as f64;
        term *= y / (fk * (nu + fk));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && fk > 0.5 * z {
            break;
        }
    }
    sum
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
