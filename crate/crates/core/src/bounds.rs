//! Numeric forms of the regret lower bounds and the comparison quantities.
//!
//! The lower-bound argument leaves two constants free: `C` in the simple
//! regret threshold and `C′` in the cumulative bound. Both are inputs here
//! (default 1); [`calibrate`] back-solves the smallest `C` that the exact
//! region-maximum tables of a concrete ensemble support.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::algorithms::{first_argmax, GridPosterior};
use crate::ensemble::{self, matern_c2, NeedleEnsemble};
use crate::error::bail;
use crate::grid::DecisionGrid;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::spectral::BumpProfile;
use crate::Result;

/// `D(N(μ₁, σ²) ‖ N(μ₂, σ²)) = (μ₁ − μ₂)² / (2σ²)`.
pub fn gaussian_kl(mu1: f64, mu2: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        bail!(Parameter, "sigma must be positive and finite, got {sigma}");
    }
    let diff = mu1 - mu2;
    Ok(diff * diff / (2.0 * sigma * sigma))
}

/// `E₀[a] + A √D`: the bound on `E_m[a]` for `a` taking values in `[0, A]`.
pub fn auer_gap(e0: f64, range: f64, divergence: f64) -> f64 {
    e0 + range * divergence.max(0.0).sqrt()
}

/// `M σ² / (4 C² ε²)`.
pub fn threshold_from_count(members: f64, epsilon: f64, sigma: f64, c: f64) -> f64 {
    members * sigma * sigma / (4.0 * c * c * epsilon * epsilon)
}

/// Horizon below which the ensemble forces average simple regret `>= ε`.
pub fn simple_regret_threshold(
    spec: &KernelSpec,
    profile: &BumpProfile,
    epsilon: f64,
    budget: f64,
    sigma: f64,
    c: f64,
) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_positive("C", c)?;
    let m = ensemble::member_count(spec, epsilon, budget, profile)?;
    Ok(threshold_from_count(m as f64, epsilon, sigma, c))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!(Parameter, "{name} must be positive and finite, got {v}");
    }
    Ok(())
}

/// Ratio `σ / (B √T)` above which the cumulative bound is not applied.
pub const CUMULATIVE_SIDE_RATIO: f64 = 0.01;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeLower {
    /// `T ε*`.
    pub r_lower: f64,
    pub eps_star: f64,
    /// Continuous member count `(1/w)^d` at `ε*`.
    pub members: f64,
    pub iterations: usize,
    /// Whether an ensemble can actually be built at `ε*`.
    pub constructible: bool,
}

/// Continuous member count `(1/w)^d` as a function of `ε`, in closed form.
#[derive(Debug, Clone, Copy)]
struct CountModel {
    family: KernelFamily,
    d: f64,
    /// SE: `B (2πl²)^{d/4} h(0) / 2`, so that the log argument is `q/ε`.
    /// Matérn: `B c₃`.
    q: f64,
    /// SE: `2ζπl`. Matérn: `ν`.
    s: f64,
}

impl CountModel {
    fn new(spec: &KernelSpec, profile: &BumpProfile, budget: f64) -> Self {
        let d = spec.dim() as f64;
        let l = spec.lengthscale();
        let zeta = profile.zeta();
        match spec.family() {
            KernelFamily::SquaredExponential => Self {
                family: spec.family(),
                d,
                q: budget * (2.0 * PI * l * l).powf(d / 4.0) * profile.h0() / 2.0,
                s: 2.0 * zeta * PI * l,
            },
            KernelFamily::Matern => Self {
                family: spec.family(),
                d,
                q: budget * matern_c3(spec, profile),
                s: spec.nu(),
            },
        }
    }

    /// `(ln M, d ln M / d ln ε)`; `None` where the width formula breaks down.
    fn log_count(&self, epsilon: f64) -> Option<(f64, f64)> {
        match self.family {
            KernelFamily::SquaredExponential => {
                let big_l = (self.q / epsilon).ln();
                (big_l > 0.0).then(|| (self.d * (0.5 * big_l.ln() - self.s.ln()), -self.d / (2.0 * big_l)))
            }
            KernelFamily::Matern => Some(((self.d / self.s) * (self.q / epsilon).ln(), -self.d / self.s)),
        }
    }
}

/// `c₃` with `M = (B c₃ / ε)^{d/ν}` for the Matérn ensemble, grid step `2ζw₀`.
pub fn matern_c3(spec: &KernelSpec, profile: &BumpProfile) -> f64 {
    let nu = spec.nu();
    let d = spec.dim() as f64;
    let kappa =
        matern_c2(spec).powf(-0.5) * profile.h0() / (2.0 * (8.0 * PI * PI).powf(0.5 * (nu + d / 2.0)));
    kappa * (2.0 * profile.zeta()).powf(-nu)
}

/// The relation `ε = √(σ² M(ε) / (8 C′² T))` with continuous `M`; returns the
/// relative residual at `ε`.
pub fn fixed_point_residual(
    spec: &KernelSpec,
    profile: &BumpProfile,
    horizon: f64,
    budget: f64,
    sigma: f64,
    c_prime: f64,
    epsilon: f64,
) -> Result<f64> {
    let model = CountModel::new(spec, profile, budget);
    let Some((ln_m, _)) = model.log_count(epsilon) else {
        bail!(
            Domain,
            "epsilon {epsilon} is outside the range where the width formula applies"
        );
    };
    let rhs = (sigma * sigma * ln_m.exp() / (8.0 * c_prime * c_prime * horizon)).sqrt();
    Ok((epsilon - rhs).abs() / epsilon)
}

/// Cumulative-regret lower bound `T ε*` with `ε*` the self-consistent choice.
pub fn cumulative_regret_lower(
    spec: &KernelSpec,
    profile: &BumpProfile,
    horizon: f64,
    budget: f64,
    sigma: f64,
    c_prime: f64,
) -> Result<CumulativeLower> {
    check_positive("B", budget)?;
    check_positive("sigma", sigma)?;
    if sigma / budget > CUMULATIVE_SIDE_RATIO * horizon.sqrt() {
        bail!(
            Domain,
            "side condition sigma/B <= {CUMULATIVE_SIDE_RATIO} sqrt(T) violated (sigma/B = {}, sqrt(T) = {})",
            sigma / budget,
            horizon.sqrt()
        );
    }
    cumulative_fixed_point(spec, profile, horizon, budget, sigma, c_prime)
}

/// Solves `ε = √(σ² M(ε) / (8 C′² T))` without the side condition on
/// `σ / B`; outside it the solution exists but the bound is not implied.
pub fn cumulative_fixed_point(
    spec: &KernelSpec,
    profile: &BumpProfile,
    horizon: f64,
    budget: f64,
    sigma: f64,
    c_prime: f64,
) -> Result<CumulativeLower> {
    check_positive("T", horizon)?;
    check_positive("B", budget)?;
    check_positive("sigma", sigma)?;
    check_positive("C'", c_prime)?;
    let model = CountModel::new(spec, profile, budget);
    // ln ε = ½ ln(σ² / (8 C′² T)) + ½ ln M(ε)
    let base = 0.5 * (sigma * sigma / (8.0 * c_prime * c_prime * horizon)).ln();
    let (eps, iterations) = match spec.family() {
        KernelFamily::Matern => {
            let a = model.d / model.s;
            ((((2.0 * base) + a * model.q.ln()) / (2.0 + a)).exp(), 0)
        }
        KernelFamily::SquaredExponential => {
            // Newton on F(u) = u − base − ½ ln M(e^u), which is increasing
            let ceiling = model.q.ln() - 1e-6;
            let mut u = base.min(ceiling);
            let mut done = None;
            for k in 1..=FIXED_POINT_MAX_ITER {
                let (ln_m, slope) = model.log_count(u.exp()).unwrap_or((f64::NEG_INFINITY, 0.0));
                let f = u - base - 0.5 * ln_m;
                let step = f / (1.0 - 0.5 * slope);
                let next = (u - step).min(ceiling);
                if !next.is_finite() {
                    bail!(Numeric, "cumulative fixed point diverged");
                }
                let converged = (next - u).abs() <= FIXED_POINT_TOL * 1e-2;
                u = next;
                if converged {
                    done = Some(k);
                    break;
                }
            }
            match done {
                Some(k) => (u.exp(), k),
                None => bail!(
                    Numeric,
                    "cumulative fixed point did not converge in {FIXED_POINT_MAX_ITER} iterations"
                ),
            }
        }
    };
    let members = model.log_count(eps).map_or(0.0, |(l, _)| l.exp());
    Ok(CumulativeLower {
        r_lower: horizon * eps,
        eps_star: eps,
        members,
        iterations,
        constructible: ensemble::inner_width(spec, eps, budget, profile.h0()).is_ok(),
    })
}

/// `P[r^{(T)} >= ηε] >= (1 − η)/(4 − η)`.
pub fn high_prob_conversion(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        bail!(Parameter, "eta must lie in (0, 1], got {eta}");
    }
    Ok((1.0 - eta) / (4.0 - eta))
}

/// Greedy information gain: `(t, γ̂_t)` for `t = 1..=horizon`, each step
/// adding the candidate of largest posterior variance (ties to the first).
/// A lower bound on the true maximum `γ_t`.
pub fn info_gain_greedy(
    spec: &KernelSpec,
    grid: &DecisionGrid,
    horizon: usize,
    sigma: f64,
) -> Result<Vec<(usize, f64)>> {
    check_positive("sigma", sigma)?;
    let noise = sigma * sigma;
    let mut post = GridPosterior::new(*spec, noise, *grid)?;
    let mut total = 0.0;
    let mut out = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let g = first_argmax(post.variances().iter().copied());
        let var = post.variances()[g].max(0.0);
        total += 0.5 * (var / noise).ln_1p();
        out.push((t, total));
        post.observe(g, 0.0)?;
    }
    Ok(out)
}

/// `√(T B γ + T γ²)` with unit constants.
pub fn upper_bound_sri(gamma: f64, budget: f64, horizon: f64) -> f64 {
    (horizon * budget * gamma + horizon * gamma * gamma).sqrt()
}

/// One entry of the comparison table: `variable^exponent · (log variable)^log_power`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    /// `None` when the bound is vacuous at these parameters.
    pub exponent: Option<f64>,
    pub log_power: f64,
    pub form: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentRow {
    pub quantity: &'static str,
    /// `"T"` or `"1/epsilon"`.
    pub variable: &'static str,
    pub upper_sri: BoundEntry,
    pub conjectured: BoundEntry,
    pub lower: BoundEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentTable {
    pub family: KernelFamily,
    pub d: usize,
    pub nu: f64,
    pub rows: Vec<ExponentRow>,
    pub note: &'static str,
}

impl ExponentTable {
    pub fn row(&self, quantity: &str) -> Option<&ExponentRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }
}

pub const CUMULATIVE: &str = "cumulative regret";
pub const TIME_TO_SIMPLE: &str = "time to simple regret epsilon";

fn entry(exponent: Option<f64>, log_power: f64, form: String) -> BoundEntry {
    BoundEntry {
        exponent,
        log_power,
        form,
    }
}

pub fn exponent_table(spec: &KernelSpec) -> ExponentTable {
    let d = spec.dim();
    let df = d as f64;
    let rows = match spec.family() {
        KernelFamily::SquaredExponential => alloc::vec![
            ExponentRow {
                quantity: CUMULATIVE,
                variable: "T",
                upper_sri: entry(Some(0.5), df, "sqrt(T (log T)^(2d))".into()),
                conjectured: entry(Some(0.5), df / 2.0, "sqrt(T (log T)^d)".into()),
                lower: entry(Some(0.5), df / 4.0, "sqrt(T (log T)^(d/2))".into()),
            },
            ExponentRow {
                quantity: TIME_TO_SIMPLE,
                variable: "1/epsilon",
                upper_sri: entry(Some(2.0), 2.0 * df, "(1/eps)^2 (log 1/eps)^(2d)".into()),
                conjectured: entry(Some(2.0), df, "(1/eps)^2 (log 1/eps)^d".into()),
                lower: entry(Some(2.0), df / 2.0, "(1/eps)^2 (log 1/eps)^(d/2)".into()),
            },
        ],
        KernelFamily::Matern => {
            let nu = spec.nu();
            let dd = df * (df + 1.0);
            let vacuous = 2.0 * nu - dd <= 0.0;
            alloc::vec![
                ExponentRow {
                    quantity: CUMULATIVE,
                    variable: "T",
                    upper_sri: entry(
                        Some(0.5 * (2.0 * nu + 3.0 * dd) / (2.0 * nu + dd)),
                        0.0,
                        "T^((2nu+3d(d+1)) / (2(2nu+d(d+1))))".into()
                    ),
                    conjectured: entry(
                        Some((nu + dd) / (2.0 * nu + dd)),
                        0.0,
                        "T^((nu+d(d+1)) / (2nu+d(d+1)))".into()
                    ),
                    lower: entry(
                        Some((nu + df) / (2.0 * nu + df)),
                        0.0,
                        "T^((nu+d) / (2nu+d))".into()
                    ),
                },
                ExponentRow {
                    quantity: TIME_TO_SIMPLE,
                    variable: "1/epsilon",
                    upper_sri: entry(
                        (!vacuous).then(|| 2.0 * (2.0 * nu + dd) / (2.0 * nu - dd)),
                        0.0,
                        "(1/eps)^(2(2nu+d(d+1)) / (2nu-d(d+1))), needs 2nu > d(d+1)".into()
                    ),
                    conjectured: entry(Some(2.0 + dd / nu), 0.0, "(1/eps)^(2+d(d+1)/nu)".into()),
                    lower: entry(Some(2.0 + df / nu), 0.0, "(1/eps)^(2+d/nu)".into()),
                },
            ]
        }
    };
    ExponentTable {
        family: spec.family(),
        d,
        nu: spec.nu(),
        rows,
        note: "polylogarithmic factors hidden by O*(.) are dropped",
    }
}

/// Region-maximum sums of a concrete ensemble and the smallest `C` they
/// support in the simple-regret derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// `max_j Σ_m v̄⁺ / ε`, the first-term constant.
    pub sum_over_members: f64,
    /// `max_m Σ_j v̄⁺ / ε`.
    pub sum_over_regions: f64,
    /// `max_j Σ_m (v̄⁺)² / ε²`.
    pub sum_of_squares: f64,
    /// `max(first, second · √third / √2)`.
    pub c: f64,
}

pub fn calibrate(ens: &NeedleEnsemble) -> Calibration {
    let s = ens.vbar_sums();
    let a1 = s.max_over_regions;
    let a2 = s.max_over_members;
    let a3 = s.max_over_regions_squared;
    Calibration {
        sum_over_members: a1,
        sum_over_regions: a2,
        sum_of_squares: a3,
        c: a1.max(a2 * a3.sqrt() / SQRT_2),
    }
}

/// Inputs of a [`BoundsReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsInputs {
    pub spec: KernelSpec,
    pub epsilon: f64,
    pub budget: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub c: f64,
    pub c_prime: f64,
    /// Decision-grid resolution for the information-gain estimate.
    pub gamma_resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub inputs: BoundsInputs,
    pub members: usize,
    pub t_threshold_simple: f64,
    pub cumulative: CumulativeLower,
    pub gamma_estimates: Vec<(usize, f64)>,
    pub upper_bound_sri: f64,
    pub exponent_table: ExponentTable,
    pub calibration: Option<Calibration>,
}

impl BoundsReport {
    pub fn compute(inputs: BoundsInputs, profile: &BumpProfile) -> Result<Self> {
        let spec = inputs.spec;
        let members = ensemble::member_count(&spec, inputs.epsilon, inputs.budget, profile)?;
        let t_threshold_simple = simple_regret_threshold(
            &spec,
            profile,
            inputs.epsilon,
            inputs.budget,
            inputs.sigma,
            inputs.c,
        )?;
        let horizon = inputs.horizon as f64;
        let cumulative = cumulative_regret_lower(
            &spec,
            profile,
            horizon,
            inputs.budget,
            inputs.sigma,
            inputs.c_prime,
        )?;
        let grid = DecisionGrid::new(spec.dim(), inputs.gamma_resolution)?;
        let gamma_estimates = info_gain_greedy(&spec, &grid, inputs.horizon, inputs.sigma)?;
        let gamma_t = gamma_estimates.last().map_or(0.0, |&(_, g)| g);
        Ok(Self {
            inputs,
            members,
            t_threshold_simple,
            cumulative,
            upper_bound_sri: upper_bound_sri(gamma_t, inputs.budget, horizon),
            gamma_estimates,
            exponent_table: exponent_table(&spec),
            calibration: None,
        })
    }

    /// Attaches the calibration of the ensemble at the report's `(ε, B)`.
    pub fn with_calibration(mut self, ens: &NeedleEnsemble) -> Self {
        self.calibration = Some(calibrate(ens));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        assert_eq!(gaussian_kl(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(gaussian_kl(0.0, 0.2, 1.0).unwrap(), 0.02, max_relative = 1e-15);
        assert!(gaussian_kl(0.0, 1.0, 0.0).is_err());
        assert_relative_eq!(auer_gap(0.5, 1.0, 0.02), 0.5 + 0.02f64.sqrt());
        assert_relative_eq!(
            threshold_from_count(16.0, 0.1, 1.0, 1.0),
            400.0,
            max_relative = 1e-14
        );
        assert_eq!(high_prob_conversion(1.0).unwrap(), 0.0);
        assert_relative_eq!(high_prob_conversion(0.5).unwrap(), 0.5 / 3.5);
        assert!(high_prob_conversion(0.0).is_err());
        assert!(high_prob_conversion(1.5).is_err());
        assert_eq!(upper_bound_sri(0.0, 1.0, 100.0), 0.0);
        assert_relative_eq!(upper_bound_sri(1.0, 1.0, 50.0), 10.0);
    }

    #[test]
    fn matern_exponents() {
        let t = exponent_table(&KernelSpec::matern(1.5, 1.0, 1).unwrap());
        let row = t.row(CUMULATIVE).unwrap();
        assert_eq!(row.lower.exponent, Some(0.625));
        assert_eq!(row.conjectured.exponent, Some(0.7));
        let simple = t.row(TIME_TO_SIMPLE).unwrap();
        assert_relative_eq!(simple.lower.exponent.unwrap(), 2.0 + 1.0 / 1.5);
        // 2ν = d(d+1) makes the upper bound vacuous
        let t = exponent_table(&KernelSpec::matern(1.0, 1.0, 1).unwrap());
        assert_eq!(t.row(TIME_TO_SIMPLE).unwrap().upper_sri.exponent, None);
    }

    #[test]
    fn first_greedy_gain_is_the_prior_gain() {
        let spec = KernelSpec::squared_exponential(0.2, 1).unwrap();
        let grid = DecisionGrid::new(1, 64).unwrap();
        let g = info_gain_greedy(&spec, &grid, 10, 0.5).unwrap();
        assert_relative_eq!(g[0].1, 0.5 * (1.0f64 + 4.0).ln(), max_relative = 1e-14);
        for w in g.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }
}
