//! The needle-in-a-haystack function class.
//!
//! Every member is the same radial needle `g(x) = a₀ h(‖x‖/w₀)` with
//! `a₀ = 2ε/h(0)`, shifted to the centre of its own grid cell and cropped to
//! `[0, 1]^d`. The inner width `w₀` is the largest width for which the
//! spectral norm chain still certifies `‖g‖_k ≤ B`.
//!
//! `g ≥ ε` exactly on the ball of radius `ζ w₀` around the peak, so the grid
//! step is `w = 2ζw₀`: neighbouring ε-superlevel sets then cannot meet, and a
//! point can be ε-optimal for at most one member.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::bail;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::special::{ball_volume, gamma};
use crate::spectral::BumpProfile;
use crate::Result;

/// How `w₀` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthSource {
    /// From the closed form that equates the norm chain with `B²`.
    Formula,
    /// Supplied by the caller (used for ablations and tamper checks).
    Override,
}

/// Conditions the norm chain relies on, evaluated at the ensemble's `w₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideConditions {
    /// `w₀^{2d} V(1/w₀)` (SE); the final chain step needs this `<= 1`.
    pub se_volume_factor: Option<f64>,
    /// `2ν w₀² / l²` (Matérn); the final chain step needs this `<= 4π²`.
    pub matern_width_ratio: Option<f64>,
    /// `floor(1/w) >= 1`, i.e. at least one full cell fits per axis.
    pub cells_fit: bool,
}

impl SideConditions {
    /// Whether the closing inequality of the norm chain is valid.
    pub fn chain_closes(&self) -> bool {
        self.se_volume_factor.is_none_or(|v| v <= 1.0)
            && self.matern_width_ratio.is_none_or(|v| v <= 4.0 * PI * PI)
    }
}

#[derive(Debug, Clone)]
pub struct NeedleEnsemble {
    spec: KernelSpec,
    epsilon: f64,
    budget: f64,
    profile: Arc<BumpProfile>,
    w0: f64,
    step: f64,
    cells_per_axis: usize,
    cell_width: f64,
    amplitude: f64,
    centers: Vec<f64>,
    width_source: WidthSource,
    side: SideConditions,
}

/// Matérn constant `c₂ = c₁^{-1} π^{d/2} / Γ(d/2 + 1)`: with it,
/// `c₁^{-1} w₀^{2d} V(1/w₀) = c₂ w₀^d` holds exactly.
pub fn matern_c2(spec: &KernelSpec) -> f64 {
    let half = spec.dim() as f64 / 2.0;
    PI.powf(half) / (gamma(half + 1.0) * spec.matern_c1())
}

/// Inner width `w₀` from the closed forms, or a construction error naming
/// the violated side condition.
pub fn inner_width(spec: &KernelSpec, epsilon: f64, budget: f64, h0: f64) -> Result<f64> {
    check_scalars(epsilon, budget)?;
    let d = spec.dim() as f64;
    let l = spec.lengthscale();
    match spec.family() {
        KernelFamily::SquaredExponential => {
            let arg = budget * (2.0 * PI * l * l).powf(d / 4.0) * h0 / (2.0 * epsilon);
            if arg <= 1.0 {
                bail!(
                    Construction,
                    "epsilon/B too large: side condition B(2πl²)^(d/4) h(0) / (2ε) > 1 violated \
                     (value {arg})"
                );
            }
            Ok(PI * l / arg.ln().sqrt())
        }
        KernelFamily::Matern => {
            let nu = spec.nu();
            let c2 = matern_c2(spec);
            let base =
                2.0 * epsilon * (8.0 * PI * PI).powf(0.5 * (nu + d / 2.0)) / (budget * c2.powf(-0.5) * h0);
            let w0 = base.powf(1.0 / nu);
            let ratio = 2.0 * nu * w0 * w0 / (l * l);
            if ratio > 4.0 * PI * PI {
                bail!(
                    Construction,
                    "epsilon/B too large: side condition 2ν w0²/l² <= 4π² violated \
                     (w0 = {w0}, ratio {ratio})"
                );
            }
            Ok(w0)
        }
    }
}

/// Cells per axis for grid step `w`: `floor(1/w)`.
pub fn cells_per_axis(step: f64) -> usize {
    let n = (1.0 / step).floor();
    if n.is_finite() && n >= 0.0 {
        n as usize
    } else {
        0
    }
}

/// Member count for grid step `w` in `d` dimensions, `floor(1/w)^d`.
pub fn grid_cells(step: f64, d: usize) -> usize {
    cells_per_axis(step).saturating_pow(d as u32)
}

/// Grid step `w = 2ζw₀`.
pub fn grid_step(w0: f64, zeta: f64) -> f64 {
    2.0 * zeta * w0
}

/// Member count `M` for `(ε, B)` without building the centres. Never less
/// than one: when not even one cell fits, the single needle sits at the
/// centre of the cube.
pub fn member_count(spec: &KernelSpec, epsilon: f64, budget: f64, profile: &BumpProfile) -> Result<usize> {
    let w0 = inner_width(spec, epsilon, budget, profile.h0())?;
    Ok(grid_cells(grid_step(w0, profile.zeta()), spec.dim()).max(1))
}

/// `(1/w)^d` before flooring; used where a continuous count is needed.
pub fn member_count_continuous(
    spec: &KernelSpec,
    epsilon: f64,
    budget: f64,
    profile: &BumpProfile,
) -> Result<f64> {
    let w0 = inner_width(spec, epsilon, budget, profile.h0())?;
    Ok((1.0 / grid_step(w0, profile.zeta())).powi(spec.dim() as i32))
}

fn check_scalars(epsilon: f64, budget: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        bail!(Parameter, "epsilon must be positive and finite, got {epsilon}");
    }
    if !(budget > 0.0 && budget.is_finite()) {
        bail!(
            Parameter,
            "RKHS budget B must be positive and finite, got {budget}"
        );
    }
    Ok(())
}

impl NeedleEnsemble {
    pub fn build(spec: KernelSpec, epsilon: f64, budget: f64, profile: Arc<BumpProfile>) -> Result<Self> {
        check_profile(&spec, &profile)?;
        let w0 = inner_width(&spec, epsilon, budget, profile.h0())?;
        Self::assemble(spec, epsilon, budget, profile, w0, WidthSource::Formula)
    }

    /// Builds with a caller-chosen `w₀` instead of the closed form.
    pub fn with_inner_width(
        spec: KernelSpec,
        epsilon: f64,
        budget: f64,
        profile: Arc<BumpProfile>,
        w0: f64,
    ) -> Result<Self> {
        check_profile(&spec, &profile)?;
        check_scalars(epsilon, budget)?;
        if !(w0 > 0.0 && w0.is_finite()) {
            bail!(Parameter, "w0 must be positive and finite, got {w0}");
        }
        Self::assemble(spec, epsilon, budget, profile, w0, WidthSource::Override)
    }

    fn assemble(
        spec: KernelSpec,
        epsilon: f64,
        budget: f64,
        profile: Arc<BumpProfile>,
        w0: f64,
        width_source: WidthSource,
    ) -> Result<Self> {
        let d = spec.dim();
        let step = grid_step(w0, profile.zeta());
        let fitted = cells_per_axis(step);
        let cells = fitted.max(1);
        if cells.checked_pow(d as u32).is_none_or(|m| m > 1 << 24) {
            bail!(Construction, "ensemble too large: {cells}^{d} members");
        }
        let cell_width = if fitted >= 1 { step } else { 1.0 };
        let count = cells.pow(d as u32);
        let mut centers = Vec::with_capacity(count * d);
        for j in 0..count {
            let mut rest = j;
            let start = centers.len();
            centers.resize(start + d, 0.0);
            for axis in (0..d).rev() {
                centers[start + axis] = ((rest % cells) as f64 + 0.5) * cell_width;
                rest /= cells;
            }
        }
        let l = spec.lengthscale();
        let side = SideConditions {
            se_volume_factor: (spec.family() == KernelFamily::SquaredExponential)
                .then(|| w0.powi(2 * d as i32) * ball_volume(d, 1.0 / w0)),
            matern_width_ratio: (spec.family() == KernelFamily::Matern)
                .then(|| 2.0 * spec.nu() * w0 * w0 / (l * l)),
            cells_fit: fitted >= 1,
        };
        Ok(Self {
            spec,
            epsilon,
            budget,
            amplitude: 2.0 * epsilon / profile.h0(),
            profile,
            w0,
            step,
            cells_per_axis: cells,
            cell_width,
            centers,
            width_source,
            side,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    pub fn shared_profile(&self) -> Arc<BumpProfile> {
        Arc::clone(&self.profile)
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    /// Grid step `w = 2ζw₀`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Edge length of a region; equals `step()` unless no full cell fits.
    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Number of members `M` (excluding the zero member).
    pub fn len(&self) -> usize {
        self.centers.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `a₀ = 2ε / h(0)`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width_source(&self) -> WidthSource {
        self.width_source
    }

    pub fn side_conditions(&self) -> SideConditions {
        self.side
    }

    /// Peak location of member `m` in `1..=M`.
    pub fn center(&self, m: usize) -> &[f64] {
        assert!(
            m >= 1 && m <= self.len(),
            "member index {m} out of range 1..={}",
            self.len()
        );
        let d = self.dim();
        &self.centers[(m - 1) * d..m * d]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks(self.dim())
    }

    /// The uncropped needle `g` at offset `x` from its peak.
    pub fn needle_at_offset(&self, offset: &[f64]) -> f64 {
        self.needle_at_radius(crate::kernels::norm(offset))
    }

    fn needle_at_radius(&self, r: f64) -> f64 {
        self.amplitude * self.profile.value_at(r / self.w0)
    }

    /// `f_m(x)`; member `0` is identically zero.
    pub fn eval(&self, m: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_member(m)?;
        Ok(self.eval_unchecked(m, x))
    }

    pub(crate) fn eval_unchecked(&self, m: usize, x: &[f64]) -> f64 {
        if m == 0 {
            return 0.0;
        }
        self.needle_at_radius(crate::kernels::distance(x, self.center(m)))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            bail!(
                Domain,
                "point has {} coordinates, expected {}",
                x.len(),
                self.dim()
            );
        }
        if x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            bail!(Domain, "point {x:?} lies outside [0, 1]^{}", self.dim());
        }
        Ok(())
    }

    fn check_member(&self, m: usize) -> Result<()> {
        if m > self.len() {
            bail!(Parameter, "member index {m} out of range 0..={}", self.len());
        }
        Ok(())
    }

    fn axis_cell(&self, coord: f64) -> usize {
        // cells are (i w, (i+1) w]; ties go to the lower cell
        let i = (coord / self.cell_width).ceil() - 1.0;
        (i.max(0.0) as usize).min(self.cells_per_axis - 1)
    }

    /// Region `j` in `1..=M` containing `x`. Boundary points go to the
    /// lexicographically smaller cell; points in the uncovered margin go to
    /// the nearest cell.
    pub fn region_index(&self, x: &[f64]) -> usize {
        let n = self.cells_per_axis;
        x.iter().fold(0, |acc, &c| acc * n + self.axis_cell(c)) + 1
    }

    /// Closed box of region `j`, margin included: `(lower, upper)` per axis.
    pub fn region_box(&self, j: usize) -> Vec<(f64, f64)> {
        assert!(j >= 1 && j <= self.len());
        let n = self.cells_per_axis;
        let mut rest = j - 1;
        let mut out = alloc::vec![(0.0, 0.0); self.dim()];
        for axis in (0..self.dim()).rev() {
            let i = rest % n;
            rest /= n;
            let lo = i as f64 * self.cell_width;
            let hi = if i + 1 == n {
                1.0
            } else {
                (i + 1) as f64 * self.cell_width
            };
            out[axis] = (lo, hi);
        }
        out
    }

    /// Nearest and farthest distance from the peak of member `m` to region `j`.
    fn radial_span(&self, m: usize, j: usize) -> (f64, f64) {
        let c = self.center(m);
        let mut near = 0.0;
        let mut far = 0.0;
        for (&ci, (lo, hi)) in c.iter().zip(self.region_box(j)) {
            let gap = if ci < lo {
                lo - ci
            } else if ci > hi {
                ci - hi
            } else {
                0.0
            };
            let reach = (ci - lo).abs().max((hi - ci).abs());
            near += gap * gap;
            far += reach * reach;
        }
        (near.sqrt(), far.sqrt())
    }

    /// Range `(min, max)` of `f_m` over region `j`.
    ///
    /// `f_m` depends on `x` only through `‖x − c_m‖`, and that distance sweeps
    /// a full interval over the (connected) box, so the extremes over the
    /// region are the extremes of the radial profile over that interval.
    pub fn region_range(&self, m: usize, j: usize) -> (f64, f64) {
        if m == 0 {
            return (0.0, 0.0);
        }
        let (near, far) = self.radial_span(m, j);
        let (lo, hi) = self.profile.range_on(near / self.w0, far / self.w0);
        (self.amplitude * lo, self.amplitude * hi)
    }

    /// `v̄_m^j = max_{x ∈ R_j} f_m(x)`.
    pub fn vbar(&self, m: usize, j: usize) -> f64 {
        self.region_range(m, j).1
    }

    /// `max_{x ∈ R_j} |f_m(x)|`, the quantity that bounds the per-sample
    /// Gaussian divergence inside region `j`.
    pub fn vbar_abs(&self, m: usize, j: usize) -> f64 {
        let (lo, hi) = self.region_range(m, j);
        lo.abs().max(hi.abs())
    }

    /// `M × M` table, row `m − 1`, column `j − 1`.
    pub fn vbar_table(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (1..=n)
            .map(|m| (1..=n).map(|j| self.vbar(m, j)).collect())
            .collect()
    }

    /// The three sums of the region-maximum lemma, normalised by `ε` (first
    /// two) and `ε²` (third), computed over the positive parts `max(v̄, 0)`.
    pub fn vbar_sums(&self) -> VbarSums {
        let table = self.vbar_table();
        let n = self.len();
        let eps = self.epsilon;
        let pos = |v: f64| v.max(0.0);
        let row = table
            .iter()
            .map(|r| r.iter().copied().map(pos).sum::<f64>())
            .fold(0.0, f64::max);
        let mut col: f64 = 0.0;
        let mut col_sq: f64 = 0.0;
        for j in 0..n {
            let s: f64 = (0..n).map(|m| pos(table[m][j])).sum();
            let s2: f64 = (0..n).map(|m| pos(table[m][j]).powi(2)).sum();
            col = col.max(s);
            col_sq = col_sq.max(s2);
        }
        VbarSums {
            max_over_members: row / eps,
            max_over_regions: col / eps,
            max_over_regions_squared: col_sq / (eps * eps),
        }
    }
}

fn check_profile(spec: &KernelSpec, profile: &BumpProfile) -> Result<()> {
    if spec.dim() != profile.dim() {
        bail!(
            Parameter,
            "profile dimension {} does not match kernel dimension {}",
            profile.dim(),
            spec.dim()
        );
    }
    Ok(())
}

/// Normalised maxima of the region-maximum sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbarSums {
    /// `max_m Σ_j v̄_m^j / ε`.
    pub max_over_members: f64,
    /// `max_j Σ_m v̄_m^j / ε`.
    pub max_over_regions: f64,
    /// `max_j Σ_m (v̄_m^j)² / ε²`.
    pub max_over_regions_squared: f64,
}
