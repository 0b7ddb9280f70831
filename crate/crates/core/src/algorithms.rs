//! GP regression and the bandit algorithms run against the ensemble.
//!
//! All algorithms act on a shared [`DecisionGrid`]. The posterior over the
//! grid is cached as `V = L⁻¹ K(X, grid)` and `z = L⁻¹ y`, where `L` is the
//! Cholesky factor of `K(X, X) + σ²I`; then `μ = Vᵀz` and `s² = 1 − ‖V_{·g}‖²`.
//! A new observation at grid point `p` has Cholesky row `V_{·p}`, so one
//! round costs `O(t · |grid|)`.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::bail;
use crate::grid::DecisionGrid;
use crate::kernels::KernelSpec;
use crate::Result;

/// First jitter added when the factorization breaks down; grows tenfold.
pub const JITTER_START: f64 = 1e-10;
const JITTER_STEPS: usize = 12;
/// Cholesky pivots below this are treated as a breakdown: at that size they
/// are dominated by cancellation error in `k(x, x) − ‖v‖²`.
pub const PIVOT_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Exact GP regression with an incrementally grown Cholesky factor.
#[derive(Debug, Clone)]
pub struct GpState {
    spec: KernelSpec,
    noise_var: f64,
    points: Vec<f64>,
    values: Vec<f64>,
    /// Packed lower triangle, row `i` at offset `i(i+1)/2`.
    factor: Vec<f64>,
    /// `L⁻¹ y`.
    whitened: Vec<f64>,
    jitter: f64,
}

/// How [`GpState`] absorbed an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Appended,
    /// The factor was rebuilt with a larger diagonal jitter.
    Refactored,
}

fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl GpState {
    pub fn new(spec: KernelSpec, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            bail!(
                Parameter,
                "noise variance must be positive and finite, got {noise_var}"
            );
        }
        Ok(Self {
            spec,
            noise_var,
            points: Vec::new(),
            values: Vec::new(),
            factor: Vec::new(),
            whitened: Vec::new(),
            jitter: 0.0,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.spec.dim();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Diagonal jitter on top of `σ²` currently in the factor.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.factor[row_offset(i)..row_offset(i + 1)]
    }

    pub fn whitened_values(&self) -> &[f64] {
        &self.whitened
    }

    /// `k(X, x)`.
    pub fn cross_covariance(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.spec.eval(self.point(i), x))
            .collect()
    }

    /// Solves `L v = rhs` in place.
    pub fn solve_lower(&self, rhs: &mut [f64]) {
        for i in 0..rhs.len() {
            let row = self.factor_row(i);
            let s: f64 = row[..i].iter().zip(&rhs[..i]).map(|(a, b)| a * b).sum();
            rhs[i] = (rhs[i] - s) / row[i];
        }
    }

    pub fn add_observation(&mut self, x: &[f64], y: f64) -> Result<Update> {
        if x.len() != self.spec.dim() {
            bail!(
                Domain,
                "point has {} coordinates, expected {}",
                x.len(),
                self.spec.dim()
            );
        }
        let mut v = self.cross_covariance(x);
        self.solve_lower(&mut v);
        self.push_with_row(x, y, v)
    }

    /// Appends an observation whose whitened cross-covariance `L⁻¹ k(X, x)`
    /// is already known.
    fn push_with_row(&mut self, x: &[f64], y: f64, mut v: Vec<f64>) -> Result<Update> {
        debug_assert_eq!(v.len(), self.len());
        let diag_sq = 1.0 + self.noise_var + self.jitter - v.iter().map(|a| a * a).sum::<f64>();
        self.points.extend_from_slice(x);
        self.values.push(y);
        if diag_sq > PIVOT_FLOOR && diag_sq.is_finite() {
            let diag = diag_sq.sqrt();
            let zn = (y - v.iter().zip(&self.whitened).map(|(a, b)| a * b).sum::<f64>()) / diag;
            v.push(diag);
            self.factor.extend_from_slice(&v);
            self.whitened.push(zn);
            return Ok(Update::Appended);
        }
        self.refactor()?;
        Ok(Update::Refactored)
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.len();
        let mut jitter = self.jitter;
        for _ in 0..=JITTER_STEPS {
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * 10.0
            };
            if let Some(factor) = self.cholesky(jitter) {
                self.factor = factor;
                self.jitter = jitter;
                let mut z = self.values.clone();
                self.solve_lower(&mut z);
                self.whitened = z;
                return Ok(());
            }
        }
        bail!(
            Numeric,
            "kernel matrix of {n} observations is numerically singular even with jitter {jitter:e}"
        )
    }

    fn cholesky(&self, jitter: f64) -> Option<Vec<f64>> {
        let n = self.len();
        let mut l = alloc::vec![0.0; row_offset(n)];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.spec.eval(self.point(i), self.point(j));
                if i == j {
                    s += self.noise_var + jitter;
                }
                let (ri, rj) = (row_offset(i), row_offset(j));
                for k in 0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if !(s > PIVOT_FLOOR) {
                        return None;
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Some(l)
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let mut v = self.cross_covariance(x);
        self.solve_lower(&mut v);
        let mean = v.iter().zip(&self.whitened).map(|(a, b)| a * b).sum();
        let var = 1.0 - v.iter().map(|a| a * a).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }

    /// `L Lᵀ`, for checking the factor against `K + (σ² + jitter) I`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = i.min(j) + 1;
                        let (a, b) = (self.factor_row(i), self.factor_row(j));
                        (0..k).map(|t| a[t] * b[t]).sum()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Posterior mean and standard deviation of `state` at `x`.
pub fn gp_posterior(state: &GpState, x: &[f64]) -> (f64, f64) {
    state.posterior(x)
}

/// GP posterior maintained on every point of a decision grid.
///
/// Only `V` and `z` are stored, so memory is `O(t · |grid|)`; the Cholesky
/// factor itself is rebuilt only if jitter becomes necessary.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    spec: KernelSpec,
    noise_var: f64,
    grid: DecisionGrid,
    points: Vec<f64>,
    observed: Vec<usize>,
    values: Vec<f64>,
    /// Row `i` is `(L⁻¹ K(X, grid))_i`.
    rows: Vec<Vec<f64>>,
    whitened: Vec<f64>,
    jitter: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl GridPosterior {
    pub fn new(spec: KernelSpec, noise_var: f64, grid: DecisionGrid) -> Result<Self> {
        if grid.dim() != spec.dim() {
            bail!(
                Parameter,
                "grid dimension {} does not match kernel dimension {}",
                grid.dim(),
                spec.dim()
            );
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            bail!(
                Parameter,
                "noise variance must be positive and finite, got {noise_var}"
            );
        }
        let n = grid.len();
        Ok(Self {
            spec,
            noise_var,
            points: grid.flat_points(),
            grid,
            observed: Vec::new(),
            values: Vec::new(),
            rows: Vec::new(),
            whitened: Vec::new(),
            jitter: 0.0,
            mean: alloc::vec![0.0; n],
            var: alloc::vec![1.0; n],
        })
    }

    pub fn grid(&self) -> &DecisionGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid indices observed so far, in order.
    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn point(&self, g: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.points[g * d..(g + 1) * d]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    pub fn stddev(&self, g: usize) -> f64 {
        self.var[g].max(0.0).sqrt()
    }

    /// Conditions on `y` observed at grid point `g`.
    pub fn observe(&mut self, g: usize, y: f64) -> Result<()> {
        let diag_sq = self.var[g] + self.noise_var + self.jitter;
        self.observed.push(g);
        self.values.push(y);
        if !(diag_sq > PIVOT_FLOOR && diag_sq.is_finite()) {
            return self.refactor();
        }
        let diag = diag_sq.sqrt();
        let v: Vec<f64> = self.rows.iter().map(|r| r[g]).collect();
        let zn = (y - v.iter().zip(&self.whitened).map(|(a, b)| a * b).sum::<f64>()) / diag;
        let x = self.point(g);
        let mut fresh: Vec<f64> = (0..self.grid.len())
            .map(|h| self.spec.eval(x, &self.points[h * x.len()..(h + 1) * x.len()]))
            .collect();
        for (vi, r) in v.iter().zip(&self.rows) {
            for (f, &rv) in fresh.iter_mut().zip(r) {
                *f -= vi * rv;
            }
        }
        for ((f, m), s) in fresh.iter_mut().zip(&mut self.mean).zip(&mut self.var) {
            *f /= diag;
            *m += *f * zn;
            *s -= *f * *f;
        }
        self.rows.push(fresh);
        self.whitened.push(zn);
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        let mut state = GpState::new(self.spec, self.noise_var)?;
        for &g in &self.observed {
            state.points.extend_from_slice(self.point(g));
        }
        state.values = self.values.clone();
        state.jitter = self.jitter;
        state.refactor()?;
        let n = state.len();
        let mut rows = alloc::vec![alloc::vec![0.0; self.grid.len()]; n];
        let mut col = alloc::vec![0.0; n];
        for g in 0..self.grid.len() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.spec.eval(state.point(i), self.point(g));
            }
            state.solve_lower(&mut col);
            for (r, &c) in rows.iter_mut().zip(&col) {
                r[g] = c;
            }
        }
        for g in 0..self.grid.len() {
            self.mean[g] = rows.iter().zip(&state.whitened).map(|(r, z)| r[g] * z).sum();
            self.var[g] = 1.0 - rows.iter().map(|r| r[g] * r[g]).sum::<f64>();
        }
        self.rows = rows;
        self.whitened = state.whitened;
        self.jitter = state.jitter;
        Ok(())
    }
}

/// Argmax with ties to the smallest index.
pub fn first_argmax<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut at = 0;
    for (i, v) in values.into_iter().enumerate() {
        if v > best {
            best = v;
            at = i;
        }
    }
    at
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    GpUcb,
    Uniform,
    Elimination,
    /// Always queries the true maximiser; a regret-accounting reference.
    Oracle,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::GpUcb => "gp_ucb",
            AlgorithmKind::Uniform => "uniform",
            AlgorithmKind::Elimination => "elimination",
            AlgorithmKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    /// `β_t^{1/2} = c`.
    Constant(f64),
    /// `β_t^{1/2} = B + σ √(2(γ̂_{t−1} + 1 + ln(1/δ)))`.
    TheoreticalRkhs,
}

/// Confidence level of the theoretical β schedule.
pub const BETA_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub beta: BetaSchedule,
    pub grid_resolution: usize,
    pub seed: u64,
}

impl AlgorithmConfig {
    pub fn new(kind: AlgorithmKind, beta: BetaSchedule, grid_resolution: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            kind,
            beta,
            grid_resolution,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution < 2 {
            bail!(
                Parameter,
                "grid_resolution must be at least 2, got {}",
                self.grid_resolution
            );
        }
        if let BetaSchedule::Constant(c) = self.beta {
            if !(c > 0.0 && c.is_finite()) {
                bail!(Parameter, "constant beta must be positive, got {c}");
            }
        }
        Ok(())
    }

    /// Whether the β schedule needs an information-gain curve.
    pub fn needs_gamma(&self) -> bool {
        matches!(self.kind, AlgorithmKind::GpUcb | AlgorithmKind::Elimination)
            && self.beta == BetaSchedule::TheoreticalRkhs
    }
}

/// `β_t^{1/2}` for rounds `t = 1..=horizon`. `gamma[k]` is `γ̂_{k+1}`; the
/// theoretical schedule needs `horizon − 1` entries.
pub fn sqrt_beta_schedule(
    beta: BetaSchedule,
    horizon: usize,
    budget: f64,
    sigma: f64,
    gamma: &[f64],
) -> Result<Vec<f64>> {
    match beta {
        BetaSchedule::Constant(c) => Ok(alloc::vec![c; horizon]),
        BetaSchedule::TheoreticalRkhs => {
            if gamma.len() + 1 < horizon {
                bail!(
                    Usage,
                    "need {} information-gain values, got {}",
                    horizon.saturating_sub(1),
                    gamma.len()
                );
            }
            let log_term = 1.0 + (1.0 / BETA_DELTA).ln();
            Ok((0..horizon)
                .map(|t| {
                    let g = if t == 0 { 0.0 } else { gamma[t - 1] };
                    budget + sigma * (2.0 * (g + log_term)).sqrt()
                })
                .collect())
        }
    }
}

/// An algorithm instance for one episode.
#[derive(Debug, Clone)]
pub struct Learner {
    kind: AlgorithmKind,
    posterior: GridPosterior,
    sqrt_beta: Vec<f64>,
    rng: ChaCha8Rng,
    survivors: Vec<bool>,
    oracle_index: Option<usize>,
}

impl Learner {
    /// `sqrt_beta[t − 1]` is used in round `t`. `oracle_index` is the grid
    /// maximiser and is only read by [`AlgorithmKind::Oracle`].
    pub fn new(
        kind: AlgorithmKind,
        posterior: GridPosterior,
        sqrt_beta: Vec<f64>,
        rng: ChaCha8Rng,
        oracle_index: Option<usize>,
    ) -> Result<Self> {
        if kind == AlgorithmKind::Oracle && oracle_index.is_none() {
            bail!(Usage, "the oracle algorithm needs the true maximiser");
        }
        let n = posterior.grid().len();
        Ok(Self {
            kind,
            posterior,
            sqrt_beta,
            rng,
            survivors: alloc::vec![true; n],
            oracle_index,
        })
    }

    pub fn posterior(&self) -> &GridPosterior {
        &self.posterior
    }

    pub fn survivors(&self) -> &[bool] {
        &self.survivors
    }

    fn sqrt_beta_at(&self, t: usize) -> f64 {
        let i = (t - 1).min(self.sqrt_beta.len().saturating_sub(1));
        self.sqrt_beta.get(i).copied().unwrap_or(0.0)
    }

    /// Grid index queried in round `t >= 1`.
    pub fn select(&mut self, t: usize) -> Result<usize> {
        if t == 0 {
            bail!(Usage, "rounds are numbered from 1");
        }
        let n = self.posterior.grid().len();
        let root_beta = self.sqrt_beta_at(t);
        let p = &self.posterior;
        let ucb = |g: usize| p.means()[g] + root_beta * p.stddev(g);
        Ok(match self.kind {
            AlgorithmKind::Oracle => self.oracle_index.unwrap_or(0),
            AlgorithmKind::Uniform => self.rng.random_range(0..n),
            AlgorithmKind::GpUcb => first_argmax((0..n).map(ucb)),
            AlgorithmKind::Elimination => {
                let best_lcb = (0..n)
                    .map(|g| p.means()[g] - root_beta * p.stddev(g))
                    .fold(f64::NEG_INFINITY, f64::max);
                for g in 0..n {
                    if self.survivors[g] && ucb(g) < best_lcb {
                        self.survivors[g] = false;
                    }
                }
                let alive = self.survivors.iter().filter(|&&s| s).count();
                if alive == 0 {
                    first_argmax((0..n).map(ucb))
                } else {
                    let pick = self.rng.random_range(0..alive);
                    self.survivors
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s)
                        .nth(pick)
                        .map(|(g, _)| g)
                        .unwrap_or(0)
                }
            }
        })
    }

    pub fn observe(&mut self, g: usize, y: f64) -> Result<()> {
        self.posterior.observe(g, y)
    }

    pub fn recommend(&self) -> usize {
        recommend(&self.posterior)
    }
}

/// Grid argmax of the posterior mean; the grid midpoint before any data.
pub fn recommend(posterior: &GridPosterior) -> usize {
    if posterior.is_empty() {
        return posterior.grid().midpoint_index();
    }
    first_argmax(posterior.means().iter().copied())
}
