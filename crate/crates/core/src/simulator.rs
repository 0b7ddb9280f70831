//! Noisy bandit episodes against ensemble members, regret accounting and
//! divergence bookkeeping.
//!
//! Each `(member, seed)` pair owns one ChaCha stream key; stream 0 drives
//! the observation noise and stream 1 the algorithm, so the two never share
//! draws and episodes can run in any order.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algorithms::{
    first_argmax, sqrt_beta_schedule, AlgorithmConfig, AlgorithmKind, GridPosterior, Learner,
};
use crate::bounds::info_gain_greedy;
use crate::ensemble::NeedleEnsemble;
use crate::error::bail;
use crate::grid::DecisionGrid;
use crate::Result;

pub const NOISE_STREAM: u64 = 0;
pub const ALGORITHM_STREAM: u64 = 1;

/// Generator for `(seed, member)` on the given stream.
pub fn episode_rng(seed: u64, member: usize, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(member as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Everything shared by the episodes of one run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub cfg: AlgorithmConfig,
    pub grid: DecisionGrid,
    pub horizon: usize,
    pub sigma: f64,
    /// `β_t^{1/2}` for `t = 1..=horizon`.
    pub sqrt_beta: Vec<f64>,
}

impl RunContext {
    pub fn new(ens: &NeedleEnsemble, cfg: AlgorithmConfig, horizon: usize, sigma: f64) -> Result<Self> {
        cfg.validate()?;
        if horizon == 0 {
            bail!(Parameter, "horizon T must be at least 1");
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            bail!(Parameter, "noise sigma must be positive and finite, got {sigma}");
        }
        let grid = DecisionGrid::new(ens.dim(), cfg.grid_resolution)?;
        let gamma = if cfg.needs_gamma() && horizon > 1 {
            let curve = info_gain_greedy(ens.spec(), &grid, horizon - 1, sigma)?;
            curve.into_iter().map(|(_, g)| g).collect()
        } else {
            Vec::new()
        };
        let sqrt_beta = sqrt_beta_schedule(cfg.beta, horizon, ens.budget(), sigma, &gamma)?;
        Ok(Self {
            cfg,
            grid,
            horizon,
            sigma,
            sqrt_beta,
        })
    }
}

/// Values of member `m` on every grid point.
pub fn member_on_grid(ens: &NeedleEnsemble, m: usize, grid: &DecisionGrid) -> Vec<f64> {
    let mut x = alloc::vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|g| {
            grid.point_into(g, &mut x);
            ens.eval_unchecked(m, &x)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRecord {
    pub m: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Grid indices of the queried points.
    pub selections: Vec<usize>,
    /// Queried points, flattened (`horizon * d`).
    pub points: Vec<f64>,
    pub observations: Vec<f64>,
    pub inst_regret: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub recommendation: usize,
    pub recommendation_point: Vec<f64>,
    pub simple_regret: f64,
    /// `r^{(t)}` of the recommendation after `t` observations, `t = 1..=horizon`.
    pub simple_regret_curve: Vec<f64>,
    /// `N_j` at index `j − 1`.
    pub region_counts: Vec<u64>,
    /// `2ε − max_grid f_m`: how far the grid maximiser misses the peak.
    pub grid_peak_gap: f64,
}

impl RegretRecord {
    pub fn final_cum_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    pub fn point(&self, t: usize, d: usize) -> &[f64] {
        &self.points[t * d..(t + 1) * d]
    }
}

/// One episode of `horizon` noisy queries against member `m` (`0` is the
/// null model, whose regrets are reported as zero).
pub fn run_episode(ens: &NeedleEnsemble, m: usize, ctx: &RunContext, seed: u64) -> Result<RegretRecord> {
    if m > ens.len() {
        bail!(Parameter, "member index {m} out of range 0..={}", ens.len());
    }
    let d = ens.dim();
    let grid = ctx.grid;
    let values = member_on_grid(ens, m, &grid);
    let best = first_argmax(values.iter().copied());
    let top = values[best];
    let regret = |g: usize| if m == 0 { 0.0 } else { top - values[g] };

    let posterior = GridPosterior::new(*ens.spec(), ctx.sigma * ctx.sigma, grid)?;
    let oracle = (ctx.cfg.kind == AlgorithmKind::Oracle).then_some(best);
    let mut learner = Learner::new(
        ctx.cfg.kind,
        posterior,
        ctx.sqrt_beta.clone(),
        episode_rng(seed, m, ALGORITHM_STREAM),
        oracle,
    )?;
    let mut noise = episode_rng(seed, m, NOISE_STREAM);

    let t_max = ctx.horizon;
    let mut rec = RegretRecord {
        m,
        seed,
        horizon: t_max,
        selections: Vec::with_capacity(t_max),
        points: Vec::with_capacity(t_max * d),
        observations: Vec::with_capacity(t_max),
        inst_regret: Vec::with_capacity(t_max),
        cum_regret: Vec::with_capacity(t_max),
        recommendation: 0,
        recommendation_point: Vec::new(),
        simple_regret: 0.0,
        simple_regret_curve: Vec::with_capacity(t_max),
        region_counts: alloc::vec![0; ens.len()],
        grid_peak_gap: if m == 0 { 0.0 } else { 2.0 * ens.epsilon() - top },
    };
    let mut x = alloc::vec![0.0; d];
    let mut total = 0.0;
    for t in 1..=t_max {
        let g = learner.select(t)?;
        grid.point_into(g, &mut x);
        let z: f64 = StandardNormal.sample(&mut noise);
        let y = values[g] + ctx.sigma * z;
        learner.observe(g, y)?;
        let r = regret(g);
        total += r;
        rec.selections.push(g);
        rec.points.extend_from_slice(&x);
        rec.observations.push(y);
        rec.inst_regret.push(r);
        rec.cum_regret.push(total);
        rec.simple_regret_curve.push(regret(learner.recommend()));
        rec.region_counts[ens.region_index(&x) - 1] += 1;
    }
    rec.recommendation = learner.recommend();
    rec.recommendation_point = grid.point(rec.recommendation);
    rec.simple_regret = regret(rec.recommendation);
    Ok(rec)
}

/// Mean and standard error per round, over members `1..=M` and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverage {
    pub episodes: usize,
    pub mean_inst_regret: Vec<f64>,
    pub mean_cum_regret: Vec<f64>,
    pub se_cum_regret: Vec<f64>,
    pub mean_simple_regret_curve: Vec<f64>,
    pub se_simple_regret_curve: Vec<f64>,
    /// At the horizon.
    pub mean_simple_regret: f64,
    pub se_simple_regret: f64,
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Averages the regret records of members `m >= 1`, summing in `(m, seed)`
/// order whatever order the records arrive in.
pub fn average_records(records: &[RegretRecord]) -> Result<EnsembleAverage> {
    let mut sorted: Vec<&RegretRecord> = records.iter().filter(|r| r.m >= 1).collect();
    if sorted.is_empty() {
        bail!(
            Usage,
            "no regret episodes to average (null-model runs are excluded)"
        );
    }
    sorted.sort_by_key(|r| (r.m, r.seed));
    let horizon = sorted[0].horizon;
    if sorted.iter().any(|r| r.horizon != horizon) {
        bail!(Usage, "cannot average episodes with different horizons");
    }
    let mut mean_inst = Vec::with_capacity(horizon);
    let mut mean_cum = Vec::with_capacity(horizon);
    let mut se_cum = Vec::with_capacity(horizon);
    let mut mean_simple_curve = Vec::with_capacity(horizon);
    let mut se_simple_curve = Vec::with_capacity(horizon);
    for t in 0..horizon {
        mean_inst.push(mean_and_se(sorted.iter().map(|r| r.inst_regret[t])).0);
        let (mean, se) = mean_and_se(sorted.iter().map(|r| r.cum_regret[t]));
        mean_cum.push(mean);
        se_cum.push(se);
        let (mean, se) = mean_and_se(sorted.iter().map(|r| r.simple_regret_curve[t]));
        mean_simple_curve.push(mean);
        se_simple_curve.push(se);
    }
    let (mean_simple, se_simple) = mean_and_se(sorted.iter().map(|r| r.simple_regret));
    Ok(EnsembleAverage {
        episodes: sorted.len(),
        mean_inst_regret: mean_inst,
        mean_cum_regret: mean_cum,
        se_cum_regret: se_cum,
        mean_simple_regret_curve: mean_simple_curve,
        se_simple_regret_curve: se_simple_curve,
        mean_simple_regret: mean_simple,
        se_simple_regret: se_simple,
    })
}

/// Episode keys `(m, seed)` of a run, in reduction order.
pub fn episode_keys(members: usize, base_seed: u64, seeds_per_member: usize) -> Vec<(usize, u64)> {
    (1..=members)
        .flat_map(|m| (0..seeds_per_member as u64).map(move |k| (m, base_seed.wrapping_add(k))))
        .collect()
}

/// Runs every `(m, seed)` episode sequentially and averages them.
pub fn run_ensemble_average(
    ens: &NeedleEnsemble,
    ctx: &RunContext,
    seeds_per_member: usize,
) -> Result<(Vec<RegretRecord>, EnsembleAverage)> {
    if seeds_per_member == 0 {
        bail!(Parameter, "seeds_per_member must be at least 1");
    }
    let records = episode_keys(ens.len(), ctx.cfg.seed, seeds_per_member)
        .into_iter()
        .map(|(m, seed)| run_episode(ens, m, ctx, seed))
        .collect::<Result<Vec<_>>>()?;
    let avg = average_records(&records)?;
    Ok((records, avg))
}

/// Ensemble-average simple regret of recommending the grid midpoint with no
/// data at all.
pub fn uninformed_simple_regret(ens: &NeedleEnsemble, grid: &DecisionGrid) -> f64 {
    let mid = grid.midpoint_index();
    let total: f64 = (1..=ens.len())
        .map(|m| {
            let values = member_on_grid(ens, m, grid);
            values[first_argmax(values.iter().copied())] - values[mid]
        })
        .sum();
    total / ens.len() as f64
}

/// `Σ_j N_j D̄_m^j` with `D̄_m^j = max_{R_j} f_m² / (2σ²)`.
pub fn divergence_bound(ens: &NeedleEnsemble, m: usize, region_counts: &[u64], sigma: f64) -> Result<f64> {
    if m == 0 || m > ens.len() {
        bail!(Parameter, "member index {m} out of range 1..={}", ens.len());
    }
    if region_counts.len() != ens.len() {
        bail!(
            Usage,
            "expected {} region counts, got {}",
            ens.len(),
            region_counts.len()
        );
    }
    if !(sigma > 0.0) {
        bail!(Parameter, "sigma must be positive, got {sigma}");
    }
    Ok(region_counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(j, &n)| {
            let v = ens.vbar_abs(m, j + 1);
            n as f64 * v * v / (2.0 * sigma * sigma)
        })
        .sum())
}

/// `D(P₀ ‖ P_m)` for a fixed (non-adaptive) query sequence:
/// `Σ_t f_m(x_t)² / (2σ²)`.
pub fn exact_nonadaptive_kl(ens: &NeedleEnsemble, m: usize, points: &[&[f64]], sigma: f64) -> Result<f64> {
    let mut total = 0.0;
    for x in points {
        let v = ens.eval(m, x)?;
        total += v * v / (2.0 * sigma * sigma);
    }
    Ok(total)
}

/// `N_j` for a fixed query sequence.
pub fn region_histogram(ens: &NeedleEnsemble, points: &[&[f64]]) -> Vec<u64> {
    let mut counts = alloc::vec![0; ens.len()];
    for x in points {
        counts[ens.region_index(x) - 1] += 1;
    }
    counts
}
