mod common;

use needlebound_core::algorithms::{gp_posterior, recommend, AlgorithmKind, GpState, GridPosterior, Learner};
use needlebound_core::ensemble::NeedleEnsemble;
use needlebound_core::grid::DecisionGrid;
use needlebound_core::kernels::KernelSpec;
use needlebound_core::simulator::member_on_grid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Posterior mean and variance at `x` by a dense solve of `(K + σ²I)`.
fn oracle_posterior(spec: &KernelSpec, xs: &[Vec<f64>], ys: &[f64], noise: f64, x: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| spec.eval(&xs[i], &xs[j])).collect())
        .collect();
    for (i, row) in k.iter_mut().enumerate() {
        row[i] += noise;
    }
    let kx: Vec<f64> = xs.iter().map(|p| spec.eval(p, x)).collect();
    let alpha = common::solve(k.clone(), ys.to_vec());
    let v = common::solve(k, kx.clone());
    let mean = kx.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let var = 1.0 - kx.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    (mean, var)
}

#[test]
fn incremental_updates_match_batch_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for spec in [
        KernelSpec::squared_exponential(0.3, 2).unwrap(),
        KernelSpec::matern(1.5, 0.4, 2).unwrap(),
    ] {
        let noise = 0.01;
        let mut state = GpState::new(spec, noise).unwrap();
        let mut xs = vec![];
        let mut ys = vec![];
        for _ in 0..50 {
            let x = vec![rng.random::<f64>(), rng.random::<f64>()];
            let y: f64 = rng.sample(StandardNormal);
            state.add_observation(&x, y).unwrap();
            xs.push(x);
            ys.push(y);
        }
        for _ in 0..20 {
            let q = [rng.random::<f64>(), rng.random::<f64>()];
            let (mean, sd) = gp_posterior(&state, &q);
            let (om, ov) = oracle_posterior(&spec, &xs, &ys, noise, &q);
            assert!((mean - om).abs() < 1e-8, "{mean} vs {om}");
            assert!((sd * sd - ov).abs() < 1e-8);
        }
    }
}

#[test]
fn empty_and_single_observation_posteriors() {
    let spec = KernelSpec::squared_exponential(0.5, 1).unwrap();
    let mut state = GpState::new(spec, 1.0).unwrap();
    assert_eq!(gp_posterior(&state, &[0.3]), (0.0, 1.0));
    state.add_observation(&[0.3], 2.0).unwrap();
    let (mean, sd) = gp_posterior(&state, &[0.3]);
    assert!((mean - 1.0).abs() < 1e-14 && (sd * sd - 0.5).abs() < 1e-14);
}

#[test]
fn ucb_selection_is_the_explicit_argmax() {
    let spec = KernelSpec::squared_exponential(0.15, 1).unwrap();
    let grid = DecisionGrid::new(1, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let beta = vec![2.0; 40];
    let mut learner = Learner::new(
        AlgorithmKind::GpUcb,
        GridPosterior::new(spec, 0.04, grid).unwrap(),
        beta,
        rng.clone(),
        None,
    )
    .unwrap();
    for t in 1..=40 {
        let g = learner.select(t).unwrap();
        let p = learner.posterior();
        let ucb: Vec<f64> = (0..grid.len())
            .map(|i| p.means()[i] + 2.0 * p.variances()[i].max(0.0).sqrt())
            .collect();
        let best = ucb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(ucb[g] >= best - 1e-12);
        assert!(
            ucb[..g].iter().all(|&u| u < ucb[g]),
            "ties must go to the first index"
        );
        let y = (6.0 * grid.coordinate(g)).sin() + 0.2 * rng.sample::<f64, _>(StandardNormal);
        learner.observe(g, y).unwrap();
    }
}

#[test]
fn exploration_moves_away_from_a_known_point() {
    let spec = KernelSpec::squared_exponential(0.1, 1).unwrap();
    let grid = DecisionGrid::new(1, 32).unwrap();
    let mut post = GridPosterior::new(spec, 1e-8, grid).unwrap();
    post.observe(10, 1.0).unwrap();
    let beta = 50.0;
    let ucb: Vec<f64> = (0..grid.len())
        .map(|i| post.means()[i] + beta * post.stddev(i))
        .collect();
    let oracle = (0..grid.len())
        .max_by(|&a, &b| ucb[a].total_cmp(&ucb[b]).then(b.cmp(&a)))
        .unwrap();
    let mut learner = Learner::new(
        AlgorithmKind::GpUcb,
        post,
        vec![beta; 2],
        ChaCha8Rng::seed_from_u64(0),
        None,
    )
    .unwrap();
    let g = learner.select(2).unwrap();
    assert_ne!(g, 10);
    assert_eq!(g, oracle);
}

#[test]
fn recommendation_rules() {
    let spec = KernelSpec::squared_exponential(0.2, 2).unwrap();
    let grid = DecisionGrid::new(2, 9).unwrap();
    let mut post = GridPosterior::new(spec, 1e-10, grid).unwrap();
    assert_eq!(recommend(&post), grid.midpoint_index());
    assert_eq!(grid.point(grid.midpoint_index()), vec![0.5, 0.5]);
    post.observe(20, 3.0).unwrap();
    post.observe(70, 0.1).unwrap();
    assert_eq!(recommend(&post), 20);
    let before = post.means().to_vec();
    post.observe(20, 3.0).unwrap();
    assert_eq!(recommend(&post), 20);
    assert!(before.iter().zip(post.means()).all(|(a, b)| (a - b).abs() < 1e-8));
}

#[test]
fn uniform_selection_is_seeded() {
    let spec = KernelSpec::squared_exponential(0.2, 1).unwrap();
    let grid = DecisionGrid::new(1, 100).unwrap();
    let run = |seed| {
        let mut l = Learner::new(
            AlgorithmKind::Uniform,
            GridPosterior::new(spec, 0.01, grid).unwrap(),
            vec![],
            ChaCha8Rng::seed_from_u64(seed),
            None,
        )
        .unwrap();
        (1..=30).map(|t| l.select(t).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn elimination_keeps_the_maximiser() {
    let spec = KernelSpec::squared_exponential(0.2, 1).unwrap();
    let ens = NeedleEnsemble::build(spec, 0.1, 1.0, common::profile(1)).unwrap();
    let grid = DecisionGrid::new(1, 64).unwrap();
    let values = member_on_grid(&ens, 1, &grid);
    let best = (0..grid.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .unwrap();
    let sigma = 1e-4;
    let beta = ens.budget() + sigma * (2.0 * (3.0 + 10f64.ln())).sqrt();
    let mut eliminated_any = false;
    for seed in 0..20 {
        let mut noise = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut l = Learner::new(
            AlgorithmKind::Elimination,
            GridPosterior::new(spec, sigma * sigma, grid).unwrap(),
            vec![beta; 60],
            ChaCha8Rng::seed_from_u64(seed),
            None,
        )
        .unwrap();
        for t in 1..=60 {
            let g = l.select(t).unwrap();
            l.observe(g, values[g] + sigma * noise.sample::<f64, _>(StandardNormal))
                .unwrap();
        }
        assert!(l.survivors()[best], "seed {seed} eliminated the maximiser");
        eliminated_any |= l.survivors().iter().any(|&s| !s);
    }
    assert!(eliminated_any);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_variance_never_exceeds_prior(
        obs in prop::collection::vec((0.0f64..1.0, -2.0f64..2.0), 1..15),
        queries in prop::collection::vec(0.0f64..1.0, 100),
        noise in 1e-6f64..1.0,
    ) {
        let spec = KernelSpec::matern(2.5, 0.2, 1).unwrap();
        let mut state = GpState::new(spec, noise).unwrap();
        for &(x, y) in &obs {
            state.add_observation(&[x], y).unwrap();
        }
        for q in queries {
            let (_, sd) = gp_posterior(&state, &[q]);
            prop_assert!(sd >= 0.0 && sd <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn grid_cache_agrees_with_direct_posterior(
        obs in prop::collection::vec((0usize..40, -2.0f64..2.0), 1..25),
        noise in 1e-4f64..0.5,
    ) {
        let spec = KernelSpec::squared_exponential(0.1, 1).unwrap();
        let grid = DecisionGrid::new(1, 40).unwrap();
        let mut post = GridPosterior::new(spec, noise, grid).unwrap();
        let mut state = GpState::new(spec, noise).unwrap();
        for &(g, y) in &obs {
            post.observe(g, y).unwrap();
            state.add_observation(&grid.point(g), y).unwrap();
        }
        for g in 0..grid.len() {
            let (m, sd) = gp_posterior(&state, &grid.point(g));
            prop_assert!((post.means()[g] - m).abs() < 1e-8);
            prop_assert!((post.variances()[g] - sd * sd).abs() < 1e-8);
        }
    }
}
