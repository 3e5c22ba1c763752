use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use approx::assert_relative_eq;
use rand::Rng;
use wildfire_core::aircraft::{Action, AircraftState};
use wildfire_core::dqn::{ReplayBuffer, Transition};
use wildfire_core::fire_sim::{Cell, FireGrid, SeedPattern};
use wildfire_core::harness::{mean_stderr, run_episode_with, run_suite, Policy};
use wildfire_core::neuralnet::{QNetwork, Tensor};
use wildfire_core::receding_horizon::{optimize_trajectory, rollout_score, PlanContext};
use wildfire_core::rewards::RewardWeights;
use wildfire_core::rng::rng_for;
use wildfire_core::scenario::{Approach, Scenario};
use wildfire_core::sensing::{PolarSensor, PolarSpec};

fn random_grid(n: usize, cs: f64, density: f64, seed: u64) -> FireGrid {
    let mut rng = rng_for(seed, 0);
    let mut g = FireGrid::empty(n, n, cs).unwrap();
    for y in 0..n {
        for x in 0..n {
            g.set_fuel(Cell::new(x, y), 5.0).unwrap();
            if rng.random::<f64>() < density {
                g.ignite(Cell::new(x, y)).unwrap();
            }
        }
    }
    g
}

/// Rotating the map and the aircraft by a quarter turn leaves the observation
/// unchanged, except for samples landing on a cell boundary.
#[test]
fn observation_is_rotation_equivariant() {
    let n = 60;
    let cs = 10.0;
    let side = n as f64 * cs;
    let g = random_grid(n, cs, 0.3, 3);
    let mut rotated = FireGrid::empty(n, n, cs).unwrap();
    for y in 0..n {
        for x in 0..n {
            let to = Cell::new(n - 1 - y, x);
            rotated.set_fuel(to, 5.0).unwrap();
            if g.is_burning(Cell::new(x, y)) {
                rotated.ignite(to).unwrap();
            }
        }
    }
    let sensor = PolarSensor::standard();
    let mut rng = rng_for(3, 1);
    let mut mismatches = 0;
    let mut total = 0;
    for _ in 0..50 {
        let pose = AircraftState::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(-3.0..3.0), 0.0);
        let turned = AircraftState::new(side - pose.y, pose.x, pose.psi + FRAC_PI_2, 0.0);
        let a = sensor.render(&g, &pose);
        let b = sensor.render(&rotated, &turned);
        mismatches += a.values().iter().zip(b.values()).filter(|(p, q)| p != q).count();
        total += a.values().len();
    }
    assert!(mismatches * 1000 <= total, "{mismatches} of {total} bins differ");
}

#[test]
fn full_belief_network_parameter_count() {
    let spec = Scenario::full().network_spec(Approach::Belief);
    let net = QNetwork::<f32>::zeroed(spec).unwrap();
    let expected = 1216 + 36928 + 36928 + 4608500 + 50100 + 600 + 40400 + 40200 + 40200 + 402;
    assert_eq!(expected, 4_855_474);
    assert_eq!(net.param_count(), expected);
}

#[test]
fn replay_sampling_is_uniform() {
    let image = Arc::new(Tensor::<f32>::zeros(vec![1, 1, 1]));
    let mut buffer = ReplayBuffer::new(10).unwrap();
    for k in 0..25 {
        buffer.push(Transition {
            image: image.clone(),
            continuous: [0.0; 5],
            action: 0,
            reward: k as f32,
            next_image: image.clone(),
            next_continuous: [0.0; 5],
            terminal: false,
        });
    }
    let draws = 100_000;
    let mut counts = [0usize; 10];
    let mut rng = rng_for(9, 0);
    for _ in 0..draws / 10 {
        for i in buffer.sample_indices(10, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    let expect = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 99.9th percentile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 27.88, "chi2 {chi2} counts {counts:?}");
    let mut held: Vec<f32> = (0..10).map(|i| buffer.get(i).reward).collect();
    held.sort_by(f32::total_cmp);
    assert_eq!(held, (15..25).map(|k| k as f32).collect::<Vec<_>>());
}

fn mirrored_scene() -> (FireGrid, PolarSensor) {
    let mut g = FireGrid::empty(21, 21, 10.0).unwrap();
    for y in 0..21 {
        for x in 0..21 {
            g.set_fuel(Cell::new(x, y), 5.0).unwrap();
        }
    }
    g.apply_seed(&SeedPattern::Circular { center: Cell::new(10, 17), radius: 2.0 }).unwrap();
    g.ignite(Cell::new(4, 12)).unwrap();
    g.ignite(Cell::new(16, 12)).unwrap();
    let sensor = PolarSensor::new(&PolarSpec { range_bins: 10, angle_bins: 8, ..Default::default() }).unwrap();
    (g, sensor)
}

/// On a left-right symmetric scene flown straight up its axis of symmetry, a
/// command sequence and its mirror image score the same.
#[test]
fn planner_scores_respect_mirror_symmetry() {
    let (g, sensor) = mirrored_scene();
    let w = RewardWeights::default();
    let ctx = PlanContext { grid: &g, sensor: &sensor, peers: &[], weights: &w, speed: 20.0 };
    let start = AircraftState::new(105.0, 20.0, FRAC_PI_2, 0.0);
    let mut rng = rng_for(21, 0);
    for _ in 0..20 {
        let seq: Vec<Action> = (0..30).map(|_| Action::from_index(rng.random_range(0..2))).collect();
        let mirror: Vec<Action> = seq.iter().map(|a| a.flipped()).collect();
        assert_relative_eq!(rollout_score(&ctx, &start, &seq), rollout_score(&ctx, &start, &mirror), max_relative = 1e-9);
    }
}

/// With nested restart streams, more restarts from the same seed never
/// produce a worse plan.
#[test]
fn more_restarts_never_hurt() {
    let (g, sensor) = mirrored_scene();
    let w = RewardWeights::default();
    let peers = [AircraftState::new(60.0, 60.0, 0.0, 0.0)];
    let ctx = PlanContext { grid: &g, sensor: &sensor, peers: &peers, weights: &w, speed: 20.0 };
    let start = AircraftState::new(80.0, 30.0, 1.2, 0.0);
    for seed in 0..3 {
        let mut previous = f64::NEG_INFINITY;
        for restarts in 1..=6 {
            let plan = optimize_trajectory(&ctx, &start, 25, restarts, &mut rng_for(seed, 7));
            assert!(plan.score >= previous, "restarts {restarts}: {} < {previous}", plan.score);
            previous = plan.score;
        }
    }
}

#[test]
fn episode_csv_is_deterministic() {
    let s = Scenario::desk();
    let a = run_episode_with(&s, &Policy::Random, 17).unwrap();
    let b = run_episode_with(&s, &Policy::Random, 17).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_json(), b.to_json());
    let c = run_episode_with(&s, &Policy::Random, 18).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

/// Mean and standard error reported in the summary can be recomputed from
/// the per-episode CSV.
#[test]
fn summary_statistics_follow_from_episode_csv() {
    let s = Scenario::desk();
    let summary = run_suite(&s, &[Policy::Random], 6, 4).unwrap();
    let scores: Vec<f64> = summary
        .episodes_csv()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 6);
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let row: Vec<String> = summary.summary_csv().lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_relative_eq!(row[2].parse::<f64>().unwrap(), mean, max_relative = 1e-12);
    assert_relative_eq!(row[3].parse::<f64>().unwrap(), (var / n).sqrt(), max_relative = 1e-12);
    assert_eq!(mean_stderr(&scores), (summary.results[0].mean, summary.results[0].stderr));
}
