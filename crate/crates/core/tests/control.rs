use glmb::control::{
    expected_reward, feasible, predict_horizon, random_action, select_action, ActionSpace, ControlConfig, ControlModels,
    Platform,
};
use glmb::filter::{predict, BearingRangeSensor, BirthModel, MotionModel, RangeNoiseProfile};
use glmb::rng::stream;
use glmb::serialize::write_density;
use glmb::{glmb_void_probability, Gaussian, GaussianMixture, GlmbComponent, GlmbDensity, Label, Region};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

fn models(clutter: f64) -> ControlModels {
    let range = RangeNoiseProfile { eta: 0.1, r1: 1000.0, r2: 10_000.0 };
    ControlModels {
        motion: MotionModel::constant_velocity(80.0, 0.01, 0.99).unwrap(),
        sensor: BearingRangeSensor::new([0.0, 0.0], 2f64.to_radians(), range, 20_000.0, clutter, 30_000.0).unwrap(),
        birth_sites: Vec::new(),
        current_step: 0,
    }
}

fn object(x: f64, y: f64, sd: f64) -> Arc<GaussianMixture> {
    let v = sd * sd;
    let g = Gaussian::from_slices(
        &[x, 0.0, y, 0.0],
        &[v, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0, v, 0.0, 0.0, 0.0, 0.0, 0.25],
    )
    .unwrap();
    Arc::new(GaussianMixture::single(g))
}

fn certain(objects: &[(f64, f64, f64)]) -> GlmbDensity {
    let entries = objects.iter().enumerate().map(|(i, &(x, y, sd))| (Label::new(0, i as u32), object(x, y, sd))).collect();
    GlmbDensity::new(vec![GlmbComponent::new(0, entries, 0.0).unwrap()], 4, 1.0).unwrap()
}

fn cfg(samples: usize, seed: u64) -> ControlConfig {
    ControlConfig { samples, seed, ..ControlConfig::default() }
}

#[test]
fn approaching_a_target_is_worth_more_than_retreating() {
    // Course change 0 heads east towards the target, π heads away.
    let space = ActionSpace::new(vec![0.0, PI], 7.0, 80.0, 5).unwrap();
    let p = Platform { position: [0.0, 0.0], heading: 0.0 };
    let posterior = certain(&[(6000.0, 0.0, 100.0)]);
    let m = models(10.0);
    let c = cfg(2000, 11);
    let approach = expected_reward(0, &posterior, &p, &m, &space, &c).unwrap();
    let retreat = expected_reward(1, &posterior, &p, &m, &space, &c).unwrap();
    let se = (approach.standard_error.powi(2) + retreat.standard_error.powi(2)).sqrt();
    assert!(approach.mean - retreat.mean > 3.0 * se, "{approach:?} vs {retreat:?}");
}

#[test]
fn single_target_due_east_attracts_the_sensor() {
    // Heading north; the nine course changes are -160°..160° in 40° steps, so
    // -80° points 10° off due east.
    let changes: Vec<f64> = (-4..=4).map(|i| (i as f64 * 40.0).to_radians()).collect();
    let space = ActionSpace::new(changes, 7.0, 80.0, 5).unwrap();
    let p = Platform { position: [0.0, 0.0], heading: FRAC_PI_2 };
    let posterior = certain(&[(6000.0, 0.0, 300.0)]);
    let m = models(10.0);
    let trials = 50;
    let hits = (0..trials)
        .filter(|&s| {
            let d = select_action(&posterior, &p, &m, &space, &cfg(20, 1000 + s)).unwrap();
            assert!(!d.constraint_relaxed);
            d.heading.abs() <= 20f64.to_radians() + 1e-9
        })
        .count();
    assert!(hits * 10 >= trials as usize * 9, "{hits}/{trials} decisions towards the target");
}

#[test]
fn feasibility_matches_recomputed_void_probabilities() {
    let space = ActionSpace::grid(40.0, 7.0, 80.0, 5).unwrap();
    let p = Platform { position: [0.0, 0.0], heading: 0.0 };
    let posterior = certain(&[(1120.0, 0.0, 100.0), (-2500.0, 2500.0, 300.0), (0.0, -6000.0, 200.0)]);
    let m = models(10.0);
    let c = cfg(1, 0);

    // Independent recomputation: repeated one-step prediction and a fresh
    // void-probability evaluation at every path point.
    let mut predictions = Vec::new();
    let mut current = posterior.clone();
    for _ in 0..space.horizon {
        current = predict(&current, &m.motion, &BirthModel::none(), &c.lookahead_filter).unwrap().density;
        predictions.push(current.clone());
    }
    let shared = predict_horizon(&posterior, &m, &space, &c).unwrap();
    for (a, b) in predictions.iter().zip(&shared) {
        assert_eq!(write_density(a), write_density(b));
    }

    let mut infeasible = 0;
    for a in 0..space.len() {
        let f = feasible(a, &posterior, &p, &m, &space, &c).unwrap();
        let turned = p.turn(space.course_changes()[a]);
        let expected: Vec<f64> = predictions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let at = turned.advance(space.speed, (i + 1) as f64 * space.step_interval).position;
                glmb_void_probability(d, &Region::disc(at, c.exclusion_radius, [0, 2]).unwrap()).unwrap()
            })
            .collect();
        for (got, want) in f.void_probabilities.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-9);
        }
        let min = expected.iter().copied().fold(1.0, f64::min);
        assert!((f.min_void - min).abs() < 1e-9);
        assert_eq!(f.feasible, min > c.void_threshold);
        infeasible += usize::from(!f.feasible);
    }
    assert!(infeasible > 0 && infeasible < space.len(), "{infeasible} infeasible");
}

#[test]
fn random_controller_only_picks_feasible_actions() {
    let space = ActionSpace::grid(20.0, 7.0, 80.0, 5).unwrap();
    let p = Platform { position: [0.0, 0.0], heading: 0.0 };
    let posterior = certain(&[(1120.0, 0.0, 100.0), (0.0, 1500.0, 100.0)]);
    let m = models(10.0);
    let c = cfg(1, 0);
    let mut seen = std::collections::BTreeSet::new();
    for s in 0..200 {
        let d = random_action(&posterior, &p, &m, &space, &c, &mut stream(s, &[4])).unwrap();
        assert!(!d.constraint_relaxed);
        assert!(d.actions[d.action].feasibility.feasible);
        seen.insert(d.action);
    }
    let feasible_count = (0..space.len()).filter(|&a| feasible(a, &posterior, &p, &m, &space, &c).unwrap().feasible).count();
    assert!(feasible_count < space.len());
    assert_eq!(seen.len(), feasible_count);
}

#[test]
fn doubling_the_samples_shrinks_the_standard_error() {
    let space = ActionSpace::new(vec![0.0], 7.0, 80.0, 3).unwrap();
    let p = Platform { position: [0.0, 0.0], heading: 0.0 };
    let posterior = certain(&[(3000.0, 0.0, 200.0), (0.0, 4000.0, 300.0)]);
    let m = models(10.0);
    let mean_se = |n: usize| -> f64 {
        (0..30).map(|s| expected_reward(0, &posterior, &p, &m, &space, &cfg(n, 500 + s)).unwrap().standard_error).sum::<f64>() / 30.0
    };
    let ratio = mean_se(40) / mean_se(20);
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!((ratio - target).abs() <= 0.15, "ratio {ratio}");
}
