//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test -p glmb-core --test acceptance`). The
//! desk-scale experiment dominates the runtime; set `ACCEPTANCE_SKIP_DESK=1`
//! to report criteria 9 and 10 as skipped.

use glmb::filter::{predict, update, BirthEntry, BirthModel, FilterConfig, LinearGaussianSensor, MotionModel};
use glmb::oracle::{random_glmb, run_suite, RandomGlmb, Suite};
use glmb::rng::stream;
use glmb::scenario::{ospa, run_experiment, Controller, ScenarioConfig};
use glmb::{Gaussian, GaussianMixture, GlmbDensity, Label, Matrix, Vector};
use rand::Rng;
use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn suite(s: Suite, budget: Option<Duration>) -> Outcome {
    let start = Instant::now();
    match run_suite(s, s.default_cases(), SEED) {
        Ok(report) => {
            let elapsed = start.elapsed();
            let in_time = budget.is_none_or(|b| elapsed < b);
            Outcome::new(report.ok() && in_time, format!("{} in {:.1}s", report.summary(), elapsed.as_secs_f64()))
        }
        Err(e) => Outcome::new(false, format!("error: {e}")),
    }
}

/// Structural checks every filter output must pass. `allowed` is the set of
/// labels that may appear.
fn check_density(d: &GlmbDensity, allowed: &BTreeSet<Label>) -> Result<(), String> {
    if d.log_total_weight().abs() > 1e-9 {
        return Err(format!("total weight off by {:e}", d.log_total_weight()));
    }
    let pmf_sum: f64 = d.cardinality_distribution().pmf.iter().sum();
    if (pmf_sum - 1.0).abs() > 1e-9 {
        return Err(format!("cardinality pmf sums to {pmf_sum}"));
    }
    let mut keys = BTreeSet::new();
    for c in d.components() {
        if !c.log_weight().is_finite() || c.log_weight() > 1e-12 {
            return Err(format!("log weight {}", c.log_weight()));
        }
        if !keys.insert((c.history(), c.labels().to_vec())) {
            return Err("duplicate component".into());
        }
        if c.labels().windows(2).any(|w| w[0] >= w[1]) {
            return Err("label set not strictly sorted".into());
        }
        if let Some(l) = c.labels().iter().find(|l| !allowed.contains(l)) {
            return Err(format!("unexpected label {l}"));
        }
        for gm in c.densities() {
            let total: f64 = gm.iter().map(|(w, _)| w).sum();
            if (total - 1.0).abs() > 1e-9 || gm.iter().any(|(w, _)| w.is_nan() || *w <= 0.0) {
                return Err(format!("mixture weights sum to {total}"));
            }
            for (_, g) in gm.iter() {
                let p = g.cov();
                if (p - p.transpose()).abs().max() > 1e-9 * p.abs().max().max(1.0) {
                    return Err("asymmetric covariance".into());
                }
                if p.clone().cholesky().is_none() || g.mean().iter().any(|v| !v.is_finite()) {
                    return Err("covariance not positive definite".into());
                }
            }
        }
    }
    for l in d.label_space() {
        let r = d.existence_probability(l);
        if !(-1e-12..=1.0 + 1e-12).contains(&r) {
            return Err(format!("existence {r} for {l}"));
        }
    }
    Ok(())
}

fn random_spd<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&a * a.transpose() + Matrix::identity(d, d)) * scale
}

fn filter_invariants() -> Outcome {
    let spec = RandomGlmb { state_dim: 2, labels: 3, max_components: 4, max_gaussians: 2, spread: 5.0, sd_range: (0.3, 2.0) };
    let mut rng = stream(SEED, &[7]);
    let steps = 1000;
    let mut first_error = None;
    for i in 0..steps {
        let prior = random_glmb(&mut rng, &spec, 0);
        let f = Matrix::identity(2, 2) + Matrix::from_fn(2, 2, |_, _| rng.random_range(-0.2..0.2));
        let motion = MotionModel::new(f, random_spd(&mut rng, 2, 0.1), rng.random_range(0.5..1.0)).unwrap();
        let mut births = Vec::new();
        for j in 0..rng.random_range(0..3u32) {
            let existence = rng.random_range(0.01..0.5);
            let mean = Vector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
            let cov = random_spd(&mut rng, 2, 1.0);
            let density = Arc::new(GaussianMixture::single(Gaussian::new(mean, cov).unwrap()));
            births.push(BirthEntry { label: Label::new(1, j), existence, density });
        }
        let birth = BirthModel::new(births).unwrap();
        // Alternate between the exact recursion and the capped, merging one.
        let cfg = if i % 2 == 0 {
            FilterConfig::exact()
        } else {
            FilterConfig { max_components: 8, max_predicted_components: 16, merge_histories: true, ..FilterConfig::default() }
        };
        let mut allowed: BTreeSet<Label> = prior.label_space().into_iter().collect();
        allowed.extend(birth.entries().iter().map(|e| e.label));
        let predicted = match predict(&prior, &motion, &birth, &cfg) {
            Ok(p) => p.density,
            Err(e) => {
                first_error.get_or_insert(format!("step {i} predict: {e}"));
                continue;
            }
        };
        if let Err(e) = check_density(&predicted, &allowed) {
            first_error.get_or_insert(format!("step {i} predict: {e}"));
        }
        let sensor = LinearGaussianSensor {
            observation: Matrix::identity(2, 2),
            noise: random_spd(&mut rng, 2, 0.2),
            detection_probability: rng.random_range(0.3..0.99),
            clutter_intensity: rng.random_range(1e-4..1e-1),
        };
        let count = rng.random_range(0..5);
        let z: Vec<Vector> = (0..count).map(|_| Vector::from_fn(2, |_, _| rng.random_range(-6.0..6.0))).collect();
        match update(&predicted, &z, &sensor, &cfg) {
            Ok(u) => {
                if let Err(e) = check_density(&u.density, &allowed) {
                    first_error.get_or_insert(format!("step {i} update: {e}"));
                }
            }
            Err(e) => {
                first_error.get_or_insert(format!("step {i} update: {e}"));
            }
        }
    }
    let (kalman_ok, kalman_worst) = kalman_oracle();
    let pass = first_error.is_none() && kalman_ok;
    let detail = format!(
        "{} predict/update pairs {}; Kalman oracle worst error {:.2e}",
        steps,
        first_error.as_deref().unwrap_or("all valid"),
        kalman_worst
    );
    Outcome::new(pass, detail)
}

/// A single certain target, no death, certain detection: the filter must
/// reproduce the Kalman filter, here written in information form.
fn kalman_oracle() -> (bool, f64) {
    let mut rng = stream(SEED, &[8]);
    let mut worst: f64 = 0.0;
    let label = Label::new(0, 0);
    for _ in 0..20 {
        let t = rng.random_range(0.5..2.0);
        let motion = MotionModel::constant_velocity(t, rng.random_range(0.1..1.0), 1.0).unwrap();
        let h = Matrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let r = random_spd(&mut rng, 2, 0.5);
        let sensor =
            LinearGaussianSensor { observation: h.clone(), noise: r.clone(), detection_probability: 1.0, clutter_intensity: 1e-3 };
        let mut m = Vector::from_fn(4, |_, _| rng.random_range(-10.0..10.0));
        let mut p = random_spd(&mut rng, 4, 1.0);
        let g = Gaussian::new(m.clone(), p.clone()).unwrap();
        let mut density = GlmbDensity::new(
            vec![glmb::GlmbComponent::new(0, vec![(label, Arc::new(GaussianMixture::single(g)))], 0.0).unwrap()],
            4,
            1.0,
        )
        .unwrap();
        for _ in 0..10 {
            let z = &h * &m + Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let predicted = predict(&density, &motion, &BirthModel::none(), &FilterConfig::exact()).unwrap().density;
            density = update(&predicted, std::slice::from_ref(&z), &sensor, &FilterConfig::exact()).unwrap().density;

            let f = motion.transition();
            let mp = f * &m;
            let pp = f * &p * f.transpose() + motion.process_noise();
            let pp_inv = pp.clone().try_inverse().unwrap();
            let r_inv = r.clone().try_inverse().unwrap();
            p = (&pp_inv + h.transpose() * &r_inv * &h).try_inverse().unwrap();
            m = &p * (&pp_inv * &mp + h.transpose() * &r_inv * &z);

            let comps = density.components();
            if comps.len() != 1 || comps[0].labels() != [label] || comps[0].densities()[0].len() != 1 {
                return (false, f64::INFINITY);
            }
            let (_, post) = &comps[0].densities()[0].components()[0];
            worst = worst.max((post.mean() - &m).abs().max()).max((post.cov() - &p).abs().max());
        }
    }
    (worst < 1e-9, worst)
}

fn ospa_criterion() -> Outcome {
    let report = suite(Suite::Ospa, None);
    let a = vec![vec![1.0, 2.0], vec![-3.0, 4.0]];
    let zero = ospa(&a, &a, 200.0, 2.0).distance;
    let empty: Vec<Vec<f64>> = Vec::new();
    let full = ospa(&a, &empty, 200.0, 2.0).distance;
    let far = ospa(&[vec![0.0, 0.0]], &[vec![1e6, 0.0]], 200.0, 2.0).distance;
    let boundary = zero == 0.0 && full == 200.0 && far == 200.0;
    Outcome::new(
        report.pass && boundary,
        format!("{}; boundary cases 0 / c / c: {zero} / {full} / {far}", report.detail),
    )
}

fn desk_config() -> ScenarioConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/scenario1_desk.toml");
    let text = std::fs::read_to_string(path).expect("desk scenario file");
    ScenarioConfig::from_toml_str(&text).expect("desk scenario parses")
}

/// The parameter envelope the desk run has to respect.
fn desk_shape(cfg: &ScenarioConfig) -> Result<(), String> {
    let targets = cfg.targets.len();
    let checks = [
        ((3..=7).contains(&targets), format!("{targets} targets")),
        (cfg.duration <= 2000.0, format!("duration {}", cfg.duration)),
        (cfg.monte_carlo_runs >= 20, format!("{} runs", cfg.monte_carlo_runs)),
        (cfg.control.samples == 50, format!("N = {}", cfg.control.samples)),
        (cfg.control.horizon == 5, format!("H = {}", cfg.control.horizon)),
        ((cfg.control.course_step_deg - 20.0).abs() < 1e-12, format!("grid {}°", cfg.control.course_step_deg)),
        (cfg.ospa.cutoff == 200.0 && cfg.ospa.order == 2.0, format!("c = {}, p = {}", cfg.ospa.cutoff, cfg.ospa.order)),
    ];
    match checks.iter().find(|(ok, _)| !ok) {
        Some((_, what)) => Err(format!("desk scenario out of envelope: {what}")),
        None => Ok(()),
    }
}

fn desk_criteria() -> (Outcome, Outcome) {
    let cfg = desk_config();
    if let Err(e) = desk_shape(&cfg) {
        return (Outcome::new(false, e.clone()), Outcome::new(false, e));
    }
    let start = Instant::now();
    let exp = match run_experiment(&cfg) {
        Ok(e) => e,
        Err(e) => {
            let msg = format!("experiment failed: {e}");
            return (Outcome::new(false, msg.clone()), Outcome::new(false, msg));
        }
    };
    let elapsed = start.elapsed();
    let csd = exp.summary(Controller::Csd);
    let random = exp.summary(Controller::Random);
    let stationary = exp.summary(Controller::Stationary);
    let combined = (csd.standard_error.powi(2) + stationary.standard_error.powi(2)).sqrt();
    let separation = (stationary.mean_ospa - csd.mean_ospa) / combined;
    let ordered = csd.mean_ospa < random.mean_ospa && random.mean_ospa < stationary.mean_ospa;
    let in_time = elapsed < Duration::from_secs(30 * 60);
    let ordering = Outcome::new(
        ordered && separation >= 2.0 && in_time,
        format!(
            "mean OSPA csd {:.2} ± {:.2}, random {:.2} ± {:.2}, stationary {:.2} ± {:.2}; csd vs stationary {:.1} SE; {} runs each in {:.0}s",
            csd.mean_ospa,
            csd.standard_error,
            random.mean_ospa,
            random.standard_error,
            stationary.mean_ospa,
            stationary.standard_error,
            separation,
            cfg.monte_carlo_runs,
            elapsed.as_secs_f64()
        ),
    );
    let violations = exp.constraint_violations(1e-9);
    let relaxed = exp
        .replicates
        .iter()
        .flat_map(|r| &r.decisions)
        .filter(|d| d.constraint_relaxed)
        .count();
    let audit = Outcome::new(
        violations.is_empty() && exp.decision_count() > 0,
        format!(
            "{} violations in {} decisions ({} flagged relaxed)",
            violations.len(),
            exp.decision_count(),
            relaxed
        ),
    );
    (ordering, audit)
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "cs-divergence oracle", suite(Suite::CsDivergence, Some(Duration::from_secs(60))));
    report(2, "void-probability oracle", suite(Suite::VoidProbability, Some(Duration::from_secs(300))));
    report(3, "k-invariance", suite(Suite::KInvariance, None));
    report(4, "independent-union product rule", suite(Suite::ProductRule, None));
    report(5, "poisson cross-check", suite(Suite::Poisson, None));
    report(6, "truncation identity", suite(Suite::Truncation, None));
    report(7, "filter invariants and Kalman oracle", filter_invariants());
    report(8, "ospa correctness", ospa_criterion());
    if std::env::var_os("ACCEPTANCE_SKIP_DESK").is_some() {
        println!("criterion  9 SKIP desk-scale controller ordering");
        println!("criterion 10 SKIP constraint audit");
    } else {
        let (ordering, audit) = desk_criteria();
        report(9, "desk-scale controller ordering", ordering);
        report(10, "constraint audit", audit);
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
