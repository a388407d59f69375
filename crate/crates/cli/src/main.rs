use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use glmb::cs_divergence;
use glmb::oracle::{run_suite, Suite};
use glmb::scenario::{run_experiment_with_progress, write_outputs, Controller, ScenarioConfig};
use glmb::serialize::read_density_file;
use glmb::{glmb_void_probability, GlmbError, Region};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SCHEMA_HELP: &str = "\
Scenario files are TOML with these sections (see scenarios/*.toml):
  format_version = 1, name, seed, duration, filter_interval, monte_carlo_runs,
  controllers = [\"csd\", \"random\", \"stationary\"], max_aborted_fraction
  [surveillance] lower, upper
  [motion] accel_sd, survival_probability
  [birth] existence, position_sd, velocity_sd, sites = [[x, vx, y, vy], ...]
  [sensor] initial_position, initial_heading_deg, speed, bearing_sd_deg, eta, r1, r2,
           detection_sd, clutter_rate, max_range
  [control] start_time, decision_interval, lookahead_interval, horizon, course_step_deg,
            samples, exclusion_radius, void_threshold, reward_clamp, lookahead_birth,
            lookahead_components, max_failure_fraction, [control.lookahead_filter]
  [filter] max_components, max_predicted_components, min_weight, max_predict_hypotheses,
           max_update_hypotheses, hypothesis_log_ratio, gate_sigma, exact_limit,
           max_search_nodes, merge_histories, max_label_gaussians, merge_threshold
  [ospa] cutoff, order
  [heatmap] bins = [nx, ny]
  [[targets]] birth, death (optional), state = [x, vx, y, vy]
Overrides use dotted paths, e.g. --override sensor.eta=0.2";

#[derive(Parser)]
#[command(name = "glmb", version, about = "GLMB sensor-control scenarios, oracles and density inspection", after_help = SCHEMA_HELP)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment of a scenario file.
    Run {
        scenario: PathBuf,
        /// Replaces the seed in the file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `key.path=value`, applied in order after parsing.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a scenario file against the schema.
    Validate {
        scenario: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare closed forms against independent numerical oracles.
    Oracle {
        /// cs-divergence, void-probability, k-invariance, product-rule, poisson, truncation or ospa.
        suite: String,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Query a density file.
    Inspect {
        density: PathBuf,
        /// Void probability of a region: `disc:x,y,r`, `box:lo,..:hi,..` or
        /// `halfspace:n,..:offset`.
        #[arg(long = "region")]
        regions: Vec<String>,
        /// State dimensions the region coordinates refer to.
        #[arg(long, value_delimiter = ',', default_value = "0,2")]
        dims: Vec<usize>,
        /// Cauchy-Schwarz divergence to another density file.
        #[arg(long)]
        divergence: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Invalid(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)?;
    ScenarioConfig::from_toml_str_with_overrides(&text, overrides)
        .with_context(|| format!("in {}", path.display()))
        .map_err(invalid)
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("`{v}` is not a number"))).collect()
}

fn parse_region(spec: &str, dims: &[usize]) -> anyhow::Result<Region> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| anyhow!("region `{spec}` has no kind"))?;
    let region = match kind {
        "disc" => {
            let v = parse_list(rest)?;
            if v.len() != 3 || dims.len() != 2 {
                bail!("disc needs x,y,r and two --dims");
            }
            Region::disc([v[0], v[1]], v[2], [dims[0], dims[1]])?
        }
        "box" => {
            let (lo, hi) = rest.split_once(':').ok_or_else(|| anyhow!("box needs lower:upper"))?;
            Region::axis_box(parse_list(lo)?, parse_list(hi)?, dims.to_vec())?
        }
        "halfspace" => {
            let (n, b) = rest.split_once(':').ok_or_else(|| anyhow!("halfspace needs normal:offset"))?;
            Region::half_space(parse_list(n)?, b.trim().parse()?, dims.to_vec())?
        }
        other => bail!("unknown region kind `{other}`"),
    };
    Ok(region)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { scenario, overrides } => {
            let cfg = load(&scenario, &overrides)?;
            println!(
                "{}: ok ({} steps, {} targets, {} runs x {} controllers)",
                scenario.display(),
                cfg.steps(),
                cfg.targets.len(),
                cfg.monte_carlo_runs,
                cfg.controllers.len()
            );
        }
        Command::Run { scenario, seed, out, mut overrides } => {
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            let cfg = load(&scenario, &overrides)?;
            std::fs::create_dir_all(&out).map_err(runtime)?;
            let mut log = format!("# source: {}\n", scenario.display());
            for o in &overrides {
                log.push_str(o);
                log.push('\n');
            }
            std::fs::write(out.join("overrides.log"), log).map_err(runtime)?;
            let total = cfg.monte_carlo_runs * cfg.controllers.len();
            let done = std::sync::atomic::AtomicUsize::new(0);
            let exp = run_experiment_with_progress(&cfg, &|r| {
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                let status = r.aborted.as_deref().unwrap_or("done");
                eprintln!("[{n}/{total}] {} run {}: {status}", r.controller, r.run);
            })
            .map_err(runtime)?;
            write_outputs(&exp, &out).map_err(runtime)?;
            for &c in &cfg.controllers {
                let s = exp.summary(c);
                println!(
                    "{:<10} mean OSPA {:8.2} m  (se {:.2}, {} runs, {} aborted)",
                    c.name(),
                    s.mean_ospa,
                    s.standard_error,
                    s.runs,
                    s.aborted
                );
            }
            if cfg.controllers.contains(&Controller::Csd) || cfg.controllers.contains(&Controller::Random) {
                let v = exp.constraint_violations(1e-9);
                println!("constraint audit: {} violations in {} decisions", v.len(), exp.decision_count());
            }
            println!("outputs written to {}", out.display());
        }
        Command::Oracle { suite, cases, seed } => {
            let suite: Suite = suite.parse().map_err(|e: GlmbError| invalid(e))?;
            let report = run_suite(suite, cases.unwrap_or(suite.default_cases()), seed).map_err(runtime)?;
            println!("{}", report.summary());
            if !report.ok() {
                return Err(runtime(anyhow!("{} suite failed", suite)));
            }
        }
        Command::Inspect { density, regions, dims, divergence } => {
            let d = read_density_file(&density).with_context(|| format!("reading {}", density.display())).map_err(invalid)?;
            let card = d.cardinality_distribution();
            println!("components {}", d.len());
            println!("labels {}", d.label_space().len());
            println!("expected cardinality {}", d.expected_cardinality());
            println!("map cardinality {}", card.map_estimate());
            for spec in &regions {
                let region = parse_region(spec, &dims).map_err(invalid)?;
                let q = glmb_void_probability(&d, &region).map_err(runtime)?;
                println!("void probability {spec} {q}");
            }
            if let Some(other) = divergence {
                let o = read_density_file(&other).with_context(|| format!("reading {}", other.display())).map_err(invalid)?;
                let dcs = cs_divergence(&d, &o).map_err(runtime)?;
                println!("cs divergence {} {dcs}", other.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("\n{SCHEMA_HELP}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.jobs {
        #[cfg(feature = "parallel")]
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        #[cfg(not(feature = "parallel"))]
        let _ = n;
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
