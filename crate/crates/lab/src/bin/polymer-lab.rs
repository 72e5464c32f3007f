use clap::{Args, Parser, Subcommand};
use polymer::crossover::{CrossoverParams, CrossoverTables};
use polymer::env::{EnvKind, EnvSpec};
use polymer::transfer::Form;
use polymer::ustat::{enumerate_oracle, pkn_weight, rect_average};
use polymer_lab::config::{Budget, ExperimentConfig};
use polymer_lab::experiments::{self, tolerances};
use polymer_lab::results::{persist, write_json, Table, LIBRARY_VERSION};
use polymer_lab::LabError;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "polymer-lab", version, about = "Directed polymer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample normalized point-to-line values.
    Simulate(SimulateArgs),
    /// Tabulate the crossover distribution G_β.
    Crossover(CrossoverArgs),
    /// Exact oracles.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Recompute the verdict of a persisted run from its CSV tables.
    Recheck {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exhaustive Rademacher enumeration of first and second order sums.
    Enumerate {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        width: usize,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "gaussian")]
    env: EnvKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exponential weights e^{βω} normalized by e^{nλ}, instead of 1 + βω.
    #[arg(long)]
    exponential: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CrossoverArgs {
    #[arg(long)]
    beta: f64,
    /// start:end:step
    #[arg(long, default_value = "-4:4:0.1", allow_hyphen_values = true)]
    s_grid: String,
    /// Gauss–Legendre nodes per unit panel.
    #[arg(long)]
    quad_order: Option<usize>,
    /// CSV path; the manifest is written next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> Result<Vec<f64>, LabError> {
    let bad = || LabError::Config(format!("grid `{s}` must look like start:end:step"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [a, b, h] = parts[..] else { return Err(bad()) };
    if !(h > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    let count = ((b - a) / h + 1e-9).floor() as usize;
    if count > 100_000 {
        return Err(LabError::Budget(format!("grid has {count} points")));
    }
    Ok((0..=count).map(|i| a + h * i as f64).collect())
}

#[derive(Serialize)]
struct CrossoverManifest<'a> {
    library_version: &'a str,
    params: CrossoverParams,
    s_grid: &'a str,
    mass: f64,
    mass_refined: f64,
    r_range: (f64, f64),
    max_self_convergence: f64,
    monotone: bool,
}

fn execute(cli: Cli) -> Result<bool, LabError> {
    match cli.command {
        Command::Run { config } => {
            let c = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            let result = experiments::run(&c, &Budget::default())?;
            persist(&result, &c, tolerances(c.experiment))?;
            let e = &result.evaluation;
            println!("{}: {} ({})", result.experiment, if e.passed { "PASS" } else { "FAIL" }, e.predicate);
            for (k, v) in &e.summary {
                println!("  {k} = {v}");
            }
            Ok(e.passed)
        }
        Command::Simulate(a) => {
            let budget = Budget::default();
            if a.n > budget.max_n || a.replicas > budget.max_replicas {
                return Err(LabError::Budget(format!("n = {} or replicas = {} beyond the budget", a.n, a.replicas)));
            }
            let spec = EnvSpec::new(a.env);
            let form = if a.exponential { Form::Exponential } else { Form::Product };
            let z = polymer::chaos::sample_p2l(&spec, a.beta, a.alpha, a.n, form, a.replicas, a.seed)?;
            let mut t = Table::new("replicas", &["replica", "n", "beta", "value"]);
            let beta_n = polymer::chaos::scaled_beta(a.beta, a.alpha, a.n);
            for (i, v) in z.iter().enumerate() {
                t.push(vec![i as f64, a.n as f64, beta_n, *v]);
            }
            std::fs::create_dir_all(&a.out)?;
            t.write_csv(std::fs::File::create(a.out.join("replicas.csv"))?)?;
            let summary = serde_json::json!({
                "library_version": LIBRARY_VERSION,
                "env": spec,
                "n": a.n,
                "beta": a.beta,
                "alpha": a.alpha,
                "replicas": a.replicas,
                "seed": a.seed,
                "exponential": a.exponential,
                "mean": polymer::stats::mean(&z),
                "variance": if z.len() > 1 { polymer::stats::variance(&z) } else { f64::NAN },
            });
            write_json(&a.out.join("manifest.json"), &summary)?;
            println!("wrote {} replicas to {}", z.len(), a.out.display());
            Ok(true)
        }
        Command::Crossover(a) => {
            let grid = parse_grid(&a.s_grid)?;
            let mut params = CrossoverParams::new(a.beta)?;
            if a.beta < experiments::MIN_CROSSOVER_BETA {
                return Err(LabError::Budget(format!("beta below {}", experiments::MIN_CROSSOVER_BETA)));
            }
            if let Some(m) = a.quad_order {
                params.quad_order = m;
            }
            let curve = CrossoverTables::new(&params)?.curve(&grid);
            if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            curve.write_csv(std::fs::File::create(&a.out)?)?;
            let m = CrossoverManifest {
                library_version: LIBRARY_VERSION,
                params,
                s_grid: &a.s_grid,
                mass: curve.mass,
                mass_refined: curve.mass_refined,
                r_range: (curve.r_lo, curve.r_hi),
                max_self_convergence: curve.max_self_convergence(),
                monotone: curve.is_monotone(),
            };
            write_json(&a.out.with_extension("json"), &m)?;
            println!("mass {:.6}, max self-convergence {:.2e}", m.mass, m.max_self_convergence);
            Ok(true)
        }
        Command::Oracle { which: OracleCommand::Enumerate { n, width } } => {
            let g1 = rect_average(|t: &[f64], x: &[f64]| 1.0 + t[0] + x[0], 1, n, width, 3)?;
            let g2 = rect_average(pkn_weight(n), 2, n, width, 2)?;
            let report = enumerate_oracle(&g1, &g2)?;
            eprintln!("{} environments on {} cells", report.environments, report.cells);
            let records = report.records();
            let ok = records.iter().all(|r| match r.bound {
                Some(b) => r.exact_value <= b,
                None => r.exact_value == 0.0,
            });
            println!("{}", serde_json::to_string_pretty(&records)?);
            Ok(ok)
        }
        Command::Recheck { dir } => {
            let e = experiments::recheck(&dir)?;
            println!("{} ({})", if e.passed { "PASS" } else { "FAIL" }, e.predicate);
            Ok(e.passed)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
