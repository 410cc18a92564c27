use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sixs_harness::report::{emit_report, load_result, verdict_lines, Figure, Formats, Series};
use sixs_harness::run::{fluid_for, parse_n_list, run_scenario, sweep_n, Fluid, RunResult, Verdict};
use sixs_harness::scenario::{all_builtin, resolve, Scenario, BUILTIN};
use sixs_harness::verify;

#[derive(Parser)]
#[command(name = "sixs", version, about = "Simulate and verify the 6S RNA sequestration model")]
struct Cli {
    /// Override the scenario's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for summary.csv, verdicts.json, plots/ and trajectories/.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override the scenario's replica count.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's replicas and write summaries and sampled paths.
    Simulate {
        /// Scenario file or built-in name.
        scenario: String,
    },
    /// Integrate the fluid limit of an auxiliary-model scenario.
    Fluid {
        scenario: String,
        /// RK4 step on the ODE's own clock.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Run a scenario over several population sizes and report trends.
    Sweep {
        scenario: String,
        /// Comma-separated population sizes; defaults to the scenario's list.
        #[arg(long)]
        n: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        ode_step: f64,
    },
    /// Run the acceptance checks (all built-in scenarios by default).
    Verify {
        /// Scenario files or built-in names.
        scenarios: Vec<String>,
        /// Only run checks feeding these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Re-render a saved result.json.
    Report {
        /// A result.json file or a directory containing one.
        input: PathBuf,
        #[arg(long, default_value = "csv,json,svg")]
        format: String,
    },
    /// List the built-in scenarios.
    List,
}

fn apply_overrides(mut s: Scenario, cli: &Cli) -> Result<Scenario> {
    if let Some(seed) = cli.seed {
        s.base_seed = seed;
    }
    if let Some(r) = cli.replicas {
        s.replicas = r;
    }
    s.validate()?;
    Ok(s)
}

fn load(spec: &str, cli: &Cli) -> Result<Scenario> {
    apply_overrides(resolve(spec)?, cli)
}

fn finish(result: &RunResult, dir: &Path, formats: Formats) -> Result<ExitCode> {
    emit_report(result, dir, formats)?;
    for line in verdict_lines(result) {
        println!("{line}");
    }
    if let Some(e) = &result.error {
        eprintln!("error: {e}");
        return Ok(ExitCode::from(1));
    }
    Ok(if result.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn fluid(s: &Scenario, step: f64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    for &n in &s.n {
        let (sol, clock) = match fluid_for(s, n, step)? {
            Fluid::Drain(sol) => (sol, "t"),
            Fluid::Free(sol) => (sol, "N t"),
        };
        let mut buf = Vec::new();
        sol.write_csv(&mut buf)?;
        let text = String::from_utf8(buf)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        result.tables.push(sixs_harness::report::Table { name: format!("{}-fluid-n{n}", s.name), header, rows });
        let mut fig = Figure::new(&format!("{}-fluid-n{n}", s.name), &format!("Fluid limit, N = {n}"), clock, "fraction of N");
        for (c, name) in sol.names.iter().enumerate() {
            fig = fig.with(Series::line(name, sol.times.iter().zip(&sol.values).map(|(t, v)| (*t, v[c])).step_by(10).collect()));
        }
        result.figures.push(fig);
    }
    Ok(result)
}

fn sweep(s: &Scenario, n: &Option<String>, ode_step: f64) -> Result<RunResult> {
    let n_list = match n {
        Some(text) => parse_n_list(text)?,
        None => s.n.clone(),
    };
    let (mut result, _) = sweep_n(s, &n_list, ode_step)?;
    for t in result.trends.clone() {
        let mut v = Verdict::new(s, &format!("trend {}", t.metric));
        for (n, x) in t.n.iter().zip(&t.values) {
            v.metric(&format!("n{n}"), *x);
        }
        v.require(&t.status, matches!(t.status.as_str(), "decreasing" | "bounded-ratio" | "insufficient"));
        result.verdicts.push(v);
    }
    Ok(result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring worker threads")?;
    }
    let out = &cli.out_dir;
    match &cli.command {
        Command::Simulate { scenario } => {
            let s = load(scenario, cli)?;
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("scenario.toml"), s.to_toml())?;
            finish(&run_scenario(&s), out, Formats::ALL)
        }
        Command::Fluid { scenario, step } => finish(&fluid(&load(scenario, cli)?, *step)?, out, Formats::ALL),
        Command::Sweep { scenario, n, ode_step } => finish(&sweep(&load(scenario, cli)?, n, *ode_step)?, out, Formats::ALL),
        Command::Verify { scenarios, only } => {
            let list = if scenarios.is_empty() {
                all_builtin()?
            } else {
                scenarios.iter().map(|s| resolve(s)).collect::<Result<Vec<_>>>()?
            };
            let list = list
                .into_iter()
                .filter(|s| only.is_empty() || s.criterion.is_some_and(|c| only.contains(&c)))
                .map(|s| apply_overrides(s, cli))
                .collect::<Result<Vec<_>>>()?;
            let result = verify(&list, |r| {
                for line in verdict_lines(r) {
                    eprintln!("{line}");
                }
            });
            finish(&result, out, Formats::ALL)
        }
        Command::Report { input, format } => {
            let path = if input.is_dir() { input.join("result.json") } else { input.clone() };
            let result = load_result(&path)?;
            finish(&result, out, Formats::parse(format)?)
        }
        Command::List => {
            for (name, _) in BUILTIN {
                let s = resolve(name)?;
                println!("{name:32} {}", s.description);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
