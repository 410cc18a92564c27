//! Replica execution, `run_scenario` and `sweep_n`.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sixs_core::fluid::{integrate_subcritical, integrate_supercritical, FluidParams, OdeSolution};
use sixs_core::model::psi;
use sixs_core::occupation::GridSampler;
use sixs_core::reference::{BirthDeath, MM1};
use sixs_core::{replica_seed, AuxModel, FullModel, LimitChain, Model, Outcome, Simulator, StopPredicate};

use crate::report::{Figure, Series, Table};
use crate::scenario::{ConditionKind, InitialState, ModelSpec, Scenario};

/// One `(scenario, N, replica, quantity)` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub n: u64,
    pub replica: usize,
    pub quantity: String,
    pub value: f64,
}

/// Pass/fail outcome of one check, with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: Option<u32>,
    pub scenario: String,
    pub check: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(s: &Scenario, check: &str) -> Self {
        Verdict {
            criterion: s.criterion,
            scenario: s.name.clone(),
            check: check.to_string(),
            pass: true,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    /// Records a named condition; the verdict fails if any condition fails.
    pub fn require(&mut self, what: &str, ok: bool) -> &mut Self {
        self.notes.push(format!("{} {what}", if ok { "ok" } else { "FAILED" }));
        self.pass &= ok;
        self
    }
}

/// Trend of a per-N metric across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub metric: String,
    pub n: Vec<u64>,
    pub values: Vec<f64>,
    /// `decreasing`, `not-decreasing`, `bounded-ratio`, `unbounded-ratio` or `insufficient`.
    pub status: String,
}

impl Trend {
    pub fn decreasing(metric: &str, n: Vec<u64>, values: Vec<f64>) -> Self {
        let status = if values.len() < 2 {
            "insufficient"
        } else if values.windows(2).all(|w| w[1] < w[0]) {
            "decreasing"
        } else {
            "not-decreasing"
        };
        Trend { metric: metric.into(), n, values, status: status.into() }
    }

    pub fn bounded_ratio(metric: &str, n: Vec<u64>, values: Vec<f64>, limit: f64) -> Self {
        let status = if values.len() < 2 {
            "insufficient"
        } else if max_over_min(&values) < limit {
            "bounded-ratio"
        } else {
            "unbounded-ratio"
        };
        Trend { metric: metric.into(), n, values, status: status.into() }
    }
}

pub fn max_over_min(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub rows: Vec<Row>,
    pub trends: Vec<Trend>,
    pub verdicts: Vec<Verdict>,
    pub figures: Vec<Figure>,
    pub tables: Vec<Table>,
    /// Set when a replica failed; the other fields hold what completed.
    pub error: Option<String>,
}

impl RunResult {
    pub fn new(name: &str) -> Self {
        RunResult { scenario: name.to_string(), ..Default::default() }
    }

    pub fn row(&mut self, n: u64, replica: usize, quantity: &str, value: f64) {
        self.rows.push(Row { scenario: self.scenario.clone(), n, replica, quantity: quantity.into(), value });
    }

    pub fn absorb(&mut self, other: RunResult) {
        self.rows.extend(other.rows);
        self.trends.extend(other.trends);
        self.verdicts.extend(other.verdicts);
        self.figures.extend(other.figures);
        self.tables.extend(other.tables);
        if self.error.is_none() {
            self.error = other.error;
        }
    }

    pub fn all_pass(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.pass)
    }
}

/// Maps `f` over replica indices on the current thread pool; results keep index order.
pub fn par_replicas<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Vec<Result<T>> {
    (0..count).into_par_iter().map(f).collect()
}

/// A sampled replica path.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaPath {
    pub seed: u64,
    pub events: u64,
    /// End of the run on the scenario clock.
    pub end_time: f64,
    pub condition_hit: bool,
    pub columns: Vec<String>,
    /// `values[i]` is the observation at grid point `i`.
    pub values: Vec<Vec<f64>>,
}

impl ReplicaPath {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|x| x == name)?;
        Some(self.values.iter().map(|v| v[c]).collect())
    }
}

fn sample_run<M: Model>(
    model: &M,
    initial: &M::State,
    stop: &StopPredicate,
    time_scale: f64,
    grid: &[f64],
    seed: u64,
    columns: Vec<String>,
    observe: impl Fn(&M::State) -> Vec<f64>,
) -> Result<ReplicaPath> {
    let mut sampler = GridSampler::new(grid.to_vec(), time_scale, &observe);
    let out = Simulator::new(model, seed).run(initial, stop, &mut sampler)?;
    let last = observe(&out.final_state);
    // a stopped process stays in its final state
    let values = sampler.finish().into_iter().map(|v| v.unwrap_or_else(|| last.clone())).collect();
    Ok(ReplicaPath {
        seed,
        events: out.events,
        end_time: out.end_time / time_scale,
        condition_hit: out.outcome == Outcome::Condition,
        columns,
        values,
    })
}

pub fn full_columns(j: usize) -> Vec<String> {
    let mut c: Vec<String> = ["f", "s", "z"].iter().map(|s| s.to_string()).collect();
    c.extend((1..=j).map(|i| format!("u_{i}")));
    c.extend((1..=j).map(|i| format!("r_{i}")));
    c.push("m".into());
    c
}

/// Runs replica `k` of `scenario` at population size `n`, sampling on `grid`
/// (scenario clock).
pub fn run_replica(scenario: &Scenario, n: u64, k: usize, grid: &[f64]) -> Result<ReplicaPath> {
    let seed = replica_seed(scenario.base_seed ^ n.rotate_left(32), k as u64);
    let stop = scenario.predicate(n);
    let scale = scenario.timescale.factor(n);
    let initial = scenario.initial_state(n)?;
    let names = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match (&scenario.model, initial) {
        (ModelSpec::Full, InitialState::Full(x0)) => {
            let p = scenario.params_at(n)?;
            let model = FullModel::new(p.clone())?;
            sample_run(&model, &x0, &stop, scale, grid, seed, full_columns(p.j()), |x| {
                let mut v = vec![x.f as f64, x.s as f64, x.z as f64];
                v.extend(x.u.iter().map(|&b| b as u8 as f64));
                v.extend(x.r.iter().map(|&r| r as f64));
                v.push(psi(x, &p).map(|m| m as f64).unwrap_or(f64::NAN));
                v
            })
        }
        (ModelSpec::Auxiliary, InitialState::Aux(x0)) => {
            let model = AuxModel::new(scenario.params_at(n)?)?;
            sample_run(&model, &x0, &stop, scale, grid, seed, names(&["f", "s", "z"]), |x| {
                vec![x.f as f64, x.s as f64, x.z as f64]
            })
        }
        (ModelSpec::LimitChain { rho_m }, InitialState::Chain(x0)) => {
            let p = scenario.params_at(n)?;
            let model = LimitChain::new(scenario.chain_params(&p, *rho_m))?;
            sample_run(&model, &x0, &stop, scale, grid, seed, names(&["s", "z"]), |x| vec![x.s as f64, x.z as f64])
        }
        (ModelSpec::BirthDeath { kappa_i, kappa_o, .. }, InitialState::Count(y0)) => {
            let model = BirthDeath { kappa_i: *kappa_i, kappa_o: *kappa_o };
            sample_run(&model, &y0, &stop, scale, grid, seed, names(&["y"]), |y| vec![*y as f64])
        }
        (ModelSpec::Mm1 { arrival, service, .. }, InitialState::Count(q0)) => {
            let model = MM1 { arrival: *arrival, service: *service };
            sample_run(&model, &q0, &stop, scale, grid, seed, names(&["q"]), |q| vec![*q as f64])
        }
        (m, s) => bail!("initial state {s:?} does not fit model {}", m.label()),
    }
}

pub fn path_table(scenario: &str, n: u64, k: usize, grid: &[f64], path: &ReplicaPath) -> Table {
    let mut header = vec!["time".to_string()];
    header.extend(path.columns.iter().cloned());
    let rows = grid
        .iter()
        .zip(&path.values)
        .map(|(t, v)| {
            let mut r = vec![fmt_num(*t)];
            r.extend(v.iter().map(|x| fmt_num(*x)));
            r
        })
        .collect();
    Table { name: format!("{scenario}-n{n}-r{k}"), header, rows }
}

pub fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Runs all replicas at every `N` of the scenario and records summaries, plus
/// the sampled paths of the first `observe.trajectories` replicas.
pub fn run_scenario(scenario: &Scenario) -> RunResult {
    let mut result = RunResult::new(&scenario.name);
    let grid = scenario.grid();
    for &n in &scenario.n {
        let runs = par_replicas(scenario.replicas, |k| run_replica(scenario, n, k, &grid));
        for (k, run) in runs.into_iter().enumerate() {
            match run {
                Ok(path) => record_path(&mut result, scenario, n, k, &grid, &path),
                Err(e) => {
                    result.error.get_or_insert(format!("N = {n}, replica {k}: {e:#}"));
                }
            }
        }
    }
    result
}

fn record_path(result: &mut RunResult, scenario: &Scenario, n: u64, k: usize, grid: &[f64], path: &ReplicaPath) {
    result.row(n, k, "seed", path.seed as f64);
    result.row(n, k, "events", path.events as f64);
    result.row(n, k, "end_time", path.end_time);
    result.row(n, k, "condition_hit", path.condition_hit as u8 as f64);
    if let Some(last) = path.values.last() {
        for (c, v) in path.columns.iter().zip(last) {
            result.row(n, k, &format!("final_{c}"), *v);
        }
    }
    if k < scenario.observe().trajectories {
        result.tables.push(path_table(&scenario.name, n, k, grid, path));
    }
}

/// Fluid reference for an auxiliary scenario at population size `n`, on the
/// raw clock for `c_m > 1` and on the accelerated clock for `c_m < 1`.
pub enum Fluid {
    Drain(OdeSolution),
    Free(OdeSolution),
}

pub fn fluid_for(scenario: &Scenario, n: u64, step: f64) -> Result<Fluid> {
    let p = scenario.params_at(n)?;
    let fp = FluidParams::from_model(&p);
    let InitialState::Aux(x0) = scenario.initial_state(n)? else {
        bail!("fluid limits are defined for the auxiliary model");
    };
    let raw_end = scenario.stop.horizon * scenario.timescale.factor(n);
    let nf = n as f64;
    if fp.c_m > 1.0 {
        Ok(Fluid::Drain(integrate_subcritical(x0.s as f64 / nf, x0.z as f64 / nf, &fp, raw_end, step)?))
    } else if fp.c_m < 1.0 {
        Ok(Fluid::Free(integrate_supercritical(x0.f as f64 / nf, &fp, raw_end / nf, step)?))
    } else {
        bail!("no fluid limit at c_m = 1")
    }
}

/// Sup over the grid of the distance between the scaled path and the fluid
/// solution: `max(|S/N - s|, |Z/N - z|)` for the drain, `|F/N - f|` otherwise.
pub fn fluid_sup_error(scenario: &Scenario, n: u64, fluid: &Fluid, grid: &[f64], path: &ReplicaPath) -> Result<f64> {
    let nf = n as f64;
    let factor = scenario.timescale.factor(n);
    let mut sup: f64 = 0.0;
    for (t, v) in grid.iter().zip(&path.values) {
        let raw = t * factor;
        let err = match fluid {
            Fluid::Drain(sol) => {
                let es = (v[1] / nf - sol.value_at(raw, 0)?).abs();
                let ez = (v[2] / nf - sol.value_at(raw, 1)?).abs();
                es.max(ez)
            }
            Fluid::Free(sol) => (v[0] / nf - sol.value_at(raw / nf, 0)?).abs(),
        };
        sup = sup.max(err);
    }
    Ok(sup)
}

/// Per-N summary of a sweep, used by the trend verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: u64,
    pub paths: Vec<ReplicaPath>,
    pub sup_errors: Vec<f64>,
    pub stop_times: Vec<f64>,
}

/// Runs the scenario at each population size in `n_list` and attaches trend
/// verdicts: fluid sup-error decreasing in `N` for auxiliary models, and a
/// bounded spread of `mean(stop time) / N` when the run stops on a condition.
pub fn sweep_n(scenario: &Scenario, n_list: &[u64], ode_step: f64) -> Result<(RunResult, Vec<SweepPoint>)> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        bail!("N list must be strictly increasing");
    }
    let mut result = RunResult::new(&scenario.name);
    let grid = scenario.grid();
    let mut points = Vec::new();
    for &n in n_list {
        let runs = par_replicas(scenario.replicas, |k| run_replica(scenario, n, k, &grid));
        let mut paths = Vec::new();
        for (k, run) in runs.into_iter().enumerate() {
            match run {
                Ok(path) => {
                    record_path(&mut result, scenario, n, k, &grid, &path);
                    paths.push(path);
                }
                Err(e) => {
                    result.error.get_or_insert(format!("N = {n}, replica {k}: {e:#}"));
                }
            }
        }
        let mut sup_errors = Vec::new();
        if matches!(scenario.model, ModelSpec::Auxiliary) {
            let fluid = fluid_for(scenario, n, ode_step)?;
            for (k, path) in paths.iter().enumerate() {
                let e = fluid_sup_error(scenario, n, &fluid, &grid, path)?;
                result.row(n, k, "sup_error", e);
                sup_errors.push(e);
            }
        }
        let stop_times = if scenario.stop.condition != ConditionKind::None {
            paths.iter().filter(|p| p.condition_hit).map(|p| p.end_time).collect()
        } else {
            Vec::new()
        };
        points.push(SweepPoint { n, paths, sup_errors, stop_times });
    }
    let ns: Vec<u64> = points.iter().map(|p| p.n).collect();
    if points.iter().all(|p| !p.sup_errors.is_empty()) {
        let v = points.iter().map(|p| mean(&p.sup_errors)).collect();
        result.trends.push(Trend::decreasing("mean_sup_error", ns.clone(), v));
    }
    if scenario.stop.condition != ConditionKind::None && points.iter().all(|p| !p.stop_times.is_empty()) {
        let v = points.iter().map(|p| mean(&p.stop_times) / p.n as f64).collect();
        result.trends.push(Trend::bounded_ratio("mean_stop_time_over_n", ns, v, 2.0));
    }
    if let Some(fig) = sweep_figure(scenario, &points) {
        result.figures.push(fig);
    }
    Ok((result, points))
}

fn sweep_figure(scenario: &Scenario, points: &[SweepPoint]) -> Option<Figure> {
    let with_errors: Vec<_> = points.iter().filter(|p| !p.sup_errors.is_empty()).collect();
    if with_errors.is_empty() {
        return None;
    }
    let series = Series::line(
        "mean sup error",
        with_errors.iter().map(|p| (p.n as f64, mean(&p.sup_errors))).collect(),
    );
    Some(Figure::new(&format!("{}-sup-error", scenario.name), "Fluid-limit error against N", "N", "mean sup error")
        .with(series))
}

/// Parses a comma-separated list of population sizes.
pub fn parse_n_list(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad population size {s:?}")))
        .collect()
}
