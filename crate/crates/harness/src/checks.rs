//! The verification suite: one check per scenario kind, each producing
//! verdicts with the statistics behind them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use sixs_core::averaging::{limit_chain_equivalence_test, limit_chain_occupation};
use sixs_core::engine::Observer;
use sixs_core::fluid::{equilibrium_free_fraction, step_halving_gap, FluidParams};
use sixs_core::model::psi;
use sixs_core::occupation::{fit, poisson_pmf, tv_between, DiscretePmf, OccupationMeasure, OccupationRecorder};
use sixs_core::reference::{bd_grid_samples, dominance_check, hitting_time_zero, mm1_grid_samples, DominanceReport, GridSamples, Quantiles};
use sixs_core::transitions::apply_delta;
use sixs_core::{
    enumerate_transitions_full, replica_seed, AuxModel, AuxState, BirthDeathParams, ChainState, Error, FullModel,
    FullState, MM1Params, ModelParams, Simulator, StopPredicate, Transition,
};

use crate::report::{Figure, Series, Table, VerdictFile};
use crate::run::{fluid_for, max_over_min, mean, par_replicas, run_replica, sweep_n, Fluid, RunResult, Verdict};
use crate::scenario::{builtin, uniform_grid, Check, InitialState, ModelSpec, Regime, Scenario};

/// Derives an independent seed for a sub-stream of a scenario.
fn sub_seed(base: u64, tag: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ tag
}

fn collect<T>(runs: Vec<Result<T>>) -> Result<Vec<T>> {
    runs.into_iter().enumerate().map(|(k, r)| r.with_context(|| format!("replica {k}"))).collect()
}

fn pmf_figure(name: &str, title: &str, emp: &OccupationMeasure<u64>, reference: &DiscretePmf<u64>) -> Figure {
    let hi = emp.weights.keys().chain(reference.mass.keys()).cloned().max().unwrap_or(0);
    Figure::new(name, title, "value", "fraction of time")
        .with(Series::points("empirical", (0..=hi).map(|k| (k as f64, emp.fraction(&k))).collect()))
        .with(Series::line("reference", (0..=hi).map(|k| (k as f64, reference.get(&k))).collect()))
}

/// Runs the check attached to `scenario`.
pub fn run_check(scenario: &Scenario) -> Result<RunResult> {
    let check = scenario.check.as_ref().with_context(|| format!("scenario {} has no check", scenario.name))?;
    match check {
        Check::Conservation { events } => conservation(scenario, *events),
        Check::GeneratorOracle { events, z_max, tolerance } => generator_oracle(scenario, *events, *z_max, *tolerance),
        Check::SubcriticalAveraging { window, free_tolerance, chain_tolerance } => {
            subcritical_averaging(scenario, *window, *free_tolerance, *chain_tolerance)
        }
        Check::SubcriticalDrain { tolerance, ode_step } => fluid_trend(scenario, *tolerance, *ode_step, None),
        Check::FluidLimit { tolerance, ode_step, halving_tolerance } => {
            fluid_trend(scenario, *tolerance, *ode_step, Some(*halving_tolerance))
        }
        Check::StationaryEquilibrium { window, free_tolerance, sixs_tolerance } => {
            stationary_equilibrium(scenario, *window, *free_tolerance, *sixs_tolerance)
        }
        Check::ExponentialSaturation { ratio_limit, window, max_deficit, coverage } => {
            exponential_saturation(scenario, *ratio_limit, *window, *max_deficit, *coverage)
        }
        Check::ExponentialLimitLaws { window, free_tolerance, chain_tolerance } => {
            exponential_limit_laws(scenario, *window, *free_tolerance, *chain_tolerance)
        }
        Check::BirthDeath { .. } => birth_death(scenario, check),
        Check::CouplingSupercritical { level, eta0_factor, eta1_factor, quantiles, alpha, bound_replicas } => {
            let q = Quantiles { model: quantiles[0], bound: quantiles[1], alpha: *alpha };
            coupling_supercritical(scenario, *level, *eta0_factor, *eta1_factor, q, *bound_replicas)
        }
        Check::CouplingStationary { quantiles, alpha, bound_replicas } => {
            let q = Quantiles { model: quantiles[0], bound: quantiles[1], alpha: *alpha };
            coupling_stationary(scenario, q, *bound_replicas)
        }
        Check::Determinism { target } => determinism(scenario, target),
    }
}

/// Runs every check and adds a coverage verdict requiring all four regimes.
pub fn verify(scenarios: &[Scenario], mut progress: impl FnMut(&RunResult)) -> RunResult {
    let mut all = RunResult::new("verify");
    let mut covered = BTreeSet::new();
    for s in scenarios.iter().filter(|s| s.check.is_some()) {
        let result = match run_check(s) {
            Ok(r) => r,
            Err(e) => {
                let mut r = RunResult::new(&s.name);
                r.error = Some(format!("{}: {e:#}", s.name));
                let mut v = Verdict::new(s, s.check.as_ref().unwrap().label());
                v.require("check executed", false);
                r.verdicts.push(v);
                r
            }
        };
        if result.error.is_none() {
            if let Some(regime) = s.regime() {
                covered.insert(regime);
            }
        }
        progress(&result);
        all.absorb(result);
    }
    let mut v = Verdict {
        criterion: None,
        scenario: "verify".into(),
        check: "regime-coverage".into(),
        pass: true,
        metrics: BTreeMap::new(),
        notes: vec![],
    };
    for regime in Regime::ALL {
        v.require(&format!("{regime:?} scenario ran"), covered.contains(&regime));
    }
    all.verdicts.push(v);
    all
}

/// Criterion 1: polymerase conservation and promoter normalization, checked
/// after every event against an independently maintained mRNA count.
fn conservation(s: &Scenario, events: u64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let mut verdict = Verdict::new(s, "conservation");
    for &n in &s.n {
        let p = s.params_at(n)?;
        let model = FullModel::new(p.clone())?;
        let InitialState::Full(mut x) = s.initial_state(n)? else { bail!("conservation needs the full model") };
        let mut sim = Simulator::new(&model, replica_seed(s.base_seed, 0));
        let mut on_mrna = psi(&x, &p)? as i64;
        let (mut mass, mut normal, mut bounds) = (0u64, 0u64, 0u64);
        let mut elapsed = 0.0;
        for _ in 0..events {
            let (dwell, ev) = sim.step_in_place(&mut x)?;
            elapsed += dwell;
            match ev.transition {
                Transition::MrnaBind => on_mrna += 1,
                Transition::MrnaRelease => on_mrna -= 1,
                _ => {}
            }
            let promoters = x.u.iter().filter(|&&b| b).count() as i64;
            let elongating: u64 = x.r.iter().sum();
            let total = x.f as i64 + x.s as i64 + promoters + elongating as i64 + on_mrna;
            if total != n as i64 {
                mass += 1;
            }
            if x.f > 0 && !x.u.iter().all(|&b| b) {
                normal += 1;
            }
            if on_mrna < 0 || on_mrna as u64 > p.cap_m || x.r.iter().zip(&p.cap_r).any(|(r, c)| r > c) {
                bounds += 1;
            }
        }
        result.row(n, 0, "mass_violations", mass as f64);
        result.row(n, 0, "normalization_violations", normal as f64);
        result.row(n, 0, "bound_violations", bounds as f64);
        result.row(n, 0, "simulated_time", elapsed);
        verdict.metric("events", events as f64);
        verdict.metric("mass_violations", mass as f64);
        verdict.metric("normalization_violations", normal as f64);
        verdict.metric("bound_violations", bounds as f64);
        verdict.require(&format!("N={n}: no conservation violations"), mass == 0);
        verdict.require(&format!("N={n}: f > 0 implies all promoters busy"), normal == 0);
        verdict.require(&format!("N={n}: capacities respected"), bounds == 0);
    }
    result.verdicts.push(verdict);
    Ok(result)
}

/// States reachable from `x0` with free 6S at most `z_max`, and the generator
/// restricted to them. A freed polymerase that finds an empty promoter goes
/// to one chosen uniformly, which splits the rate.
pub fn enumerate_generator(p: &ModelParams, x0: &FullState, z_max: u64) -> Result<(Vec<FullState>, DMatrix<f64>)> {
    let mut index: HashMap<FullState, usize> = HashMap::new();
    let mut states = vec![x0.clone()];
    index.insert(x0.clone(), 0);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let x = states[next].clone();
        for t in enumerate_transitions_full(&x, p)? {
            let mut y = x.clone();
            apply_delta(&mut y, t.label);
            if y.z > z_max {
                continue;
            }
            let empty: Vec<usize> = (0..y.u.len()).filter(|&i| !y.u[i]).collect();
            let targets: Vec<FullState> = if y.f > 0 && !empty.is_empty() {
                empty
                    .iter()
                    .map(|&i| {
                        let mut w = y.clone();
                        w.u[i] = true;
                        w.f -= 1;
                        w
                    })
                    .collect()
            } else {
                vec![y]
            };
            let share = t.rate / targets.len() as f64;
            for w in targets {
                let j = *index.entry(w.clone()).or_insert_with(|| {
                    states.push(w);
                    states.len() - 1
                });
                edges.push((next, j, share));
            }
        }
        next += 1;
    }
    let size = states.len();
    let mut q = DMatrix::zeros(size, size);
    for (i, j, r) in edges {
        if i != j {
            q[(i, j)] += r;
            q[(i, i)] -= r;
        }
    }
    Ok((states, q))
}

/// Solves `pi Q = 0`, `sum(pi) = 1`.
pub fn stationary_vector(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let size = q.nrows();
    let mut a = q.transpose();
    for j in 0..size {
        a[(size - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(size);
    b[size - 1] = 1.0;
    a.lu().solve(&b).context("generator is singular")
}

/// Criterion 2.
fn generator_oracle(s: &Scenario, events: u64, z_max: u64, tolerance: f64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let n = s.n[0];
    let p = s.params_at(n)?;
    let InitialState::Full(x0) = s.initial_state(n)? else { bail!("generator oracle needs the full model") };
    let (states, q) = enumerate_generator(&p, &x0, z_max)?;
    let pi = stationary_vector(&q)?;
    let exact = DiscretePmf { mass: states.iter().cloned().zip(pi.iter().cloned()).collect::<BTreeMap<_, _>>() };

    let model = FullModel::new(p)?;
    let mut sim = Simulator::new(&model, replica_seed(s.base_seed, 0));
    let mut rec = OccupationRecorder::new((0.0, f64::INFINITY), |x: &FullState| x.clone());
    let mut x = x0.clone();
    let mut t = 0.0;
    rec.record(0.0, &x);
    for _ in 0..events {
        let (dwell, _) = sim.step_in_place(&mut x)?;
        t += dwell;
        rec.record(t, &x);
    }
    rec.close(t, &x);
    let occ = rec.finish();
    let tv = tv_between(&occ.to_pmf()?, &exact);
    let mut v = Verdict::new(s, "generator-oracle");
    v.metric("states", states.len() as f64).metric("events", events as f64).metric("tv", tv).metric("tolerance", tolerance);
    v.require(&format!("TV {tv:.4} < {tolerance}"), tv < tolerance);
    result.row(n, 0, "tv", tv);
    result.row(n, 0, "states", states.len() as f64);
    result.tables.push(Table {
        name: format!("{}-stationary", s.name),
        header: vec!["state".into(), "exact".into(), "empirical".into()],
        rows: exact
            .mass
            .iter()
            .map(|(x, pr)| vec![format!("{:?}", (x.f, x.s, x.z, &x.u, &x.r)).replace(',', ";"), pr.to_string(), occ.fraction(x).to_string()])
            .collect(),
    });
    result.verdicts.push(v);
    Ok(result)
}

/// Criterion 3.
fn subcritical_averaging(s: &Scenario, window: [f64; 2], free_tol: f64, chain_tol: f64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let n = s.n[0];
    let p = s.params_at(n)?;
    let rho_m = p.derived().rho_m_aux_sub.map_err(|e| anyhow::anyhow!("{e}"))?;
    let model = AuxModel::new(p.clone())?;
    let InitialState::Aux(x0) = s.initial_state(n)? else { bail!("needs the auxiliary model") };
    let scale = s.timescale.factor(n);
    let raw = (window[0] * scale, window[1] * scale);
    let runs = collect(par_replicas(s.replicas, |k| {
        let mut free = OccupationRecorder::new(raw, |x: &AuxState| x.f);
        let mut slow = OccupationRecorder::new(raw, |x: &AuxState| (x.s, x.z));
        Simulator::new(&model, replica_seed(s.base_seed, k as u64)).run(
            &x0,
            &StopPredicate::horizon(raw.1),
            (&mut free, &mut slow),
        )?;
        Ok((free.finish(), slow.finish()))
    }))?;
    let chain_params = s.chain_params(&p, rho_m);
    let chains = collect(par_replicas(s.replicas, |k| {
        Ok(limit_chain_occupation(
            chain_params,
            ChainState { s: 0, z: 0 },
            raw,
            replica_seed(sub_seed(s.base_seed, 0xC4), k as u64),
        )?)
    }))?;
    let mut free = OccupationMeasure::empty(raw);
    let mut slow = OccupationMeasure::empty(raw);
    for (f, sz) in &runs {
        free.absorb(f);
        slow.absorb(sz);
    }
    let mut chain = OccupationMeasure::empty(raw);
    for c in &chains {
        chain.absorb(c);
    }
    let reference = poisson_pmf(rho_m)?;
    let free_fit = fit(&free, &reference, free_tol)?;
    let chain_fit = limit_chain_equivalence_test(&slow, &chain, raw.0, chain_tol)?;
    let mut v = Verdict::new(s, "subcritical-averaging");
    v.metric("rho_m", rho_m)
        .metric("free_tv", free_fit.statistic)
        .metric("chain_tv", chain_fit.statistic)
        .metric("dwell", free.total);
    v.require(&format!("free TV {:.4} < {free_tol}", free_fit.statistic), free_fit.pass);
    v.require(&format!("(S, Z) TV {:.4} < {chain_tol}", chain_fit.statistic), chain_fit.pass);
    result.figures.push(pmf_figure(&format!("{}-free", s.name), "Free polymerases vs Poisson", &free, &reference));
    result.verdicts.push(v);
    Ok(result)
}

/// Criteria 4 and 5: sup-error against the fluid solution decreasing in `N`
/// and below `tolerance` at the largest `N`.
fn fluid_trend(s: &Scenario, tolerance: f64, ode_step: f64, halving: Option<f64>) -> Result<RunResult> {
    let (mut result, points) = sweep_n(s, &s.n, ode_step)?;
    if let Some(e) = &result.error {
        bail!("sweep failed: {e}");
    }
    let label = if halving.is_some() { "fluid-limit" } else { "subcritical-drain" };
    let mut v = Verdict::new(s, label);
    let means: Vec<f64> = points.iter().map(|p| mean(&p.sup_errors)).collect();
    for (p, m) in points.iter().zip(&means) {
        v.metric(&format!("mean_sup_error_n{}", p.n), *m);
    }
    let trend = &result.trends[0];
    v.require(&format!("mean sup error {} over N", trend.status), trend.status == "decreasing");
    let last = *means.last().unwrap();
    v.require(&format!("mean sup error {last:.4} < {tolerance} at largest N"), last < tolerance);
    let n = *s.n.last().unwrap();
    let fluid = fluid_for(s, n, ode_step)?;
    if let Some(tol) = halving {
        let fine = fluid_for(s, n, ode_step / 2.0)?;
        let (Fluid::Free(a), Fluid::Free(b)) = (&fluid, &fine) else { bail!("fluid-limit check needs c_m < 1") };
        let gap = step_halving_gap(a, b);
        v.metric("step_halving_gap", gap);
        v.require(&format!("RK4 step-halving gap {gap:.2e} < {tol:.0e}"), gap < tol);
    }
    let grid = s.grid();
    let path = &points.last().unwrap().paths[0];
    let nf = n as f64;
    let scale = s.timescale.factor(n);
    let fig = match &fluid {
        Fluid::Free(sol) => Figure::new(&format!("{}-path", s.name), &format!("Free fraction, N = {n}"), "t", "F/N")
            .with(Series::steps("simulation", grid.iter().zip(&path.values).map(|(t, x)| (*t, x[0] / nf)).collect()))
            .with(Series::line("fluid limit", sol.times.iter().map(|&t| (t, sol.value_at(t, 0).unwrap())).step_by(10).collect())),
        Fluid::Drain(sol) => Figure::new(&format!("{}-path", s.name), &format!("Sequestered and free 6S, N = {n}"), "t", "fraction of N")
            .with(Series::steps("S/N", grid.iter().zip(&path.values).map(|(t, x)| (*t, x[1] / nf)).collect()))
            .with(Series::steps("Z/N", grid.iter().zip(&path.values).map(|(t, x)| (*t, x[2] / nf)).collect()))
            .with(Series::line("s(t)", sol.times.iter().map(|&t| (t / scale, sol.value_at(t, 0).unwrap())).step_by(10).collect()))
            .with(Series::line("z(t)", sol.times.iter().map(|&t| (t / scale, sol.value_at(t, 1).unwrap())).step_by(10).collect())),
    };
    result.figures.push(fig);
    result.verdicts.push(v);
    Ok(result)
}

/// Criterion 6.
fn stationary_equilibrium(s: &Scenario, window: [f64; 2], free_tol: f64, sixs_tol: f64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let n = s.n[0];
    let p = s.params_at(n)?;
    let fp = FluidParams::from_model(&p);
    let target = equilibrium_free_fraction(&fp)?;
    let rho_6 = fp.rho_6()?;
    let model = FullModel::new(p)?;
    let InitialState::Full(x0) = s.initial_state(n)? else { bail!("needs the full model") };
    let scale = s.timescale.factor(n);
    let grid = uniform_grid(window[0], window[1], s.observe().grid);
    let nf = n as f64;
    let runs = collect(par_replicas(s.replicas, |k| {
        let mut sampler = sixs_core::occupation::GridSampler::new(grid.clone(), scale, |x: &FullState| x.f);
        let mut sixs = OccupationRecorder::scaled((window[0], window[1]), scale, |x: &FullState| x.z);
        Simulator::new(&model, replica_seed(s.base_seed, k as u64)).run(
            &x0,
            &StopPredicate::horizon(window[1] * scale),
            (&mut sampler, &mut sixs),
        )?;
        let free: Vec<f64> = sampler.finish().into_iter().map(|v| v.unwrap_or(0) as f64 / nf).collect();
        Ok((free, sixs.finish()))
    }))?;
    let mut sup: f64 = 0.0;
    let mut z = OccupationMeasure::empty((window[0], window[1]));
    for (k, (free, occ)) in runs.iter().enumerate() {
        let e = free.iter().map(|f| (f - target).abs()).fold(0.0, f64::max);
        result.row(n, k, "sup_free_error", e);
        sup = sup.max(e);
        z.absorb(occ);
    }
    let reference = poisson_pmf(rho_6)?;
    let z_fit = fit(&z, &reference, sixs_tol)?;
    let mut v = Verdict::new(s, "stationary-equilibrium");
    v.metric("free_target", target).metric("sup_free_error", sup).metric("sixs_tv", z_fit.statistic);
    v.require(&format!("sup |F/N - {target}| = {sup:.4} < {free_tol} over the window"), sup < free_tol);
    v.require(&format!("free 6S TV {:.4} < {sixs_tol}", z_fit.statistic), z_fit.pass);
    result.figures.push(pmf_figure(&format!("{}-sixs", s.name), "Free 6S RNA vs Poisson", &z, &reference));
    result.verdicts.push(v);
    Ok(result)
}

/// Running maximum of the largest rRNA deficit.
struct Deficit<'a> {
    caps: &'a [u64],
    max: u64,
}

impl Observer<FullState> for Deficit<'_> {
    fn record(&mut self, _: f64, x: &FullState) {
        let d = x.r.iter().zip(self.caps).map(|(r, c)| c - r).max().unwrap_or(0);
        self.max = self.max.max(d);
    }
}

/// Runs to saturation, then continues for `window` feeding `observer`.
/// Returns the saturation time, or `None` if the event budget ran out first.
fn saturate_then<O: Observer<FullState>>(
    model: &FullModel,
    x0: &FullState,
    stop: &StopPredicate,
    window: f64,
    seed: u64,
    observer: O,
) -> Result<Option<f64>> {
    let mut sim = Simulator::new(model, seed);
    let first = match sim.run(x0, stop, ()) {
        Ok(out) => out,
        Err(Error::BudgetExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if first.outcome != sixs_core::Outcome::Condition {
        return Ok(None);
    }
    sim.run(&first.final_state, &StopPredicate::horizon(window), observer)?;
    Ok(Some(first.end_time))
}

/// Criterion 7.
fn exponential_saturation(s: &Scenario, ratio_limit: f64, window: f64, max_deficit: u64, coverage: f64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let mut v = Verdict::new(s, "exponential-saturation");
    let mut ratios = Vec::new();
    for &n in &s.n {
        let p = s.params_at(n)?;
        let model = FullModel::new(p.clone())?;
        let InitialState::Full(x0) = s.initial_state(n)? else { bail!("needs the full model") };
        let stop = s.predicate(n);
        let runs = collect(par_replicas(s.replicas, |k| {
            let mut d = Deficit { caps: &p.cap_r, max: 0 };
            let tau = saturate_then(&model, &x0, &stop, window, replica_seed(s.base_seed ^ n.rotate_left(32), k as u64), &mut d)?;
            Ok((tau, d.max))
        }))?;
        let finite: Vec<f64> = runs.iter().filter_map(|(t, _)| *t).collect();
        let within = runs.iter().filter(|(t, d)| t.is_some() && *d < max_deficit).count();
        for (k, (tau, d)) in runs.iter().enumerate() {
            result.row(n, k, "saturation_time", tau.unwrap_or(f64::INFINITY));
            result.row(n, k, "max_deficit", *d as f64);
        }
        let frac = within as f64 / runs.len() as f64;
        let ratio = mean(&finite) / n as f64;
        ratios.push(ratio);
        v.metric(&format!("mean_tau_over_n_n{n}"), ratio);
        v.metric(&format!("deficit_coverage_n{n}"), frac);
        v.require(&format!("N={n}: saturation reached in all {} replicas", runs.len()), finite.len() == runs.len());
        v.require(&format!("N={n}: deficit < {max_deficit} in {frac:.3} >= {coverage} of replicas"), frac >= coverage);
    }
    let spread = max_over_min(&ratios);
    v.metric("tau_ratio_spread", spread);
    v.require(&format!("max/min of mean(tau)/N = {spread:.3} < {ratio_limit}"), s.n.len() >= 2 && spread < ratio_limit);
    result.figures.push(
        Figure::new(&format!("{}-tau", s.name), "Saturation time over N", "N", "mean(tau)/N")
            .with(Series::line("mean(tau)/N", s.n.iter().zip(&ratios).map(|(n, r)| (*n as f64, *r)).collect())),
    );
    result.verdicts.push(v);
    Ok(result)
}

/// Criterion 8.
fn exponential_limit_laws(s: &Scenario, window: f64, free_tol: f64, chain_tol: f64) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let n = s.n[0];
    let p = s.params_at(n)?;
    let rho_m = p.derived().rho_m_exp.map_err(|e| anyhow::anyhow!("{e}"))?;
    let model = FullModel::new(p.clone())?;
    let InitialState::Full(x0) = s.initial_state(n)? else { bail!("needs the full model") };
    let stop = s.predicate(n);
    let span = (0.0, window);
    let runs = collect(par_replicas(s.replicas, |k| {
        let mut free = OccupationRecorder::new(span, |x: &FullState| x.f);
        let mut slow = OccupationRecorder::new(span, |x: &FullState| (x.s, x.z));
        let tau = saturate_then(&model, &x0, &stop, window, replica_seed(s.base_seed, k as u64), (&mut free, &mut slow))?
            .context("saturation not reached")?;
        Ok((tau, free.finish(), slow.finish()))
    }))?;
    // the chain gets a short burn-in from the origin
    let burn = 10.0;
    let chain_params = s.chain_params(&p, rho_m);
    let chains = collect(par_replicas(s.replicas, |k| {
        Ok(limit_chain_occupation(
            chain_params,
            ChainState { s: 0, z: 0 },
            (burn, burn + window),
            replica_seed(sub_seed(s.base_seed, 0xE8), k as u64),
        )?)
    }))?;
    let mut free = OccupationMeasure::empty(span);
    let mut slow = OccupationMeasure::empty(span);
    for (k, (tau, f, sz)) in runs.iter().enumerate() {
        result.row(n, k, "saturation_time", *tau);
        free.absorb(f);
        slow.absorb(sz);
    }
    let mut chain = OccupationMeasure::empty(span);
    for c in &chains {
        chain.absorb(c);
    }
    let reference = poisson_pmf(rho_m)?;
    let free_fit = fit(&free, &reference, free_tol)?;
    // windows are measured from each replica's saturation time
    let chain_fit = limit_chain_equivalence_test(&slow, &chain, 0.0, chain_tol)?;
    let mut v = Verdict::new(s, "exponential-limit-laws");
    v.metric("rho_m_exp", rho_m).metric("free_tv", free_fit.statistic).metric("chain_tv", chain_fit.statistic);
    v.require(&format!("free TV {:.4} < {free_tol}", free_fit.statistic), free_fit.pass);
    v.require(&format!("(S, Z) TV {:.4} < {chain_tol}", chain_fit.statistic), chain_fit.pass);
    result.figures.push(pmf_figure(&format!("{}-free", s.name), "Free polymerases after saturation", &free, &reference));
    result.verdicts.push(v);
    Ok(result)
}

/// Criterion 9.
fn birth_death(s: &Scenario, check: &Check) -> Result<RunResult> {
    let Check::BirthDeath { events, tolerance, hitting_kappa_i, hitting_kappa_o, hitting_levels, hitting_replicas, spread } = check
    else {
        unreachable!()
    };
    let ModelSpec::BirthDeath { kappa_i, kappa_o, y0 } = s.model else { bail!("needs the birth-death model") };
    let mut result = RunResult::new(&s.name);
    let model = sixs_core::reference::BirthDeath { kappa_i, kappa_o };
    let mut sim = Simulator::new(&model, replica_seed(s.base_seed, 0));
    let mut rec = OccupationRecorder::new((0.0, f64::INFINITY), |y: &u64| *y);
    let (mut y, mut t) = (y0, 0.0);
    rec.record(0.0, &y);
    for _ in 0..*events {
        let (dwell, _) = sim.step_in_place(&mut y)?;
        t += dwell;
        rec.record(t, &y);
    }
    rec.close(t, &y);
    let occ = rec.finish();
    let reference = poisson_pmf(kappa_i / kappa_o)?;
    let stat = fit(&occ, &reference, *tolerance)?;
    let mut v = Verdict::new(s, "birth-death");
    v.metric("stationary_tv", stat.statistic).metric("stationary_mean", occ.mean());
    v.require(&format!("stationary TV {:.4} < {tolerance}", stat.statistic), stat.pass);

    let mut normalized = Vec::new();
    for (i, &level) in hitting_levels.iter().enumerate() {
        let params = BirthDeathParams { kappa_i: *hitting_kappa_i, kappa_o: *hitting_kappa_o, y0: level };
        let sample = hitting_time_zero(params, *hitting_replicas, sub_seed(s.base_seed, i as u64 + 1))?;
        v.metric(&format!("mean_h_over_ln_n{level}"), sample.normalized_mean);
        normalized.push(sample.normalized_mean);
        result.tables.push(Table {
            name: format!("{}-hitting-n{level}", s.name),
            header: vec!["replica".into(), "value".into()],
            rows: sample.values.iter().enumerate().map(|(k, x)| vec![k.to_string(), x.to_string()]).collect(),
        });
    }
    let ratio = max_over_min(&normalized);
    v.metric("hitting_spread", ratio - 1.0);
    v.require(&format!("mean(H)/ln N pairwise within {:.0}% (max/min = {ratio:.4})", spread * 100.0), ratio <= 1.0 + spread);
    result.figures.push(pmf_figure(&format!("{}-stationary", s.name), "M/M/inf occupation vs Poisson", &occ, &reference));
    result.verdicts.push(v);
    Ok(result)
}

/// Grid points where the raw empirical quantiles cross, violation or not.
fn crossings(r: &DominanceReport) -> usize {
    r.points.iter().filter(|p| p.model_quantile > p.bound_quantile).count()
}

fn dominance_figure(name: &str, title: &str, model: &GridSamples, bound: &GridSamples, q: Quantiles) -> Figure {
    let curve = |g: &GridSamples, p: f64| {
        g.times.iter().zip(&g.values).map(|(t, v)| (*t, sixs_core::reference::quantile(v, p) as f64)).collect()
    };
    Figure::new(name, title, "t", "quantile")
        .with(Series::steps(&format!("model q{}", q.model), curve(model, q.model)))
        .with(Series::steps(&format!("bound q{}", q.bound), curve(bound, q.bound)))
}

/// Criterion 10, super-critical part: `G` and `Z` against M/M/inf bounds run
/// on the clock `N^2 t`.
fn coupling_supercritical(
    s: &Scenario,
    level: f64,
    eta0_factor: f64,
    eta1_factor: f64,
    q: Quantiles,
    bound_replicas: usize,
) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let n = s.n[0];
    let p = s.params_at(n)?;
    let grid = s.grid();
    let runs = collect(par_replicas(s.replicas, |k| run_replica(s, n, k, &grid)))?;
    let stopped = runs.iter().filter(|r| r.condition_hit).count();
    let (cap_m, nn) = (p.cap_m as f64, n as f64);
    let mut g = GridSamples::new(grid.clone());
    let mut z = GridSamples::new(grid.clone());
    for r in &runs {
        g.push_replica(&r.values.iter().map(|v| (cap_m - (nn - v[0] - v[1])) as u64).collect::<Vec<_>>());
        z.push_replica(&r.values.iter().map(|v| v[2] as u64).collect::<Vec<_>>());
    }
    let c_m = cap_m / nn;
    let g0 = g.values[0][0];
    let z0 = z.values[0][0];
    ensure!(runs.iter().all(|r| r.values[0][2] as u64 == z0), "replicas must share the initial state");
    let bound_times: Vec<f64> = grid.iter().map(|t| t * s.timescale.factor(n) * nn).collect();
    let yg = BirthDeathParams { kappa_i: eta1_factor * p.beta_m * c_m, kappa_o: p.alpha_m * level, y0: g0 };
    let yz = BirthDeathParams { kappa_i: eta0_factor * p.eta, kappa_o: p.lambda * level, y0: z0 };
    let mut bg = bd_grid_samples(&yg, &bound_times, bound_replicas, sub_seed(s.base_seed, 0x6))?;
    let mut bz = bd_grid_samples(&yz, &bound_times, bound_replicas, sub_seed(s.base_seed, 0x2))?;
    bg.times = grid.clone();
    bz.times = grid.clone();
    let rg = dominance_check("G", &g, &bg, q)?;
    let rz = dominance_check("Z", &z, &bz, q)?;
    let mut v = Verdict::new(s, "coupling-supercritical");
    v.metric("g_violations", rg.violations as f64)
        .metric("g_crossings", crossings(&rg) as f64)
        .metric("z_crossings", crossings(&rz) as f64)
        .metric("z_violations", rz.violations as f64)
        .metric("stopped_replicas", stopped as f64);
    v.require("G dominated by its M/M/inf bound at every grid point", rg.pass);
    v.require("Z dominated by its M/M/inf bound at every grid point", rz.pass);
    v.require("free fraction stayed above the level in every replica", stopped == 0);
    result.figures.push(dominance_figure(&format!("{}-g", s.name), "Empty mRNA slots vs bound", &g, &bg, q));
    result.figures.push(dominance_figure(&format!("{}-z", s.name), "Free 6S vs bound", &z, &bz, q));
    result.verdicts.push(v);
    Ok(result)
}

/// Criterion 10, stationary part: each `R_j` against an M/M/1 queue.
fn coupling_stationary(s: &Scenario, q: Quantiles, bound_replicas: usize) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let n = s.n[0];
    let p = s.params_at(n)?;
    let grid = s.grid();
    let runs = collect(par_replicas(s.replicas, |k| run_replica(s, n, k, &grid)))?;
    let raw: Vec<f64> = grid.iter().map(|t| t * s.timescale.factor(n)).collect();
    let mut v = Verdict::new(s, "coupling-stationary");
    for j in 0..p.j() {
        let col = runs[0].columns.iter().position(|c| *c == format!("r_{}", j + 1)).unwrap();
        let mut model = GridSamples::new(grid.clone());
        for r in &runs {
            model.push_replica(&r.values.iter().map(|x| x[col] as u64).collect::<Vec<_>>());
        }
        let q0 = model.values[0][0];
        let mm1 = MM1Params { arrival: p.alpha_r[j], service: p.beta_r[j], q0 };
        let mut bound = mm1_grid_samples(&mm1, &raw, bound_replicas, sub_seed(s.base_seed, j as u64 + 1))?;
        bound.times = grid.clone();
        let rep = dominance_check(&format!("R_{}", j + 1), &model, &bound, q)?;
        v.metric(&format!("r{}_violations", j + 1), rep.violations as f64);
        v.metric(&format!("r{}_crossings", j + 1), crossings(&rep) as f64);
        v.require(&format!("R_{} dominated by its M/M/1 bound at every grid point", j + 1), rep.pass);
        result.figures.push(dominance_figure(&format!("{}-r{}", s.name, j + 1), &format!("R_{} vs M/M/1", j + 1), &model, &bound, q));
    }
    result.verdicts.push(v);
    Ok(result)
}

/// Criterion 11.
fn determinism(s: &Scenario, target: &str) -> Result<RunResult> {
    let mut result = RunResult::new(&s.name);
    let scenario = builtin(target)?;
    ensure!(!matches!(scenario.check, Some(Check::Determinism { .. })), "determinism target must not be a determinism check");
    let render = |r: &RunResult| -> String {
        let mut out = VerdictFile::from_result(r).to_json();
        for f in &r.figures {
            out.push_str(&crate::svg::render(f));
        }
        out
    };
    let a = render(&run_check(&scenario)?);
    let b = render(&run_check(&scenario)?);
    let mut v = Verdict::new(s, "determinism");
    v.metric("bytes", a.len() as f64);
    v.require(&format!("rerunning {target} gives identical verdict and plot bytes"), a == b);
    result.verdicts.push(v);
    Ok(result)
}
