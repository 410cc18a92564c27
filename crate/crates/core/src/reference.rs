//! Birth-death comparison processes: the M/M/inf process (constant births,
//! linear deaths) and the M/M/1 queue, with the hitting-time samplers and the
//! quantile-dominance audit built on them.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial as BinomialLaw, DiscreteCDF};

use crate::engine::{
    replica_seed, rng_from_seed, simulate, Model, SimulateError, Simulator, StopCondition, StopPredicate,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::occupation::GridSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Jump {
    Up,
    Down,
}

/// Birth rate `kappa_i`, per-individual death rate `kappa_o`, initial population `y0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathParams {
    pub kappa_i: f64,
    pub kappa_o: f64,
    pub y0: u64,
}

impl BirthDeathParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa_i > 0.0 && self.kappa_o > 0.0 && self.kappa_i.is_finite() && self.kappa_o.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("birth-death rates must be positive: {self:?}")))
        }
    }

    /// Mean of the Poisson stationary law.
    pub fn rho(&self) -> f64 {
        self.kappa_i / self.kappa_o
    }
}

/// M/M/inf population process.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeath {
    pub kappa_i: f64,
    pub kappa_o: f64,
}

impl Model for BirthDeath {
    type State = u64;
    type Label = Jump;
    type Event = Jump;

    fn rates(&self, y: &u64, out: &mut Vec<(Jump, f64)>) {
        out.push((Jump::Up, self.kappa_i));
        out.push((Jump::Down, self.kappa_o * *y as f64));
    }

    fn realize<R: Rng + ?Sized>(&self, _: &u64, j: Jump, _: &mut R) -> Jump {
        j
    }

    fn apply(&self, y: &mut u64, j: &Jump) {
        match j {
            Jump::Up => *y += 1,
            Jump::Down => *y -= 1,
        }
    }

    fn validate(&self, _: &u64) -> Result<()> {
        Ok(())
    }

    fn check(&self, y: &u64, c: &StopCondition) -> Result<bool> {
        population_condition(*y, c)
    }
}

fn population_condition(y: u64, c: &StopCondition) -> Result<bool> {
    match *c {
        StopCondition::PopulationZero => Ok(y == 0),
        StopCondition::PopulationAbove(p) => Ok(y > p),
        other => Err(Error::UnsupportedCondition(other.name())),
    }
}

pub fn simulate_bd(
    params: BirthDeathParams,
    stop: &StopPredicate,
    seed: u64,
) -> std::result::Result<Trajectory<BirthDeath>, SimulateError<BirthDeath>> {
    params.validate().map_err(SimulateError::Model)?;
    let model = BirthDeath { kappa_i: params.kappa_i, kappa_o: params.kappa_o };
    simulate(&model, &params.y0, stop, seed)
}

/// Exact draw of `Y(t)` given `Y(0) = y0`: survivors of the initial population
/// are `Binomial(y0, e^{-kappa_o t})` and newcomers are independently
/// `Poisson(rho (1 - e^{-kappa_o t}))`.
pub fn sample_bd_at<R: Rng + ?Sized>(params: &BirthDeathParams, t: f64, rng: &mut R) -> Result<u64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let keep = (-params.kappa_o * t).exp();
    let survivors = if params.y0 == 0 || keep == 0.0 {
        0
    } else {
        Binomial::new(params.y0, keep).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng)
    };
    let mean = params.rho() * (1.0 - keep);
    let newcomers = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng) as u64
    } else {
        0
    };
    Ok(survivors + newcomers)
}

/// Independent samples of a first-passage time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageSample {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Mean after the regime-specific normalization (`/ ln N` or `rho^p / p!`).
    pub normalized_mean: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn passage_times(
    model: &BirthDeath,
    y0: u64,
    condition: StopCondition,
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..replicas)
        .map(|k| {
            let mut sim = Simulator::new(model, replica_seed(seed, k as u64));
            let out = sim.run(&y0, &StopPredicate::on(condition), ())?;
            Ok(out.end_time)
        })
        .collect()
}

/// Samples of `inf{t : Y(t) = 0}` from `Y(0) = y0`; the normalized mean is `mean / ln(y0)`.
pub fn hitting_time_zero(params: BirthDeathParams, replicas: usize, seed: u64) -> Result<PassageSample> {
    params.validate()?;
    let model = BirthDeath { kappa_i: params.kappa_i, kappa_o: params.kappa_o };
    let values = passage_times(&model, params.y0, StopCondition::PopulationZero, replicas, seed)?;
    let m = mean(&values);
    let ln = (params.y0 as f64).ln();
    Ok(PassageSample { normalized_mean: if ln > 0.0 { m / ln } else { f64::NAN }, mean: m, values })
}

/// Samples of `T_p = inf{t : Y(t) > p}` from `Y(0) = 0`; the normalized mean
/// is that of `rho^p T_p / p!`.
pub fn first_passage_up(kappa_i: f64, kappa_o: f64, p: u64, replicas: usize, seed: u64) -> Result<PassageSample> {
    let params = BirthDeathParams { kappa_i, kappa_o, y0: 0 };
    params.validate()?;
    if p == 0 {
        return Err(Error::InvalidArgument("level p must be at least 1".into()));
    }
    let model = BirthDeath { kappa_i, kappa_o };
    let values = passage_times(&model, 0, StopCondition::PopulationAbove(p), replicas, seed)?;
    let m = mean(&values);
    // rho^p / p! computed as a product to stay finite
    let factor: f64 = (1..=p).map(|k| params.rho() / k as f64).product();
    Ok(PassageSample { normalized_mean: m * factor, mean: m, values })
}

/// Arrival and service rates of an M/M/1 queue with initial length `q0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MM1Params {
    pub arrival: f64,
    pub service: f64,
    pub q0: u64,
}

impl MM1Params {
    pub fn validate(&self) -> Result<()> {
        if self.arrival > 0.0 && self.service > 0.0 && self.arrival.is_finite() && self.service.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("M/M/1 rates must be positive: {self:?}")))
        }
    }

    pub fn is_stable(&self) -> bool {
        self.arrival < self.service
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MM1 {
    pub arrival: f64,
    pub service: f64,
}

impl Model for MM1 {
    type State = u64;
    type Label = Jump;
    type Event = Jump;

    fn rates(&self, q: &u64, out: &mut Vec<(Jump, f64)>) {
        out.push((Jump::Up, self.arrival));
        if *q > 0 {
            out.push((Jump::Down, self.service));
        }
    }

    fn realize<R: Rng + ?Sized>(&self, _: &u64, j: Jump, _: &mut R) -> Jump {
        j
    }

    fn apply(&self, q: &mut u64, j: &Jump) {
        match j {
            Jump::Up => *q += 1,
            Jump::Down => *q -= 1,
        }
    }

    fn validate(&self, _: &u64) -> Result<()> {
        Ok(())
    }

    fn check(&self, q: &u64, c: &StopCondition) -> Result<bool> {
        population_condition(*q, c)
    }
}

pub fn simulate_mm1(
    params: MM1Params,
    stop: &StopPredicate,
    seed: u64,
) -> std::result::Result<Trajectory<MM1>, SimulateError<MM1>> {
    params.validate().map_err(SimulateError::Model)?;
    simulate(&MM1 { arrival: params.arrival, service: params.service }, &params.q0, stop, seed)
}

/// Values of one observable at fixed grid times across independent replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSamples {
    pub times: Vec<f64>,
    /// `values[i]` holds one value per replica at `times[i]`.
    pub values: Vec<Vec<u64>>,
}

impl GridSamples {
    pub fn new(times: Vec<f64>) -> Self {
        let n = times.len();
        GridSamples { times, values: vec![Vec::new(); n] }
    }

    /// Appends one replica's path values.
    pub fn push_replica(&mut self, path: &[u64]) {
        for (slot, v) in self.values.iter_mut().zip(path) {
            slot.push(*v);
        }
    }
}

/// Bound-process samples for an M/M/inf process at `times` on its own clock.
pub fn bd_grid_samples(params: &BirthDeathParams, times: &[f64], replicas: usize, seed: u64) -> Result<GridSamples> {
    let mut out = GridSamples::new(times.to_vec());
    for k in 0..replicas {
        let mut rng = rng_from_seed(replica_seed(seed, k as u64));
        let path = times.iter().map(|&t| sample_bd_at(params, t, &mut rng)).collect::<Result<Vec<_>>>()?;
        out.push_replica(&path);
    }
    Ok(out)
}

/// Bound-process samples for an M/M/1 queue at `times`, by simulation.
pub fn mm1_grid_samples(params: &MM1Params, times: &[f64], replicas: usize, seed: u64) -> Result<GridSamples> {
    params.validate()?;
    let model = MM1 { arrival: params.arrival, service: params.service };
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let mut out = GridSamples::new(times.to_vec());
    for k in 0..replicas {
        let mut grid = GridSampler::new(times.to_vec(), 1.0, |q: &u64| *q);
        Simulator::new(&model, replica_seed(seed, k as u64)).run(&params.q0, &StopPredicate::horizon(horizon), &mut grid)?;
        let path: Vec<u64> = grid.finish().into_iter().map(|v| v.unwrap_or(0)).collect();
        out.push_replica(&path);
    }
    Ok(out)
}

/// Empirical quantile (inverse of the empirical distribution function).
pub fn quantile(values: &[u64], p: f64) -> u64 {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Quantile levels compared by the dominance audit, and the per-point
/// false-alarm rate of the Monte-Carlo band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub model: f64,
    pub bound: f64,
    pub alpha: f64,
}

impl Default for Quantiles {
    fn default() -> Self {
        Quantiles { model: 0.99, bound: 0.995, alpha: 1e-3 }
    }
}

/// Smallest `c` with `P(Binomial(n, p) > c) <= alpha`.
pub fn binomial_critical(n: u64, p: f64, alpha: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let b = BinomialLaw::new(p, n).expect("valid binomial");
    (0..=n).find(|&c| 1.0 - b.cdf(c) <= alpha).unwrap_or(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominancePoint {
    pub time: f64,
    pub model_quantile: u64,
    pub bound_quantile: u64,
    /// Model samples strictly above `bound_quantile`.
    pub exceedances: u64,
    /// Largest exceedance count consistent with the model quantile level.
    pub critical: u64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub observable: String,
    pub quantiles: Quantiles,
    pub points: Vec<DominancePoint>,
    pub violations: usize,
    pub pass: bool,
}

/// Checks, at every grid time, that the model's upper quantile does not exceed
/// the bound process's (higher) upper quantile. A crossing only counts as a
/// violation when the number of model samples above the bound quantile is
/// too large for a model whose true quantile sits at or below it.
pub fn dominance_check(
    observable: &str,
    model: &GridSamples,
    bound: &GridSamples,
    quantiles: Quantiles,
) -> Result<DominanceReport> {
    if model.times.len() != bound.times.len()
        || model.times.iter().zip(&bound.times).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::InvalidArgument("model and bound grids differ".into()));
    }
    let points: Vec<DominancePoint> = model
        .times
        .iter()
        .enumerate()
        .map(|(i, &time)| {
            let m = &model.values[i];
            let mq = quantile(m, quantiles.model);
            let bq = quantile(&bound.values[i], quantiles.bound);
            let exceedances = m.iter().filter(|&&v| v > bq).count() as u64;
            let critical = binomial_critical(m.len() as u64, 1.0 - quantiles.model, quantiles.alpha);
            DominancePoint {
                time,
                model_quantile: mq,
                bound_quantile: bq,
                exceedances,
                critical,
                violated: mq > bq && exceedances > critical,
            }
        })
        .collect();
    let violations = points.iter().filter(|p| p.violated).count();
    Ok(DominanceReport { observable: observable.to_string(), quantiles, points, violations, pass: violations == 0 })
}

/// Writes `replica,value` rows.
pub fn write_samples_csv<W: std::io::Write>(mut w: W, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "replica,value")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}
