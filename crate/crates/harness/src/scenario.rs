//! Scenario files: TOML descriptions of a model, its parameters as functions
//! of `N`, an initial-state recipe, a stop rule, observation settings and an
//! optional acceptance check.
//!
//! Every field is required after [`Scenario::normalize`]; the few optional
//! keys accepted on input are filled in explicitly there, and
//! [`Scenario::to_toml`] writes the normalized form back out.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sixs_core::{
    AuxState, BirthDeathParams, ChainState, FullState, LimitChainParams, MM1Params, ModelParams, StopCondition,
    StopPredicate,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Acceptance criterion this scenario feeds, if any.
    #[serde(default)]
    pub criterion: Option<u32>,
    pub model: ModelSpec,
    /// Clock on which horizons, windows and grids are expressed.
    pub timescale: Timescale,
    pub replicas: usize,
    pub base_seed: u64,
    /// Population sizes; increasing.
    pub n: Vec<u64>,
    #[serde(default)]
    pub params: Option<RateParams>,
    #[serde(default)]
    pub initial: Option<Initial>,
    pub stop: StopSpec,
    #[serde(default)]
    pub observe: Option<Observe>,
    #[serde(default)]
    pub check: Option<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Full,
    Auxiliary,
    /// Limit jump chain with the given free-polymerase Poisson mean; the other
    /// rates come from `[params]`.
    LimitChain { rho_m: f64 },
    BirthDeath { kappa_i: f64, kappa_o: f64, y0: u64 },
    Mm1 { arrival: f64, service: f64, q0: u64 },
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Full => "full",
            ModelSpec::Auxiliary => "auxiliary",
            ModelSpec::LimitChain { .. } => "limit-chain",
            ModelSpec::BirthDeath { .. } => "birth-death",
            ModelSpec::Mm1 { .. } => "mm1",
        }
    }

    fn needs_params(&self) -> bool {
        !matches!(self, ModelSpec::BirthDeath { .. } | ModelSpec::Mm1 { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Timescale {
    /// Raw model time.
    Raw,
    /// Model time divided by `N`.
    Accelerated,
}

impl Timescale {
    /// Raw time units per scenario time unit.
    pub fn factor(self, n: u64) -> f64 {
        match self {
            Timescale::Raw => 1.0,
            Timescale::Accelerated => n as f64,
        }
    }
}

/// Rates, with capacities given as fractions of `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    #[serde(default)]
    pub alpha_r: Vec<f64>,
    #[serde(default)]
    pub beta_r: Vec<f64>,
    /// rRNA capacities as fractions of `N`.
    #[serde(default)]
    pub c_r: Vec<f64>,
    pub alpha_m: f64,
    pub beta_m: f64,
    /// mRNA slots as a fraction of `N`.
    pub c_m: f64,
    pub beta_6: f64,
    pub delta_6: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl RateParams {
    pub fn at(&self, n: u64) -> Result<ModelParams> {
        let cap = |c: f64| (c * n as f64).round() as u64;
        let p = ModelParams {
            n,
            alpha_r: self.alpha_r.clone(),
            beta_r: self.beta_r.clone(),
            cap_r: self.c_r.iter().map(|&c| cap(c)).collect(),
            alpha_m: self.alpha_m,
            beta_m: self.beta_m,
            cap_m: cap(self.c_m),
            beta_6: self.beta_6,
            delta_6: self.delta_6,
            lambda: self.lambda,
            eta: self.eta,
        };
        p.validate().with_context(|| format!("parameters at N = {n}"))?;
        Ok(p)
    }
}

/// Initial-state recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initial {
    /// Every polymerase free apart from one per promoter; nothing elongating.
    AllFree,
    /// Every promoter occupied and every rRNA gene at capacity; the remaining
    /// polymerases fill mRNA slots first and are free otherwise.
    SaturatedRrna,
    /// Free, sequestered and free-6S counts as fractions of `N`; promoters
    /// occupied, no rRNA, everything else on mRNA.
    Fractions { free: f64, sequestered: f64, sixs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    None,
    /// Free polymerases at or below `level * N`.
    FreeBelow,
    FreeHitsZero,
    AllRrnaFull,
    AllRrnaEmpty,
    PopulationZero,
    /// Population strictly above `level`.
    PopulationAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    /// On the scenario clock; may be `inf`, in which case the run ends on the
    /// condition or the event budget.
    pub horizon: f64,
    #[serde(default = "no_condition")]
    pub condition: ConditionKind,
    #[serde(default)]
    pub level: f64,
}

fn no_condition() -> ConditionKind {
    ConditionKind::None
}

impl StopSpec {
    pub fn predicate(&self, n: u64, timescale: Timescale) -> StopPredicate {
        let condition = match self.condition {
            ConditionKind::None => None,
            ConditionKind::FreeBelow => Some(StopCondition::FreeBelow((self.level * n as f64).floor() as u64)),
            ConditionKind::FreeHitsZero => Some(StopCondition::FreeHitsZero),
            ConditionKind::AllRrnaFull => Some(StopCondition::AllRrnaFull),
            ConditionKind::AllRrnaEmpty => Some(StopCondition::AllRrnaEmpty),
            ConditionKind::PopulationZero => Some(StopCondition::PopulationZero),
            ConditionKind::PopulationAbove => Some(StopCondition::PopulationAbove(self.level as u64)),
        };
        StopPredicate { condition, horizon: self.horizon * timescale.factor(n) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observe {
    /// Number of points of the uniform sampling grid on `[0, horizon]`.
    pub grid: usize,
    /// Replicas whose sampled paths are written to `trajectories/`.
    pub trajectories: usize,
}

/// Tolerances and settings of the acceptance checks. Every tolerance is
/// stated in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// Event-by-event audit of polymerase conservation and promoter normalization.
    Conservation { events: u64 },
    /// Long-run dwell law of a tiny chain against the stationary vector of its
    /// enumerated generator, with free 6S truncated at `z_max`.
    GeneratorOracle { events: u64, z_max: u64, tolerance: f64 },
    /// Free-polymerase Poisson law and limit-chain agreement of `(S, Z)` in a window.
    SubcriticalAveraging { window: [f64; 2], free_tolerance: f64, chain_tolerance: f64 },
    /// `(S/N, Z/N)` against the drain ODE, across `n`.
    SubcriticalDrain { tolerance: f64, ode_step: f64 },
    /// `F(Nt)/N` against the fluid ODE, across `n`.
    FluidLimit { tolerance: f64, ode_step: f64, halving_tolerance: f64 },
    /// Late-window free fraction and free-6S law of the full model in stationary phase.
    StationaryEquilibrium { window: [f64; 2], free_tolerance: f64, sixs_tolerance: f64 },
    /// Saturation times across `n` and the post-saturation rRNA deficit.
    ExponentialSaturation { ratio_limit: f64, window: f64, max_deficit: u64, coverage: f64 },
    /// Post-saturation free-polymerase law and `(S, Z)` law against the limit chain.
    ExponentialLimitLaws { window: f64, free_tolerance: f64, chain_tolerance: f64 },
    /// Stationary law and hitting times of the M/M/inf process.
    BirthDeath {
        events: u64,
        tolerance: f64,
        hitting_kappa_i: f64,
        hitting_kappa_o: f64,
        hitting_levels: Vec<u64>,
        hitting_replicas: usize,
        spread: f64,
    },
    /// Quantile dominance of `G` and `Z` by their M/M/inf bounds.
    CouplingSupercritical { level: f64, eta0_factor: f64, eta1_factor: f64, quantiles: [f64; 2], alpha: f64, bound_replicas: usize },
    /// Quantile dominance of each `R_j` by its M/M/1 bound.
    CouplingStationary { quantiles: [f64; 2], alpha: f64, bound_replicas: usize },
    /// Reruns another built-in scenario and compares the verdict bytes.
    Determinism { target: String },
}

impl Check {
    pub fn label(&self) -> &'static str {
        match self {
            Check::Conservation { .. } => "conservation",
            Check::GeneratorOracle { .. } => "generator-oracle",
            Check::SubcriticalAveraging { .. } => "subcritical-averaging",
            Check::SubcriticalDrain { .. } => "subcritical-drain",
            Check::FluidLimit { .. } => "fluid-limit",
            Check::StationaryEquilibrium { .. } => "stationary-equilibrium",
            Check::ExponentialSaturation { .. } => "exponential-saturation",
            Check::ExponentialLimitLaws { .. } => "exponential-limit-laws",
            Check::BirthDeath { .. } => "birth-death",
            Check::CouplingSupercritical { .. } => "coupling-supercritical",
            Check::CouplingStationary { .. } => "coupling-stationary",
            Check::Determinism { .. } => "determinism",
        }
    }
}

/// Regime a scenario exercises, used to make sure `verify` covers all four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SubcriticalAuxiliary,
    SupercriticalAuxiliary,
    ExponentialFull,
    StationaryFull,
}

impl Regime {
    pub const ALL: [Regime; 4] =
        [Regime::SubcriticalAuxiliary, Regime::SupercriticalAuxiliary, Regime::ExponentialFull, Regime::StationaryFull];
}

/// An initial state for whichever model a scenario runs.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Full(FullState),
    Aux(AuxState),
    Chain(ChainState),
    Count(u64),
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: Scenario = toml::from_str(text).context("parsing scenario")?;
        raw.normalize()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Fills optional keys and validates the whole scenario.
    pub fn normalize(mut self) -> Result<Self> {
        if self.observe.is_none() {
            self.observe = Some(Observe { grid: 101, trajectories: 0 });
        }
        if self.model.needs_params() && self.initial.is_none() && !matches!(self.model, ModelSpec::LimitChain { .. }) {
            bail!("scenario {}: [initial] is required for the {} model", self.name, self.model.label());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.name.is_empty(), "scenario name is empty");
        ensure!(self.replicas > 0, "replicas must be positive");
        ensure!(!self.n.is_empty(), "n must list at least one population size");
        ensure!(self.n.windows(2).all(|w| w[0] < w[1]), "n must be strictly increasing");
        ensure!(self.stop.horizon >= 0.0, "stop.horizon must be nonnegative");
        let observe = self.observe.as_ref().expect("normalized");
        ensure!(observe.grid >= 1, "observe.grid must be at least 1");
        if self.model.needs_params() {
            let params = self.params.as_ref().with_context(|| format!("{} model needs [params]", self.model.label()))?;
            for &n in &self.n {
                let p = params.at(n)?;
                if self.initial.is_some() {
                    self.initial_state(n).with_context(|| format!("initial recipe at N = {n}"))?;
                }
                if let ModelSpec::LimitChain { rho_m } = self.model {
                    self.chain_params(&p, rho_m).validate()?;
                }
            }
        }
        match &self.model {
            ModelSpec::BirthDeath { kappa_i, kappa_o, y0 } => {
                BirthDeathParams { kappa_i: *kappa_i, kappa_o: *kappa_o, y0: *y0 }.validate()?
            }
            ModelSpec::Mm1 { arrival, service, q0 } => {
                MM1Params { arrival: *arrival, service: *service, q0: *q0 }.validate()?
            }
            _ => {}
        }
        if let Some(check) = &self.check {
            self.validate_check(check)?;
        }
        Ok(())
    }

    fn validate_check(&self, check: &Check) -> Result<()> {
        let want = |kinds: &[&str]| -> Result<()> {
            ensure!(
                kinds.contains(&self.model.label()),
                "check {} needs a {} model, scenario uses {}",
                check.label(),
                kinds.join(" or "),
                self.model.label()
            );
            Ok(())
        };
        let unit = |name: &str, v: f64| -> Result<()> {
            ensure!(v > 0.0 && v <= 1.0, "{name} must lie in (0, 1], got {v}");
            Ok(())
        };
        match check {
            Check::Conservation { events } => {
                want(&["full"])?;
                ensure!(*events > 0, "events must be positive");
            }
            Check::GeneratorOracle { tolerance, .. } => {
                want(&["full"])?;
                unit("tolerance", *tolerance)?;
            }
            Check::SubcriticalAveraging { window, free_tolerance, chain_tolerance } => {
                want(&["auxiliary"])?;
                ensure!(window[0] < window[1], "window must be nonempty");
                unit("free_tolerance", *free_tolerance)?;
                unit("chain_tolerance", *chain_tolerance)?;
            }
            Check::SubcriticalDrain { tolerance, ode_step } | Check::FluidLimit { tolerance, ode_step, .. } => {
                want(&["auxiliary"])?;
                unit("tolerance", *tolerance)?;
                ensure!(*ode_step > 0.0, "ode_step must be positive");
                ensure!(self.stop.horizon.is_finite(), "fluid comparisons need a finite horizon");
            }
            Check::StationaryEquilibrium { window, free_tolerance, sixs_tolerance } => {
                want(&["full"])?;
                ensure!(window[0] < window[1] && window[1] <= self.stop.horizon, "window must lie inside the horizon");
                unit("free_tolerance", *free_tolerance)?;
                unit("sixs_tolerance", *sixs_tolerance)?;
            }
            Check::ExponentialSaturation { ratio_limit, window, coverage, .. } => {
                want(&["full"])?;
                ensure!(*ratio_limit > 1.0, "ratio_limit must exceed 1");
                ensure!(*window > 0.0, "window must be positive");
                unit("coverage", *coverage)?;
                ensure!(self.stop.condition == ConditionKind::AllRrnaFull, "saturation check stops on all-rrna-full");
            }
            Check::ExponentialLimitLaws { window, free_tolerance, chain_tolerance } => {
                want(&["full"])?;
                ensure!(*window > 0.0, "window must be positive");
                unit("free_tolerance", *free_tolerance)?;
                unit("chain_tolerance", *chain_tolerance)?;
                ensure!(self.stop.condition == ConditionKind::AllRrnaFull, "limit-law check stops on all-rrna-full");
            }
            Check::BirthDeath { tolerance, hitting_kappa_i, hitting_kappa_o, hitting_levels, spread, .. } => {
                want(&["birth-death"])?;
                unit("tolerance", *tolerance)?;
                ensure!(*hitting_kappa_i > 0.0 && *hitting_kappa_o > 0.0, "hitting rates must be positive");
                ensure!(hitting_levels.iter().all(|&y| y >= 2), "hitting levels must be at least 2");
                ensure!(*spread > 0.0, "spread must be positive");
            }
            Check::CouplingSupercritical { level, eta0_factor, eta1_factor, quantiles, alpha, .. } => {
                want(&["auxiliary"])?;
                unit("level", *level)?;
                ensure!(*eta0_factor > 1.0 && *eta1_factor > 1.0, "bound factors must exceed 1");
                ensure!(*alpha > 0.0 && *alpha < 1.0, "alpha must lie in (0, 1)");
                ensure!(quantiles[0] < quantiles[1] && quantiles[1] < 1.0, "quantiles must satisfy model < bound < 1");
            }
            Check::CouplingStationary { quantiles, alpha, .. } => {
                want(&["full"])?;
                ensure!(*alpha > 0.0 && *alpha < 1.0, "alpha must lie in (0, 1)");
                ensure!(quantiles[0] < quantiles[1] && quantiles[1] < 1.0, "quantiles must satisfy model < bound < 1");
            }
            Check::Determinism { target } => ensure!(!target.is_empty(), "determinism target is empty"),
        }
        Ok(())
    }

    pub fn observe(&self) -> &Observe {
        self.observe.as_ref().expect("normalized scenario")
    }

    pub fn params_at(&self, n: u64) -> Result<ModelParams> {
        self.params.as_ref().context("scenario has no [params]")?.at(n)
    }

    pub fn chain_params(&self, p: &ModelParams, rho_m: f64) -> LimitChainParams {
        LimitChainParams { rho_m, lambda: p.lambda, eta: p.eta, beta_6: p.beta_6, delta_6: p.delta_6 }
    }

    pub fn predicate(&self, n: u64) -> StopPredicate {
        self.stop.predicate(n, self.timescale)
    }

    /// Grid on the scenario clock.
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(0.0, self.stop.horizon, self.observe().grid)
    }

    pub fn regime(&self) -> Option<Regime> {
        let p = self.params.as_ref()?;
        match self.model {
            ModelSpec::Auxiliary if p.c_m > 1.0 => Some(Regime::SubcriticalAuxiliary),
            ModelSpec::Auxiliary if p.c_m < 1.0 => Some(Regime::SupercriticalAuxiliary),
            ModelSpec::Full => {
                let above = p.alpha_r.iter().zip(&p.beta_r).filter(|(a, b)| a > b).count();
                let below = p.alpha_r.iter().zip(&p.beta_r).filter(|(a, b)| a < b).count();
                let j = p.alpha_r.len();
                if j == 0 {
                    None
                } else if above == j {
                    Some(Regime::ExponentialFull)
                } else if below == j {
                    Some(Regime::StationaryFull)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// Builds the initial state at population size `n`.
    pub fn initial_state(&self, n: u64) -> Result<InitialState> {
        match &self.model {
            ModelSpec::BirthDeath { y0, .. } => return Ok(InitialState::Count(*y0)),
            ModelSpec::Mm1 { q0, .. } => return Ok(InitialState::Count(*q0)),
            ModelSpec::LimitChain { .. } => return Ok(InitialState::Chain(ChainState { s: 0, z: 0 })),
            _ => {}
        }
        let p = self.params_at(n)?;
        let initial = self.initial.as_ref().context("scenario has no [initial]")?;
        let count = |x: f64| -> Result<u64> {
            ensure!((0.0..=1.0).contains(&x), "fraction {x} outside [0, 1]");
            Ok((x * n as f64).round() as u64)
        };
        let j = p.j() as u64;
        match (&self.model, initial) {
            (ModelSpec::Full, recipe) => {
                let state = match recipe {
                    Initial::AllFree => {
                        ensure!(n >= j, "fewer polymerases than promoters");
                        FullState { f: n - j, s: 0, z: 0, u: vec![true; p.j()], r: vec![0; p.j()] }
                    }
                    Initial::SaturatedRrna => {
                        let busy = j + p.cap_r.iter().sum::<u64>();
                        ensure!(n >= busy, "not enough polymerases to saturate the rRNA genes");
                        let rest = n - busy;
                        let on_mrna = rest.min(p.cap_m);
                        FullState { f: rest - on_mrna, s: 0, z: 0, u: vec![true; p.j()], r: p.cap_r.clone() }
                    }
                    Initial::Fractions { free, sequestered, sixs } => {
                        let (f, s, z) = (count(*free)?, count(*sequestered)?, count(*sixs)?);
                        ensure!(f + s + j <= n, "free, sequestered and promoter polymerases exceed N");
                        FullState { f, s, z, u: vec![true; p.j()], r: vec![0; p.j()] }
                    }
                };
                sixs_core::model::validate_full(&state, &p)?;
                Ok(InitialState::Full(state))
            }
            (ModelSpec::Auxiliary, Initial::Fractions { free, sequestered, sixs }) => {
                let state = AuxState { f: count(*free)?, s: count(*sequestered)?, z: count(*sixs)? };
                sixs_core::model::validate_aux(&state, &p)?;
                Ok(InitialState::Aux(state))
            }
            (ModelSpec::Auxiliary, other) => bail!("recipe {other:?} does not apply to the auxiliary model"),
            _ => unreachable!(),
        }
    }
}

pub fn uniform_grid(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![from],
        _ => (0..points).map(|i| from + (to - from) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Scenarios shipped with the binary, in criterion order.
pub const BUILTIN: &[(&str, &str)] = &[
    ("c01-conservation-stationary", include_str!("../scenarios/c01-conservation-stationary.toml")),
    ("c01-conservation-exponential", include_str!("../scenarios/c01-conservation-exponential.toml")),
    ("c02-generator-oracle", include_str!("../scenarios/c02-generator-oracle.toml")),
    ("c03-subcritical-averaging", include_str!("../scenarios/c03-subcritical-averaging.toml")),
    ("c04-subcritical-drain", include_str!("../scenarios/c04-subcritical-drain.toml")),
    ("c05-supercritical-fluid", include_str!("../scenarios/c05-supercritical-fluid.toml")),
    ("c06-stationary-equilibrium", include_str!("../scenarios/c06-stationary-equilibrium.toml")),
    ("c07-exponential-saturation", include_str!("../scenarios/c07-exponential-saturation.toml")),
    ("c08-exponential-limit-laws", include_str!("../scenarios/c08-exponential-limit-laws.toml")),
    ("c09-birth-death", include_str!("../scenarios/c09-birth-death.toml")),
    ("c10-coupling-supercritical", include_str!("../scenarios/c10-coupling-supercritical.toml")),
    ("c10-coupling-stationary", include_str!("../scenarios/c10-coupling-stationary.toml")),
    ("c11-determinism", include_str!("../scenarios/c11-determinism.toml")),
];

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .with_context(|| format!("no built-in scenario named {name}"))?;
    Scenario::from_toml(text).with_context(|| format!("built-in scenario {name}"))
}

pub fn all_builtin() -> Result<Vec<Scenario>> {
    BUILTIN.iter().map(|(name, _)| builtin(name)).collect()
}

/// Loads a scenario from a path, or a built-in by name.
pub fn resolve(spec: &str) -> Result<Scenario> {
    let path = std::path::Path::new(spec);
    if path.exists() {
        Scenario::load(path)
    } else {
        builtin(spec)
    }
}
