//! Direct-method stochastic simulation shared by every Markov model in the crate.
//!
//! A [`Model`] exposes its enabled transitions with their rates; the
//! [`Simulator`] draws an exponential holding time from the total rate and a
//! transition proportionally to its rate. Any extra randomness a transition
//! needs (which empty promoter a freed polymerase lands on) is resolved into
//! the recorded event, so replaying events reproduces a path exactly.

use std::fmt::Debug;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of events of a single trajectory.
pub const DEFAULT_EVENT_BUDGET: u64 = 1_000_000_000;

/// A full snapshot is kept every `SNAPSHOT_INTERVAL` recorded events.
pub const SNAPSHOT_INTERVAL: usize = 1 << 16;

/// Random stream used by all simulators.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of replica `k` derived from a base seed.
pub fn replica_seed(base_seed: u64, k: u64) -> u64 {
    base_seed ^ k
}

/// Conditions that end a simulation before its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub enum StopCondition {
    /// Free polymerases at or below the threshold (`tau_N(a)` with threshold `aN`).
    FreeBelow(u64),
    /// No free polymerase left.
    FreeHitsZero,
    /// Every rRNA gene elongates at full capacity.
    AllRrnaFull,
    /// No rRNA elongation anywhere.
    AllRrnaEmpty,
    /// One-dimensional population reaches zero.
    PopulationZero,
    /// One-dimensional population strictly exceeds the level.
    PopulationAbove(u64),
}

impl StopCondition {
    pub fn name(&self) -> &'static str {
        match self {
            StopCondition::FreeBelow(_) => "FreeBelow",
            StopCondition::FreeHitsZero => "FreeHitsZero",
            StopCondition::AllRrnaFull => "AllRrnaFull",
            StopCondition::AllRrnaEmpty => "AllRrnaEmpty",
            StopCondition::PopulationZero => "PopulationZero",
            StopCondition::PopulationAbove(_) => "PopulationAbove",
        }
    }
}

/// When to stop: an optional state condition, always bounded by a time horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct StopPredicate {
    pub condition: Option<StopCondition>,
    pub horizon: f64,
}

impl StopPredicate {
    pub fn horizon(t: f64) -> Self {
        StopPredicate { condition: None, horizon: t }
    }

    /// Stops on `condition` with no time limit (the event budget still applies).
    pub fn on(condition: StopCondition) -> Self {
        StopPredicate { condition: Some(condition), horizon: f64::INFINITY }
    }

    pub fn within(mut self, t: f64) -> Self {
        self.horizon = t;
        self
    }
}

/// A continuous-time Markov chain driven by the direct method.
pub trait Model: Clone {
    type State: Clone + Debug + PartialEq;
    type Label: Copy + Debug + PartialEq;
    /// A transition together with any randomness needed to apply it.
    type Event: Copy + Debug + PartialEq + Serialize;

    /// Pushes the transitions of `state` with their rates. Zero rates are allowed.
    fn rates(&self, state: &Self::State, out: &mut Vec<(Self::Label, f64)>);

    /// Resolves a chosen label into an event, drawing any extra randomness.
    fn realize<R: Rng + ?Sized>(&self, state: &Self::State, label: Self::Label, rng: &mut R)
        -> Self::Event;

    fn apply(&self, state: &mut Self::State, event: &Self::Event);

    fn validate(&self, state: &Self::State) -> Result<()>;

    fn check(&self, state: &Self::State, condition: &StopCondition) -> Result<bool>;
}

/// Receives the piecewise-constant path: `record(t, x)` means the process is
/// in state `x` from time `t` until the next call; `close` marks the end.
pub trait Observer<S> {
    fn record(&mut self, time: f64, state: &S);

    fn close(&mut self, _time: f64, _state: &S) {}
}

impl<S> Observer<S> for () {
    fn record(&mut self, _: f64, _: &S) {}
}

impl<S, O: Observer<S> + ?Sized> Observer<S> for &mut O {
    fn record(&mut self, time: f64, state: &S) {
        (**self).record(time, state)
    }
    fn close(&mut self, time: f64, state: &S) {
        (**self).close(time, state)
    }
}

impl<S, A: Observer<S>, B: Observer<S>> Observer<S> for (A, B) {
    fn record(&mut self, time: f64, state: &S) {
        self.0.record(time, state);
        self.1.record(time, state);
    }
    fn close(&mut self, time: f64, state: &S) {
        self.0.close(time, state);
        self.1.close(time, state);
    }
}

impl<S, O: Observer<S>> Observer<S> for Vec<O> {
    fn record(&mut self, time: f64, state: &S) {
        for o in self.iter_mut() {
            o.record(time, state);
        }
    }
    fn close(&mut self, time: f64, state: &S) {
        for o in self.iter_mut() {
            o.close(time, state);
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    /// The horizon was reached.
    Horizon,
    /// The stop condition fired at `RunSummary::end_time`.
    Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<S> {
    pub end_time: f64,
    pub final_state: S,
    pub events: u64,
    pub outcome: Outcome,
}

impl<S> RunSummary<S> {
    /// Time the stop condition fired, if it did.
    pub fn stop_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Condition => Some(self.end_time),
            Outcome::Horizon => None,
        }
    }
}

/// One step of the direct method.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S, E> {
    pub dwell: f64,
    pub event: E,
    pub next: S,
}

/// Event-by-event simulator owning a seeded random stream.
pub struct Simulator<'m, M: Model> {
    model: &'m M,
    rng: SimRng,
    buf: Vec<(M::Label, f64)>,
    budget: u64,
}

impl<'m, M: Model> Simulator<'m, M> {
    pub fn new(model: &'m M, seed: u64) -> Self {
        Simulator { model, rng: rng_from_seed(seed), buf: Vec::new(), budget: DEFAULT_EVENT_BUDGET }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Total rate and chosen label, or `None` when nothing is enabled.
    fn choose(&mut self, state: &M::State) -> Option<(f64, M::Label)> {
        self.buf.clear();
        self.model.rates(state, &mut self.buf);
        let total: f64 = self.buf.iter().map(|(_, r)| r).sum();
        if !(total > 0.0) {
            return None;
        }
        let mut target = self.rng.random::<f64>() * total;
        let mut chosen = None;
        for &(label, rate) in &self.buf {
            if rate <= 0.0 {
                continue;
            }
            chosen = Some(label);
            if target < rate {
                break;
            }
            target -= rate;
        }
        chosen.map(|l| (total, l))
    }

    /// Draws the holding time and next transition, updating `state` in place.
    pub fn step_in_place(&mut self, state: &mut M::State) -> Result<(f64, M::Event)> {
        let (total, label) = self.choose(state).ok_or(Error::Absorbing)?;
        let u: f64 = self.rng.sample(Open01);
        let dwell = -u.ln() / total;
        let event = self.model.realize(state, label, &mut self.rng);
        self.model.apply(state, &event);
        Ok((dwell, event))
    }

    pub fn step(&mut self, state: &M::State) -> Result<StepResult<M::State, M::Event>> {
        let mut next = state.clone();
        let (dwell, event) = self.step_in_place(&mut next)?;
        Ok(StepResult { dwell, event, next })
    }

    /// Runs from `initial` until `stop`, streaming the path to `observer`.
    ///
    /// The holding time drawn past the horizon is discarded, which is exact by
    /// memorylessness.
    pub fn run<O: Observer<M::State>>(
        &mut self,
        initial: &M::State,
        stop: &StopPredicate,
        mut observer: O,
    ) -> Result<RunSummary<M::State>> {
        self.run_with(initial, stop, &mut observer, |_, _| {})
    }

    fn run_with<O: Observer<M::State>>(
        &mut self,
        initial: &M::State,
        stop: &StopPredicate,
        observer: &mut O,
        mut on_event: impl FnMut(f64, &M::Event),
    ) -> Result<RunSummary<M::State>> {
        self.model.validate(initial)?;
        if !(stop.horizon >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative horizon {}", stop.horizon)));
        }
        let mut state = initial.clone();
        let mut t = 0.0;
        let mut events = 0u64;
        observer.record(0.0, &state);
        let fired = |s: &M::State| -> Result<bool> {
            match &stop.condition {
                Some(c) => self.model.check(s, c),
                None => Ok(false),
            }
        };
        if fired(&state)? {
            observer.close(0.0, &state);
            return Ok(RunSummary { end_time: 0.0, final_state: state, events, outcome: Outcome::Condition });
        }
        loop {
            if t >= stop.horizon {
                break;
            }
            if events >= self.budget {
                observer.close(t, &state);
                return Err(Error::BudgetExceeded { budget: self.budget, time: t });
            }
            let Some((total, label)) = self.choose(&state) else {
                if stop.horizon.is_finite() {
                    // nothing can happen any more; the state holds until the horizon
                    t = stop.horizon;
                    break;
                }
                return Err(Error::Absorbing);
            };
            let u: f64 = self.rng.sample(Open01);
            let next_t = t + (-u.ln() / total);
            if next_t > stop.horizon {
                t = stop.horizon;
                break;
            }
            t = next_t;
            let event = self.model.realize(&state, label, &mut self.rng);
            self.model.apply(&mut state, &event);
            events += 1;
            on_event(t, &event);
            observer.record(t, &state);
            let hit = match &stop.condition {
                Some(c) => self.model.check(&state, c)?,
                None => false,
            };
            if hit {
                observer.close(t, &state);
                return Ok(RunSummary { end_time: t, final_state: state, events, outcome: Outcome::Condition });
            }
        }
        observer.close(t, &state);
        Ok(RunSummary { end_time: t, final_state: state, events, outcome: Outcome::Horizon })
    }

    /// Runs and records every event.
    pub fn record(
        &mut self,
        initial: &M::State,
        stop: &StopPredicate,
        seed: u64,
    ) -> std::result::Result<Trajectory<M>, SimulateError<M>> {
        let mut events = Vec::new();
        let mut snapshots = Vec::new();
        let model = self.model;
        let mut replay_state = initial.clone();
        let res = self.run_with(initial, stop, &mut (), |t, e| {
            model.apply(&mut replay_state, e);
            events.push((t, *e));
            if events.len() % SNAPSHOT_INTERVAL == 0 {
                snapshots.push((events.len(), replay_state.clone()));
            }
        });
        let build = |end_time: f64, stopped_at: Option<f64>, events, snapshots| Trajectory {
            model: model.clone(),
            initial: initial.clone(),
            events,
            snapshots,
            end_time,
            stopped_at,
            seed,
        };
        match res {
            Ok(summary) => Ok(build(summary.end_time, summary.stop_time(), events, snapshots)),
            Err(Error::BudgetExceeded { budget, time }) => Err(SimulateError::Truncated {
                budget,
                partial: Box::new(build(time, None, events, snapshots)),
            }),
            Err(e) => Err(SimulateError::Model(e)),
        }
    }
}

/// Failure of [`simulate`].
#[derive(Debug)]
pub enum SimulateError<M: Model> {
    Model(Error),
    /// The event budget ran out; the path simulated so far is kept.
    Truncated { budget: u64, partial: Box<Trajectory<M>> },
}

impl<M: Model> std::fmt::Display for SimulateError<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimulateError::Model(e) => write!(f, "{e}"),
            SimulateError::Truncated { budget, partial } => write!(
                f,
                "event budget of {budget} exhausted at t = {}",
                partial.end_time
            ),
        }
    }
}

impl<M: Model + Debug> std::error::Error for SimulateError<M> where M::State: Debug {}

impl<M: Model> From<SimulateError<M>> for Error {
    fn from(e: SimulateError<M>) -> Self {
        match e {
            SimulateError::Model(e) => e,
            SimulateError::Truncated { budget, partial } => {
                Error::BudgetExceeded { budget, time: partial.end_time }
            }
        }
    }
}

/// Simulates `model` from `initial` and records the whole path.
pub fn simulate<M: Model>(
    model: &M,
    initial: &M::State,
    stop: &StopPredicate,
    seed: u64,
) -> std::result::Result<Trajectory<M>, SimulateError<M>> {
    Simulator::new(model, seed).record(initial, stop, seed)
}

/// One step of the direct method from a fresh clone of `state`.
pub fn step<M: Model, R: Rng + ?Sized>(
    model: &M,
    state: &M::State,
    rng: &mut R,
) -> Result<StepResult<M::State, M::Event>> {
    let mut buf = Vec::new();
    model.rates(state, &mut buf);
    let total: f64 = buf.iter().map(|(_, r)| r).sum();
    if !(total > 0.0) {
        return Err(Error::Absorbing);
    }
    let mut target = rng.random::<f64>() * total;
    let mut chosen = None;
    for &(label, rate) in &buf {
        if rate <= 0.0 {
            continue;
        }
        chosen = Some(label);
        if target < rate {
            break;
        }
        target -= rate;
    }
    let label = chosen.ok_or(Error::Absorbing)?;
    let u: f64 = rng.sample(Open01);
    let dwell = -u.ln() / total;
    let event = model.realize(state, label, rng);
    let mut next = state.clone();
    model.apply(&mut next, &event);
    Ok(StepResult { dwell, event, next })
}

/// A recorded piecewise-constant sample path.
#[derive(Debug, Clone)]
pub struct Trajectory<M: Model> {
    pub model: M,
    pub initial: M::State,
    /// `(time, event)` pairs with strictly increasing times.
    pub events: Vec<(f64, M::Event)>,
    /// `(k, state after the k-th event)` every [`SNAPSHOT_INTERVAL`] events.
    pub snapshots: Vec<(usize, M::State)>,
    /// Horizon, or the time the stop condition fired.
    pub end_time: f64,
    pub stopped_at: Option<f64>,
    pub seed: u64,
}

impl<M: Model> Trajectory<M> {
    /// Replays the path into an observer.
    pub fn replay<O: Observer<M::State>>(&self, mut observer: O) {
        let mut state = self.initial.clone();
        observer.record(0.0, &state);
        for (t, e) in &self.events {
            self.model.apply(&mut state, e);
            observer.record(*t, &state);
        }
        observer.close(self.end_time, &state);
    }

    pub fn final_state(&self) -> M::State {
        match self.snapshots.last() {
            Some((k, s)) => {
                let mut state = s.clone();
                for (_, e) in &self.events[*k..] {
                    self.model.apply(&mut state, e);
                }
                state
            }
            None => {
                let mut state = self.initial.clone();
                for (_, e) in &self.events {
                    self.model.apply(&mut state, e);
                }
                state
            }
        }
    }

    /// Right-continuous state at time `t`, rebuilt from the nearest snapshot.
    pub fn state_at(&self, t: f64) -> Result<M::State> {
        if !(0.0..=self.end_time).contains(&t) {
            return Err(Error::OutOfRange { time: t, end: self.end_time });
        }
        // number of events with time <= t
        let k = self.events.partition_point(|(et, _)| *et <= t);
        let snap = self.snapshots.partition_point(|(idx, _)| *idx <= k);
        let (mut state, from) = if snap == 0 {
            (self.initial.clone(), 0)
        } else {
            let (idx, s) = &self.snapshots[snap - 1];
            (s.clone(), *idx)
        };
        for (_, e) in &self.events[from..k] {
            self.model.apply(&mut state, e);
        }
        Ok(state)
    }

    /// States at each grid time, using the right-continuous convention at jumps.
    pub fn sample_on_grid(&self, times: &[f64]) -> Result<Vec<M::State>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("grid times must be nondecreasing".into()));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut state = self.initial.clone();
        let mut next = 0;
        for &t in times {
            if !(0.0..=self.end_time).contains(&t) {
                return Err(Error::OutOfRange { time: t, end: self.end_time });
            }
            while next < self.events.len() && self.events[next].0 <= t {
                self.model.apply(&mut state, &self.events[next].1);
                next += 1;
            }
            out.push(state.clone());
        }
        Ok(out)
    }

    /// Newline-delimited JSON event log: one `{"time", "event"}` record per line.
    pub fn write_event_log<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Record<'a, E> {
            time: f64,
            event: &'a E,
        }
        for (t, e) in &self.events {
            serde_json::to_writer(&mut w, &Record { time: *t, event: e })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
