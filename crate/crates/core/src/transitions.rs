//! Transition structure of the full model and of the auxiliary model without rRNAs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Model, StopCondition};
use crate::error::{Error, Result};
use crate::model::{psi, validate_aux, validate_full, AuxState, FullState, ModelParams};

/// Transition families. rRNA and promoter indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    /// Promoter polymerase starts elongating; a free polymerase refills the promoter.
    RrnaInitFree(usize),
    /// Promoter polymerase starts elongating and leaves the promoter empty (`f = 0`).
    RrnaInitEmptying(usize),
    /// rRNA completed, the polymerase becomes free (all promoters occupied).
    RrnaCompleteToFree(usize),
    /// rRNA completed, the polymerase binds the empty promoter `promoter`.
    RrnaCompleteToPromoter { rrna: usize, promoter: usize },
    MrnaBind,
    MrnaRelease,
    SixSCreate,
    SixSDegrade,
    Sequester,
    Desequester,
}

/// Integer offsets of a transition before promoter normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Delta {
    pub f: i64,
    pub s: i64,
    pub z: i64,
    /// `(promoter, +1 | -1)`.
    pub u: Option<(usize, i64)>,
    /// `(rrna, +1 | -1)`.
    pub r: Option<(usize, i64)>,
}

impl Transition {
    pub fn delta(&self) -> Delta {
        use Transition::*;
        let d = Delta::default();
        match *self {
            RrnaInitFree(j) => Delta { f: -1, r: Some((j, 1)), ..d },
            RrnaInitEmptying(j) => Delta { u: Some((j, -1)), r: Some((j, 1)), ..d },
            RrnaCompleteToFree(j) => Delta { f: 1, r: Some((j, -1)), ..d },
            RrnaCompleteToPromoter { rrna, promoter } => {
                Delta { u: Some((promoter, 1)), r: Some((rrna, -1)), ..d }
            }
            MrnaBind => Delta { f: -1, ..d },
            MrnaRelease => Delta { f: 1, ..d },
            SixSCreate => Delta { z: 1, ..d },
            SixSDegrade => Delta { z: -1, ..d },
            Sequester => Delta { f: -1, s: 1, z: -1, ..d },
            Desequester => Delta { f: 1, s: -1, z: 1, ..d },
        }
    }

    /// Short stable name used in logs and CSV output.
    pub fn name(&self) -> String {
        use Transition::*;
        match *self {
            RrnaInitFree(j) => format!("RrnaInitFree({})", j + 1),
            RrnaInitEmptying(j) => format!("RrnaInitEmptying({})", j + 1),
            RrnaCompleteToFree(j) => format!("RrnaCompleteToFree({})", j + 1),
            RrnaCompleteToPromoter { rrna, promoter } => {
                format!("RrnaCompleteToPromoter({},{})", rrna + 1, promoter + 1)
            }
            MrnaBind => "MrnaBind".into(),
            MrnaRelease => "MrnaRelease".into(),
            SixSCreate => "SixSCreate".into(),
            SixSDegrade => "SixSDegrade".into(),
            Sequester => "Sequester".into(),
            Desequester => "Desequester".into(),
        }
    }
}

/// A transition with its rate in a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatedTransition {
    pub label: Transition,
    pub rate: f64,
}

fn shift(x: &mut u64, d: i64) {
    *x = x.checked_add_signed(d).expect("transition drove a count negative");
}

/// Applies the raw offsets of `t` without promoter normalization.
pub fn apply_delta(state: &mut FullState, t: Transition) {
    let d = t.delta();
    shift(&mut state.f, d.f);
    shift(&mut state.s, d.s);
    shift(&mut state.z, d.z);
    if let Some((i, du)) = d.u {
        state.u[i] = du > 0;
    }
    if let Some((j, dr)) = d.r {
        shift(&mut state.r[j], dr);
    }
}

/// Rates of the full model, pushed into `out`; only enabled transitions are emitted.
pub fn push_full_rates(state: &FullState, p: &ModelParams, m: u64, out: &mut Vec<(Transition, f64)>) {
    let j_count = p.j();
    let occupied = state.occupied_promoters();
    let all_occupied = occupied == j_count;
    for j in 0..j_count {
        let room = state.r[j] < p.cap_r[j];
        if room && state.f > 0 {
            out.push((Transition::RrnaInitFree(j), p.alpha_r[j]));
        }
        if room && state.u[j] && state.f == 0 {
            out.push((Transition::RrnaInitEmptying(j), p.alpha_r[j]));
        }
        if state.r[j] > 0 {
            if all_occupied {
                out.push((Transition::RrnaCompleteToFree(j), p.beta_r[j]));
            } else {
                let share = p.beta_r[j] / (j_count - occupied) as f64;
                for i in (0..j_count).filter(|&i| !state.u[i]) {
                    out.push((Transition::RrnaCompleteToPromoter { rrna: j, promoter: i }, share));
                }
            }
        }
    }
    if state.f > 0 && m < p.cap_m {
        out.push((Transition::MrnaBind, p.alpha_m * state.f as f64 * (p.cap_m - m) as f64));
    }
    if m > 0 {
        out.push((Transition::MrnaRelease, p.beta_m * m as f64));
    }
    out.push((Transition::SixSCreate, p.beta_6));
    if state.z > 0 && p.delta_6 > 0.0 {
        out.push((Transition::SixSDegrade, p.delta_6 * state.z as f64));
    }
    if state.f > 0 && state.z > 0 {
        out.push((Transition::Sequester, p.lambda * (state.f * state.z) as f64));
    }
    if state.s > 0 {
        out.push((Transition::Desequester, p.eta * state.s as f64));
    }
}

/// Enabled transitions of the full model in `state`.
pub fn enumerate_transitions_full(state: &FullState, p: &ModelParams) -> Result<Vec<RatedTransition>> {
    validate_full(state, p)?;
    let m = psi(state, p)?;
    let mut out = Vec::new();
    push_full_rates(state, p, m, &mut out);
    Ok(out.into_iter().map(|(label, rate)| RatedTransition { label, rate }).collect())
}

/// Puts free polymerases on empty promoters, choosing uniformly among the
/// empty ones, until either no polymerase is free or every promoter is busy.
pub fn normalize_promoters<R: Rng + ?Sized>(state: &mut FullState, rng: &mut R) {
    while state.f > 0 {
        let empty = state.u.iter().filter(|&&b| !b).count();
        if empty == 0 {
            break;
        }
        let pick = rng.random_range(0..empty);
        let i = state
            .u
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .nth(pick)
            .map(|(i, _)| i)
            .unwrap();
        state.u[i] = true;
        state.f -= 1;
    }
}

/// Event of the full model: the transition and the promoter a freed
/// polymerase was placed on, when one was empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullEvent {
    pub transition: Transition,
    pub refill: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullModel {
    pub params: ModelParams,
}

impl FullModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(FullModel { params })
    }
}

impl Model for FullModel {
    type State = FullState;
    type Label = Transition;
    type Event = FullEvent;

    fn rates(&self, state: &FullState, out: &mut Vec<(Transition, f64)>) {
        let m = self.params.n - state.f - state.s - state.rrna_total();
        push_full_rates(state, &self.params, m, out);
    }

    fn realize<R: Rng + ?Sized>(&self, state: &FullState, label: Transition, rng: &mut R) -> FullEvent {
        let d = label.delta();
        let empty = state.u.iter().filter(|&&b| !b).count();
        // Before any event f > 0 implies every promoter is busy, so a single
        // freed polymerase is the only one that can need a promoter.
        let refill = if d.f > 0 && empty > 0 {
            let pick = rng.random_range(0..empty);
            state.u.iter().enumerate().filter(|(_, &b)| !b).nth(pick).map(|(i, _)| i)
        } else {
            None
        };
        FullEvent { transition: label, refill }
    }

    fn apply(&self, state: &mut FullState, event: &FullEvent) {
        apply_delta(state, event.transition);
        if let Some(i) = event.refill {
            state.u[i] = true;
            state.f -= 1;
        }
    }

    fn validate(&self, state: &FullState) -> Result<()> {
        validate_full(state, &self.params)
    }

    fn check(&self, state: &FullState, condition: &StopCondition) -> Result<bool> {
        Ok(match *condition {
            StopCondition::FreeBelow(a) => state.f <= a,
            StopCondition::FreeHitsZero => state.f == 0,
            StopCondition::AllRrnaFull => state.r.iter().zip(&self.params.cap_r).all(|(r, c)| r == c),
            StopCondition::AllRrnaEmpty => state.r.iter().all(|&r| r == 0),
            other => return Err(Error::UnsupportedCondition(other.name())),
        })
    }
}

/// Writes `time,f,s,z,u_1..u_J,r_1..r_J,m` rows for states sampled on a grid.
pub fn write_full_csv<W: std::io::Write>(
    mut w: W,
    params: &ModelParams,
    times: &[f64],
    states: &[FullState],
) -> std::io::Result<()> {
    let j = params.j();
    let mut header = String::from("time,f,s,z");
    for k in 1..=j {
        header.push_str(&format!(",u_{k}"));
    }
    for k in 1..=j {
        header.push_str(&format!(",r_{k}"));
    }
    header.push_str(",m");
    writeln!(w, "{header}")?;
    for (t, x) in times.iter().zip(states) {
        let mut row = format!("{t},{},{},{}", x.f, x.s, x.z);
        for &b in &x.u {
            row.push_str(if b { ",1" } else { ",0" });
        }
        for r in &x.r {
            row.push_str(&format!(",{r}"));
        }
        let m = params.n - x.f - x.s - x.rrna_total();
        row.push_str(&format!(",{m}"));
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Auxiliary model: mRNA transcription and sequestration only.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxModel {
    pub params: ModelParams,
}

impl AuxModel {
    /// Only `n`, `cap_m` and the mRNA/6S/sequestration rates are used.
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(AuxModel { params })
    }
}

pub fn push_aux_rates(state: &AuxState, p: &ModelParams, out: &mut Vec<(Transition, f64)>) {
    let f = state.f as f64;
    let on_mrna = (p.n - state.f - state.s) as f64;
    let empty = p.cap_m as f64 - on_mrna;
    out.push((Transition::MrnaBind, p.alpha_m * empty * f));
    out.push((Transition::MrnaRelease, p.beta_m * on_mrna));
    out.push((Transition::SixSCreate, p.beta_6));
    out.push((Transition::SixSDegrade, p.delta_6 * state.z as f64));
    out.push((Transition::Sequester, p.lambda * f * state.z as f64));
    out.push((Transition::Desequester, p.eta * state.s as f64));
}

/// The six transitions of the auxiliary model, including those with rate 0.
pub fn enumerate_transitions_aux(state: &AuxState, p: &ModelParams) -> Result<Vec<RatedTransition>> {
    validate_aux(state, p)?;
    let mut out = Vec::with_capacity(6);
    push_aux_rates(state, p, &mut out);
    Ok(out.into_iter().map(|(label, rate)| RatedTransition { label, rate }).collect())
}

impl Model for AuxModel {
    type State = AuxState;
    type Label = Transition;
    type Event = Transition;

    fn rates(&self, state: &AuxState, out: &mut Vec<(Transition, f64)>) {
        push_aux_rates(state, &self.params, out);
    }

    fn realize<R: Rng + ?Sized>(&self, _: &AuxState, label: Transition, _: &mut R) -> Transition {
        label
    }

    fn apply(&self, state: &mut AuxState, t: &Transition) {
        let d = t.delta();
        shift(&mut state.f, d.f);
        shift(&mut state.s, d.s);
        shift(&mut state.z, d.z);
    }

    fn validate(&self, state: &AuxState) -> Result<()> {
        validate_aux(state, &self.params)
    }

    fn check(&self, state: &AuxState, condition: &StopCondition) -> Result<bool> {
        Ok(match *condition {
            StopCondition::FreeBelow(a) => state.f <= a,
            StopCondition::FreeHitsZero => state.f == 0,
            other => return Err(Error::UnsupportedCondition(other.name())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{rng_from_seed, simulate, step, StopPredicate};
    use crate::model::tests::params;

    fn find(ts: &[RatedTransition], label: Transition) -> Option<f64> {
        ts.iter().find(|t| t.label == label).map(|t| t.rate)
    }

    #[test]
    fn sequestration_rate_is_mass_action() {
        let mut p = params(10, &[2.0], &[1.0], &[3], 10);
        p.lambda = 0.5;
        let x = FullState { f: 2, s: 0, z: 3, u: vec![true], r: vec![0] };
        let ts = enumerate_transitions_full(&x, &p).unwrap();
        assert_eq!(find(&ts, Transition::Sequester), Some(3.0));
    }

    #[test]
    fn completion_splits_over_empty_promoters() {
        let p = params(10, &[2.0, 2.0], &[1.0, 1.0], &[5, 5], 10);
        let x = FullState { f: 0, s: 0, z: 0, u: vec![true, false], r: vec![1, 4] };
        let ts = enumerate_transitions_full(&x, &p).unwrap();
        let to_2 = |j| Transition::RrnaCompleteToPromoter { rrna: j, promoter: 1 };
        assert_eq!(find(&ts, to_2(0)), Some(1.0));
        assert_eq!(find(&ts, to_2(1)), Some(1.0));
        assert!(find(&ts, Transition::RrnaCompleteToFree(0)).is_none());
    }

    #[test]
    fn idle_state_has_only_creation_and_initiation() {
        // N = 2 so that both polymerases sit on the promoters and nothing else moves.
        let p = params(2, &[2.0, 3.0], &[1.0, 1.0], &[1, 1], 2);
        let x = FullState { f: 0, s: 0, z: 0, u: vec![true, true], r: vec![0, 0] };
        let ts = enumerate_transitions_full(&x, &p).unwrap();
        let mut labels: Vec<_> = ts.iter().map(|t| t.label).collect();
        labels.sort_by_key(|l| l.name());
        assert_eq!(
            labels,
            vec![
                Transition::RrnaInitEmptying(0),
                Transition::RrnaInitEmptying(1),
                Transition::SixSCreate
            ]
        );
        assert_eq!(find(&ts, Transition::SixSCreate), Some(p.beta_6));
    }

    #[test]
    fn aux_rates_follow_jump_table() {
        let mut p = params(10, &[1.0], &[1.0], &[1], 20);
        p.alpha_m = 0.7;
        let x = AuxState { f: 3, s: 2, z: 0 };
        let ts = enumerate_transitions_aux(&x, &p).unwrap();
        assert_eq!(ts.len(), 6);
        assert!((find(&ts, Transition::MrnaBind).unwrap() - 45.0 * 0.7).abs() < 1e-12);
        assert_eq!(find(&ts, Transition::Sequester), Some(0.0));
        let x = AuxState { f: 0, s: 0, z: 5 };
        let ts = enumerate_transitions_aux(&x, &p).unwrap();
        assert_eq!(find(&ts, Transition::Desequester), Some(0.0));
        assert_eq!(find(&ts, Transition::Sequester), Some(0.0));
    }

    #[test]
    fn normalization_examples() {
        let mut rng = rng_from_seed(1);
        let mut x = FullState { f: 1, s: 0, z: 0, u: vec![false, true], r: vec![0, 0] };
        normalize_promoters(&mut x, &mut rng);
        assert_eq!((x.f, x.u.clone()), (0, vec![true, true]));

        let mut x = FullState { f: 0, s: 0, z: 0, u: vec![false, true], r: vec![0, 0] };
        normalize_promoters(&mut x, &mut rng);
        assert_eq!(x.u, vec![false, true]);

        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let mut x = FullState { f: 3, s: 0, z: 0, u: vec![false, false], r: vec![0, 0] };
            normalize_promoters(&mut x, &mut rng);
            assert_eq!((x.f, x.u), (1, vec![true, true]));
        }
    }

    #[test]
    fn single_transition_step() {
        let p = params(1, &[1.0], &[1.0], &[1], 1);
        let mut p = p;
        p.beta_6 = 2.0;
        // the lone polymerase elongates an mRNA; release is the only other move
        let x = AuxState { f: 0, s: 1, z: 0 };
        let m = AuxModel::new(p).unwrap();
        let mut rng = rng_from_seed(3);
        let mut total = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let st = step(&m, &x, &mut rng).unwrap();
            total += st.dwell;
        }
        // rates: create 2, desequester 1 -> mean dwell 1/3
        assert!((total / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn step_is_deterministic_per_stream() {
        let p = params(10, &[2.0], &[1.0], &[3], 5);
        let m = FullModel::new(p).unwrap();
        let x = FullState { f: 2, s: 1, z: 2, u: vec![true], r: vec![1] };
        let a = step(&m, &x, &mut rng_from_seed(9)).unwrap();
        let b = step(&m, &x, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_zero_gives_empty_path() {
        let p = params(10, &[2.0], &[1.0], &[3], 5);
        let m = FullModel::new(p).unwrap();
        let x = FullState { f: 2, s: 1, z: 2, u: vec![true], r: vec![1] };
        let traj = simulate(&m, &x, &StopPredicate::horizon(0.0), 1).unwrap();
        assert!(traj.events.is_empty());
        assert_eq!(traj.final_state(), x);
        assert_eq!(traj.sample_on_grid(&[0.0]).unwrap(), vec![x]);
    }

    #[test]
    fn aux_free_zero_stops_immediately() {
        let p = params(10, &[1.0], &[1.0], &[1], 20);
        let m = AuxModel::new(p).unwrap();
        let traj = simulate(
            &m,
            &AuxState { f: 0, s: 3, z: 1 },
            &StopPredicate::on(StopCondition::FreeHitsZero),
            4,
        )
        .unwrap();
        assert_eq!(traj.stopped_at, Some(0.0));
        assert!(traj.events.is_empty());
    }

    #[test]
    fn grid_sampling_is_right_continuous() {
        let p = params(10, &[1.0], &[1.0], &[1], 20);
        let m = AuxModel::new(p).unwrap();
        let x0 = AuxState { f: 0, s: 0, z: 0 };
        let traj = crate::engine::Trajectory {
            model: m,
            initial: x0,
            events: vec![(1.0, Transition::SixSCreate)],
            snapshots: vec![],
            end_time: 2.0,
            stopped_at: None,
            seed: 0,
        };
        assert_eq!(traj.sample_on_grid(&[1.0]).unwrap()[0].z, 1);
        let zs: Vec<u64> = traj.sample_on_grid(&[0.5, 1.5]).unwrap().iter().map(|x| x.z).collect();
        assert_eq!(zs, vec![0, 1]);
        assert!(traj.sample_on_grid(&[2.5]).is_err());
        assert_eq!(traj.state_at(1.0).unwrap().z, 1);
        assert_eq!(traj.state_at(0.999).unwrap().z, 0);
    }

    #[test]
    fn unsupported_condition_is_reported() {
        let p = params(10, &[1.0], &[1.0], &[1], 20);
        let m = AuxModel::new(p).unwrap();
        let r = simulate(&m, &AuxState { f: 1, s: 0, z: 0 }, &StopPredicate::on(StopCondition::AllRrnaFull), 1);
        assert!(r.is_err());
    }

    #[test]
    fn budget_exhaustion_keeps_partial_path() {
        let p = params(10, &[1.0], &[1.0], &[1], 20);
        let m = AuxModel::new(p).unwrap();
        let err = crate::engine::Simulator::new(&m, 5)
            .with_budget(100)
            .record(&AuxState { f: 2, s: 2, z: 2 }, &StopPredicate::horizon(1e9), 5)
            .unwrap_err();
        match err {
            crate::engine::SimulateError::Truncated { budget, partial } => {
                assert_eq!(budget, 100);
                assert_eq!(partial.events.len(), 100);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
