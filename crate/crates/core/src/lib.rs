//! Exact stochastic simulation of a transcription model in which 6S RNAs
//! sequester free polymerases, together with the deterministic limits and
//! the occupation-measure statistics used to check the model's scaling
//! behaviour at finite `N`.

pub mod averaging;
pub mod engine;
pub mod error;
pub mod fluid;
pub mod limit_chain;
pub mod model;
pub mod occupation;
pub mod reference;
pub mod transitions;

pub use engine::{
    replica_seed, rng_from_seed, simulate, step, Model, Observer, Outcome, RunSummary, SimRng,
    SimulateError, Simulator, StopCondition, StopPredicate, Trajectory,
};
pub use error::{Error, Result};
pub use model::{
    check_saturation, classify_phase, derived_constants, psi, AuxState, DerivedConstants, FullState,
    ModelParams, PhaseClass, ScaledParams, Undefined,
};
pub use transitions::{
    enumerate_transitions_aux, enumerate_transitions_full, normalize_promoters, AuxModel, FullEvent,
    FullModel, RatedTransition, Transition,
};
pub use fluid::{integrate_subcritical, integrate_supercritical, FluidParams, OdeSolution};
pub use limit_chain::{simulate_limit_chain, ChainState, LimitChain, LimitChainParams};
pub use occupation::{fit, occupation_from_trajectory, poisson_pmf, tv_distance, FitReport, OccupationMeasure};
pub use reference::{simulate_bd, simulate_mm1, BirthDeathParams, MM1Params};
