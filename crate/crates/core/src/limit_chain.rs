//! The jump process on `N^2` followed by (sequestered polymerases, free 6S
//! RNAs) once the free polymerases have been averaged out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{simulate, Model, SimulateError, StopCondition, StopPredicate, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitChainParams {
    /// Poisson mean of the free polymerases in the regime being approximated.
    pub rho_m: f64,
    pub lambda: f64,
    pub eta: f64,
    pub beta_6: f64,
    pub delta_6: f64,
}

impl LimitChainParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho_m > 0.0
            && self.lambda > 0.0
            && self.eta > 0.0
            && self.beta_6 >= 0.0
            && self.delta_6 >= 0.0
            && [self.rho_m, self.lambda, self.eta, self.beta_6, self.delta_6].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid limit-chain parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub s: u64,
    pub z: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainMove {
    /// `(s, z) -> (s + 1, z - 1)` at `lambda rho_m z`.
    Sequester,
    /// `(s, z) -> (s - 1, z + 1)` at `eta s`.
    Desequester,
    /// `z + 1` at `beta_6`.
    Create,
    /// `z - 1` at `delta_6 z`.
    Degrade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitChain {
    pub params: LimitChainParams,
}

impl LimitChain {
    pub fn new(params: LimitChainParams) -> Result<Self> {
        params.validate()?;
        Ok(LimitChain { params })
    }
}

impl Model for LimitChain {
    type State = ChainState;
    type Label = ChainMove;
    type Event = ChainMove;

    fn rates(&self, x: &ChainState, out: &mut Vec<(ChainMove, f64)>) {
        let p = &self.params;
        out.push((ChainMove::Sequester, p.lambda * p.rho_m * x.z as f64));
        out.push((ChainMove::Desequester, p.eta * x.s as f64));
        out.push((ChainMove::Create, p.beta_6));
        out.push((ChainMove::Degrade, p.delta_6 * x.z as f64));
    }

    fn realize<R: Rng + ?Sized>(&self, _: &ChainState, m: ChainMove, _: &mut R) -> ChainMove {
        m
    }

    fn apply(&self, x: &mut ChainState, m: &ChainMove) {
        match m {
            ChainMove::Sequester => {
                x.s += 1;
                x.z -= 1;
            }
            ChainMove::Desequester => {
                x.s -= 1;
                x.z += 1;
            }
            ChainMove::Create => x.z += 1,
            ChainMove::Degrade => x.z -= 1,
        }
    }

    fn validate(&self, _: &ChainState) -> Result<()> {
        Ok(())
    }

    fn check(&self, _: &ChainState, c: &StopCondition) -> Result<bool> {
        Err(Error::UnsupportedCondition(c.name()))
    }
}

pub fn simulate_limit_chain(
    params: LimitChainParams,
    initial: ChainState,
    stop: &StopPredicate,
    seed: u64,
) -> std::result::Result<Trajectory<LimitChain>, SimulateError<LimitChain>> {
    let chain = LimitChain::new(params).map_err(SimulateError::Model)?;
    simulate(&chain, &initial, stop, seed)
}

/// Values of `a` for which `H_a(s, z) = a s + z` has negative drift outside a
/// finite set: the open interval `(1, 1 + delta_6 / (lambda rho_m))`, empty
/// when `delta_6 = 0`.
pub fn lyapunov_window(p: &LimitChainParams) -> std::ops::Range<f64> {
    1.0..1.0 + p.delta_6 / (p.lambda * p.rho_m)
}

/// Expected rate of change of `H_a` in state `x`.
pub fn lyapunov_drift(p: &LimitChainParams, a: f64, x: ChainState) -> f64 {
    let (s, z) = (x.s as f64, x.z as f64);
    (a - 1.0) * (p.lambda * p.rho_m * z - p.eta * s) + p.beta_6 - p.delta_6 * z
}
