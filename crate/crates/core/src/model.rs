//! Parameters, states and derived constants of the transcription model.
//!
//! The full model tracks free polymerases `f`, sequestered polymerases `s`,
//! free 6S RNAs `z` and, for each rRNA type `j`, promoter occupancy `u_j`
//! together with the number `r_j` of polymerases elongating that rRNA. The
//! remaining polymerases are elongating an mRNA; their number is [`psi`].

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used for the scaled capacities `C / N`.
pub type Rational = Ratio<i64>;

/// Rate constants, capacities and polymerase count of the full model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Total number of polymerases.
    pub n: u64,
    /// rRNA initiation rates, one per rRNA type.
    pub alpha_r: Vec<f64>,
    /// rRNA completion rates.
    pub beta_r: Vec<f64>,
    /// Elongation capacities of the rRNA genes.
    pub cap_r: Vec<u64>,
    /// mRNA binding rate per (free polymerase, empty slot) pair.
    pub alpha_m: f64,
    /// mRNA release rate.
    pub beta_m: f64,
    /// Number of mRNA slots.
    pub cap_m: u64,
    /// 6S RNA creation rate.
    pub beta_6: f64,
    /// Degradation rate of a free 6S RNA.
    pub delta_6: f64,
    /// Sequestration rate per (free polymerase, free 6S) pair.
    pub lambda: f64,
    /// Desequestration rate.
    pub eta: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be a positive finite rate, got {v}")))
    }
}

impl ModelParams {
    /// Number of rRNA types.
    pub fn j(&self) -> usize {
        self.alpha_r.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("N must be positive".into()));
        }
        let j = self.j();
        if self.beta_r.len() != j || self.cap_r.len() != j {
            return Err(Error::InvalidParams(format!(
                "alpha_r, beta_r and cap_r must have equal lengths ({}, {}, {})",
                j,
                self.beta_r.len(),
                self.cap_r.len()
            )));
        }
        for k in 0..j {
            positive("alpha_r", self.alpha_r[k])?;
            positive("beta_r", self.beta_r[k])?;
            if self.cap_r[k] == 0 || self.cap_r[k] > self.n {
                return Err(Error::InvalidParams(format!(
                    "cap_r[{k}] = {} must lie in [1, N = {}]",
                    self.cap_r[k], self.n
                )));
            }
        }
        positive("alpha_m", self.alpha_m)?;
        positive("beta_m", self.beta_m)?;
        positive("beta_6", self.beta_6)?;
        positive("lambda", self.lambda)?;
        positive("eta", self.eta)?;
        if !(self.delta_6.is_finite() && self.delta_6 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "delta_6 must be nonnegative, got {}",
                self.delta_6
            )));
        }
        if self.cap_m == 0 {
            return Err(Error::InvalidParams("cap_m must be positive".into()));
        }
        Ok(())
    }

    pub fn scaled(&self) -> ScaledParams {
        ScaledParams::from_params(self)
    }

    pub fn derived(&self) -> DerivedConstants {
        derived_constants(self, &self.scaled())
    }
}

/// Capacities divided by `N`, kept as exact rationals so that the saturation
/// condition is decided without rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledParams {
    pub c_r: Vec<Rational>,
    pub c_m: Rational,
    pub c_r_total: Rational,
    /// `N - J - sum C_r`: polymerases left once every rRNA slot and promoter is busy.
    pub a_n: i64,
    /// `A_N / N`.
    pub gamma: Rational,
}

impl ScaledParams {
    pub fn from_params(p: &ModelParams) -> Self {
        let n = p.n as i64;
        let c_r: Vec<Rational> = p.cap_r.iter().map(|&c| Ratio::new(c as i64, n)).collect();
        let c_r_total = c_r.iter().fold(Ratio::from_integer(0), |acc, c| acc + c);
        let a_n = n - p.j() as i64 - p.cap_r.iter().map(|&c| c as i64).sum::<i64>();
        ScaledParams {
            c_r,
            c_m: Ratio::new(p.cap_m as i64, n),
            c_r_total,
            a_n,
            gamma: Ratio::new(a_n, n),
        }
    }

    /// Builds scaled constants directly from rational limits.
    pub fn from_ratios(c_r: Vec<Rational>, c_m: Rational) -> Self {
        let c_r_total = c_r.iter().fold(Ratio::from_integer(0), |acc, c| acc + c);
        let gamma = Ratio::from_integer(1) - c_r_total;
        ScaledParams { c_r, c_m, c_r_total, a_n: 0, gamma }
    }

    pub fn c_m_f64(&self) -> f64 {
        to_f64(self.c_m)
    }

    pub fn c_r_total_f64(&self) -> f64 {
        to_f64(self.c_r_total)
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `max(c_m, sum c_r) < 1 < sum c_r + c_m`, decided exactly.
pub fn check_saturation(scaled: &ScaledParams) -> bool {
    let one = Ratio::from_integer(1);
    scaled.c_m.max(scaled.c_r_total) < one && one < scaled.c_r_total + scaled.c_m
}

/// Why a derived constant has no value for the given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Undefined {
    /// `delta_6 = 0`: free 6S RNAs never degrade.
    NoDegradation,
    /// Requires `c_m > 1`.
    NotSubcritical,
    /// Requires `c_m < 1`.
    NotSupercritical,
    /// Requires `c_m + sum c_r > 1`.
    NotSaturating,
}

impl std::fmt::Display for Undefined {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Undefined::NoDegradation => "delta_6 = 0",
            Undefined::NotSubcritical => "requires c_m > 1",
            Undefined::NotSupercritical => "requires c_m < 1",
            Undefined::NotSaturating => "requires c_m + c_r > 1",
        };
        f.write_str(s)
    }
}

/// A derived constant, or the reason it does not exist.
pub type Derived = std::result::Result<f64, Undefined>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `eta / lambda`.
    pub rho_1: f64,
    /// `beta_6 / delta_6`.
    pub rho_6: Derived,
    /// Free-polymerase Poisson mean of the sub-critical auxiliary model.
    pub rho_m_aux_sub: Derived,
    /// Free-polymerase Poisson mean after rRNA saturation in exponential phase.
    pub rho_m_exp: Derived,
    /// `beta_m / alpha_m`.
    pub rho_m_super: f64,
    /// Asymptotic fraction of free polymerases, `rho_1 (1 - c_m) / (rho_6 + rho_1)`.
    pub f_infinity: Derived,
}

pub fn derived_constants(p: &ModelParams, scaled: &ScaledParams) -> DerivedConstants {
    let c_m = scaled.c_m_f64();
    let c_r = scaled.c_r_total_f64();
    let one = Ratio::from_integer(1);
    let rho_1 = p.eta / p.lambda;
    let rho_6 = if p.delta_6 > 0.0 { Ok(p.beta_6 / p.delta_6) } else { Err(Undefined::NoDegradation) };
    let rho_m_aux_sub = if scaled.c_m > one {
        Ok(p.beta_m / (p.alpha_m * (c_m - 1.0)))
    } else {
        Err(Undefined::NotSubcritical)
    };
    let rho_m_exp = if scaled.c_m + scaled.c_r_total > one {
        Ok(p.beta_m * (1.0 - c_r) / (p.alpha_m * (c_m + c_r - 1.0)))
    } else {
        Err(Undefined::NotSaturating)
    };
    let f_infinity = match rho_6 {
        Err(e) => Err(e),
        Ok(_) if scaled.c_m >= one => Err(Undefined::NotSupercritical),
        Ok(r6) => Ok(rho_1 * (1.0 - c_m) / (r6 + rho_1)),
    };
    DerivedConstants {
        rho_1,
        rho_6,
        rho_m_aux_sub,
        rho_m_exp,
        rho_m_super: p.beta_m / p.alpha_m,
        f_infinity,
    }
}

/// Regime of the rRNA part of the system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseClass {
    /// Every rRNA type initiates faster than it completes.
    Exponential,
    /// Every rRNA type completes faster than it initiates.
    Stationary,
    /// Some types of each kind; holds the (0-based) indices with ratio above 1.
    Mixed { supercritical: Vec<usize> },
}

pub fn classify_phase(p: &ModelParams) -> Result<PhaseClass> {
    p.validate()?;
    let mut above = Vec::new();
    for (j, (a, b)) in p.alpha_r.iter().zip(&p.beta_r).enumerate() {
        let ratio = a / b;
        if ratio == 1.0 {
            return Err(Error::BoundaryRatio { rrna: j });
        }
        if ratio > 1.0 {
            above.push(j);
        }
    }
    Ok(if above.len() == p.j() {
        PhaseClass::Exponential
    } else if above.is_empty() {
        PhaseClass::Stationary
    } else {
        PhaseClass::Mixed { supercritical: above }
    })
}

/// State of the full model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FullState {
    pub f: u64,
    pub s: u64,
    pub z: u64,
    /// Promoter occupancy per rRNA type.
    pub u: Vec<bool>,
    /// Polymerases elongating each rRNA type.
    pub r: Vec<u64>,
}

impl FullState {
    /// Promoter-bound plus elongating rRNA polymerases.
    pub fn rrna_total(&self) -> u64 {
        self.u.iter().filter(|&&b| b).count() as u64 + self.r.iter().sum::<u64>()
    }

    pub fn occupied_promoters(&self) -> usize {
        self.u.iter().filter(|&&b| b).count()
    }
}

/// Number of polymerases elongating an mRNA, `N - f - s - sum(u_j + r_j)`.
pub fn psi(state: &FullState, p: &ModelParams) -> Result<u64> {
    let used = state.f + state.s + state.rrna_total();
    p.n.checked_sub(used).ok_or_else(|| {
        Error::InvalidState(format!("f + s + sum(u + r) = {used} exceeds N = {}", p.n))
    })
}

/// Checks membership of the full-model state space.
pub fn validate_full(state: &FullState, p: &ModelParams) -> Result<()> {
    let j = p.j();
    if state.u.len() != j || state.r.len() != j {
        return Err(Error::InvalidState(format!("expected {j} rRNA types")));
    }
    let m = psi(state, p)?;
    if m > p.cap_m {
        return Err(Error::InvalidState(format!(
            "{m} polymerases on mRNAs exceed the {} slots",
            p.cap_m
        )));
    }
    if state.f > 0 && state.u.iter().any(|&b| !b) {
        return Err(Error::InvalidState("free polymerase while a promoter is empty".into()));
    }
    for k in 0..j {
        if state.r[k] > p.cap_r[k] {
            return Err(Error::InvalidState(format!(
                "r[{k}] = {} exceeds capacity {}",
                state.r[k], p.cap_r[k]
            )));
        }
    }
    Ok(())
}

/// State of the auxiliary model without rRNAs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AuxState {
    pub f: u64,
    pub s: u64,
    pub z: u64,
}

impl AuxState {
    /// Empty mRNA slots, `C_m - (N - f - s)`.
    pub fn empty_slots(&self, p: &ModelParams) -> i64 {
        p.cap_m as i64 - (p.n as i64 - self.f as i64 - self.s as i64)
    }

    /// Polymerases elongating an mRNA, `N - f - s`.
    pub fn on_mrna(&self, p: &ModelParams) -> i64 {
        p.n as i64 - self.f as i64 - self.s as i64
    }
}

pub fn validate_aux(state: &AuxState, p: &ModelParams) -> Result<()> {
    if state.f + state.s > p.n {
        return Err(Error::InvalidState(format!(
            "f + s = {} exceeds N = {}",
            state.f + state.s,
            p.n
        )));
    }
    if state.empty_slots(p) < 0 {
        return Err(Error::InvalidState(format!(
            "{} polymerases on mRNAs exceed the {} slots",
            state.on_mrna(p),
            p.cap_m
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn params(n: u64, alpha_r: &[f64], beta_r: &[f64], cap_r: &[u64], cap_m: u64) -> ModelParams {
        ModelParams {
            n,
            alpha_r: alpha_r.to_vec(),
            beta_r: beta_r.to_vec(),
            cap_r: cap_r.to_vec(),
            alpha_m: 1.0,
            beta_m: 1.0,
            cap_m,
            beta_6: 1.0,
            delta_6: 1.0,
            lambda: 1.0,
            eta: 1.0,
        }
    }

    fn r(n: i64, d: i64) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn classify_examples() {
        let p = params(10, &[2.0, 3.0], &[1.0, 1.0], &[3, 3], 5);
        assert_eq!(classify_phase(&p).unwrap(), PhaseClass::Exponential);
        let p = params(10, &[0.5, 0.9], &[1.0, 1.0], &[3, 3], 5);
        assert_eq!(classify_phase(&p).unwrap(), PhaseClass::Stationary);
        let p = params(10, &[2.0, 0.5], &[1.0, 1.0], &[3, 3], 5);
        assert_eq!(classify_phase(&p).unwrap(), PhaseClass::Mixed { supercritical: vec![0] });
    }

    #[test]
    fn classify_rejects_unit_ratio() {
        let p = params(10, &[2.0, 1.5], &[1.0, 1.5], &[3, 3], 5);
        assert_eq!(classify_phase(&p), Err(Error::BoundaryRatio { rrna: 1 }));
    }

    #[test]
    fn saturation_examples() {
        let s = ScaledParams::from_ratios(vec![r(3, 10), r(3, 10)], r(6, 10));
        assert!(check_saturation(&s));
        let s = ScaledParams::from_ratios(vec![r(5, 10), r(6, 10)], r(2, 10));
        assert!(!check_saturation(&s));
        let s = ScaledParams::from_ratios(vec![r(2, 10), r(2, 10)], r(3, 10));
        assert!(!check_saturation(&s));
        // boundary equalities are excluded
        let s = ScaledParams::from_ratios(vec![r(1, 2), r(1, 2)], r(1, 2));
        assert!(!check_saturation(&s));
    }

    #[test]
    fn scaled_from_params_is_exact() {
        let p = params(10, &[2.0, 3.0], &[1.0, 1.0], &[3, 3], 6);
        let s = p.scaled();
        assert_eq!(s.c_r_total, r(3, 5));
        assert_eq!(s.a_n, 10 - 2 - 6);
        assert!(check_saturation(&s));
    }

    #[test]
    fn psi_examples() {
        let p = params(10, &[2.0, 3.0], &[1.0, 1.0], &[5, 5], 10);
        let x = FullState { f: 2, s: 1, z: 0, u: vec![true, true], r: vec![2, 1] };
        // 10 - 2 - 1 - ((1 + 2) + (1 + 1))
        assert_eq!(psi(&x, &p).unwrap(), 2);
        let p5 = params(5, &[2.0, 3.0], &[1.0, 1.0], &[5, 5], 10);
        let x = FullState { f: 0, s: 5, z: 0, u: vec![false, false], r: vec![0, 0] };
        assert_eq!(psi(&x, &p5).unwrap(), 0);
        let p4 = params(4, &[2.0, 3.0], &[1.0, 1.0], &[4, 4], 10);
        let x = FullState { f: 4, s: 1, z: 0, u: vec![false, false], r: vec![0, 0] };
        assert!(matches!(psi(&x, &p4), Err(Error::InvalidState(_))));
    }

    #[test]
    fn derived_examples() {
        let mut p = params(10, &[2.0], &[1.0], &[3], 5);
        let d = p.derived();
        assert_eq!(d.rho_1, 1.0);
        assert_eq!(d.rho_6, Ok(1.0));
        assert!((d.f_infinity.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(d.rho_m_aux_sub, Err(Undefined::NotSubcritical));

        p.cap_m = 20;
        assert_eq!(p.derived().rho_m_aux_sub, Ok(1.0));

        let s = ScaledParams::from_ratios(vec![r(3, 10), r(3, 10)], r(6, 10));
        let d = derived_constants(&params(10, &[2.0, 2.0], &[1.0, 1.0], &[3, 3], 6), &s);
        assert!((d.rho_m_exp.unwrap() - 2.0).abs() < 1e-12);

        p.delta_6 = 0.0;
        let d = p.derived();
        assert_eq!(d.rho_6, Err(Undefined::NoDegradation));
        assert_eq!(d.f_infinity, Err(Undefined::NoDegradation));
    }

    #[test]
    fn validation_catches_bad_params() {
        let mut p = params(10, &[2.0], &[1.0], &[3], 5);
        assert!(p.validate().is_ok());
        p.lambda = 0.0;
        assert!(p.validate().is_err());
        p.lambda = 1.0;
        p.cap_r = vec![11];
        assert!(p.validate().is_err());
        p.cap_r = vec![3, 3];
        assert!(p.validate().is_err());
    }

    #[test]
    fn full_state_constraints() {
        let p = params(10, &[2.0, 3.0], &[1.0, 1.0], &[3, 3], 5);
        let ok = FullState { f: 1, s: 0, z: 0, u: vec![true, true], r: vec![3, 3] };
        assert!(validate_full(&ok, &p).is_ok());
        let bad = FullState { f: 1, s: 0, z: 0, u: vec![false, true], r: vec![3, 3] };
        assert!(validate_full(&bad, &p).is_err());
        let over = FullState { f: 0, s: 0, z: 0, u: vec![true, true], r: vec![4, 0] };
        assert!(validate_full(&over, &p).is_err());
    }
}
