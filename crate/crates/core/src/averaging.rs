//! Checks of the averaging principles: conditional product-Poisson laws of the
//! fast variables, concentration of the free fraction on the fluid curve, and
//! agreement of the full model with the limit jump chain.

use serde::Serialize;

use crate::engine::{Simulator, StopPredicate};
use crate::error::{Error, Result};
use crate::fluid::{conditional_poisson_params, FluidParams, OdeSolution};
use crate::limit_chain::{ChainState, LimitChain, LimitChainParams};
use crate::model::{AuxState, ModelParams};
use crate::occupation::{
    poisson_pmf, product_pmf, tv_between, CellOccupation, FitReport, OccupationMeasure, OccupationRecorder,
};

/// Cells whose dwell time is below this fraction of the cell width are rejected.
pub const MIN_CELL_COVERAGE: f64 = 0.5;

/// Conditional fit in one time cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFit {
    pub cell: (f64, f64),
    /// Fluid free fraction at the cell midpoint.
    pub free_fraction: f64,
    pub slots_mean: f64,
    pub sixs_mean: f64,
    pub joint: FitReport,
    pub slots: FitReport,
    pub sixs: FitReport,
}

/// Observable `(empty mRNA slots, free 6S)` of the auxiliary model.
pub fn slots_and_sixs(p: &ModelParams) -> impl Fn(&AuxState) -> (u64, u64) + Clone {
    let (n, cap_m) = (p.n as i64, p.cap_m as i64);
    move |x: &AuxState| {
        let g = cap_m - (n - x.f as i64 - x.s as i64);
        (g.max(0) as u64, x.z)
    }
}

/// Streaming per-cell recorder of `(G, Z)` on the accelerated clock `t -> N t`.
pub fn conditional_recorder(
    p: &ModelParams,
    range: (f64, f64),
    cells: usize,
) -> CellOccupation<(u64, u64), impl FnMut(&AuxState) -> (u64, u64)> {
    CellOccupation::new(range, cells, p.n as f64, slots_and_sixs(p))
}

/// Compares each cell's dwell law of `(G, Z)` with the product of Poisson laws
/// whose means are evaluated at the fluid free fraction of the cell midpoint.
///
/// `cells` may pool several replicas; coverage is judged per replica via
/// `replicas`.
pub fn product_poisson_conditional_test(
    cells: &[OccupationMeasure<(u64, u64)>],
    fluid: &OdeSolution,
    params: &FluidParams,
    replicas: usize,
    threshold: f64,
) -> Result<Vec<CellFit>> {
    cells
        .iter()
        .map(|cell| {
            let (lo, hi) = cell.window;
            let needed = MIN_CELL_COVERAGE * (hi - lo) * replicas.max(1) as f64;
            if !(cell.total >= needed) || cell.total <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "cell [{lo}, {hi}] has dwell {} < {needed}",
                    cell.total
                )));
            }
            let x = fluid.value_at(0.5 * (lo + hi), 0)?;
            let (mu_g, mu_z) = conditional_poisson_params(x, params)?;
            let pg = poisson_pmf(mu_g)?;
            let pz = poisson_pmf(mu_z)?;
            let joint_ref = product_pmf(&pg, &pz);
            let emp = cell.to_pmf()?;
            let g_emp = cell.map(|k| k.0);
            let z_emp = cell.map(|k| k.1);
            Ok(CellFit {
                cell: (lo, hi),
                free_fraction: x,
                slots_mean: mu_g,
                sixs_mean: mu_z,
                joint: FitReport::new(tv_between(&emp, &joint_ref), threshold, cell.total),
                slots: FitReport::new(tv_between(&g_emp.to_pmf()?, &pg), threshold, cell.total),
                sixs: FitReport::new(tv_between(&z_emp.to_pmf()?, &pz), threshold, cell.total),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracPoint {
    pub time: f64,
    pub observed: f64,
    pub fluid: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracReport {
    pub points: Vec<DiracPoint>,
    pub sup_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Sup over the grid of `|observed - fluid|`, where `samples` holds
/// `(time, F(N t) / N)` pairs.
pub fn dirac_time_marginal_check(samples: &[(f64, f64)], fluid: &OdeSolution, tolerance: f64) -> Result<DiracReport> {
    let points = samples
        .iter()
        .map(|&(time, observed)| {
            let f = fluid.value_at(time, 0)?;
            Ok(DiracPoint { time, observed, fluid: f, error: (observed - f).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_error = points.iter().map(|p| p.error).fold(0.0, f64::max);
    Ok(DiracReport { points, sup_error, tolerance, pass: sup_error < tolerance })
}

/// Dwell law of `(S, Z)` of the limit chain over `window`, started from `initial`.
pub fn limit_chain_occupation(
    params: LimitChainParams,
    initial: ChainState,
    window: (f64, f64),
    seed: u64,
) -> Result<OccupationMeasure<(u64, u64)>> {
    let chain = LimitChain::new(params)?;
    let mut rec = OccupationRecorder::new(window, |x: &ChainState| (x.s, x.z));
    Simulator::new(&chain, seed).run(&initial, &StopPredicate::horizon(window.1), &mut rec)?;
    Ok(rec.finish())
}

/// TV distance between the `(S, Z)` dwell laws of the full model after
/// saturation and of the limit chain.
pub fn limit_chain_equivalence_test(
    full: &OccupationMeasure<(u64, u64)>,
    chain: &OccupationMeasure<(u64, u64)>,
    saturation_time: f64,
    threshold: f64,
) -> Result<FitReport> {
    if full.window.0 < saturation_time {
        return Err(Error::InvalidArgument(format!(
            "window starts at {} before saturation at {saturation_time}",
            full.window.0
        )));
    }
    let d = tv_between(&full.to_pmf()?, &chain.to_pmf()?);
    Ok(FitReport::new(d, threshold, full.total))
}
