//! Three operations for the browser page: an auxiliary-model path against its
//! fluid limit, the dwell law of an M/M/inf process against Poisson, and a
//! path of the limit jump chain. Each returns a JSON string.

use serde::Serialize;
use sixs_core::engine::{Observer, Simulator};
use sixs_core::fluid::equilibrium_free_fraction;
use sixs_core::occupation::{poisson_pmf, tv_between, GridSampler, OccupationRecorder};
use sixs_core::reference::BirthDeath;
use sixs_core::{
    integrate_supercritical, AuxModel, AuxState, ChainState, FluidParams, LimitChain, LimitChainParams, ModelParams,
    StopPredicate,
};
use wasm_bindgen::prelude::*;

/// Hard cap on events per call so the page stays responsive.
const EVENT_BUDGET: u64 = 20_000_000;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(fail)
}

#[derive(Serialize)]
pub struct FreePath {
    pub times: Vec<f64>,
    pub simulated: Vec<f64>,
    pub fluid: Vec<f64>,
    pub equilibrium: f64,
    pub sup_error: f64,
}

/// `F(N t) / N` of the auxiliary model with `C_m = c_m N`, unit rates and
/// no initial 6S, next to the fluid limit, on `points` grid times in `[0, horizon]`.
pub fn free_path(n: u64, c_m: f64, free0: f64, horizon: f64, points: usize, seed: u64) -> Result<FreePath, String> {
    if !(c_m > 0.0 && c_m < 1.0) {
        return Err(format!("c_m must lie in (0, 1), got {c_m}"));
    }
    if !(free0 > 0.0 && free0 <= 1.0 - c_m) {
        return Err(format!("initial free fraction must lie in (0, {}]", 1.0 - c_m));
    }
    if !(horizon > 0.0 && horizon.is_finite()) || points < 2 {
        return Err("need a positive horizon and at least two grid points".into());
    }
    let cap_m = (c_m * n as f64).round() as u64;
    let p = ModelParams {
        n,
        alpha_r: vec![1.0],
        beta_r: vec![2.0],
        cap_r: vec![1],
        alpha_m: 1.0,
        beta_m: 1.0,
        cap_m,
        beta_6: 1.0,
        delta_6: 1.0,
        lambda: 1.0,
        eta: 1.0,
    };
    let fp = FluidParams::from_model(&p);
    let model = AuxModel::new(p).map_err(|e| e.to_string())?;
    let f = (free0 * n as f64).round() as u64;
    let x0 = AuxState { f, s: n - cap_m - f, z: 0 };
    let times: Vec<f64> = (0..points).map(|i| horizon * i as f64 / (points - 1) as f64).collect();
    let mut grid = GridSampler::new(times.clone(), n as f64, move |x: &AuxState| x.f as f64 / n as f64);
    Simulator::new(&model, seed)
        .with_budget(EVENT_BUDGET)
        .run(&x0, &StopPredicate::horizon(horizon * n as f64), &mut grid)
        .map_err(|e| e.to_string())?;
    let simulated: Vec<f64> = grid.finish().into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let sol = integrate_supercritical(f as f64 / n as f64, &fp, horizon, 1e-3).map_err(|e| e.to_string())?;
    let fluid = times.iter().map(|&t| sol.value_at(t, 0)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let sup_error = simulated.iter().zip(&fluid).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let equilibrium = equilibrium_free_fraction(&fp).map_err(|e| e.to_string())?;
    Ok(FreePath { times, simulated, fluid, equilibrium, sup_error })
}

#[derive(Serialize)]
pub struct DwellLaw {
    pub values: Vec<u64>,
    pub empirical: Vec<f64>,
    pub poisson: Vec<f64>,
    pub tv: f64,
    pub events: u64,
}

/// Dwell-time law of an M/M/inf process over `[0, horizon]` from 0, against
/// Poisson(`kappa_i / kappa_o`).
pub fn dwell_law(kappa_i: f64, kappa_o: f64, horizon: f64, seed: u64) -> Result<DwellLaw, String> {
    if !(kappa_i > 0.0 && kappa_o > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err("rates and horizon must be positive".into());
    }
    let model = BirthDeath { kappa_i, kappa_o };
    let mut rec = OccupationRecorder::new((0.0, horizon), |y: &u64| *y);
    let out = Simulator::new(&model, seed)
        .with_budget(EVENT_BUDGET)
        .run(&0, &StopPredicate::horizon(horizon), &mut rec)
        .map_err(|e| e.to_string())?;
    let emp = rec.finish().to_pmf().map_err(|e| e.to_string())?;
    let reference = poisson_pmf(kappa_i / kappa_o).map_err(|e| e.to_string())?;
    let tv = tv_between(&emp, &reference);
    let top = emp.mass.keys().chain(reference.mass.keys()).copied().max().unwrap_or(0);
    let values: Vec<u64> = (0..=top).filter(|k| emp.get(k) > 1e-6 || reference.get(k) > 1e-6).collect();
    Ok(DwellLaw {
        empirical: values.iter().map(|k| emp.get(k)).collect(),
        poisson: values.iter().map(|k| reference.get(k)).collect(),
        values,
        tv,
        events: out.events,
    })
}

#[derive(Serialize, Default)]
pub struct ChainPath {
    pub times: Vec<f64>,
    pub s: Vec<u64>,
    pub z: Vec<u64>,
}

impl Observer<ChainState> for ChainPath {
    fn record(&mut self, time: f64, x: &ChainState) {
        self.times.push(time);
        self.s.push(x.s);
        self.z.push(x.z);
    }

    fn close(&mut self, time: f64, x: &ChainState) {
        self.record(time, x);
    }
}

/// Jump path of the limit chain from `(0, 0)`, capped at `max_jumps` jumps.
pub fn chain_path(params: LimitChainParams, horizon: f64, max_jumps: u64, seed: u64) -> Result<ChainPath, String> {
    let chain = LimitChain::new(params).map_err(|e| e.to_string())?;
    let mut path = ChainPath::default();
    let stop = StopPredicate::horizon(horizon);
    let run = Simulator::new(&chain, seed).with_budget(max_jumps).run(&ChainState { s: 0, z: 0 }, &stop, &mut path);
    match run {
        Ok(_) => Ok(path),
        // Running out of jumps just shortens the picture.
        Err(sixs_core::Error::BudgetExceeded { .. }) => Ok(path),
        Err(e) => Err(e.to_string()),
    }
}

#[wasm_bindgen(js_name = freePath)]
pub fn free_path_js(n: u32, c_m: f64, free0: f64, horizon: f64, seed: u32) -> Result<String, JsError> {
    json(&free_path(n as u64, c_m, free0, horizon, 201, seed as u64).map_err(fail)?)
}

#[wasm_bindgen(js_name = dwellLaw)]
pub fn dwell_law_js(kappa_i: f64, kappa_o: f64, horizon: f64, seed: u32) -> Result<String, JsError> {
    json(&dwell_law(kappa_i, kappa_o, horizon, seed as u64).map_err(fail)?)
}

#[wasm_bindgen(js_name = chainPath)]
pub fn chain_path_js(rho_m: f64, beta_6: f64, delta_6: f64, horizon: f64, seed: u32) -> Result<String, JsError> {
    let params = LimitChainParams { rho_m, lambda: 1.0, eta: 1.0, beta_6, delta_6 };
    json(&chain_path(params, horizon, 200_000, seed as u64).map_err(fail)?)
}
