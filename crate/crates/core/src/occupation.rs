//! Occupation measures of piecewise-constant paths and the distances used to
//! compare them with Poisson and product-Poisson reference laws.
//!
//! All estimators integrate dwell time exactly: a state held on `[t, t')`
//! contributes `t' - t` (clipped to the window) to the weight of its observed
//! value. Event counts are never used as weights.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::{Model, Observer, Trajectory};
use crate::error::{Error, Result};

/// Dwell-time weighted distribution of an observable over a time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationMeasure<K: Ord> {
    pub window: (f64, f64),
    pub weights: BTreeMap<K, f64>,
    /// Total dwell time; equals the window length for a path covering the window.
    pub total: f64,
}

impl<K: Ord + Clone> OccupationMeasure<K> {
    pub fn empty(window: (f64, f64)) -> Self {
        OccupationMeasure { window, weights: BTreeMap::new(), total: 0.0 }
    }

    pub fn fraction(&self, k: &K) -> f64 {
        if self.total > 0.0 {
            self.weights.get(k).copied().unwrap_or(0.0) / self.total
        } else {
            0.0
        }
    }

    /// Normalized weights.
    pub fn to_pmf(&self) -> Result<DiscretePmf<K>> {
        if !(self.total > 0.0) {
            return Err(Error::EmptyWindow);
        }
        Ok(DiscretePmf {
            mass: self.weights.iter().map(|(k, w)| (k.clone(), w / self.total)).collect(),
        })
    }

    /// Adds another measure's weights, as when pooling independent replicas.
    pub fn absorb(&mut self, other: &OccupationMeasure<K>) {
        for (k, w) in &other.weights {
            *self.weights.entry(k.clone()).or_insert(0.0) += w;
        }
        self.total += other.total;
    }

    /// Image of the measure under `f`.
    pub fn map<K2: Ord + Clone>(&self, f: impl Fn(&K) -> K2) -> OccupationMeasure<K2> {
        let mut weights = BTreeMap::new();
        for (k, w) in &self.weights {
            *weights.entry(f(k)).or_insert(0.0) += w;
        }
        OccupationMeasure { window: self.window, weights, total: self.total }
    }
}

impl OccupationMeasure<u64> {
    /// Dwell-weighted mean of the observable.
    pub fn mean(&self) -> f64 {
        if self.total > 0.0 {
            self.weights.iter().map(|(k, w)| *k as f64 * w).sum::<f64>() / self.total
        } else {
            f64::NAN
        }
    }
}

/// Streams a path into an [`OccupationMeasure`].
///
/// Path times are divided by `time_scale` before being compared to the
/// window, so that an observation on the accelerated clock `t -> N t` is a
/// recorder with `time_scale = N`.
pub struct OccupationRecorder<K: Ord, F> {
    window: (f64, f64),
    time_scale: f64,
    observable: F,
    current: Option<(f64, K)>,
    weights: BTreeMap<K, f64>,
}

impl<K: Ord + Clone, F> OccupationRecorder<K, F> {
    pub fn new(window: (f64, f64), observable: F) -> Self {
        Self::scaled(window, 1.0, observable)
    }

    pub fn scaled(window: (f64, f64), time_scale: f64, observable: F) -> Self {
        OccupationRecorder { window, time_scale, observable, current: None, weights: BTreeMap::new() }
    }

    fn credit(&mut self, until: f64) {
        if let Some((from, k)) = &self.current {
            let lo = from.max(self.window.0);
            let hi = until.min(self.window.1);
            if hi > lo {
                *self.weights.entry(k.clone()).or_insert(0.0) += hi - lo;
            }
        }
    }

    pub fn finish(self) -> OccupationMeasure<K> {
        let total = self.weights.values().sum();
        OccupationMeasure { window: self.window, weights: self.weights, total }
    }
}

impl<S, K: Ord + Clone, F: FnMut(&S) -> K> Observer<S> for OccupationRecorder<K, F> {
    fn record(&mut self, time: f64, state: &S) {
        let t = time / self.time_scale;
        self.credit(t);
        self.current = Some((t, (self.observable)(state)));
    }

    fn close(&mut self, time: f64, _state: &S) {
        self.credit(time / self.time_scale);
        self.current = None;
    }
}

/// Occupation measure of `observable` along a recorded trajectory.
pub fn occupation_from_trajectory<M: Model, K: Ord + Clone>(
    traj: &Trajectory<M>,
    observable: impl FnMut(&M::State) -> K,
    window: (f64, f64),
) -> Result<OccupationMeasure<K>> {
    if !(window.1 > window.0) {
        return Err(Error::EmptyWindow);
    }
    if window.0 < 0.0 || window.1 > traj.end_time {
        return Err(Error::OutOfRange { time: window.1, end: traj.end_time });
    }
    let mut rec = OccupationRecorder::new(window, observable);
    traj.replay(&mut rec);
    Ok(rec.finish())
}

/// Per-cell occupation measures over a uniform partition of `[t0, t1]`.
pub struct CellOccupation<K: Ord, F> {
    start: f64,
    width: f64,
    time_scale: f64,
    observable: F,
    current: Option<(f64, K)>,
    cells: Vec<BTreeMap<K, f64>>,
}

impl<K: Ord + Clone, F> CellOccupation<K, F> {
    pub fn new(range: (f64, f64), cells: usize, time_scale: f64, observable: F) -> Self {
        assert!(cells > 0 && range.1 > range.0);
        CellOccupation {
            start: range.0,
            width: (range.1 - range.0) / cells as f64,
            time_scale,
            observable,
            current: None,
            cells: vec![BTreeMap::new(); cells],
        }
    }

    fn credit(&mut self, until: f64) {
        let Some((from, k)) = &self.current else { return };
        let n = self.cells.len();
        let end = self.start + self.width * n as f64;
        let lo = from.max(self.start);
        let hi = until.min(end);
        if hi <= lo {
            return;
        }
        let first = (((lo - self.start) / self.width) as usize).min(n - 1);
        let last = (((hi - self.start) / self.width) as usize).min(n - 1);
        for c in first..=last {
            let c_lo = self.start + self.width * c as f64;
            let c_hi = c_lo + self.width;
            let d = hi.min(c_hi) - lo.max(c_lo);
            if d > 0.0 {
                *self.cells[c].entry(k.clone()).or_insert(0.0) += d;
            }
        }
    }

    pub fn finish(self) -> Vec<OccupationMeasure<K>> {
        let (start, width) = (self.start, self.width);
        self.cells
            .into_iter()
            .enumerate()
            .map(|(c, weights)| {
                let lo = start + width * c as f64;
                OccupationMeasure { window: (lo, lo + width), total: weights.values().sum(), weights }
            })
            .collect()
    }
}

impl<S, K: Ord + Clone, F: FnMut(&S) -> K> Observer<S> for CellOccupation<K, F> {
    fn record(&mut self, time: f64, state: &S) {
        let t = time / self.time_scale;
        self.credit(t);
        self.current = Some((t, (self.observable)(state)));
    }

    fn close(&mut self, time: f64, _state: &S) {
        self.credit(time / self.time_scale);
        self.current = None;
    }
}

/// Samples an observable at fixed times, right-continuously at jumps.
pub struct GridSampler<T, F> {
    times: Vec<f64>,
    time_scale: f64,
    observable: F,
    next: usize,
    current: Option<T>,
    values: Vec<Option<T>>,
}

impl<T: Clone, F> GridSampler<T, F> {
    /// `times` must be nondecreasing; they are on the clock `raw / time_scale`.
    pub fn new(times: Vec<f64>, time_scale: f64, observable: F) -> Self {
        let n = times.len();
        GridSampler { times, time_scale, observable, next: 0, current: None, values: vec![None; n] }
    }

    fn fill_before(&mut self, t: f64, inclusive: bool) {
        while self.next < self.times.len() {
            let g = self.times[self.next];
            let due = if inclusive { g <= t } else { g < t };
            if !due {
                break;
            }
            self.values[self.next] = self.current.clone();
            self.next += 1;
        }
    }

    /// Values at the grid times; `None` past the end of the path.
    pub fn finish(self) -> Vec<Option<T>> {
        self.values
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

impl<S, T: Clone, F: FnMut(&S) -> T> Observer<S> for GridSampler<T, F> {
    fn record(&mut self, time: f64, state: &S) {
        self.fill_before(time / self.time_scale, false);
        self.current = Some((self.observable)(state));
    }

    fn close(&mut self, time: f64, _state: &S) {
        self.fill_before(time / self.time_scale, true);
    }
}

/// A probability mass function with finite support. Mass missing from the
/// support (a truncated tail) counts as mismatched in distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePmf<K: Ord> {
    pub mass: BTreeMap<K, f64>,
}

impl<K: Ord> DiscretePmf<K> {
    pub fn get(&self, k: &K) -> f64 {
        self.mass.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }
}

/// Reference pmfs are truncated once their cumulative mass reaches `1 - POISSON_TAIL`.
pub const POISSON_TAIL: f64 = 1e-12;

/// Poisson pmf by upward recursion `p(k+1) = p(k) mu / (k+1)`, carried in log
/// space so that large means do not underflow at `k = 0`.
pub fn poisson_pmf(mu: f64) -> Result<DiscretePmf<u64>> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("Poisson mean must be finite and >= 0, got {mu}")));
    }
    let mut mass = BTreeMap::new();
    if mu == 0.0 {
        mass.insert(0, 1.0);
        return Ok(DiscretePmf { mass });
    }
    let ln_mu = mu.ln();
    let mut log_p = -mu;
    let mut cumulative = 0.0;
    let mut k = 0u64;
    loop {
        let p = log_p.exp();
        if p > 0.0 {
            mass.insert(k, p);
        }
        cumulative += p;
        if cumulative >= 1.0 - POISSON_TAIL && k as f64 >= mu {
            break;
        }
        if k as f64 > mu && p == 0.0 {
            break;
        }
        log_p += ln_mu - ((k + 1) as f64).ln();
        k += 1;
    }
    Ok(DiscretePmf { mass })
}

/// Law of two independent variables.
pub fn product_pmf<A: Ord + Clone, B: Ord + Clone>(a: &DiscretePmf<A>, b: &DiscretePmf<B>) -> DiscretePmf<(A, B)> {
    let mut mass = BTreeMap::new();
    for (ka, pa) in &a.mass {
        for (kb, pb) in &b.mass {
            let p = pa * pb;
            if p > 0.0 {
                mass.insert((ka.clone(), kb.clone()), p);
            }
        }
    }
    DiscretePmf { mass }
}

/// Total variation distance `1/2 sum |p - q|`, with the mass missing from either
/// support added to the sum.
pub fn tv_between<K: Ord>(p: &DiscretePmf<K>, q: &DiscretePmf<K>) -> f64 {
    let mut sum = 0.0;
    for (k, pk) in &p.mass {
        sum += (pk - q.get(k)).abs();
    }
    for (k, qk) in &q.mass {
        if !p.mass.contains_key(k) {
            sum += qk;
        }
    }
    sum += (1.0 - p.total()).max(0.0) + (1.0 - q.total()).max(0.0);
    (0.5 * sum).clamp(0.0, 1.0)
}

/// Total variation distance between an occupation measure and a reference pmf.
pub fn tv_distance<K: Ord + Clone>(empirical: &OccupationMeasure<K>, reference: &DiscretePmf<K>) -> Result<f64> {
    Ok(tv_between(&empirical.to_pmf()?, reference))
}

/// Outcome of a distance-threshold check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    /// Total variation distance.
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Total dwell time behind the empirical law.
    pub sample_size: f64,
}

impl FitReport {
    pub fn new(statistic: f64, threshold: f64, sample_size: f64) -> Self {
        FitReport { statistic, threshold, pass: statistic < threshold, sample_size }
    }
}

/// Compares an occupation measure with a reference pmf.
pub fn fit<K: Ord + Clone>(empirical: &OccupationMeasure<K>, reference: &DiscretePmf<K>, threshold: f64) -> Result<FitReport> {
    Ok(FitReport::new(tv_distance(empirical, reference)?, threshold, empirical.total))
}
