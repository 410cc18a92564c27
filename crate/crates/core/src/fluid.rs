//! Deterministic limits: the sub-critical drain ODE, the super-critical ODE
//! for the free-polymerase fraction, and closed-form equilibria.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Rates entering the fluid limits, with the mRNA slot fraction `c_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluidParams {
    pub alpha_m: f64,
    pub beta_m: f64,
    pub beta_6: f64,
    pub delta_6: f64,
    pub lambda: f64,
    pub eta: f64,
    pub c_m: f64,
}

impl FluidParams {
    /// Uses `C_m / N` of the given parameters as `c_m`.
    pub fn from_model(p: &ModelParams) -> Self {
        FluidParams {
            alpha_m: p.alpha_m,
            beta_m: p.beta_m,
            beta_6: p.beta_6,
            delta_6: p.delta_6,
            lambda: p.lambda,
            eta: p.eta,
            c_m: p.cap_m as f64 / p.n as f64,
        }
    }

    pub fn rho_1(&self) -> f64 {
        self.eta / self.lambda
    }

    pub fn rho_6(&self) -> Result<f64> {
        if self.delta_6 > 0.0 {
            Ok(self.beta_6 / self.delta_6)
        } else {
            Err(Error::InvalidParams("rho_6 requires delta_6 > 0".into()))
        }
    }

    pub fn rho_m(&self) -> f64 {
        self.beta_m / self.alpha_m
    }
}

/// Numerical solution on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    /// `values[i]` is the state at `times[i]`.
    pub values: Vec<Vec<f64>>,
    pub step: f64,
    pub method: &'static str,
    pub names: Vec<&'static str>,
}

impl OdeSolution {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    /// Linear interpolation of component `c` at time `t`.
    pub fn value_at(&self, t: f64, c: usize) -> Result<f64> {
        let end = self.t_end();
        if !(0.0..=end + 1e-12).contains(&t) {
            return Err(Error::OutOfRange { time: t, end });
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return Ok(self.values[0][c]);
        }
        if i >= self.times.len() {
            return Ok(self.values[self.times.len() - 1][c]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[i - 1][c] * (1.0 - w) + self.values[i][c] * w)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,{}", self.names.join(","))?;
        for (t, v) in self.times.iter().zip(&self.values) {
            let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Classic fixed-step RK4 on `[0, t_end]`. The last step is shortened to land
/// on `t_end`. `guard` is called on every accepted state and may abort.
pub fn rk4<const D: usize>(
    rhs: impl Fn(&[f64; D]) -> [f64; D],
    y0: [f64; D],
    t_end: f64,
    step: f64,
    guard: impl Fn(f64, &[f64; D]) -> Result<()>,
) -> Result<(Vec<f64>, Vec<[f64; D]>)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be nonnegative, got {t_end}")));
    }
    let axpy = |y: &[f64; D], k: &[f64; D], a: f64| {
        let mut out = *y;
        for i in 0..D {
            out[i] += a * k[i];
        }
        out
    };
    let n_full = (t_end / step).floor() as usize;
    let mut times = Vec::with_capacity(n_full + 2);
    let mut values = Vec::with_capacity(n_full + 2);
    let mut y = y0;
    guard(0.0, &y)?;
    times.push(0.0);
    values.push(y);
    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        let h = (t_end - t).min(step);
        if h <= step * 1e-9 {
            break;
        }
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, h / 2.0));
        let k3 = rhs(&axpy(&y, &k2, h / 2.0));
        let k4 = rhs(&axpy(&y, &k3, h));
        for i in 0..D {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = if h < step { t_end } else { (k + 1) as f64 * step };
        guard(t_next, &y)?;
        times.push(t_next);
        values.push(y);
        k += 1;
        if h < step {
            break;
        }
    }
    Ok((times, values))
}

/// Right-hand side of the sub-critical drain system in `(s, z)`.
pub fn subcritical_rhs(p: &FluidParams, y: &[f64; 2]) -> [f64; 2] {
    let (s, z) = (y[0], y[1]);
    let ds = -p.eta * s
        + p.lambda * z * (p.beta_m - (p.beta_m - p.eta) * s) / (p.alpha_m * (p.c_m - 1.0 + s) + p.lambda * z);
    [ds, -p.delta_6 * z - ds]
}

/// Fractions of sequestered polymerases and free 6S RNAs when mRNA slots
/// outnumber polymerases (`c_m > 1`). Components: `s`, `z`, and the free
/// fraction, which is identically 0 at this scale.
pub fn integrate_subcritical(s0: f64, z0: f64, p: &FluidParams, t_end: f64, step: f64) -> Result<OdeSolution> {
    if !(p.c_m > 1.0) {
        return Err(Error::InvalidParams(format!("sub-critical ODE needs c_m > 1, got {}", p.c_m)));
    }
    if !(s0 >= 0.0 && z0 >= 0.0 && s0 + z0 < 1.0) {
        return Err(Error::InvalidArgument(format!("need s0, z0 >= 0 and s0 + z0 < 1, got ({s0}, {z0})")));
    }
    let (times, values) = rk4(
        |y| subcritical_rhs(p, y),
        [s0, z0],
        t_end,
        step,
        |t, y| {
            if y.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::Singularity { time: t, reason: "non-finite state".into() })
            }
        },
    )?;
    Ok(OdeSolution {
        times,
        values: values.into_iter().map(|v| vec![v[0], v[1], 0.0]).collect(),
        step,
        method: "rk4",
        names: vec!["s", "z", "f"],
    })
}

/// The free fraction is not allowed below this value.
pub const FREE_FRACTION_FLOOR: f64 = 1e-6;

/// Right-hand side `-delta_6 (rho_6 + rho_1) + delta_6 rho_1 (1 - c_m) / f`.
pub fn supercritical_rhs(p: &FluidParams, f: f64) -> Result<f64> {
    let rho_6 = p.rho_6()?;
    let rho_1 = p.rho_1();
    Ok(-p.delta_6 * (rho_6 + rho_1) + p.delta_6 * rho_1 * (1.0 - p.c_m) / f)
}

/// Free-polymerase fraction on the accelerated clock when polymerases
/// outnumber mRNA slots (`c_m < 1`).
pub fn integrate_supercritical(f0: f64, p: &FluidParams, t_end: f64, step: f64) -> Result<OdeSolution> {
    if !(p.c_m < 1.0) {
        return Err(Error::InvalidParams(format!("super-critical ODE needs c_m < 1, got {}", p.c_m)));
    }
    let rho_6 = p.rho_6()?;
    if !(f0 > 0.0 && f0 < 1.0 - p.c_m) {
        return Err(Error::InvalidArgument(format!("f0 = {f0} outside (0, 1 - c_m = {})", 1.0 - p.c_m)));
    }
    let a = p.delta_6 * (rho_6 + p.rho_1());
    let b = p.delta_6 * p.rho_1() * (1.0 - p.c_m);
    let (times, values) = rk4(
        |y: &[f64; 1]| [-a + b / y[0]],
        [f0],
        t_end,
        step,
        |t, y| {
            if y[0] < FREE_FRACTION_FLOOR || !y[0].is_finite() {
                Err(Error::Singularity { time: t, reason: format!("free fraction {} fell below {FREE_FRACTION_FLOOR}", y[0]) })
            } else {
                Ok(())
            }
        },
    )?;
    Ok(OdeSolution {
        times,
        values: values.into_iter().map(|v| vec![v[0]]).collect(),
        step,
        method: "rk4",
        names: vec!["f"],
    })
}

/// `rho_1 (1 - c_m) / (rho_6 + rho_1)`.
pub fn equilibrium_free_fraction(p: &FluidParams) -> Result<f64> {
    if !(p.c_m < 1.0) {
        return Err(Error::InvalidParams(format!("equilibrium free fraction needs c_m < 1, got {}", p.c_m)));
    }
    let rho_6 = p.rho_6()?;
    Ok(p.rho_1() * (1.0 - p.c_m) / (rho_6 + p.rho_1()))
}

/// Poisson means of the empty mRNA slots and free 6S RNAs when a fraction
/// `x` of polymerases is free: `(rho_m c_m / x, rho_1 (1 - c_m - x) / x)`.
pub fn conditional_poisson_params(x: f64, p: &FluidParams) -> Result<(f64, f64)> {
    if !(x > 0.0 && x <= 1.0 - p.c_m + 1e-12) {
        return Err(Error::InvalidArgument(format!("x = {x} outside (0, 1 - c_m]")));
    }
    let mu_g = p.rho_m() * p.c_m / x;
    let mu_z = (p.rho_1() * (1.0 - p.c_m - x) / x).max(0.0);
    Ok((mu_g, mu_z))
}

/// Largest difference between the solutions with steps `h` and `h / 2` at the
/// points of the coarse grid.
pub fn step_halving_gap(coarse: &OdeSolution, fine: &OdeSolution) -> f64 {
    let mut gap: f64 = 0.0;
    let mut j = 0;
    for (t, v) in coarse.times.iter().zip(&coarse.values) {
        while j < fine.times.len() && fine.times[j] < t - 1e-12 {
            j += 1;
        }
        if j < fine.times.len() && (fine.times[j] - t).abs() < 1e-9 {
            for (a, b) in v.iter().zip(&fine.values[j]) {
                gap = gap.max((a - b).abs());
            }
        }
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(c_m: f64) -> FluidParams {
        FluidParams { alpha_m: 1.0, beta_m: 1.0, beta_6: 1.0, delta_6: 1.0, lambda: 1.0, eta: 1.0, c_m }
    }

    #[test]
    fn subcritical_zero_is_fixed() {
        let sol = integrate_subcritical(0.0, 0.0, &unit(2.0), 5.0, 0.01).unwrap();
        assert!(sol.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn subcritical_mass_nonincreasing_and_draining() {
        for &(s0, z0) in &[(0.3, 0.2), (0.0, 0.9), (0.9, 0.0), (0.5, 0.45)] {
            let sol = integrate_subcritical(s0, z0, &unit(2.0), 30.0, 0.01).unwrap();
            let mass: Vec<f64> = sol.values.iter().map(|v| v[0] + v[1]).collect();
            assert!(mass.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            assert!(sol.values.iter().all(|v| v[0] >= 0.0 && v[1] >= 0.0 && v[0] < 1.0 && v[1] < 1.0));
            let last = sol.values.last().unwrap();
            assert!(last[0] + last[1] < 1e-3);
        }
    }

    #[test]
    fn subcritical_step_halving() {
        let p = unit(2.0);
        let a = integrate_subcritical(0.3, 0.2, &p, 10.0, 0.01).unwrap();
        let b = integrate_subcritical(0.3, 0.2, &p, 10.0, 0.005).unwrap();
        let end_a = a.values.last().unwrap();
        let end_b = b.values.last().unwrap();
        assert!((end_a[0] - end_b[0]).abs() < 1e-6 && (end_a[1] - end_b[1]).abs() < 1e-6);
    }

    #[test]
    fn subcritical_rejects_bad_inputs() {
        assert!(integrate_subcritical(0.6, 0.4, &unit(2.0), 1.0, 0.1).is_err());
        assert!(integrate_subcritical(0.1, 0.1, &unit(2.0), 1.0, 0.0).is_err());
        assert!(integrate_subcritical(0.1, 0.1, &unit(0.5), 1.0, 0.1).is_err());
    }

    #[test]
    fn supercritical_equilibrium_is_constant() {
        let p = unit(0.5);
        let f_inf = equilibrium_free_fraction(&p).unwrap();
        let sol = integrate_supercritical(f_inf, &p, 10.0, 0.01).unwrap();
        assert!(sol.values.iter().all(|v| (v[0] - f_inf).abs() < 1e-14));
    }

    #[test]
    fn supercritical_monotone_from_both_sides() {
        let p = unit(0.5);
        let down = integrate_supercritical(0.4, &p, 20.0, 0.01).unwrap().component(0);
        assert!(down.windows(2).all(|w| w[1] <= w[0]));
        assert!(down.iter().all(|&f| f >= 0.25));
        let up = integrate_supercritical(0.1, &p, 20.0, 0.01).unwrap().component(0);
        assert!(up.windows(2).all(|w| w[1] >= w[0]));
        assert!(up.iter().all(|&f| f <= 0.25));
        assert!((up.last().unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn supercritical_rejects_out_of_range_start() {
        assert!(integrate_supercritical(0.5, &unit(0.5), 1.0, 0.1).is_err());
        assert!(integrate_supercritical(0.0, &unit(0.5), 1.0, 0.1).is_err());
        let mut p = unit(0.5);
        p.delta_6 = 0.0;
        assert!(integrate_supercritical(0.2, &p, 1.0, 0.1).is_err());
    }

    #[test]
    fn equilibrium_examples() {
        assert!((equilibrium_free_fraction(&unit(0.5)).unwrap() - 0.25).abs() < 1e-15);
        let mut p = unit(0.4);
        p.eta = 2.0; // rho_1 = 2
        assert!((equilibrium_free_fraction(&p).unwrap() - 0.4).abs() < 1e-15);
        let mut p = unit(0.5);
        p.beta_6 = 1e-12;
        assert!((equilibrium_free_fraction(&p).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn conditional_poisson_examples() {
        let p = unit(0.5);
        let (_, mu_z) = conditional_poisson_params(0.5, &p).unwrap();
        assert_eq!(mu_z, 0.0);
        let (mu_g, _) = conditional_poisson_params(0.25, &p).unwrap();
        assert!((mu_g - 2.0).abs() < 1e-15);
        let f_inf = equilibrium_free_fraction(&p).unwrap();
        let (_, mu_z) = conditional_poisson_params(f_inf, &p).unwrap();
        assert!((mu_z - p.rho_6().unwrap()).abs() < 1e-12);
        assert!(conditional_poisson_params(0.0, &p).is_err());
    }
}
