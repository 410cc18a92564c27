use sixs_core::engine::{Observer, Simulator};
use sixs_core::occupation::{poisson_pmf, tv_between, DiscretePmf, OccupationRecorder};
use sixs_core::reference::{
    bd_grid_samples, dominance_check, first_passage_up, hitting_time_zero, mm1_grid_samples, BirthDeath,
    GridSamples, Quantiles, MM1,
};
use sixs_core::{BirthDeathParams, MM1Params, StopPredicate};

/// Dwell law over `[0, horizon]` and the number of events.
fn long_run<M: sixs_core::Model<State = u64>>(model: &M, horizon: f64, seed: u64) -> (sixs_core::OccupationMeasure<u64>, u64) {
    let mut rec = OccupationRecorder::new((0.0, horizon), |y: &u64| *y);
    let out = Simulator::new(model, seed).run(&0, &StopPredicate::horizon(horizon), &mut rec).unwrap();
    (rec.finish(), out.events)
}

#[test]
fn birth_death_stationary_law_is_poisson() {
    let (occ, events) = long_run(&BirthDeath { kappa_i: 1.0, kappa_o: 1.0 }, 6e5, 1);
    assert!(events >= 1_000_000);
    let tv = tv_between(&occ.to_pmf().unwrap(), &poisson_pmf(1.0).unwrap());
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn birth_death_mean_matches_rho() {
    let (occ, _) = long_run(&BirthDeath { kappa_i: 2.0, kappa_o: 1.0 }, 4e5, 2);
    assert!((occ.mean() - 2.0).abs() < 0.05, "{}", occ.mean());
}

#[test]
fn mm1_idle_fraction_and_geometric_law() {
    let (occ, events) = long_run(&MM1 { arrival: 0.5, service: 1.0 }, 1.2e6, 3);
    assert!(events >= 1_000_000);
    assert!((occ.fraction(&0) - 0.5).abs() < 0.02);
    let geometric = DiscretePmf { mass: (0..200u64).map(|k| (k, 0.5 * 0.5f64.powi(k as i32))).collect() };
    let tv = tv_between(&occ.to_pmf().unwrap(), &geometric);
    assert!(tv < 0.03, "{tv}");
}

#[test]
fn mm1_heavy_load_mean() {
    let (occ, _) = long_run(&MM1 { arrival: 0.9, service: 1.0 }, 2e6, 4);
    assert!((occ.mean() - 9.0).abs() < 0.9, "{}", occ.mean());
}

#[test]
fn single_individual_dies_at_rate_kappa_o() {
    let s = hitting_time_zero(BirthDeathParams { kappa_i: 1e-6, kappa_o: 1.0, y0: 1 }, 20_000, 5).unwrap();
    assert!((s.mean - 1.0).abs() < 0.05, "{}", s.mean);
}

#[test]
fn hitting_time_scales_like_log_n() {
    let a = hitting_time_zero(BirthDeathParams { kappa_i: 1.0, kappa_o: 1.0, y0: 1000 }, 400, 6).unwrap();
    let b = hitting_time_zero(BirthDeathParams { kappa_i: 1.0, kappa_o: 1.0, y0: 10_000 }, 400, 7).unwrap();
    let ratio = a.normalized_mean / b.normalized_mean;
    assert!((ratio - 1.0).abs() < 0.1, "{} vs {}", a.normalized_mean, b.normalized_mean);
}

#[test]
fn first_passage_above_one_is_stable_across_replica_counts() {
    let small = first_passage_up(1.0, 1.0, 1, 2_000, 8).unwrap();
    let large = first_passage_up(1.0, 1.0, 1, 8_000, 9).unwrap();
    assert!(small.normalized_mean.is_finite() && large.normalized_mean.is_finite());
    // T_1 has mean 3 for unit rates (first-step analysis).
    assert!((large.mean - 3.0).abs() < 0.15, "{}", large.mean);
    assert!((small.normalized_mean / large.normalized_mean - 1.0).abs() < 0.1);
}

#[test]
fn first_passage_with_dominant_births() {
    // Deaths are negligible, so T_p is close to p + 1 exponential(kappa_i) jumps.
    let s = first_passage_up(1000.0, 1.0, 5, 4_000, 10).unwrap();
    let want = 6.0 / 1000.0;
    assert!((s.mean / want - 1.0).abs() < 0.05, "{} vs {want}", s.mean);
}

#[test]
fn pure_birth_first_jump_is_exponential() {
    let s = first_passage_up(2.0, 1e-9, 1, 20_000, 11).unwrap();
    // Above 1 needs two births.
    assert!((s.mean - 1.0).abs() < 0.03, "{}", s.mean);
    let below_half = s.values.iter().filter(|&&t| t < 0.5).count() as f64 / s.values.len() as f64;
    // P(Gamma(2, 2) < 0.5) = 1 - 2 e^{-1}.
    assert!((below_half - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 0.01);
}

struct Max(u64);

impl Observer<u64> for Max {
    fn record(&mut self, _: f64, y: &u64) {
        self.0 = self.0.max(*y);
    }
}

#[test]
fn path_maximum_stays_below_log_squared() {
    let model = BirthDeath { kappa_i: 1.0, kappa_o: 1.0 };
    for n in [1_000u64, 10_000] {
        let level = (n as f64).ln().powi(2);
        let replicas = 200;
        let below = (0..replicas)
            .filter(|&k| {
                let mut m = Max(0);
                Simulator::new(&model, 12 ^ k).run(&0, &StopPredicate::horizon(n as f64), &mut m).unwrap();
                (m.0 as f64) <= level
            })
            .count();
        assert!(below as f64 >= 0.95 * replicas as f64, "N={n}: {below}/{replicas}");
    }
}

#[test]
fn exact_transient_law_matches_simulation() {
    let p = BirthDeathParams { kappa_i: 3.0, kappa_o: 0.5, y0: 10 };
    let times = vec![0.0, 0.5, 2.0, 8.0];
    let exact = bd_grid_samples(&p, &times, 20_000, 13).unwrap();
    let model = BirthDeath { kappa_i: 3.0, kappa_o: 0.5 };
    let mut sim_means = vec![0.0; times.len()];
    let reps = 20_000;
    for k in 0..reps {
        let tr = sixs_core::simulate(&model, &10, &StopPredicate::horizon(8.0), 14 ^ k).unwrap();
        for (i, v) in tr.sample_on_grid(&times).unwrap().into_iter().enumerate() {
            sim_means[i] += v as f64 / reps as f64;
        }
    }
    for (i, &t) in times.iter().enumerate() {
        let want = 10.0 * (-0.5 * t).exp() + 6.0 * (1.0 - (-0.5 * t).exp());
        let exact_mean = exact.values[i].iter().sum::<u64>() as f64 / exact.values[i].len() as f64;
        assert!((exact_mean - want).abs() < 0.06, "t={t}: {exact_mean} vs {want}");
        assert!((sim_means[i] - want).abs() < 0.06, "t={t}: {} vs {want}", sim_means[i]);
    }
}

#[test]
fn dominance_flags_a_bound_that_is_too_small() {
    let times: Vec<f64> = (0..21).map(|k| k as f64).collect();
    let loaded = MM1Params { arrival: 0.8, service: 1.0, q0: 0 };
    let light = MM1Params { arrival: 0.3, service: 1.0, q0: 0 };
    let model = mm1_grid_samples(&loaded, &times, 1000, 15).unwrap();
    let bound = mm1_grid_samples(&light, &times, 1000, 16).unwrap();
    assert!(!dominance_check("Q", &model, &bound, Quantiles::default()).unwrap().pass);
    let swapped = dominance_check("Q", &bound, &model, Quantiles::default()).unwrap();
    assert!(swapped.pass);
}

#[test]
fn same_law_passes_within_the_band() {
    let times: Vec<f64> = (0..51).map(|k| 10.0 + k as f64).collect();
    let p = MM1Params { arrival: 0.5, service: 1.0, q0: 0 };
    let a = mm1_grid_samples(&p, &times, 500, 17).unwrap();
    let b = mm1_grid_samples(&p, &times, 2000, 18).unwrap();
    let r = dominance_check("Q", &a, &b, Quantiles::default()).unwrap();
    assert!(r.pass, "{} violations", r.violations);
    let empty = GridSamples::new(vec![]);
    assert!(dominance_check("Q", &empty, &empty, Quantiles::default()).unwrap().pass);
}
