//! Acceptance gate. Runs every shipped scenario, then re-judges each criterion
//! from the reported metrics against the thresholds pinned below, printing one
//! PASS/FAIL line per criterion.

use std::collections::BTreeMap;

use sixs_harness::report::{emit_report, Formats};
use sixs_harness::run::Verdict;
use sixs_harness::scenario::{all_builtin, builtin, Check, Scenario};
use sixs_harness::{run_check, verify};

const CONSERVATION_EVENTS: f64 = 1e7;
const GENERATOR_EVENTS: f64 = 1e6;
const GENERATOR_TV: f64 = 0.02;
const SUBCRITICAL_FREE_TV: f64 = 0.05;
const SUBCRITICAL_CHAIN_TV: f64 = 0.1;
const DRAIN_SUP_AT_LARGEST_N: f64 = 0.05;
const FLUID_SUP_AT_LARGEST_N: f64 = 0.03;
const FLUID_HALVING: f64 = 1e-6;
const STATIONARY_FREE_TARGET: f64 = 0.25;
const STATIONARY_FREE_ERROR: f64 = 0.03;
const STATIONARY_SIXS_TV: f64 = 0.08;
const SATURATION_RATIO: f64 = 2.0;
const DEFICIT_COVERAGE: f64 = 0.95;
const EXPONENTIAL_FREE_TV: f64 = 0.08;
const EXPONENTIAL_CHAIN_TV: f64 = 0.1;
const BD_STATIONARY_TV: f64 = 0.02;
const BD_STATIONARY_EVENTS: u64 = 1_000_000;
const HITTING_SPREAD: f64 = 0.15;

struct Judge {
    verdicts: Vec<Verdict>,
    lines: Vec<(u32, bool, String)>,
}

impl Judge {
    fn for_criterion(&self, c: u32) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| v.criterion == Some(c)).collect()
    }

    fn record(&mut self, c: u32, ok: bool, detail: String) {
        self.lines.push((c, ok, detail));
    }
}

fn m(v: &Verdict, key: &str) -> f64 {
    *v.metrics.get(key).unwrap_or_else(|| panic!("{} lacks metric {key}", v.scenario))
}

/// Metrics `prefix_n<N>` ordered by N.
fn by_n(v: &Verdict, prefix: &str) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = v
        .metrics
        .iter()
        .filter_map(|(k, x)| k.strip_prefix(prefix).and_then(|n| n.strip_prefix("_n")).and_then(|n| n.parse().ok()).map(|n| (n, *x)))
        .collect();
    out.sort_by_key(|(n, _)| *n);
    out
}

fn strictly_decreasing(xs: &[(u64, f64)]) -> bool {
    xs.len() >= 2 && xs.windows(2).all(|w| w[1].1 < w[0].1)
}

fn scenario_n(name: &str) -> Vec<u64> {
    builtin(name).unwrap().n
}

/// The shipped scenarios carry the sizes and replica counts the criteria fix.
fn check_shipped_settings(all: &[Scenario]) {
    let get = |name: &str| all.iter().find(|s| s.name == name).unwrap_or_else(|| panic!("missing scenario {name}"));
    assert!(matches!(get("c01-conservation-stationary").check, Some(Check::Conservation { events }) if events >= 10_000_000));
    assert!(matches!(get("c01-conservation-exponential").check, Some(Check::Conservation { events }) if events >= 10_000_000));
    assert!(matches!(get("c02-generator-oracle").check, Some(Check::GeneratorOracle { events, tolerance, .. }) if events >= 1_000_000 && tolerance <= GENERATOR_TV));
    assert_eq!(get("c02-generator-oracle").n, vec![4]);
    assert_eq!(get("c03-subcritical-averaging").n, vec![1000]);
    assert!(matches!(get("c03-subcritical-averaging").check, Some(Check::SubcriticalAveraging { window, .. }) if window == [10.0, 1010.0]));
    assert_eq!(get("c04-subcritical-drain").n, vec![500, 1000, 2000]);
    assert!(get("c04-subcritical-drain").replicas >= 100);
    assert_eq!(get("c05-supercritical-fluid").n, vec![250, 500, 1000, 2000]);
    assert_eq!(get("c06-stationary-equilibrium").n, vec![2000]);
    assert_eq!(get("c07-exponential-saturation").n, vec![100, 200, 400]);
    assert!(matches!(get("c07-exponential-saturation").check, Some(Check::ExponentialSaturation { max_deficit, window, .. }) if max_deficit <= 25 && window >= 1000.0));
    assert_eq!(get("c08-exponential-limit-laws").n, vec![2000]);
    assert!(matches!(get("c09-birth-death").check, Some(Check::BirthDeath { events, ref hitting_levels, .. }) if events >= BD_STATIONARY_EVENTS && hitting_levels == &[100, 1000, 10000]));
    assert!(get("c10-coupling-supercritical").replicas >= 500);
    assert!(get("c10-coupling-stationary").replicas >= 500);
}

fn judge_all(j: &mut Judge) {
    let c1 = j.for_criterion(1);
    let ok = c1.len() == 2
        && c1.iter().all(|v| {
            m(v, "events") >= CONSERVATION_EVENTS
                && m(v, "mass_violations") == 0.0
                && m(v, "normalization_violations") == 0.0
                && m(v, "bound_violations") == 0.0
        });
    let d = c1.iter().map(|v| format!("{}: mass={} norm={}", v.scenario, m(v, "mass_violations"), m(v, "normalization_violations"))).collect::<Vec<_>>().join("; ");
    j.record(1, ok, format!("zero violations over {CONSERVATION_EVENTS:e} events per phase ({d})"));

    let v = j.for_criterion(2)[0].clone();
    let ok = m(&v, "events") >= GENERATOR_EVENTS && m(&v, "tv") < GENERATOR_TV;
    j.record(2, ok, format!("TV {:.4} < {GENERATOR_TV}", m(&v, "tv")));

    let v = j.for_criterion(3)[0].clone();
    let ok = m(&v, "free_tv") < SUBCRITICAL_FREE_TV && m(&v, "chain_tv") < SUBCRITICAL_CHAIN_TV;
    j.record(3, ok, format!("free TV {:.4} < {SUBCRITICAL_FREE_TV}, chain TV {:.4} < {SUBCRITICAL_CHAIN_TV}", m(&v, "free_tv"), m(&v, "chain_tv")));

    let v = j.for_criterion(4)[0].clone();
    let sup = by_n(&v, "mean_sup_error");
    let ok = sup.iter().map(|p| p.0).eq(scenario_n("c04-subcritical-drain"))
        && strictly_decreasing(&sup)
        && sup.last().unwrap().1 < DRAIN_SUP_AT_LARGEST_N;
    j.record(4, ok, format!("sup errors {sup:?} decreasing, last < {DRAIN_SUP_AT_LARGEST_N}"));

    let v = j.for_criterion(5)[0].clone();
    let sup = by_n(&v, "mean_sup_error");
    let ok = sup.iter().map(|p| p.0).eq(scenario_n("c05-supercritical-fluid"))
        && strictly_decreasing(&sup)
        && sup.last().unwrap().1 < FLUID_SUP_AT_LARGEST_N
        && m(&v, "step_halving_gap") < FLUID_HALVING;
    j.record(
        5,
        ok,
        format!("sup errors {sup:?} decreasing, last < {FLUID_SUP_AT_LARGEST_N}, halving gap {:.1e} < {FLUID_HALVING:e}", m(&v, "step_halving_gap")),
    );

    let v = j.for_criterion(6)[0].clone();
    let ok = (m(&v, "free_target") - STATIONARY_FREE_TARGET).abs() < 1e-12
        && m(&v, "sup_free_error") < STATIONARY_FREE_ERROR
        && m(&v, "sixs_tv") < STATIONARY_SIXS_TV;
    j.record(
        6,
        ok,
        format!("sup |F/N - {STATIONARY_FREE_TARGET}| {:.4} < {STATIONARY_FREE_ERROR}, Z TV {:.4} < {STATIONARY_SIXS_TV}", m(&v, "sup_free_error"), m(&v, "sixs_tv")),
    );

    let v = j.for_criterion(7)[0].clone();
    let tau = by_n(&v, "mean_tau_over_n");
    let cover = by_n(&v, "deficit_coverage");
    let (lo, hi) = tau.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let ok = v.pass
        && tau.len() == 3
        && tau.iter().all(|p| p.1.is_finite())
        && hi / lo < SATURATION_RATIO
        && cover.len() == 3
        && cover.iter().all(|p| p.1 >= DEFICIT_COVERAGE);
    j.record(7, ok, format!("tau/N {tau:?} ratio {:.3} < {SATURATION_RATIO}, coverage {cover:?} >= {DEFICIT_COVERAGE}", hi / lo));

    let v = j.for_criterion(8)[0].clone();
    let ok = m(&v, "free_tv") < EXPONENTIAL_FREE_TV && m(&v, "chain_tv") < EXPONENTIAL_CHAIN_TV && (m(&v, "rho_m_exp") - 2.0).abs() < 1e-9;
    j.record(8, ok, format!("free TV {:.4} < {EXPONENTIAL_FREE_TV}, chain TV {:.4} < {EXPONENTIAL_CHAIN_TV}", m(&v, "free_tv"), m(&v, "chain_tv")));

    let v = j.for_criterion(9)[0].clone();
    let h = by_n(&v, "mean_h_over_ln");
    let (lo, hi) = h.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let ok = m(&v, "stationary_tv") < BD_STATIONARY_TV && h.len() == 3 && hi / lo - 1.0 <= HITTING_SPREAD;
    j.record(9, ok, format!("TV {:.4} < {BD_STATIONARY_TV}, H/ln N {h:?} within {:.3} <= {HITTING_SPREAD}", m(&v, "stationary_tv"), hi / lo - 1.0));

    let c10 = j.for_criterion(10);
    let ok = c10.len() == 2
        && c10.iter().all(|v| v.pass && v.metrics.iter().filter(|(k, _)| k.ends_with("_violations")).all(|(_, x)| *x == 0.0));
    let d = c10
        .iter()
        .map(|v| {
            let vs: BTreeMap<_, _> = v.metrics.iter().filter(|(k, _)| k.ends_with("_violations")).collect();
            format!("{}: {vs:?}", v.scenario)
        })
        .collect::<Vec<_>>()
        .join("; ");
    j.record(10, ok, format!("no dominance violations beyond the Monte-Carlo band ({d})"));
}

/// Runs a scenario twice into separate directories and compares the bytes of
/// `verdicts.json`.
fn rerun_bytes_match(name: &str) -> bool {
    let s = builtin(name).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&run_check(&s).unwrap(), a.path(), Formats::ALL).unwrap();
    emit_report(&run_check(&s).unwrap(), b.path(), Formats::ALL).unwrap();
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("verdicts.json")).unwrap();
    read(&a) == read(&b)
}

#[test]
fn acceptance() {
    let scenarios = all_builtin().unwrap();
    check_shipped_settings(&scenarios);
    let result = verify(&scenarios, |_| {});
    assert!(result.error.is_none(), "verification errored: {:?}", result.error);
    let mut j = Judge { verdicts: result.verdicts.clone(), lines: vec![] };
    judge_all(&mut j);

    let shipped = j.for_criterion(11).iter().all(|v| v.pass);
    let reruns = ["c09-birth-death", "c02-generator-oracle", "c03-subcritical-averaging"];
    let ok = shipped && reruns.iter().all(|n| rerun_bytes_match(n));
    j.record(11, ok, format!("identical verdicts.json bytes on rerun of {reruns:?}"));

    let coverage = result.verdicts.iter().find(|v| v.check == "regime-coverage").unwrap();

    j.lines.sort_by_key(|l| l.0);
    for (c, ok, detail) in &j.lines {
        println!("{} criterion {c:>2}: {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    println!("{} regime coverage", if coverage.pass { "PASS" } else { "FAIL" });
    let failed: Vec<u32> = j.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert_eq!(j.lines.len(), 11);
    assert!(coverage.pass);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    // The suite's own verdicts must agree with the re-judged ones.
    assert!(result.verdicts.iter().all(|v| v.pass), "a shipped verdict failed");
}
