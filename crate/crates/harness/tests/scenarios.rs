use sixs_harness::report::{summary_csv, VerdictFile};
use sixs_harness::run::{run_scenario, RunResult, Trend};
use sixs_harness::scenario::{all_builtin, builtin, Scenario};

const SHORT: &str = include_str!("data/bd-short.toml");

#[test]
fn builtins_parse_and_round_trip() {
    let all = all_builtin().unwrap();
    assert_eq!(all.len(), 13);
    for s in all {
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again, s, "{}", s.name);
        assert!(s.check.is_some(), "{} has no check", s.name);
    }
}

#[test]
fn defaults_are_written_out() {
    let s = Scenario::from_toml(&SHORT.replace("[observe]\ngrid = 21\ntrajectories = 2\n", "")).unwrap();
    let observe = s.observe.as_ref().unwrap();
    assert_eq!((observe.grid, observe.trajectories), (101, 0));
    assert!(s.to_toml().contains("grid = 101"));
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = SHORT.replace("replicas = 3", "replicas = 3\nrepilcas = 4");
    assert!(Scenario::from_toml(&bad).is_err());
    let bad = SHORT.replace("trajectories = 2", "trajectories = 2\ncolour = \"red\"");
    assert!(Scenario::from_toml(&bad).is_err());
}

#[test]
fn invalid_settings_are_rejected() {
    for (from, to) in [
        ("replicas = 3", "replicas = 0"),
        ("n = [1]", "n = [2, 1]"),
        ("n = [1]", "n = []"),
        ("horizon = 20.0", "horizon = -1.0"),
        ("kappa_o = 1.0", "kappa_o = 0.0"),
    ] {
        assert!(Scenario::from_toml(&SHORT.replace(from, to)).is_err(), "{to}");
    }
    let stationary = builtin("c10-coupling-stationary").unwrap().to_toml();
    for alpha in ["0.0", "1.5"] {
        let bad = stationary.replace("alpha = 0.001", &format!("alpha = {alpha}"));
        assert_ne!(bad, stationary);
        assert!(Scenario::from_toml(&bad).is_err(), "alpha {alpha}");
    }
    // A check must match the model it audits.
    let wrong = builtin("c05-supercritical-fluid").unwrap().to_toml().replace("kind = \"auxiliary\"", "kind = \"full\"");
    assert!(Scenario::from_toml(&wrong).is_err());
}

#[test]
fn auxiliary_model_needs_an_initial_state() {
    let text = builtin("c05-supercritical-fluid").unwrap().to_toml();
    let start = text.find("[initial]").unwrap();
    let end = start + text[start..].find("\n\n").unwrap_or(text.len() - start);
    let stripped = format!("{}{}", &text[..start], &text[end..]);
    assert!(!stripped.contains("[initial]"));
    assert!(Scenario::from_toml(&stripped).is_err());
}

#[test]
fn empty_result_has_header_only() {
    let r = RunResult::new("nothing");
    assert_eq!(summary_csv(&r), "scenario,n,replica,quantity,value\n");
    assert!(r.all_pass());
    let json = VerdictFile::from_result(&r).to_json();
    assert!(json.ends_with('\n'));
}

#[test]
fn zero_horizon_single_replica() {
    let s = Scenario::from_toml(&SHORT.replace("replicas = 3", "replicas = 1").replace("horizon = 20.0", "horizon = 0.0"))
        .unwrap();
    let r = run_scenario(&s);
    assert!(r.error.is_none());
    let value = |q: &str| r.rows.iter().find(|row| row.quantity == q).unwrap().value;
    assert_eq!(value("events"), 0.0);
    assert_eq!(value("end_time"), 0.0);
    assert_eq!(r.rows.iter().filter(|row| row.quantity == "seed").count(), 1);
}

#[test]
fn replicas_are_reproducible_and_distinct() {
    let s = Scenario::from_toml(SHORT).unwrap();
    let a = run_scenario(&s);
    let b = run_scenario(&s);
    assert_eq!(summary_csv(&a), summary_csv(&b));
    let events: Vec<f64> = a.rows.iter().filter(|r| r.quantity == "events").map(|r| r.value).collect();
    assert_eq!(events.len(), 3);
    assert!(events.windows(2).any(|w| w[0] != w[1]));
    assert_eq!(a.tables.len(), 2);
}

#[test]
fn trend_with_one_size_is_insufficient() {
    assert_eq!(Trend::decreasing("e", vec![100], vec![0.1]).status, "insufficient");
    assert_eq!(Trend::bounded_ratio("t", vec![100], vec![3.0], 2.0).status, "insufficient");
    assert_eq!(Trend::decreasing("e", vec![1, 2], vec![0.2, 0.1]).status, "decreasing");
    assert_eq!(Trend::decreasing("e", vec![1, 2], vec![0.1, 0.1]).status, "not-decreasing");
    assert_eq!(Trend::bounded_ratio("t", vec![1, 2], vec![1.0, 3.0], 2.0).status, "unbounded-ratio");
}
