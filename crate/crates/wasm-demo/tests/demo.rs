use sixs_core::LimitChainParams;
use sixs_wasm_demo::{chain_path, dwell_law, free_path};

#[test]
fn free_path_follows_the_fluid_limit() {
    let r = free_path(1000, 0.5, 0.4, 5.0, 51, 3).unwrap();
    assert_eq!(r.times.len(), 51);
    assert!((r.equilibrium - 0.25).abs() < 1e-12);
    assert!((r.fluid[0] - 0.4).abs() < 1e-12);
    assert!(r.sup_error < 0.06, "{}", r.sup_error);
    assert_eq!(free_path(1000, 0.5, 0.4, 5.0, 51, 3).unwrap().simulated, r.simulated);
}

#[test]
fn free_path_rejects_bad_input() {
    assert!(free_path(1000, 1.5, 0.4, 5.0, 51, 1).is_err());
    assert!(free_path(1000, 0.5, 0.6, 5.0, 51, 1).is_err());
    assert!(free_path(1000, 0.5, 0.4, 0.0, 51, 1).is_err());
}

#[test]
fn dwell_law_is_close_to_poisson() {
    let r = dwell_law(3.0, 1.0, 20_000.0, 4).unwrap();
    assert!(r.tv < 0.03, "{}", r.tv);
    assert_eq!(r.values.len(), r.empirical.len());
    assert!((r.empirical.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(dwell_law(0.0, 1.0, 10.0, 1).is_err());
}

#[test]
fn chain_path_is_a_jump_path() {
    let p = LimitChainParams { rho_m: 1.0, lambda: 1.0, eta: 1.0, beta_6: 2.0, delta_6: 0.5 };
    let r = chain_path(p, 50.0, 200_000, 5).unwrap();
    assert_eq!((r.s[0], r.z[0]), (0, 0));
    assert!(r.times.windows(2).all(|w| w[0] <= w[1]));
    for i in 1..r.s.len() - 1 {
        let moved = r.s[i].abs_diff(r.s[i - 1]) + r.z[i].abs_diff(r.z[i - 1]);
        assert!(moved == 1 || moved == 2);
    }
    assert!((r.times.last().unwrap() - 50.0).abs() < 1e-12);
    let capped = chain_path(p, 1e9, 100, 5).unwrap();
    assert!(capped.times.len() <= 102);
}
