use qkd_core::asymptotic::{optimal_effective_mean, sps_rate_attenuated, sps_rate_unattenuated};
use qkd_core::channel::db_to_transmittance;
use qkd_core::optimizer::Point;
use qkd_core::{optimize, wcp_asymptotic_rate, GaSettings, SearchSpace};
use std::sync::Mutex;

#[test]
fn recovers_pre_attenuated_optimum() {
    let g2 = 0.1;
    for loss in [13.0, 20.0, 30.0] {
        let eta = db_to_transmittance(loss);
        let space = SearchSpace::new().log_bounded("t", 1e-4, 1.0);
        // <n> = 1 before the attenuator
        let r = optimize(
            |p: &Point| sps_rate_unattenuated(eta, p["t"], g2),
            &space,
            &GaSettings::default(),
        )
        .unwrap();
        let best = sps_rate_attenuated(eta, g2);
        assert!((r.best_rate - best).abs() / best < 0.01, "{loss} dB");
        let n_star = optimal_effective_mean(eta, g2);
        assert!((r.best["t"] / n_star - 1.0).abs() < 0.1, "{loss} dB");
    }
}

#[test]
fn coherent_optimum_at_unit_mean() {
    let eta = 0.37;
    let space = SearchSpace::new().bounded("mu", 0.0, 2.0);
    let r = optimize(
        |p: &Point| eta * p["mu"] * (-p["mu"]).exp(),
        &space,
        &GaSettings::default(),
    )
    .unwrap();
    assert!((r.best["mu"] - 1.0).abs() < 1e-3, "{}", r.best["mu"]);
    assert!((r.best_rate - wcp_asymptotic_rate(eta)).abs() < 1e-9);
}

#[test]
fn every_candidate_respects_the_box() {
    let space = SearchSpace::new()
        .bounded("a", -3.0, -1.0)
        .log_bounded("b", 1e-3, 10.0)
        .simplex("w", &["x", "y"], 0.05);
    let seen = Mutex::new(0usize);
    let obj = |p: &Point| {
        *seen.lock().unwrap() += 1;
        assert!((-3.0..=-1.0).contains(&p["a"]));
        assert!(p["b"] >= 1e-3 * (1.0 - 1e-12) && p["b"] <= 10.0 * (1.0 + 1e-12));
        assert!((p["x"] + p["y"] - 1.0).abs() < 1e-12);
        p["x"] * p["b"] - p["a"]
    };
    let r = optimize(
        obj,
        &space,
        &GaSettings {
            seed: 9,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(*seen.lock().unwrap(), r.evaluations);
    assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
    assert!(space.contains(&r.best_genes));
}
