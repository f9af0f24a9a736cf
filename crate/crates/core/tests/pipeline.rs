use approx::assert_relative_eq;
use d2dprice::{
    play, price_lower_bound, price_upper_bound, sample_network, solve_optimal, solve_suboptimal,
    solve_uniform, LpStatus, Network, Network32, PriceVector, TopologyConfig,
};

fn cfg(n: usize, seed: u64) -> TopologyConfig {
    TopologyConfig::new(n, 20.0, 0.05, seed)
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let a: Network = sample_network(&cfg(5, 11)).unwrap();
    let b: Network = sample_network(&cfg(5, 11)).unwrap();
    let c: Network = sample_network(&cfg(5, 12)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.h_matrix(), c.h_matrix());
}

#[test]
fn config_round_trips_through_json() {
    let text = r#"{"n":3,"p_max_db":10,"i_th":0.05,"seed":9}"#;
    let parsed: TopologyConfig = serde_json::from_str(text).unwrap();
    assert_eq!(parsed, TopologyConfig::new(3, 10.0, 0.05, 9));
    let again: TopologyConfig =
        serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
    assert_eq!(parsed, again);
}

#[test]
fn every_scheme_respects_the_threshold() {
    for seed in 0..25 {
        let inst: Network = sample_network(&cfg(4, seed)).unwrap();
        let uniform = solve_uniform(&inst, None).unwrap();
        assert!(uniform.outcome.total_interference <= inst.i_th());

        let optimal = solve_optimal(&inst).unwrap();
        assert_eq!(optimal.lp_status, LpStatus::Optimal);
        let itf: f64 = optimal
            .powers
            .iter()
            .zip(inst.g())
            .map(|(p, g)| p * g)
            .sum();
        assert!(itf <= inst.i_th() + 1e-9);

        let sub = solve_suboptimal(&inst);
        let out = play(&inst, sub.prices.clone()).unwrap();
        assert!(out.converged);
        assert!(out.total_interference <= inst.i_th() + 1e-9, "seed {seed}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let inst64: Network = sample_network(&cfg(4, 3)).unwrap();
    let inst32: Network32 = sample_network(&cfg(4, 3)).unwrap();
    assert_relative_eq!(
        price_upper_bound(&inst32) as f64,
        price_upper_bound(&inst64),
        max_relative = 1e-5
    );
    assert_relative_eq!(
        price_lower_bound(&inst32) as f64,
        price_lower_bound(&inst64),
        max_relative = 1e-5
    );

    let price = price_upper_bound(&inst64) / 10.0;
    let p64 = play(&inst64, PriceVector::uniform(4, price)).unwrap();
    let p32 = play(&inst32, PriceVector::uniform(4, price as f32)).unwrap();
    assert!(p32.converged);
    for (a, b) in p32.powers.iter().zip(p64.powers.iter()) {
        assert!(
            (*a as f64 - b).abs() <= 1e-3 * (1.0 + b.abs()),
            "{a} vs {b}"
        );
    }
}
