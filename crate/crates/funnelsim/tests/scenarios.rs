use funnelsim::scenarios::{catalog, load_scenario, run, Config};
use funnelsim::sim::{write_csv, Termination};

fn csv_bytes(cfg: &Config) -> Vec<u8> {
    let out = run(cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&out.trajectory, &mut buf).unwrap();
    buf
}

#[test]
fn every_catalog_scenario_completes_inside_its_funnels() {
    for s in catalog() {
        let out = run(&s.config).unwrap_or_else(|e| panic!("{}: {e}", s.config.name));
        let r = &out.report;
        assert_eq!(r.termination, Termination::Completed, "{}", s.config.name);
        assert!(r.all_passed(), "{}: {:?}", s.config.name, r.checks);
        for eps in &r.eps_observed {
            assert!(*eps < 1.0, "{}: eps {eps}", s.config.name);
        }
    }
}

#[test]
fn runs_are_deterministic_and_survive_json_round_trip() {
    for name in ["scalar_disturbance", "robot_fc", "delay_rd1", "icfc"] {
        let cfg = load_scenario(name).unwrap();
        let a = csv_bytes(&cfg);
        let b = csv_bytes(&cfg);
        assert_eq!(a, b, "{name}");
        let back = Config::from_json(&cfg.to_json()).unwrap();
        assert_eq!(csv_bytes(&back), a, "{name}");
    }
}

#[test]
fn halving_tolerances_barely_moves_the_result() {
    let cfg = load_scenario("scalar_disturbance").unwrap();
    let mut fine = cfg.clone();
    fine.sim.rtol /= 2.0;
    fine.sim.atol /= 2.0;
    let (a, b) = (run(&cfg).unwrap(), run(&fine).unwrap());
    let (xa, xb) = (a.trajectory.last(), b.trajectory.last());
    assert_eq!(xa.t, xb.t);
    assert!((xa.y[0] - xb.y[0]).abs() < 1e-7);
    assert!((xa.gains[0] - xb.gains[0]).abs() < 1e-7);
}

#[test]
fn disturbed_gain_keeps_growing() {
    let mut cfg = load_scenario("scalar_disturbance").unwrap();
    cfg.sim.t_end = 1000.0;
    cfg.checks.clear();
    let out = run(&cfg).unwrap();
    let k = out.trajectory.last().gains[0];
    // k(t) = 3((1+t)^{1/3} - 1)
    let exact = 3.0 * (1001f64.cbrt() - 1.0);
    assert!(k > 25.0);
    assert!((k - exact).abs() < 1e-5 * exact, "{k} vs {exact}");
}

#[test]
fn initial_breach_is_refused() {
    let mut v = serde_json::to_value(load_scenario("icfc").unwrap()).unwrap();
    v["controller"] = serde_json::json!({"variant": "funnel_rd1",
        "phi": {"family": "constant_reciprocal", "c": 1.0}});
    let cfg = Config::from_json(&v.to_string()).unwrap();
    assert!(matches!(run(&cfg), Err(funnelsim::Error::FunnelBreach { .. })));
}
