use funnelsim::scenarios::{run, Config};
use serde_json::json;

// With ell = m there is no algebraic part and the DAE loop must reproduce the ODE loop
// on y' = r1 y + s1 x3 + g u, x3' = q x3 + a31 y.
#[test]
fn dae_without_algebraic_part_matches_ode_pipeline() {
    let phi = json!({"family": "exp_decay_reciprocal", "a": 1.0, "b": 1.0, "c": 0.1});
    let reference = json!({"kind": "sinusoid", "amplitude": [0.5], "omega": [1.0]});
    let sim = json!({"t_end": 10.0, "rtol": 1e-9, "atol": 1e-9});
    let (r1, s1, q, a31, g, y0, x30) = (0.5, 0.2, -1.0, 0.3, 1.5, 0.2, 0.5);

    let dae = Config::from_json(
        &json!({
            "system": {"kind": "dae", "normal_form": {
                "r": 1, "ell": 1, "m": 1, "r1": [[[r1]]], "s1": [[s1]], "q": [[q]], "a31": [[a31]],
                "gamma_hat": [[g]], "y_i0": [y0], "x30": [x30]}},
            "controller": {"variant": "dae_fc", "phi_i": phi, "phi_ii": {"family": "constant_reciprocal", "c": 1.0},
                           "k_hat": 1.0},
            "reference": reference, "sim": sim,
        })
        .to_string(),
    )
    .unwrap();
    let ode = Config::from_json(
        &json!({
            "system": {"kind": "lti", "a": [[r1, s1], [a31, q]], "b": [[g], [0.0]], "c": [[1.0, 0.0]],
                       "x0": [y0, x30]},
            "controller": {"variant": "funnel_rd_r", "phi": phi, "r": 1},
            "reference": reference, "sim": sim,
        })
        .to_string(),
    )
    .unwrap();

    let (a, b) = (run(&dae).unwrap(), run(&ode).unwrap());
    let mut worst: f64 = 0.0;
    for k in 0..=100 {
        let t = 0.1 * k as f64;
        let (xa, xb) = (a.trajectory.state_at(t).unwrap(), b.trajectory.state_at(t).unwrap());
        worst = worst.max((xa[0] - xb[0]).abs()).max((xa[1] - xb[1]).abs());
    }
    // both runs carry their own 1e-9 local error over ten time units
    assert!(worst <= 1e-7, "max state gap {worst}");
}
