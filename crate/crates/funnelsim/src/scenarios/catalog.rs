use serde_json::{json, Value};

use super::Config;

/// A named, ready-to-run configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    /// Short description of the capability exercised.
    pub capability: &'static str,
}

fn exp_decay(a: f64, b: f64, c: f64) -> Value {
    json!({"family": "exp_decay_reciprocal", "a": a, "b": b, "c": c})
}

fn sin(amp: &[f64], omega: &[f64]) -> Value {
    json!({"kind": "sinusoid", "amplitude": amp, "omega": omega})
}

fn double_integrator() -> Value {
    json!({"kind": "lti", "a": [[0, 1], [0, 0]], "b": [[0], [1]], "c": [[1, 0]], "x0": [0.4, 0.0]})
}

fn heat(n_modes: usize) -> Value {
    json!({
        "name": format!("heat_modal_{n_modes}"),
        "description": format!("boundary-averaged heat equation, {n_modes} modes, relative degree one funnel law"),
        "system": {"kind": "heat_modal", "n_modes": n_modes},
        "controller": {"variant": "funnel_rd1", "phi": exp_decay(1.0, 1.0, 0.1)},
        "reference": sin(&[1.0], &[1.0]),
        "sim": {"t_end": 10.0},
        "checks": [{"check": "funnel_interior", "bound": 1.0}],
    })
}

fn robot(controller: Value, name: &str, description: &str) -> Value {
    json!({
        "name": name,
        "description": description,
        "system": {"kind": "robot"},
        "controller": controller,
        "reference": sin(&[1.0, 1.0], &[1.0, 2.0]),
        "sim": {"t_end": 10.0},
        "checks": [{"check": "funnel_interior", "bound": 1.0}],
    })
}

fn raw() -> Vec<(&'static str, Value)> {
    let phi_robot = exp_decay(4.0, 2.0, 0.1);
    vec![
        (
            "adaptive high-gain with the closed-form disturbance oracle",
            json!({
                "name": "scalar_disturbance",
                "description": "y' = u + d with d chosen so that y and k have a closed form",
                "system": {"kind": "scalar", "a": 0, "b": 1, "c": 1, "x0": 1,
                           "disturbance": {"kind": "decaying_prototype"}},
                "controller": {"variant": "high_gain"},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 50.0},
                "checks": [{"check": "disturbance_oracle", "bound": 1e-5}],
            }),
        ),
        (
            "adaptive high-gain energy identity",
            json!({
                "name": "high_gain_identity",
                "description": "y' = u, u = -k y, k' = y^2, so that y^2 + k^2 = 1",
                "system": {"kind": "scalar", "a": 0, "b": 1, "c": 1, "x0": 1},
                "controller": {"variant": "high_gain"},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 20.0},
                "checks": [
                    {"check": "high_gain_identity", "a": 0, "cb": 1, "y0": 1, "k0": 0, "bound": 1e-6},
                    {"check": "gain_monotone", "index": 0, "bound": 0.0},
                ],
            }),
        ),
        (
            "Nussbaum switching with positive control direction",
            json!({
                "name": "nussbaum_pos",
                "description": "y' = y + u, u = k^2 cos(k) y, k' = y^2",
                "system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 1},
                "controller": {"variant": "nussbaum"},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 50.0},
                "checks": [{"check": "nussbaum_identity", "a": 1, "cb": 1, "y0": 1, "k0": 0, "bound": 1e-5}],
            }),
        ),
        (
            "Nussbaum switching with negative control direction",
            json!({
                "name": "nussbaum_neg",
                "description": "y' = y - u, u = k^2 cos(k) y, k' = y^2",
                "system": {"kind": "scalar", "a": 1, "b": -1, "c": 1, "x0": 1},
                "controller": {"variant": "nussbaum"},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 50.0},
                "checks": [{"check": "nussbaum_identity", "a": 1, "cb": -1, "y0": 1, "k0": 0, "bound": 1e-5}],
            }),
        ),
        (
            "lambda-tracker with a dead zone",
            json!({
                "name": "lambda_tracker",
                "description": "y' = y + u + 0.5 sin t under the lambda-tracker",
                "system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 1,
                           "disturbance": sin(&[0.5], &[1.0])},
                "controller": {"variant": "lambda_tracker", "lambda": 0.3},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 50.0},
                "checks": [
                    {"check": "lambda_tail", "lambda": 0.3, "t_from": 45.0, "bound": 1e-3},
                    {"check": "gain_monotone", "index": 0, "bound": 0.0},
                ],
            }),
        ),
        (
            "relative degree two funnel law on a two-link arm",
            robot(
                json!({"variant": "funnel_rd_r", "phi": phi_robot, "r": 2}),
                "robot_fc",
                "two-link arm tracking (sin t, sin 2t) with the derivative funnel law",
            ),
        ),
        (
            "non-backstepping funnel law on a two-link arm",
            robot(
                json!({"variant": "non_backstep_fc", "phis": [phi_robot, phi_robot]}),
                "robot_nonbackstep",
                "two-link arm tracking (sin t, sin 2t) with the non-backstepping law",
            ),
        ),
        (
            "output-only funnel law with an input filter",
            json!({
                "name": "double_integrator_filter",
                "description": "y'' = u using only y, filter pole mu = 1",
                "system": double_integrator(),
                "controller": {"variant": "filter_fc", "phi": {"family": "linear_ramp", "eps": 0.1, "t_ramp": 1.0},
                               "mu": 1.0, "r": 2},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}],
            }),
        ),
        (
            "output-only funnel law with a pre-compensator",
            json!({
                "name": "double_integrator_precomp",
                "description": "y'' = u with a pre-compensator, q = (1, 1), p = (1, 1/3)",
                "system": double_integrator(),
                "controller": {"variant": "pre_comp_fc", "phi": {"family": "linear_ramp", "eps": 0.1, "t_ramp": 1.0},
                               "rho": 2.0, "q": [1.0, 1.0], "p": [1.0, 1.0 / 3.0]},
                "reference": {"kind": "zero", "dim": 1},
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}],
            }),
        ),
        ("heat equation, three modes", heat(3)),
        ("heat equation, ten modes", heat(10)),
        ("heat equation, thirty modes", heat(30)),
        (
            "input-constrained funnel control with a self-adjusting boundary",
            json!({
                "name": "icfc",
                "description": "y' = y + u with |u| bounded and a self-adjusting funnel",
                "system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 1.2},
                "controller": {"variant": "icfc", "u_hat": 1.5, "alpha_d": 1.0, "beta_d": 0.1, "psi0": 2.0},
                "reference": sin(&[0.5], &[1.0]),
                "sim": {"t_end": 20.0},
                "checks": [{"check": "input_bound", "bound": 1.5}, {"check": "psi_floor", "bound": 0.1 - 1e-9}],
            }),
        ),
        (
            "saturated funnel law that saturates early",
            json!({
                "name": "saturated",
                "description": "y' = y + sat(u) starting close to the funnel boundary",
                "system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 1.14},
                "controller": {"variant": "saturated_fc", "phi": exp_decay(1.0, 1.0, 0.2), "u_hat": 4.0},
                "reference": sin(&[0.5], &[1.0]),
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}, {"check": "input_bound", "bound": 4.0}],
            }),
        ),
        (
            "saturated funnel law inside its saturation-free region",
            json!({
                "name": "saturated_mild",
                "description": "y' = y + sat(u) starting near the reference",
                "system": {"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 0.3},
                "controller": {"variant": "saturated_fc", "phi": exp_decay(1.0, 1.0, 0.2), "u_hat": 4.0},
                "reference": sin(&[0.5], &[1.0]),
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}, {"check": "input_bound", "bound": 4.0}],
            }),
        ),
        (
            "DAE funnel law on a linear normal form with one algebraic output",
            json!({
                "name": "dae_synthetic",
                "description": "m = 2, one differential and one algebraic output, scalar zero dynamics",
                "system": {"kind": "dae", "normal_form": {
                    "r": 1, "ell": 1, "m": 2,
                    "r1": [[[0.5]]], "r2": [[[0.1]]],
                    "p1": [[0.1]], "p2": [[0.3]],
                    "s1": [[0.1]], "s2": [[0.1]],
                    "q": [[-1.0]], "a31": [[0.1, 0.1]],
                    "gamma_hat": [[1.0]], "gamma_tilde": [[0.1]],
                    "y_i0": [0.2], "x30": [0.5],
                }},
                "controller": {"variant": "dae_fc", "phi_i": exp_decay(1.0, 1.0, 0.1),
                               "phi_ii": {"family": "constant_reciprocal", "c": 1.0}, "k_hat": 1.0},
                "reference": sin(&[0.5, 0.3], &[1.0, 2.0]),
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}, {"check": "algebraic_residual", "bound": 1e-8}],
            }),
        ),
        (
            "prescribed performance control on a pure-feedback chain",
            json!({
                "name": "ppc",
                "description": "second order pure-feedback chain with full state measurement",
                "system": {"kind": "chain", "r": 2, "x0": [0.3, 0.0]},
                "controller": {"variant": "ppc", "k": [1.0, 1.0],
                               "phis": [exp_decay(1.0, 1.0, 0.1), exp_decay(4.0, 1.0, 0.5)]},
                "reference": sin(&[0.5], &[1.0]),
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}],
            }),
        ),
        (
            "PD-funnel law on a double integrator",
            json!({
                "name": "pd_funnel",
                "description": "y'' = u with a pair of funnels on e and e'",
                "system": {"kind": "lti", "a": [[0, 1], [0, 0]], "b": [[0], [1]], "c": [[1, 0]],
                           "x0": [0.4, 0.0], "r": 2},
                "controller": {"variant": "pd_funnel", "phi0": exp_decay(1.0, 1.0, 0.1),
                               "phi1": exp_decay(4.0, 1.0, 0.5)},
                "reference": sin(&[0.5], &[1.0]),
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}],
            }),
        ),
        (
            "relative degree one funnel law with a point delay in the system",
            json!({
                "name": "delay_rd1",
                "description": "y' = -y + 0.5 y(t-1) + u",
                "system": {"kind": "functional", "a": -1.0, "gamma": 1.0, "x0": [0.5],
                           "operator": {"input_dim": 1, "output_dim": 1,
                                        "realization": {"kind": "point_delay",
                                                        "terms": [{"gain": [[0.5]], "delay": 1.0}]}}},
                "controller": {"variant": "funnel_rd1", "phi": exp_decay(1.0, 1.0, 0.1)},
                "reference": sin(&[1.0], &[1.0]),
                "sim": {"t_end": 10.0},
                "checks": [{"check": "funnel_interior", "bound": 1.0}],
            }),
        ),
    ]
}

/// The built-in scenarios.
pub fn catalog() -> Vec<Scenario> {
    raw()
        .into_iter()
        .map(|(capability, v)| {
            let name = v["name"].as_str().unwrap_or_default().to_string();
            let config = serde_json::from_value(v).unwrap_or_else(|e| panic!("built-in scenario {name}: {e}"));
            Scenario { config, capability }
        })
        .collect()
}
