//! Build a config from JSON, validate it, run it and write the CSV trajectory.

use funnelsim::scenarios::{check, run, Config};
use funnelsim::sim::write_csv;

const CONFIG: &str = r#"{
    "name": "unstable_first_order",
    "system": {"kind": "scalar", "a": 2.0, "b": 0.5, "c": 1.0, "x0": 0.5},
    "controller": {"variant": "funnel_rd1", "phi": {"family": "exp_decay_reciprocal", "a": 2, "b": 1, "c": 0.05}},
    "reference": {"kind": "sinusoid", "amplitude": [1.0], "omega": [3.0]},
    "sim": {"t_end": 5.0, "rtol": 1e-8, "atol": 1e-8},
    "checks": [{"check": "funnel_interior", "bound": 1.0}]
}"#;

fn main() -> funnelsim::Result<()> {
    let cfg = Config::from_json(CONFIG)?;
    let rep = check(&cfg)?;
    println!("funnel growth constant ~ {:.3}", rep.funnels[0].lipschitz_constant_estimate);

    let out = run(&cfg)?;
    println!("{:?}, eps {:?}", out.report.termination, out.report.eps_observed);
    let path = std::env::temp_dir().join("unstable_first_order.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| funnelsim::Error::Io(e.to_string()))?);
    write_csv(&out.trajectory, &mut f)?;
    println!("trajectory written to {}", path.display());
    Ok(())
}
