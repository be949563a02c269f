//! Reproducible experiments: a JSON config binds a system, a controller, a
//! reference, integration settings and the assertions checked along the run.

mod catalog;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use catalog::{catalog, Scenario};

use crate::controllers::{feasibility_check, ControllerSpec, FeasibilityReport};
use crate::dae::{DaeClosedLoop, DaeFc};
use crate::error::{Error, Result};
use crate::funnel::{check_class, FunnelClassReport};
use crate::plants::PlantSpec;
use crate::signal::Signal;
use crate::sim::{
    simulate, verify_invariants, ClosedLoop, ClosedLoopProblem, IntegratorOptions, InvariantCheck, RunReport,
    Trajectory,
};

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub t_end: f64,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub report_path: Option<PathBuf>,
}

/// One complete, self-describing run. Funnel functions live in the controller section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub system: PlantSpec,
    pub controller: ControllerSpec,
    pub reference: Signal,
    pub sim: SimSettings,
    #[serde(default)]
    pub output: OutputSettings,
    #[serde(default)]
    pub checks: Vec<InvariantCheck>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn options(&self) -> Result<IntegratorOptions> {
        let s = &self.sim;
        if !(s.t_end > 0.0 && s.rtol > 0.0 && s.atol > 0.0) {
            return Err(Error::Config("t_end, rtol and atol must be positive".into()));
        }
        let mut o = IntegratorOptions::new(s.t_end, s.rtol, s.atol);
        if let Some(h) = s.max_step {
            if !(h > 0.0) {
                return Err(Error::Config("max_step must be positive".into()));
            }
            o.max_step = h;
        }
        Ok(o)
    }

    /// Assembles the guarded closed loop (initial funnel membership, consistency and gain rules included).
    pub fn build(&self) -> Result<Box<dyn ClosedLoop>> {
        match (&self.system, &self.controller) {
            (
                PlantSpec::Dae { normal_form },
                ControllerSpec::DaeFc {
                    alpha,
                    n,
                    phi_i,
                    phi_ii,
                    k_hat,
                },
            ) => {
                let nf = normal_form.build()?;
                let fc = DaeFc {
                    alpha: *alpha,
                    n: *n,
                    phi_i: phi_i.clone(),
                    phi_ii: phi_ii.clone(),
                    k_hat: *k_hat,
                };
                Ok(Box::new(DaeClosedLoop::assemble(nf, fc, self.reference.clone())?))
            }
            (PlantSpec::Dae { .. }, _) | (_, ControllerSpec::DaeFc { .. }) => Err(Error::Config(
                "DAE systems and the DAE funnel law must be used together".into(),
            )),
            (sys, ctrl) => {
                let plant = sys.build()?;
                let controller = ctrl.build(plant.m())?;
                Ok(Box::new(ClosedLoopProblem::assemble(plant, controller, self.reference.clone())?))
            }
        }
    }
}

/// Static validation results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub funnels: Vec<FunnelClassReport>,
    pub feasibility: Option<FeasibilityReport>,
    pub warnings: Vec<String>,
}

/// Class checks, the scalar feasibility inequality and assembly, without integrating.
pub fn check(cfg: &Config) -> Result<CheckReport> {
    cfg.options()?;
    let mut funnels = Vec::new();
    for f in cfg.controller.funnels() {
        let rep = check_class(f, 0, cfg.sim.t_end)?;
        if !rep.in_phi {
            return Err(Error::InvalidParameter(format!(
                "funnel {:?} is not in the admissible class (growth bound |phi'| <= c(1+phi) or positivity fails)",
                f.family
            )));
        }
        funnels.push(rep);
    }
    let mut warnings = Vec::new();
    let feasibility = match (&cfg.system, &cfg.controller) {
        (PlantSpec::Scalar { c, x0, .. }, ControllerSpec::SaturatedFc { phi, u_hat }) => {
            let (a, cb) = cfg.system.scalar_data().expect("scalar plant");
            let e0 = c * x0 - cfg.reference.value(0.0)[0];
            let rep = feasibility_check(a, cb, *u_hat, phi, &cfg.reference, e0)?;
            if !rep.feasible {
                warnings.push(format!(
                    "feasibility inequality fails: cb*u_hat = {} < {}; funnel invariance is not guaranteed",
                    rep.lhs, rep.rhs
                ));
            }
            Some(rep)
        }
        _ => None,
    };
    cfg.build()?;
    Ok(CheckReport {
        funnels,
        feasibility,
        warnings,
    })
}

pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub report: RunReport,
    pub warnings: Vec<String>,
}

/// Assembles, integrates and evaluates the configured checks. Infeasible saturated configs are refused.
pub fn run(cfg: &Config) -> Result<RunOutcome> {
    let opts = cfg.options()?;
    let checked = check(cfg)?;
    if let Some(f) = checked.feasibility.as_ref().filter(|f| !f.feasible) {
        return Err(Error::InvalidParameter(format!(
            "saturated funnel control is not feasible: cb*u_hat = {} < {}",
            f.lhs, f.rhs
        )));
    }
    let warnings = checked.warnings;
    let problem = cfg.build()?;
    let trajectory = simulate(problem.as_ref(), &opts)?;
    let report = verify_invariants(&trajectory, &cfg.checks)?;
    Ok(RunOutcome {
        trajectory,
        report,
        warnings,
    })
}

/// Built-in scenario by name, overridden by `$FUNNELCTL_SCENARIO_DIR/<name>.json` when present.
pub fn load_scenario(name: &str) -> Result<Config> {
    if let Ok(dir) = std::env::var("FUNNELCTL_SCENARIO_DIR") {
        let p = Path::new(&dir).join(format!("{name}.json"));
        if p.exists() {
            return Config::load(&p);
        }
    }
    catalog()
        .into_iter()
        .find(|s| s.config.name == name)
        .map(|s| s.config)
        .ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_round_trips() {
        let cat = catalog();
        assert!(cat.len() >= 10);
        for s in &cat {
            let back = Config::from_json(&s.config.to_json()).unwrap();
            assert_eq!(back, s.config);
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v = serde_json::to_value(&catalog()[0].config).unwrap();
        v["sim"]["tolerance"] = serde_json::json!(1e-3);
        assert!(matches!(Config::from_json(&v.to_string()), Err(Error::Config(_))));
    }
}
