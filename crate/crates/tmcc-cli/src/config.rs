//! Run configuration: a TOML file with one section per concern, designed
//! to round-trip losslessly through `toml` serialization.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;
use tmcc::evaluation::Method;
use tmcc::objective::Hyperparams;
use tmcc::solvers::SolverConfig;
use tmcc::synth::{ScenarioSpec, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformCfg {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioCfg {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub r: usize,
    pub tasks: usize,
    pub transform: TransformCfg,
    pub missing_rate: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    pub eta: f64,
    pub max_iters: usize,
    pub stop_kappa: f64,
    pub seed: u64,
}

/// Either sweep the default grid on a validation fit or pin the
/// penalties explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum TuningCfg {
    Grid,
    Fixed { tau1: f64, tau2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: String,
    pub methods: Vec<String>,
    pub trials: usize,
    pub scenario: ScenarioCfg,
    pub solver: SolverCfg,
    pub tuning: TuningCfg,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.parsed_methods()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>, CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("methods list is empty".into()));
        }
        let mut out = Vec::new();
        for name in &self.methods {
            let m: Method = name
                .parse()
                .map_err(|e| CliError::Config(format!("{e}")))?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        let s = &self.scenario;
        ScenarioSpec {
            n: s.n,
            d: s.d,
            m: s.m,
            r: s.r,
            tasks: s.tasks,
            transform: match s.transform {
                TransformCfg::Linear => Transform::Linear,
                TransformCfg::Nonlinear => Transform::Nonlinear,
            },
            missing_rate: s.missing_rate,
            noise_sd: s.noise_sd,
            seed: s.seed,
        }
    }

    pub fn solver_config(&self, hp: Hyperparams) -> SolverConfig {
        let mut cfg = SolverConfig::new(hp);
        cfg.eta = self.solver.eta;
        cfg.max_iters = self.solver.max_iters;
        cfg.stop_kappa = self.solver.stop_kappa;
        cfg.seed = self.solver.seed;
        cfg
    }

    pub fn fixed_hp(&self) -> Option<Hyperparams> {
        match self.tuning {
            TuningCfg::Fixed { tau1, tau2 } => Some(Hyperparams { tau1, tau2 }),
            TuningCfg::Grid => None,
        }
    }
}

/// Built-in scenario used when no config file is given: a small linear
/// problem every method solves in well under a second.
pub fn default_config() -> RunConfig {
    let scenario = ScenarioCfg {
        n: 10,
        d: 4,
        m: 4,
        r: 2,
        tasks: 3,
        transform: TransformCfg::Linear,
        missing_rate: 0.3,
        noise_sd: 0.0,
        seed: 17,
    };
    let total = scenario.d + scenario.tasks * scenario.m;
    RunConfig {
        output_dir: "out".into(),
        methods: Method::ALL.iter().map(|m| m.label().to_string()).collect(),
        trials: 3,
        solver: SolverCfg {
            // nD over the worst response curvature on this scenario's scale.
            eta: (scenario.n * total) as f64 / 4.0,
            max_iters: 500,
            stop_kappa: 1e-7,
            seed: 0,
        },
        tuning: TuningCfg::Grid,
        scenario,
    }
}

/// Scenario tag used in summary rows and file names.
pub fn scenario_label(cfg: &RunConfig) -> String {
    let s = &cfg.scenario;
    let transform = match s.transform {
        TransformCfg::Linear => "linear",
        TransformCfg::Nonlinear => "nonlinear",
    };
    let mut label = format!(
        "{transform}_n{}_d{}_m{}_r{}_nu{}",
        s.n, s.d, s.m, s.r, s.missing_rate
    );
    if s.noise_sd > 0.0 {
        label.push_str(&format!("_sd{}", s.noise_sd));
    }
    label
}
