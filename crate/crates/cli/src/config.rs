//! TOML run configuration. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use proxlin::problems::{InstanceSpec, ProblemInstance};
use proxlin::prox_linear::ErrorSchedule;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds instance generation and every stochastic solver.
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Record wall-clock times; traces are then no longer reproducible.
    #[serde(default)]
    pub timing: bool,
    pub instance: InstanceConfig,
    pub solver: Option<SolverSpec>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub compare: Vec<CompareEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    AdditiveComposite,
    NlsBox,
    PhaseRetrieval,
    ExactPenalty,
    Lad,
    Pathology,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub kind: InstanceKind,
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub lambda: Option<f64>,
    /// Replaces the declared `β`.
    pub beta: Option<f64>,
}

impl InstanceConfig {
    pub fn spec(&self) -> Result<InstanceSpec, CliError> {
        let need = |v: Option<usize>, key: &str| {
            v.ok_or_else(|| CliError::Usage(format!("instance kind {:?} requires `{key}`", self.kind)))
        };
        let forbid = |present: bool, key: &str| {
            if present {
                Err(CliError::Usage(format!("instance kind {:?} does not take `{key}`", self.kind)))
            } else {
                Ok(())
            }
        };
        use InstanceKind::*;
        if self.kind != ExactPenalty {
            forbid(self.lambda.is_some(), "lambda")?;
        }
        Ok(match self.kind {
            AdditiveComposite => {
                forbid(self.m.is_some(), "m")?;
                InstanceSpec::AdditiveComposite { d: need(self.d, "d")? }
            }
            NlsBox => InstanceSpec::NlsBox { d: need(self.d, "d")?, m: need(self.m, "m")? },
            PhaseRetrieval => InstanceSpec::PhaseRetrieval { d: need(self.d, "d")?, m: need(self.m, "m")? },
            ExactPenalty => InstanceSpec::ExactPenalty {
                d: need(self.d, "d")?,
                m: need(self.m, "m")?,
                lambda: self
                    .lambda
                    .ok_or_else(|| CliError::Usage("instance kind ExactPenalty requires `lambda`".into()))?,
            },
            Lad => InstanceSpec::Lad { d: need(self.d, "d")?, m: need(self.m, "m")? },
            Pathology => {
                forbid(self.d.is_some(), "d")?;
                forbid(self.m.is_some(), "m")?;
                InstanceSpec::Pathology
            }
        })
    }

    pub fn build(&self, seed: u64) -> Result<ProblemInstance, CliError> {
        let inst = self.spec()?.build(seed).map_err(CliError::from_solver)?;
        match self.beta {
            Some(beta) => inst.with_beta(beta).map_err(CliError::from_solver),
            None => Ok(inst),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Zero {},
    PowerLaw { eps0: f64, q: f64 },
    InverseSquare { scale: f64 },
    Constant { value: f64 },
}

impl ScheduleConfig {
    pub fn schedule(self) -> ErrorSchedule {
        match self {
            ScheduleConfig::Zero {} => ErrorSchedule::Zero,
            ScheduleConfig::PowerLaw { eps0, q } => ErrorSchedule::PowerLaw { eps0, q },
            ScheduleConfig::InverseSquare { scale } => ErrorSchedule::InverseSquare { scale },
            ScheduleConfig::Constant { value } => ErrorSchedule::Constant { value },
        }
    }
}

fn inverse_square() -> ScheduleConfig {
    ScheduleConfig::InverseSquare { scale: 1.0 }
}

fn quartic() -> ScheduleConfig {
    ScheduleConfig::PowerLaw { eps0: 1.0, q: 3.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerConfig {
    Exact,
    #[default]
    DualAccelerated,
    FgmDual,
    FgmPrimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothedInnerConfig {
    #[default]
    FgmDual,
    FgmPrimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsConfig {
    #[default]
    Standard,
    Fista,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteSumModeConfig {
    Smooth,
    #[default]
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientBoundConfig {
    Global,
    #[default]
    PerPoint,
}

fn default_max_outer() -> usize {
    100
}

fn default_n_steps() -> usize {
    50
}

fn default_half() -> f64 {
    0.5
}

fn default_smoothed_outer() -> usize {
    10_000
}

fn default_finite_sum_outer() -> usize {
    1000
}

/// One solver run. `t` defaults to `1/μ`; `mu_tilde` to `2μ`, or 1 when `μ = 0`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    ProxLinear {
        t: Option<f64>,
        #[serde(default = "default_max_outer")]
        max_outer: usize,
        #[serde(default)]
        tol: f64,
        #[serde(default)]
        record_true: bool,
    },
    InexactGap {
        t: Option<f64>,
        #[serde(default = "default_max_outer")]
        max_outer: usize,
        #[serde(default)]
        tol: f64,
        #[serde(default = "inverse_square")]
        schedule: ScheduleConfig,
        #[serde(default)]
        inner: InnerConfig,
        #[serde(default)]
        record_true: bool,
    },
    InexactStationary {
        t: Option<f64>,
        #[serde(default = "default_max_outer")]
        max_outer: usize,
        #[serde(default)]
        tol: f64,
        #[serde(default = "inverse_square")]
        schedule: ScheduleConfig,
        #[serde(default)]
        inner: InnerConfig,
        #[serde(default)]
        record_true: bool,
    },
    Smoothed {
        eps: f64,
        #[serde(default)]
        inner: SmoothedInnerConfig,
        #[serde(default = "default_smoothed_outer")]
        max_outer: usize,
    },
    Budgeted {
        total: usize,
        /// Estimate of `F(x₀) − inf F`; defaults to the reference gap, else `F(x₀)`.
        q: Option<f64>,
    },
    Accelerated {
        mu_tilde: Option<f64>,
        #[serde(default = "default_n_steps")]
        n_steps: usize,
        #[serde(default)]
        weights: WeightsConfig,
    },
    AcceleratedInexactGap {
        mu_tilde: Option<f64>,
        #[serde(default = "default_n_steps")]
        n_steps: usize,
        #[serde(default = "quartic")]
        eps: ScheduleConfig,
        #[serde(default = "quartic")]
        delta: ScheduleConfig,
    },
    AcceleratedInexactStationary {
        mu_tilde: Option<f64>,
        #[serde(default = "default_n_steps")]
        n_steps: usize,
        #[serde(default = "quartic")]
        eps: ScheduleConfig,
        #[serde(default = "quartic")]
        delta: ScheduleConfig,
    },
    Backtracking {
        /// Initial step; defaults to `1/μ`, or 1 when `μ = 0`.
        t0: Option<f64>,
        #[serde(default = "default_half")]
        eta: f64,
        #[serde(default = "default_half")]
        alpha: f64,
        #[serde(default = "default_n_steps")]
        n_steps: usize,
    },
    /// Phase retrieval only: the objective split into its `m` measurements.
    FiniteSum {
        eps: f64,
        #[serde(default)]
        mode: FiniteSumModeConfig,
        #[serde(default = "default_finite_sum_outer")]
        max_outer: usize,
        #[serde(default)]
        bound: GradientBoundConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareEntry {
    pub label: String,
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random points for the pointwise suites.
    pub points: usize,
    /// Pairs for the constant and weak-convexity probes.
    pub probes: usize,
    /// Half-width of the sampling box around the start.
    pub radius: f64,
    /// Oracle tolerance.
    pub tolerance: f64,
    /// Relative slack on every inequality.
    pub slack: f64,
    pub constants: bool,
    pub jacobian: bool,
    pub sandwich: bool,
    pub near_stationarity: bool,
    pub weak_convexity: bool,
    pub prox_calculus: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            points: 20,
            probes: 10_000,
            radius: 1.0,
            tolerance: 1e-12,
            slack: 1e-5,
            constants: true,
            jacobian: true,
            sandwich: true,
            near_stationarity: true,
            weak_convexity: true,
            prox_calculus: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.instance.spec()?;
        let v = &cfg.verify;
        if !(v.radius > 0.0 && v.tolerance > 0.0 && v.slack >= 0.0) {
            return Err(CliError::Usage("verify needs radius > 0, tolerance > 0 and slack >= 0".into()));
        }
        let mut labels: Vec<&str> = cfg.compare.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Usage("compare labels must be distinct".into()));
        }
        Ok(cfg)
    }
}
