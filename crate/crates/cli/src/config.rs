//! The TOML run configuration.

use std::path::PathBuf;

use relfk_core::{ExperimentSpec, Interpolation, Point, StopRule, TestFunction};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Analytic identities of the path sampler.
    Validate,
    /// One Monte Carlo estimate.
    Estimate,
    /// Lowest eigenvalues of the lattice operator.
    Oracle,
    /// Tail fits of the lattice ground state.
    Decay,
    /// Martingale scan and stopped bound against the lattice ground state.
    Martingale,
    /// Diamagnetic inequality, by Monte Carlo and on the lattice.
    Diamagnetic,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Validate => "validate",
            Kind::Estimate => "estimate",
            Kind::Oracle => "oracle",
            Kind::Decay => "decay",
            Kind::Martingale => "martingale",
            Kind::Diamagnetic => "diamagnetic",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the subcommand when given.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub estimate: EstimateConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub martingale: MartingaleConfig,
    #[serde(default)]
    pub diamagnetic: DiamagneticConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub n: usize,
    pub side: f64,
    /// Number of eigenvalues reported by `oracle`.
    pub eigenvalues: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { n: 8, side: 8.0, eigenvalues: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub samples: u64,
    pub seed: u64,
    pub ks_limit: f64,
    /// Allowed `|z|` for mean-value checks.
    pub z_limit: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, ks_limit: 0.01, z_limit: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimateConfig {
    /// `(e^{-t(H+V)} g)(x, (-1)^α)`.
    Semigroup {
        #[serde(default)]
        x: Point,
        #[serde(default)]
        alpha: u8,
        #[serde(default = "unit_gaussian")]
        g: TestFunction,
    },
    /// `(f, e^{-t(H+V)} g)`.
    MatrixElement {
        #[serde(default = "unit_gaussian")]
        f: TestFunction,
        #[serde(default = "unit_gaussian")]
        g: TestFunction,
    },
    /// `E[e^{iξ·B_{T_t}} e^{izθ_{T_t}}]`.
    Characteristic { xi: Point, z: f64 },
    /// `E[e^{c T_t}]`.
    ExpMoment { c: f64 },
    /// Energy from the decay of `(e^{-t(H+V)} g)(x₀)` between `t1` and `t2`.
    GroundEnergy {
        #[serde(default)]
        x0: Point,
        #[serde(default = "unit_gaussian")]
        g: TestFunction,
        t1: f64,
        t2: f64,
    },
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig::Semigroup { x: [0.0; 3], alpha: 0, g: unit_gaussian() }
    }
}

fn unit_gaussian() -> TestFunction {
    TestFunction::gaussian([0.0; 3], 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub windows: Vec<(f64, f64)>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { windows: vec![(0.0, 2.3), (1.0, 3.0), (1.6, 4.2)] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MartingaleConfig {
    pub t_list: Vec<f64>,
    pub points: Vec<Point>,
    pub alpha: u8,
    pub interpolation: Interpolation,
    /// Absolute discretisation budget added to `3σ`.
    pub budget: f64,
    /// Stopped-bound radius; no stopped bound when absent.
    pub stop_radius: Option<f64>,
    pub stop_rule: StopRule,
}

impl Default for MartingaleConfig {
    fn default() -> Self {
        Self {
            t_list: vec![0.0, 0.25, 0.5, 1.0],
            points: vec![[1.0, 0.5, 0.0]],
            alpha: 0,
            interpolation: Interpolation::Trilinear,
            budget: 0.0,
            stop_radius: None,
            stop_rule: StopRule::Exit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiamagneticConfig {
    pub f: TestFunction,
    pub g: TestFunction,
    /// Also compare lowest lattice eigenvalues of `H + V` and `H_{b₀} + V`.
    pub lattice_check: bool,
}

impl Default for DiamagneticConfig {
    fn default() -> Self {
        Self { f: unit_gaussian(), g: TestFunction::gaussian([0.5, 0.0, 0.0], 0.8), lattice_check: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Format,
}
