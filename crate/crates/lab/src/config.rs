//! Experiment configuration and resource budget.

use polymer::env::{EnvKind, EnvSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "E1_p2l_convergence")]
    E1P2lConvergence,
    #[serde(rename = "E2_random_llt")]
    E2RandomLlt,
    #[serde(rename = "E3_supercritical")]
    E3Supercritical,
    #[serde(rename = "E4_chi_zero")]
    E4ChiZero,
    #[serde(rename = "E5_four_param")]
    E5FourParam,
    #[serde(rename = "E6_duhamel")]
    E6Duhamel,
    #[serde(rename = "E7_holder")]
    E7Holder,
    #[serde(rename = "E8_crossover_asymptotics")]
    E8CrossoverAsymptotics,
    #[serde(rename = "E9_universality")]
    E9Universality,
    #[serde(rename = "E10_weak_universality_gap")]
    E10WeakUniversalityGap,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::E1P2lConvergence,
        Experiment::E2RandomLlt,
        Experiment::E3Supercritical,
        Experiment::E4ChiZero,
        Experiment::E5FourParam,
        Experiment::E6Duhamel,
        Experiment::E7Holder,
        Experiment::E8CrossoverAsymptotics,
        Experiment::E9Universality,
        Experiment::E10WeakUniversalityGap,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::E1P2lConvergence => "E1_p2l_convergence",
            Experiment::E2RandomLlt => "E2_random_llt",
            Experiment::E3Supercritical => "E3_supercritical",
            Experiment::E4ChiZero => "E4_chi_zero",
            Experiment::E5FourParam => "E5_four_param",
            Experiment::E6Duhamel => "E6_duhamel",
            Experiment::E7Holder => "E7_holder",
            Experiment::E8CrossoverAsymptotics => "E8_crossover_asymptotics",
            Experiment::E9Universality => "E9_universality",
            Experiment::E10WeakUniversalityGap => "E10_weak_universality_gap",
        }
    }
}

/// Knobs that only some experiments read. Missing entries take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Options {
    /// E3: extra decay exponent δ in β n^{−(1/4+δ)}. Default 0.25.
    pub delta: Option<f64>,
    /// E7: moment order M. Default 8.
    pub moment: Option<u32>,
    /// E7: lattice offsets. Default [2, 4, 8, 16].
    pub lags: Option<Vec<i64>>,
    /// E8: β values for the GUE limit. Default [1, 2, 4].
    pub large_betas: Option<Vec<f64>>,
    /// E8: β values for the Gaussian limit. Default [0.5, 0.25, 0.125].
    pub small_betas: Option<Vec<f64>>,
    /// E9: environment compared against `env`. Default Rademacher.
    pub other_env: Option<EnvSpec>,
    /// E10: β values. Default [0.5, 1, 2].
    pub betas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub dir: PathBuf,
}

fn default_alpha() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub env: EnvSpec,
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub output: Outputs,
    #[serde(default)]
    pub options: Options,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, beta: f64, n_list: Vec<usize>, replicas: usize, seed: u64, dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            experiment,
            env: EnvSpec::new(EnvKind::Gaussian),
            beta,
            alpha: default_alpha(),
            n_list,
            replicas,
            seed,
            output: Outputs { dir: dir.into() },
            options: Options::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn n_max(&self) -> usize {
        self.n_list.iter().copied().max().unwrap_or(0)
    }
}

/// Upper limits checked before any computation starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_n: usize,
    pub max_replicas: usize,
    /// Bound on Σ_n replicas·n² lattice updates.
    pub max_work: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_n: 1 << 14, max_replicas: 100_000, max_work: 5e11 }
    }
}

impl Budget {
    pub fn work(config: &ExperimentConfig) -> f64 {
        config.n_list.iter().map(|&n| config.replicas as f64 * (n as f64).powi(2)).sum()
    }
}
