//! Experiment configuration: one JSON document per run, versioned by
//! `schema`, with unknown fields rejected at every level.

use std::path::Path;

use ampkit::amp::AmpConfig;
use ampkit::coupled::CouplingEnsemble;
use ampkit::rng::instance_seeds;
use ampkit::se::{Quadrature, ThresholdOptions};
use ampkit::sparc::CodeParams;
use ampkit::GaussBernoulliPrior;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "ampkit-config/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    /// Signal length used when a config leaves it unset.
    pub fn signal_len(self) -> usize {
        match self {
            Scale::Desk => 1 << 16,
            Scale::Paper => 1 << 20,
        }
    }

    /// Instances per grid point used when a config leaves the seed list unset.
    pub fn instances(self) -> usize {
        match self {
            Scale::Desk => 100,
            Scale::Paper => 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// Randomized Walsh-Hadamard blocks on real signals.
    Hadamard,
    /// Randomized Fourier blocks on complex signals.
    Fourier,
    /// I.i.d. Gaussian matrix on real signals.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    /// Master seed; the seed list is derived from it when `seeds` is empty.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_scale")]
    pub scale: Scale,
    /// Write wall-clock measurements to separate `timing` files.
    #[serde(default = "yes")]
    pub timing: bool,
    pub experiment: Experiment,
}

fn default_scale() -> Scale {
    Scale::Desk
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    CsRun(CsRun),
    CsPhase(CsPhase),
    SePhase(SePhase),
    Bench(Bench),
    CodeRun(CodeRun),
    CodeSweep(CodeSweep),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::CsRun(_) => "cs-run",
            Experiment::CsPhase(_) => "cs-phase",
            Experiment::SePhase(_) => "se-phase",
            Experiment::Bench(_) => "bench",
            Experiment::CodeRun(_) => "code-run",
            Experiment::CodeSweep(_) => "code-sweep",
        }
    }
}

/// AMP on one compressed-sensing instance per seed, side by side with SE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsRun {
    pub prior: GaussBernoulliPrior,
    pub operator: OperatorKind,
    /// Coupling layout; the full operator at `alpha` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<CouplingEnsemble>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub amp: AmpConfig,
    /// Also iterate state evolution for as many steps as the longest run.
    #[serde(default = "yes")]
    pub state_evolution: bool,
}

/// Success fractions on a `(ρ, α)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsPhase {
    pub rhos: Vec<f64>,
    pub alphas: Vec<f64>,
    #[serde(default = "unit_slab")]
    pub sigma2: f64,
    pub operator: OperatorKind,
    /// Coupling layout; its `alpha` is replaced by each grid value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<CouplingEnsemble>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "success_mse")]
    pub success_mse: f64,
    #[serde(default)]
    pub amp: AmpConfig,
}

fn unit_slab() -> f64 {
    1.0
}

fn success_mse() -> f64 {
    1e-6
}

/// State-evolution phase diagram: fixed points on a grid and the
/// transition per `ρ` by bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SePhase {
    pub rhos: Vec<f64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default = "unit_slab")]
    pub sigma2: f64,
    #[serde(default)]
    pub complex: bool,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub threshold: ThresholdOptions,
    #[serde(default = "adaptive")]
    pub quadrature: Quadrature,
}

fn adaptive() -> Quadrature {
    Quadrature::Adaptive
}

/// Wall-clock to convergence against the signal length, structured operator
/// against a dense Gaussian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bench {
    pub prior: GaussBernoulliPrior,
    pub alpha: f64,
    /// Signal lengths as powers of two.
    pub log2_n: Vec<u32>,
    /// Largest signal length for which the dense path runs.
    #[serde(default = "dense_cap")]
    pub dense_max_log2_n: u32,
    #[serde(default = "success_mse")]
    pub target_mse: f64,
    #[serde(default)]
    pub amp: AmpConfig,
}

fn dense_cap() -> u32 {
    14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeRun {
    pub code: CodeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<CouplingEnsemble>,
    #[serde(default = "codes_amp")]
    pub amp: AmpConfig,
    /// File whose bytes are sent as the message of the first instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

fn codes_amp() -> AmpConfig {
    AmpConfig::for_codes(0.0)
}

/// A named operator family for rate sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeOperator {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<CouplingEnsemble>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSweep {
    pub l: usize,
    pub b: usize,
    pub snr: f64,
    pub rates: Vec<f64>,
    pub operators: Vec<CodeOperator>,
    /// Rate against which the `gap_db` column is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_rate: Option<f64>,
    #[serde(default = "codes_amp")]
    pub amp: AmpConfig,
}

impl CodeSweep {
    pub fn grid(&self) -> Vec<CodeParams> {
        self.rates.iter().map(|&r| CodeParams::new(self.l, self.b, r, self.snr)).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema != SCHEMA {
            return bad(format!("schema must be \"{SCHEMA}\", found \"{}\"", self.schema));
        }
        if self.instances == Some(0) {
            return bad("instances must be positive".into());
        }
        let grid = |name: &str, xs: &[f64]| -> Result<(), ConfigError> {
            if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be a nonempty list of numbers")));
            }
            Ok(())
        };
        let amp = |c: &AmpConfig| c.validate().map_err(|e| ConfigError::Invalid(e.to_string()));
        let prior = |p: &GaussBernoulliPrior| p.validate().map_err(|e| ConfigError::Invalid(e.to_string()));
        match &self.experiment {
            Experiment::CsRun(c) => {
                prior(&c.prior)?;
                amp(&c.amp)?;
                if !(c.alpha > 0.0) {
                    return bad("alpha must be positive".into());
                }
            }
            Experiment::CsPhase(c) => {
                grid("rhos", &c.rhos)?;
                grid("alphas", &c.alphas)?;
                amp(&c.amp)?;
            }
            Experiment::SePhase(c) => {
                grid("rhos", &c.rhos)?;
                if c.rhos.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                    return bad("rhos must lie in (0, 1]".into());
                }
            }
            Experiment::Bench(c) => {
                prior(&c.prior)?;
                amp(&c.amp)?;
                if c.log2_n.is_empty() {
                    return bad("log2_n must not be empty".into());
                }
            }
            Experiment::CodeRun(c) => {
                c.code.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                amp(&c.amp)?;
            }
            Experiment::CodeSweep(c) => {
                grid("rates", &c.rates)?;
                if c.operators.is_empty() {
                    return bad("operators must not be empty".into());
                }
                for p in c.grid() {
                    p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                }
                amp(&c.amp)?;
            }
        }
        Ok(())
    }

    /// Fills every defaulted size and the seed list, so the stored config
    /// alone reproduces the run.
    pub fn resolve(mut self, seed_override: Option<u64>, scale_override: Option<Scale>) -> Self {
        if let Some(s) = seed_override {
            self.seed = s;
            self.seeds.clear();
        }
        if let Some(s) = scale_override {
            self.scale = s;
        }
        if self.seeds.is_empty() {
            let count = self.instances.unwrap_or_else(|| match self.experiment {
                Experiment::CsRun(_) | Experiment::CodeRun(_) => 1,
                Experiment::SePhase(_) => 1,
                Experiment::Bench(_) => 10,
                _ => self.scale.instances(),
            });
            self.seeds = instance_seeds(self.seed, count);
        }
        self.instances = Some(self.seeds.len());
        let n = self.scale.signal_len();
        match &mut self.experiment {
            Experiment::CsRun(c) => {
                c.n.get_or_insert(n);
            }
            Experiment::CsPhase(c) => {
                c.n.get_or_insert(n);
            }
            _ => {}
        }
        self
    }
}
