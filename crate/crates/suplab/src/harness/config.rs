//! Experiment configs: one TOML file per study. `seed` is mandatory; every
//! other knob has a default so a two-line file runs. An explicitly empty
//! sweep axis is a config error, an absent one takes the kind's default.

use crate::concepts::{ConceptWorld, SupportLaw};
use crate::error::{Error, Result};
use crate::numeric::rng::SeededRng;
use crate::sae::{SaeTrainConfig, SaeVariant};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Interference,
    TttRate,
    ModelScaling,
    DataScaling,
    NeighborhoodSweep,
    SaeTrain,
    SaeMask,
    MoeScaling,
    AssumptionReport,
}

pub const ALL_KINDS: [ExperimentKind; 9] = [
    ExperimentKind::Interference,
    ExperimentKind::TttRate,
    ExperimentKind::ModelScaling,
    ExperimentKind::DataScaling,
    ExperimentKind::NeighborhoodSweep,
    ExperimentKind::SaeTrain,
    ExperimentKind::SaeMask,
    ExperimentKind::MoeScaling,
    ExperimentKind::AssumptionReport,
];

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::Interference => "interference",
            ExperimentKind::TttRate => "ttt-rate",
            ExperimentKind::ModelScaling => "model-scaling",
            ExperimentKind::DataScaling => "data-scaling",
            ExperimentKind::NeighborhoodSweep => "neighborhood-sweep",
            ExperimentKind::SaeTrain => "sae-train",
            ExperimentKind::SaeMask => "sae-mask",
            ExperimentKind::MoeScaling => "moe-scaling",
            ExperimentKind::AssumptionReport => "assumption-report",
        }
    }

    /// Closed-form checks average 200 seeds, training-heavy grids 50.
    pub fn default_trials(self) -> usize {
        match self {
            ExperimentKind::Interference
            | ExperimentKind::TttRate
            | ExperimentKind::NeighborhoodSweep
            | ExperimentKind::AssumptionReport => 200,
            _ => 50,
        }
    }

    pub fn needs_dataset(self) -> bool {
        matches!(
            self,
            ExperimentKind::ModelScaling
                | ExperimentKind::DataScaling
                | ExperimentKind::MoeScaling
        )
    }
}

fn default_d1() -> usize {
    128
}
fn default_d2() -> usize {
    32
}
fn default_s() -> usize {
    4
}
fn default_n() -> usize {
    4000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    #[serde(default = "default_d1")]
    pub d1: usize,
    #[serde(default = "default_d2")]
    pub d2: usize,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default)]
    pub sigma2: f64,
    /// "uniform" or "clustered".
    #[serde(default)]
    pub law: Option<String>,
    #[serde(default)]
    pub pool_size: Option<usize>,
    #[serde(default)]
    pub stride: Option<usize>,
    /// Dataset size drawn from the world.
    #[serde(default = "default_n")]
    pub n: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            d1: default_d1(),
            d2: default_d2(),
            s: default_s(),
            sigma2: 0.0,
            law: None,
            pool_size: None,
            stride: None,
            n: default_n(),
        }
    }
}

impl WorldSpec {
    pub fn support_law(&self) -> Result<SupportLaw> {
        match self.law.as_deref() {
            None | Some("uniform") => Ok(SupportLaw::Uniform),
            Some("clustered") => {
                let base = SupportLaw::clustered_default(self.s);
                let (dp, ds) = match base {
                    SupportLaw::Clustered { pool_size, stride } => (pool_size, stride),
                    SupportLaw::Uniform => unreachable!(),
                };
                Ok(SupportLaw::Clustered {
                    pool_size: self.pool_size.unwrap_or(dp),
                    stride: self.stride.unwrap_or(ds),
                })
            }
            Some(other) => {
                Err(Error::Config(format!("unknown support law {other:?}")))
            }
        }
    }

    pub fn build(&self, rng: &mut SeededRng) -> Result<ConceptWorld> {
        ConceptWorld::random(self.d1, self.d2, self.s, self.support_law()?, self.sigma2, rng)
    }

    /// Same world with another feature dimension (interference sweeps d2).
    pub fn with_d2(&self, d2: usize) -> WorldSpec {
        WorldSpec { d2, ..self.clone() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub d2: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub width: Option<Vec<usize>>,
    pub fraction: Option<Vec<f64>>,
    pub experts: Option<Vec<usize>>,
    pub lambda: Option<Vec<f64>>,
    pub radius: Option<Vec<f64>>,
}

fn default_ttt_k() -> usize {
    50
}
fn default_ttt_steps() -> usize {
    80
}
fn default_ttt_lr() -> f64 {
    0.02
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TttSpec {
    #[serde(default = "default_ttt_k")]
    pub k: usize,
    #[serde(default = "default_ttt_steps")]
    pub steps: usize,
    #[serde(default = "default_ttt_lr")]
    pub lr: f64,
}

impl Default for TttSpec {
    fn default() -> Self {
        TttSpec { k: default_ttt_k(), steps: default_ttt_steps(), lr: default_ttt_lr() }
    }
}

/// SAE knobs; anything unset falls back to the training defaults for the
/// world's dimensions.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaeSpec {
    /// Dictionary size, default the world's d1.
    pub dict: Option<usize>,
    /// Code sparsity, default the world's s.
    pub s: Option<usize>,
    /// "top-k" or "threshold".
    pub variant: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub peak_lr: Option<f64>,
    pub warmup_steps: Option<u64>,
    pub horizon_steps: Option<u64>,
    pub sparsity_start: Option<usize>,
    pub sparsity_ramp_steps: Option<u64>,
    pub dropout: Option<f64>,
    pub ghost_weight: Option<f64>,
    /// Concept-mask temperature for the sae-mask experiment.
    pub mask_tau: Option<f64>,
    pub mask_steps: Option<usize>,
}

impl SaeSpec {
    pub fn to_train_config(&self, world_d1: usize, world_s: usize) -> Result<SaeTrainConfig> {
        let mut c = SaeTrainConfig::new(self.dict.unwrap_or(world_d1), self.s.unwrap_or(world_s));
        match self.variant.as_deref() {
            None => {}
            Some("top-k") => c.variant = SaeVariant::TopK,
            Some("threshold") => c.variant = SaeVariant::Threshold,
            Some(other) => {
                return Err(Error::Config(format!("unknown sae variant {other:?}")))
            }
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.peak_lr {
            c.peak_lr = v;
        }
        if let Some(v) = self.warmup_steps {
            c.warmup_steps = v;
        }
        if let Some(v) = self.horizon_steps {
            c.horizon_steps = v;
        }
        if let Some(v) = self.sparsity_start {
            c.sparsity_start = v;
        }
        if let Some(v) = self.sparsity_ramp_steps {
            c.sparsity_ramp_steps = v;
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        if let Some(v) = self.ghost_weight {
            c.ghost_weight = v;
        }
        Ok(c)
    }
}

fn default_test_points() -> usize {
    200
}
fn default_classes() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Training rows to keep (class-balanced); None keeps the full split.
    pub subsample: Option<usize>,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Dataset root override; the env var and home fallback apply otherwise.
    pub dir: Option<String>,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            subsample: None,
            test_points: default_test_points(),
            classes: default_classes(),
            dir: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: Option<usize>,
    #[serde(default)]
    pub world: WorldSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub ttt: TttSpec,
    #[serde(default)]
    pub sae: SaeSpec,
    #[serde(default)]
    pub data: DataSpec,
    pub out_dir: Option<String>,
}

fn axis<T: Clone>(set: &Option<Vec<T>>, name: &str, default: &[T]) -> Result<Vec<T>> {
    match set {
        Some(v) if v.is_empty() => {
            Err(Error::Config(format!("sweep axis {name} is empty")))
        }
        Some(v) => Ok(v.clone()),
        None => Ok(default.to_vec()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.kind.default_trials())
    }

    pub fn d2_axis(&self) -> Result<Vec<usize>> {
        axis(&self.sweep.d2, "d2", &[16, 32, 64, 96, 128])
    }

    pub fn k_axis(&self) -> Result<Vec<usize>> {
        let default: &[usize] = match self.kind {
            ExperimentKind::TttRate => &[32, 64, 128, 256, 512, 1024],
            _ => &[10, 25, 50, 100, 200, 400, 800],
        };
        axis(&self.sweep.k, "k", default)
    }

    pub fn width_axis(&self) -> Result<Vec<usize>> {
        axis(&self.sweep.width, "width", &[8, 16, 32, 64, 128])
    }

    pub fn fraction_axis(&self) -> Result<Vec<f64>> {
        let fs = axis(&self.sweep.fraction, "fraction", &[0.01, 0.03, 0.1, 0.3, 1.0])?;
        if let Some(&bad) = fs.iter().find(|&&f| !(0.0 < f && f <= 1.0)) {
            return Err(Error::Config(format!("fraction {bad} outside (0, 1]")));
        }
        Ok(fs)
    }

    pub fn experts_axis(&self) -> Result<Vec<usize>> {
        let es = axis(&self.sweep.experts, "experts", &[1, 10, 100, 1000])?;
        if es.contains(&0) {
            return Err(Error::Config("expert count 0".into()));
        }
        Ok(es)
    }

    pub fn lambda_axis(&self) -> Result<Vec<f64>> {
        axis(&self.sweep.lambda, "lambda", &[0.003, 0.01, 0.03, 0.1])
    }

    pub fn radius_axis(&self) -> Result<Vec<f64>> {
        axis(&self.sweep.radius, "radius", &[0.5, 0.6, 0.7, 0.9, 1.2])
    }

    /// Cross-kind checks the runner relies on; accessors above validate
    /// their own axis.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Interference => {
                let d2s = self.d2_axis()?;
                if let Some(&bad) = d2s.iter().find(|&&d2| d2 == 0 || d2 > self.world.d1) {
                    return Err(Error::Config(format!(
                        "d2 {bad} outside [1, d1 = {}]",
                        self.world.d1
                    )));
                }
            }
            ExperimentKind::TttRate | ExperimentKind::NeighborhoodSweep => {
                let ks = self.k_axis()?;
                if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > self.world.n) {
                    return Err(Error::Config(format!(
                        "neighborhood size {bad} outside [1, n = {}]",
                        self.world.n
                    )));
                }
            }
            ExperimentKind::ModelScaling => {
                if self.width_axis()?.contains(&0) {
                    return Err(Error::Config("width 0".into()));
                }
            }
            ExperimentKind::DataScaling => {
                self.fraction_axis()?;
            }
            ExperimentKind::SaeMask => {
                self.lambda_axis()?;
            }
            ExperimentKind::MoeScaling => {
                self.experts_axis()?;
            }
            ExperimentKind::AssumptionReport => {
                if self.radius_axis()?.iter().any(|&r| r <= 0.0) {
                    return Err(Error::Config("radius must be positive".into()));
                }
            }
            ExperimentKind::SaeTrain => {}
        }
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(())
    }
}
