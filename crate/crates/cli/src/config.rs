use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqids::attacks::{CwConfig, PgdConfig, DEFAULT_DELTA};
use seqids::classifier::TrainConfig;
use seqids::defenses::AdvTrainConfig;
use seqids::explain::MiConfig;
use seqids::flowdata::SynthConfig;
use seqids::robustness::ArsSchedule;

/// A configuration or usage problem; exits with status 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Drives the generator, the split, initialization and every sampler.
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub train: TrainSection,
    pub attack: AttackSection,
    pub ars: ArsSection,
    pub explain: ExplainSection,
    pub defense: DefenseSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            train: TrainSection::default(),
            attack: AttackSection::default(),
            ars: ArsSection::default(),
            explain: ExplainSection::default(),
            defense: DefenseSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Dataset cache read by every stage after `synth`/`ingest`;
    /// `<output_dir>/dataset.json` when unset.
    pub dataset: Option<PathBuf>,
    /// Model read by the evaluation stages; `<output_dir>/model.bin` when unset,
    /// `<output_dir>/model_dropout.bin` for the dropout and shared explanations.
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset: None,
            model: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Paths {
    pub fn dataset(&self) -> PathBuf {
        self.dataset
            .clone()
            .unwrap_or_else(|| self.output_dir.join("dataset.json"))
    }

    pub fn model(&self) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.bin"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub layers: usize,
    pub hidden: usize,
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Per-feature drop probability for `--feature-dropout`; 1/n when unset.
    pub dropout_probability: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            layers: t.layers,
            hidden: t.hidden,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            dropout_probability: t.dropout_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub cw: CwConfig,
    pub pgd: PgdConfig,
    pub fgsm_epsilon: f64,
    pub fgsm_delta: f64,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            cw: CwConfig::default(),
            pgd: PgdConfig::default(),
            fgsm_epsilon: 1.0,
            fgsm_delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArsSection {
    /// Held-out attack flows scored, taken in turn from each attack type;
    /// 0 uses all of them.
    pub samples: usize,
    pub kappa0: f64,
    pub growth: f64,
    pub max_rounds: usize,
    pub max_kappa: f64,
}

impl Default for ArsSection {
    fn default() -> Self {
        let s = ArsSchedule::default();
        ArsSection {
            samples: 40,
            kappa0: s.kappa0,
            growth: s.growth,
            max_rounds: s.max_rounds,
            max_kappa: s.max_kappa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    /// `all`, `benign`, `attack` or an attack type.
    pub class: String,
    /// Feature for pdp, seqpdp and profile.
    pub feature: Option<String>,
    /// Pair scored by `shared`.
    pub pair: [String; 2],
    /// 0-based step for seqpdp.
    pub step: usize,
    pub mi_bins: usize,
    /// Overlay CW adversarial flows on the sequential PDP.
    pub adversarial: bool,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            class: "attack".into(),
            feature: None,
            pair: ["packet_length".into(), "iat".into()],
            step: 1,
            mi_bins: MiConfig::default().bins,
            adversarial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseSection {
    pub epochs: u32,
    pub cadence: u32,
    pub refresh_iterations: usize,
    pub kappa: f64,
    pub learning_rate: f64,
    pub budget_rule: bool,
}

impl Default for DefenseSection {
    fn default() -> Self {
        let a = AdvTrainConfig::default();
        DefenseSection {
            epochs: a.epochs,
            cadence: a.cadence,
            refresh_iterations: a.refresh_iterations,
            kappa: a.kappa,
            learning_rate: a.learning_rate,
            budget_rule: a.budget_rule,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn train_config(&self, feature_dropout: bool) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.seed,
            layers: self.train.layers,
            hidden: self.train.hidden,
            feature_dropout,
            dropout_probability: self.train.dropout_probability,
        }
    }

    pub fn ars_schedule(&self) -> ArsSchedule {
        ArsSchedule {
            kappa0: self.ars.kappa0,
            growth: self.ars.growth,
            max_rounds: self.ars.max_rounds,
            max_kappa: self.ars.max_kappa,
            cw: self.attack.cw,
        }
    }

    pub fn adv_train_config(&self) -> AdvTrainConfig {
        AdvTrainConfig {
            train: self.train_config(false),
            learning_rate: self.defense.learning_rate,
            epochs: self.defense.epochs,
            cadence: self.defense.cadence,
            refresh_iterations: self.defense.refresh_iterations,
            kappa: self.defense.kappa,
            cw: self.attack.cw,
            budget_rule: self.defense.budget_rule,
            ars_samples: if self.ars.samples == 0 {
                usize::MAX
            } else {
                self.ars.samples
            },
            ars: self.ars_schedule(),
        }
    }

    /// Checks every section, naming the first one that is invalid.
    pub fn validate(&self) -> anyhow::Result<()> {
        let section = |name: &str, r: seqids::Result<()>| {
            r.map_err(|e| config_error(format!("[{name}]: {e}")))
        };
        section("synth", self.synth.validate())?;
        section("train", self.train_config(false).validate())?;
        section("train", self.train_config(true).validate())?;
        section("attack.cw", self.attack.cw.validate())?;
        section("attack.pgd", self.attack.pgd.validate())?;
        if !(self.attack.fgsm_epsilon >= 0.0 && self.attack.fgsm_epsilon.is_finite()) {
            return Err(config_error("[attack]: fgsm_epsilon must be finite and non-negative"));
        }
        if !self.attack.fgsm_delta.is_finite() {
            return Err(config_error("[attack]: fgsm_delta must be finite"));
        }
        section("ars", self.ars_schedule().validate())?;
        if self.explain.mi_bins < 2 {
            return Err(config_error("[explain]: mi_bins must be at least 2"));
        }
        section("defense", self.adv_train_config().validate())?;
        Ok(())
    }

    /// SHA-256 of every setting that affects results. Paths are excluded so
    /// runs into different directories share a hash.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.hashed_value()).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }

    pub fn hashed_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("paths");
        }
        v
    }
}
