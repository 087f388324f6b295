//! Experiment description, read from and written to flat TOML.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_model, AnsatzShape, ModelVariant};
use crate::data::DatasetId;
use crate::error::{Error, Result};
use crate::federation::Technique;
use crate::learning::{AdamConfig, EvalMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub dataset: DatasetId,
    /// Class mapped to label 0; a digit or a Fashion-MNIST class name.
    pub class_a: String,
    /// Class mapped to label 1.
    pub class_b: String,
    pub technique: Technique,
    /// Defaults to layerwise for quorus and plain for the baselines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<ModelVariant>,
    pub shape: AnsatzShape,
    /// Layer budget of each client, one entry per client.
    pub capacities: Vec<usize>,
    pub rounds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seeds: Vec<u64>,
    pub eval_mode: EvalMode,
    /// Evaluate every this many rounds; the last round is always evaluated.
    pub eval_every: usize,
    pub n_qubits: usize,
    pub per_client: usize,
    pub test_size: usize,
    pub out_dir: PathBuf,
}

impl Default for FederationConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            dataset: DatasetId::Mnist,
            class_a: "0".into(),
            class_b: "1".into(),
            technique: Technique::Quorus,
            variant: None,
            shape: AnsatzShape::VShape,
            capacities: vec![2, 3, 4, 5, 6],
            rounds: 1000,
            epochs: 1,
            batch_size: 32,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            seeds: vec![0, 1, 2, 3, 4],
            eval_mode: EvalMode::Analytic,
            eval_every: 1,
            n_qubits: 10,
            per_client: 128,
            test_size: 3000,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::config(format!("{name}: {msg}"))
}

impl FederationConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    pub fn model_variant(&self) -> ModelVariant {
        self.variant
            .unwrap_or_else(|| self.technique.default_variant())
    }

    pub fn class_pair(&self) -> Result<(u8, u8)> {
        let a = self
            .dataset
            .parse_class(&self.class_a)
            .map_err(|e| field("class_a", e))?;
        let b = self
            .dataset
            .parse_class(&self.class_b)
            .map_err(|e| field("class_b", e))?;
        if a == b {
            return Err(field("class_b", format!("must differ from class_a ({a})")));
        }
        Ok((a, b))
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    /// Checks every field; the message starts with the offending field.
    pub fn validate(&self) -> Result<()> {
        self.class_pair()?;
        let variant = self.model_variant();
        match (self.technique, variant) {
            (Technique::Quorus, ModelVariant::Plain) => {
                return Err(field(
                    "variant",
                    "quorus needs a multi-classifier variant, not plain",
                ))
            }
            (t, v) if t != Technique::Quorus && v != ModelVariant::Plain => {
                return Err(field(
                    "variant",
                    format!("{t} trains the plain model, not {v}"),
                ))
            }
            _ => {}
        }
        if self.n_qubits == 0 || self.n_qubits > 20 {
            return Err(field(
                "n_qubits",
                format!("{} outside 1..=20", self.n_qubits),
            ));
        }
        if self.capacities.is_empty() {
            return Err(field("capacities", "at least one client is required"));
        }
        for (i, &c) in self.capacities.iter().enumerate() {
            if c < 2 {
                return Err(field(
                    &format!("capacities[{i}]"),
                    format!("{c} layers, need at least 2"),
                ));
            }
            build_model(variant, self.shape, self.n_qubits, c)
                .map_err(|e| field(&format!("capacities[{i}]"), e))?;
        }
        if self.epochs == 0 {
            return Err(field("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(field("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(field(
                "learning_rate",
                format!("{} is not a positive number", self.learning_rate),
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(field(name, format!("{b} outside [0, 1)")));
            }
        }
        if self.seeds.is_empty() {
            return Err(field("seeds", "at least one seed is required"));
        }
        if self.eval_every == 0 {
            return Err(field("eval_every", "must be at least 1"));
        }
        if self.per_client == 0 {
            return Err(field("per_client", "must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(field("test_size", "must be at least 1"));
        }
        if self.per_client * self.capacities.len() <= self.n_qubits {
            return Err(field(
                "per_client",
                "too few training points to fit the feature map",
            ));
        }
        Ok(())
    }
}
