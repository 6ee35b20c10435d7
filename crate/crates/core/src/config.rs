//! Pipeline configuration as a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths in a
//! file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neural::{MlpConfig, Optimizer};

pub const OUTPUT_DIR_ENV: &str = "COGMAP_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub embeddings_path: PathBuf,
    pub lexicon_path: PathBuf,
    pub gammas: Vec<f64>,
    pub horizon: usize,
    /// Hyperparameters; layer sizes and seed are filled in per run.
    pub mlp: MlpConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub zero_diagonal: bool,
    /// SMACOF iterations after classical MDS; 0 disables refinement.
    pub smacof_iterations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            embeddings_path: PathBuf::from("data/embeddings.txt"),
            lexicon_path: PathBuf::from("data/lexicon.csv"),
            gammas: vec![1.0, 0.3],
            horizon: 5,
            mlp: MlpConfig::default(),
            output_dir: PathBuf::from("cogmap-out"),
            seed: 42,
            zero_diagonal: false,
            smacof_iterations: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "embeddings",
    "lexicon",
    "gammas",
    "horizon",
    "output_dir",
    "seed",
    "hidden_dim",
    "dropout_rate",
    "learning_rate",
    "epochs",
    "batch_size",
    "optimizer",
    "momentum",
    "zero_diagonal",
    "smacof_iterations",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

impl PipelineConfig {
    /// Defaults, with the output directory taken from `COGMAP_OUTPUT_DIR`
    /// when that is set.
    pub fn with_env_defaults() -> Self {
        let mut c = PipelineConfig::default();
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            c.output_dir = PathBuf::from(dir);
        }
        c
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut config = PipelineConfig::with_env_defaults();
        config.apply_text(&text, path, base)?;
        Ok(config)
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str, origin: &Path, base: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value)
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
            if matches!(key, "embeddings" | "lexicon" | "output_dir") {
                let p = self.path_mut(key);
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(())
    }

    fn path_mut(&mut self, key: &str) -> &mut PathBuf {
        match key {
            "embeddings" => &mut self.embeddings_path,
            "lexicon" => &mut self.lexicon_path,
            _ => &mut self.output_dir,
        }
    }

    /// Sets one key; used for file lines and command-line overrides alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "embeddings" => self.embeddings_path = PathBuf::from(value),
            "lexicon" => self.lexicon_path = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "gammas" => {
                self.gammas = value
                    .split(',')
                    .map(|g| parse::<f64>(key, g.trim()))
                    .collect::<Result<_>>()?;
            }
            "horizon" => self.horizon = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "hidden_dim" => self.mlp.hidden_dim = parse(key, value)?,
            "dropout_rate" => self.mlp.dropout_rate = parse(key, value)?,
            "learning_rate" => self.mlp.learning_rate = parse(key, value)?,
            "epochs" => self.mlp.epochs = parse(key, value)?,
            "batch_size" => self.mlp.batch_size = parse(key, value)?,
            "optimizer" => {
                self.mlp.optimizer = match value {
                    "adam" => Optimizer::adam(),
                    "sgd_momentum" => Optimizer::sgd_momentum(),
                    other => {
                        return Err(Error::invalid(format!(
                            "unknown optimizer `{other}` (expected `adam` or `sgd_momentum`)"
                        )))
                    }
                }
            }
            "momentum" => match &mut self.mlp.optimizer {
                Optimizer::SgdMomentum { momentum } => *momentum = parse(key, value)?,
                Optimizer::Adam { .. } => {
                    return Err(Error::invalid("`momentum` applies to optimizer = sgd_momentum"))
                }
            },
            "zero_diagonal" => self.zero_diagonal = parse(key, value)?,
            "smacof_iterations" => self.smacof_iterations = parse(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::invalid("at least one gamma is required"));
        }
        for (i, g) in self.gammas.iter().enumerate() {
            if !(0.0..=1.0).contains(g) {
                return Err(Error::invalid(format!("gamma {g} is outside [0, 1]")));
            }
            if self.gammas[..i].contains(g) {
                return Err(Error::invalid(format!("gamma {g} is listed twice")));
            }
        }
        let mut probe = self.mlp.clone();
        probe.input_dim = 1;
        probe.output_dim = 1;
        probe.validate()
    }

    /// Canonical `key = value` listing of every setting, in `KEYS` order.
    pub fn to_text(&self) -> String {
        let gammas: Vec<String> = self.gammas.iter().map(|g| format!("{g:?}")).collect();
        let (optimizer, momentum) = match self.mlp.optimizer {
            Optimizer::Adam { .. } => ("adam", None),
            Optimizer::SgdMomentum { momentum } => ("sgd_momentum", Some(momentum)),
        };
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("embeddings", self.embeddings_path.display().to_string());
        put("lexicon", self.lexicon_path.display().to_string());
        put("gammas", gammas.join(","));
        put("horizon", self.horizon.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("hidden_dim", self.mlp.hidden_dim.to_string());
        put("dropout_rate", format!("{:?}", self.mlp.dropout_rate));
        put("learning_rate", format!("{:?}", self.mlp.learning_rate));
        put("epochs", self.mlp.epochs.to_string());
        put("batch_size", self.mlp.batch_size.to_string());
        put("optimizer", optimizer.to_string());
        if let Some(m) = momentum {
            put("momentum", format!("{m:?}"));
        }
        put("zero_diagonal", self.zero_diagonal.to_string());
        put("smacof_iterations", self.smacof_iterations.to_string());
        out
    }

    /// SHA-256 of the settings that determine numeric results (the output
    /// directory is left out).
    pub fn hash(&self) -> String {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("output_dir"))
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
