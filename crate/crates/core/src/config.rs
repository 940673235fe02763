//! Engine configuration file and the resources it points at.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::Environment;
use crate::answerer::RankingMode;
use crate::context::ContextConfig;
use crate::dataset::Dataset;
use crate::embeddings::{EmbeddingProvider, FileEmbedder, HashEmbedder, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::eval::EvalSettings;
use crate::kg::KgIndex;
use crate::ned::{AnnotatedNed, LexicalNed, NedProvider};
use crate::refpred::{
    FlippedOracle, LexicalPredictor, OraclePredictor, PredictorKind, RefPredictor, ScoreFilePredictor,
    DEFAULT_LEXICAL_THRESHOLD,
};
use crate::trainer::TrainConfig;
use crate::user_sim::{UserKind, UserModel};

/// Input and output files. Relative paths resolve against the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Paths {
    pub kg: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Embedding file; absent means hash embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Entity-linking annotations; absent means the lexical linker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ned_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.kg);
        for p in [
            &mut self.dataset,
            &mut self.embeddings,
            &mut self.ned_file,
            &mut self.score_file,
            &mut self.checkpoint,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EngineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_user")]
    pub user_model: UserKind,
    #[serde(default)]
    pub predictor: PredictorKind,
    /// Label noise of the oracle predictor.
    #[serde(default)]
    pub oracle_flip_prob: f64,
    #[serde(default)]
    pub ranking_mode: RankingMode,
    #[serde(default = "default_interactive_batch")]
    pub interactive_batch_size: usize,
    /// Embedding width.
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_lexical_threshold")]
    pub lexical_threshold: f64,
}

fn default_user() -> UserKind {
    UserKind::Ideal
}

fn default_interactive_batch() -> usize {
    10
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_lexical_threshold() -> f64 {
    DEFAULT_LEXICAL_THRESHOLD
}

impl EngineConfig {
    pub fn new(kg: impl Into<PathBuf>) -> Self {
        EngineConfig {
            paths: Paths {
                kg: kg.into(),
                ..Default::default()
            },
            context: ContextConfig::default(),
            train: TrainConfig::default(),
            user_model: default_user(),
            predictor: PredictorKind::default(),
            oracle_flip_prob: 0.0,
            ranking_mode: RankingMode::default(),
            interactive_batch_size: default_interactive_batch(),
            d: default_dim(),
            lexical_threshold: default_lexical_threshold(),
        }
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let cfg: EngineConfig = serde_json::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse, validate and resolve paths relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&raw)?;
        cfg.paths.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.context.validate()?;
        self.train.validate()?;
        if self.d == 0 {
            return Err(Error::Config("d must be positive".into()));
        }
        if self.interactive_batch_size == 0 {
            return Err(Error::Config("interactiveBatchSize must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.oracle_flip_prob) {
            return Err(Error::Config("oracleFlipProb must lie in [0, 1]".into()));
        }
        if !(-1.0..=1.0).contains(&self.lexical_threshold) {
            return Err(Error::Config("lexicalThreshold must lie in [-1, 1]".into()));
        }
        if self.predictor == PredictorKind::Scorefile && self.paths.score_file.is_none() {
            return Err(Error::Config("predictor `scorefile` needs paths.scoreFile".into()));
        }
        Ok(())
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            user: UserModel::new(self.user_model),
            top_k: self.train.top_k,
            mode: self.ranking_mode,
        }
    }
}

/// Everything an engine run needs, loaded from an [`EngineConfig`].
pub struct Resources {
    pub config: EngineConfig,
    pub kg: KgIndex,
    pub dataset: Option<Dataset>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub ned: Box<dyn NedProvider>,
    pub predictor: Box<dyn RefPredictor>,
}

impl Resources {
    pub fn load(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let kg = KgIndex::load(&config.paths.kg)?;
        let dataset = match &config.paths.dataset {
            Some(p) => {
                let ds = Dataset::load(p)?;
                ds.validate()?;
                Some(ds)
            }
            None => None,
        };
        Self::from_parts(config, kg, dataset)
    }

    /// Build from an already loaded graph and dataset; embeddings, linker and
    /// predictor still come from the configured paths.
    pub fn from_parts(config: EngineConfig, kg: KgIndex, dataset: Option<Dataset>) -> Result<Self> {
        let seed = config.train.seed;
        let embedder: Arc<dyn EmbeddingProvider> = match &config.paths.embeddings {
            Some(p) => Arc::new(FileEmbedder::load(p, config.d, seed)?),
            None => Arc::new(HashEmbedder::new(config.d, seed)),
        };
        let ned: Box<dyn NedProvider> = match &config.paths.ned_file {
            Some(p) => Box::new(AnnotatedNed::load(p)?),
            None => Box::new(LexicalNed),
        };
        let predictor: Box<dyn RefPredictor> = match config.predictor {
            PredictorKind::Oracle if config.oracle_flip_prob > 0.0 => Box::new(FlippedOracle {
                flip_prob: config.oracle_flip_prob,
                seed,
            }),
            PredictorKind::Oracle => Box::new(OraclePredictor),
            PredictorKind::Lexical => Box::new(LexicalPredictor::new(embedder.clone(), config.lexical_threshold)),
            PredictorKind::Scorefile => {
                let p = config
                    .paths
                    .score_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("predictor `scorefile` needs paths.scoreFile".into()))?;
                Box::new(ScoreFilePredictor::load(p)?)
            }
        };
        Ok(Resources {
            config,
            kg,
            dataset,
            embedder,
            ned,
            predictor,
        })
    }

    pub fn env(&self) -> Environment<'_> {
        Environment {
            kg: &self.kg,
            embedder: self.embedder.as_ref(),
            ned: self.ned.as_ref(),
            context: &self.config.context,
            action_cap: self.config.train.action_cap,
            seed: self.config.train.seed,
        }
    }

    pub fn dataset(&self) -> Result<&Dataset> {
        self.dataset
            .as_ref()
            .ok_or_else(|| Error::Config("paths.dataset is required here".into()))
    }
}
