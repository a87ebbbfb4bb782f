//! Engine configuration file.
//!
//! ```json
//! {
//!   "paths": {"corpus": "corpus.jsonl", "summaries": "summaries.jsonl",
//!             "graph": "graph.jsonl", "dataset": "qa.jsonl"},
//!   "gate": {"tau_g": 0.35},
//!   "controller": {"i_max": 2, "non_retrieval_fallback": false, "timing": "auto"},
//!   "retriever": {"hop_budget": 2, "alpha": 0.15, "top_l": 10},
//!   "alignment": {"lambda_lex": 0.5, "tau_align": 0.8, "max_seeds": 8},
//!   "oracles": {"default": "mock", "judge": {"kind": "escalate"}}
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Unknown keys are rejected at every level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, Engine, GateConfig, PipelineConfig};
use crate::kg::{load_corpus, load_graph, load_summaries, KgError, KnowledgeGraph};
use crate::oracles::mock::{
    mock_suite, FixedJudge, FixedValidator, MockSettings, StageTargetJudge,
};
use crate::oracles::remote::{remote_suite, Prompts, RemoteSettings};
use crate::oracles::{slot, OracleError, OracleSuite, Sufficiency};
use crate::retriever::{RetrieverConfig, Stage};
use crate::seeding::AlignConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{key} points to missing file {path}")]
    MissingFile { key: &'static str, path: PathBuf },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Load(#[from] KgError),
    #[error("oracles: {0}")]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub summaries: PathBuf,
    pub graph: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Mock,
    Remote,
}

/// Implementation for one oracle slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlotChoice {
    Mock,
    Remote,
    /// Validator that always returns true.
    Accept,
    /// Validator that always returns false.
    Reject,
    /// Judge that accepts after the first stage.
    Sufficient,
    /// Judge that never accepts.
    Escalate,
    /// Judge that accepts once a per-question stage is reached.
    StageTargets {
        #[serde(default)]
        targets: BTreeMap<String, Stage>,
        #[serde(default)]
        default: Option<Stage>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OraclesConfig {
    pub default: Backend,
    pub embedding_dim: usize,
    pub judge_min_coverage: f64,
    /// Directory with prompt template overrides for remote slots.
    pub prompts_dir: Option<PathBuf>,
    pub embedder: Option<SlotChoice>,
    pub generator: Option<SlotChoice>,
    pub validator_rel: Option<SlotChoice>,
    pub validator_grd: Option<SlotChoice>,
    pub validator_ans: Option<SlotChoice>,
    pub judge: Option<SlotChoice>,
    pub rewriter: Option<SlotChoice>,
    pub extractor: Option<SlotChoice>,
    pub proposer: Option<SlotChoice>,
}

impl Default for OraclesConfig {
    fn default() -> Self {
        let m = MockSettings::default();
        Self {
            default: Backend::Mock,
            embedding_dim: m.embedding_dim,
            judge_min_coverage: m.judge_min_coverage,
            prompts_dir: None,
            embedder: None,
            generator: None,
            validator_rel: None,
            validator_grd: None,
            validator_ans: None,
            judge: None,
            rewriter: None,
            extractor: None,
            proposer: None,
        }
    }
}

impl OraclesConfig {
    fn choices(&self) -> [(&'static str, Option<&SlotChoice>); 9] {
        [
            (slot::EMBEDDER, self.embedder.as_ref()),
            (slot::GENERATOR, self.generator.as_ref()),
            (slot::VALIDATOR_REL, self.validator_rel.as_ref()),
            (slot::VALIDATOR_GRD, self.validator_grd.as_ref()),
            (slot::VALIDATOR_ANS, self.validator_ans.as_ref()),
            (slot::JUDGE, self.judge.as_ref()),
            (slot::REWRITER, self.rewriter.as_ref()),
            (slot::EXTRACTOR, self.extractor.as_ref()),
            (slot::PROPOSER, self.proposer.as_ref()),
        ]
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.embedding_dim < 2 {
            return Err(ConfigError::Invalid(format!("oracles.embedding_dim {} < 2", self.embedding_dim)));
        }
        if !(0.0..=1.0).contains(&self.judge_min_coverage) {
            return Err(ConfigError::Invalid("oracles.judge_min_coverage not in [0,1]".into()));
        }
        for (name, choice) in self.choices() {
            let is_validator = name.starts_with("validator_");
            let ok = match choice {
                None | Some(SlotChoice::Mock | SlotChoice::Remote) => true,
                Some(SlotChoice::Accept | SlotChoice::Reject) => is_validator,
                Some(SlotChoice::Sufficient | SlotChoice::Escalate | SlotChoice::StageTargets { .. }) => {
                    name == slot::JUDGE
                }
            };
            if !ok {
                return Err(ConfigError::Invalid(format!("oracles.{name}: kind {choice:?} does not fit this slot")));
            }
        }
        Ok(())
    }

    fn needs_remote(&self) -> bool {
        self.choices().iter().any(|(_, c)| match c {
            Some(SlotChoice::Remote) => true,
            None => self.default == Backend::Remote,
            _ => false,
        })
    }

    /// Builds the suite. Remote slots read credentials from the environment.
    pub fn build(&self, graph: &KnowledgeGraph) -> Result<OracleSuite, ConfigError> {
        self.build_with(graph, RemoteSettings::from_env)
    }

    pub fn build_with(
        &self,
        graph: &KnowledgeGraph,
        remote_settings: impl FnOnce() -> Result<RemoteSettings, OracleError>,
    ) -> Result<OracleSuite, ConfigError> {
        self.validate()?;
        let mock = mock_suite(graph, &MockSettings {
            embedding_dim: self.embedding_dim,
            judge_min_coverage: self.judge_min_coverage,
        });
        let remote = if self.needs_remote() {
            let prompts = match &self.prompts_dir {
                Some(dir) => Prompts::with_overrides(dir)?,
                None => Prompts::default(),
            };
            Some(remote_suite(remote_settings()?, &prompts))
        } else {
            None
        };
        let pick = |c: Option<&SlotChoice>| -> bool {
            match c {
                Some(SlotChoice::Remote) => true,
                None => self.default == Backend::Remote,
                _ => false,
            }
        };
        let base = |c: Option<&SlotChoice>| if pick(c) { remote.as_ref().expect("remote built") } else { &mock };
        let validator = |c: Option<&SlotChoice>, dflt: &OracleSuite, which: &str| match c {
            Some(SlotChoice::Accept) => Arc::new(FixedValidator(true)) as Arc<dyn crate::oracles::BinaryValidator>,
            Some(SlotChoice::Reject) => Arc::new(FixedValidator(false)),
            _ => match which {
                "rel" => dflt.validator_rel.clone(),
                "grd" => dflt.validator_grd.clone(),
                _ => dflt.validator_ans.clone(),
            },
        };
        let judge: Arc<dyn crate::oracles::SufficiencyJudge> = match self.judge.as_ref() {
            Some(SlotChoice::Sufficient) => Arc::new(FixedJudge(Sufficiency::Sufficient)),
            Some(SlotChoice::Escalate) => Arc::new(FixedJudge(Sufficiency::Escalate)),
            Some(SlotChoice::StageTargets { targets, default }) => {
                let mut j = StageTargetJudge::new(*default);
                for (q, s) in targets {
                    j = j.target(q.clone(), *s);
                }
                Arc::new(j)
            }
            c => base(c).judge.clone(),
        };
        Ok(OracleSuite {
            embedder: base(self.embedder.as_ref()).embedder.clone(),
            generator: base(self.generator.as_ref()).generator.clone(),
            validator_rel: validator(self.validator_rel.as_ref(), base(self.validator_rel.as_ref()), "rel"),
            validator_grd: validator(self.validator_grd.as_ref(), base(self.validator_grd.as_ref()), "grd"),
            validator_ans: validator(self.validator_ans.as_ref(), base(self.validator_ans.as_ref()), "ans"),
            judge,
            rewriter: base(self.rewriter.as_ref()).rewriter.clone(),
            extractor: base(self.extractor.as_ref()).extractor.clone(),
            proposer: base(self.proposer.as_ref()).proposer.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub gate: GateConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub retriever: RetrieverConfig,
    #[serde(default)]
    pub alignment: AlignConfig,
    #[serde(default)]
    pub oracles: OraclesConfig,
}

impl EngineConfig {
    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: EngineConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_relative_to(dir);
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.summaries);
        fix(&mut self.paths.graph);
        if let Some(d) = self.paths.dataset.as_mut() {
            fix(d);
        }
        if let Some(d) = self.oracles.prompts_dir.as_mut() {
            fix(d);
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            gate: self.gate,
            controller: self.controller,
            retriever: self.retriever,
            alignment: self.alignment,
        }
    }

    /// Checks value ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.gate.validate().map_err(|e| inv(&e))?;
        self.retriever.validate().map_err(|e| inv(&e))?;
        self.alignment.validate().map_err(|e| inv(&e))?;
        self.oracles.validate()?;
        let mut files = vec![
            ("paths.corpus", &self.paths.corpus),
            ("paths.summaries", &self.paths.summaries),
            ("paths.graph", &self.paths.graph),
        ];
        if let Some(d) = &self.paths.dataset {
            files.push(("paths.dataset", d));
        }
        for (key, p) in files {
            if !p.is_file() {
                return Err(ConfigError::MissingFile { key, path: p.clone() });
            }
        }
        if let Some(d) = &self.oracles.prompts_dir {
            if !d.is_dir() {
                return Err(ConfigError::MissingFile { key: "oracles.prompts_dir", path: d.clone() });
            }
        }
        Ok(())
    }

    /// Loads corpus, summaries and graph and assembles the engine.
    pub fn build_engine(&self) -> Result<Engine, ConfigError> {
        self.validate()?;
        let corpus = load_corpus(&self.paths.corpus)?.with_summaries(load_summaries(&self.paths.summaries)?)?;
        let graph = load_graph(&self.paths.graph, &corpus)?;
        let oracles = self.oracles.build(&graph)?;
        Ok(Engine::new(Arc::new(graph), Arc::new(corpus), oracles, self.pipeline()))
    }
}
