//! Service configuration: a TOML file plus `ONSET_*` environment overrides.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::TripleSet;
use crate::fixtures;
use crate::lm::{HttpBackend, LmBackend, LmSettings, WireMode};
use crate::ontology::{load_ontology, parse_count_table, OntologyIndex, OntologySource};
use crate::semantic::{Embedder, HashEmbedder, HttpEmbedder, SemanticIndex, DEFAULT_K};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("ontology `{id}`: {message}")]
    Ontology { id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyConfig {
    pub id: String,
    /// Turtle or N-Triples files; `.nt` selects N-Triples.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    /// Bundled ontology instead of files: `dbpedia_excerpt` or `toy`.
    pub builtin: Option<String>,
    /// Tab-separated `iri<TAB>count` table.
    pub counts: Option<PathBuf>,
    /// N-Triples instance data for local execution without an endpoint.
    pub triples: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub url: String,
    #[serde(default)]
    pub mode: WireMode,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// OpenAI-compatible endpoint; without one the hash embedder is used.
    pub url: Option<String>,
    #[serde(default = "default_embed_model")]
    pub model: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { url: None, model: default_embed_model(), dim: default_dim(), cache_dir: None }
    }
}

fn default_model() -> String {
    "default".into()
}
fn default_temperature() -> f32 {
    0.2
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_in_flight() -> usize {
    4
}
fn default_embed_model() -> String {
    "hash".into()
}
fn default_dim() -> usize {
    512
}
fn default_listen() -> String {
    "127.0.0.1:8080".into()
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub ontologies: Vec<OntologyConfig>,
    pub lm: Option<LmConfig>,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
    pub sparql_url: Option<String>,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Allowed browser origins; empty allows any.
    #[serde(default)]
    pub cors_origins: Vec<String>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for o in &mut cfg.ontologies {
            o.paths.iter_mut().for_each(fix);
            o.counts.as_mut().map(fix);
            o.triples.as_mut().map(fix);
        }
        cfg.embedding.cache_dir.as_mut().map(fix);
        Ok(cfg)
    }

    /// The bundled excerpt with its instance fixture and no LM.
    pub fn builtin_fixture() -> Self {
        Self {
            ontologies: vec![OntologyConfig {
                id: "dbpedia".into(),
                paths: vec![],
                builtin: Some("dbpedia_excerpt".into()),
                counts: None,
                triples: None,
            }],
            lm: None,
            embedding: EmbeddingConfig::default(),
            retrieval_k: DEFAULT_K,
            sparql_url: None,
            listen: default_listen(),
            seed: default_seed(),
            cors_origins: vec![],
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.ontologies.is_empty() {
            return Err(ConfigError::Invalid("at least one ontology must be configured".into()));
        }
        if self.retrieval_k == 0 {
            return Err(ConfigError::Invalid("retrieval_k must be at least 1".into()));
        }
        for o in &self.ontologies {
            if o.paths.is_empty() == o.builtin.is_none() {
                return Err(ConfigError::Ontology {
                    id: o.id.clone(),
                    message: "set exactly one of `paths` and `builtin`".into(),
                });
            }
        }
        Ok(())
    }

    /// Applies `ONSET_LM_URL`, `ONSET_EMBED_URL`, `ONSET_SPARQL_URL` and
    /// `ONSET_LISTEN` from `vars`.
    pub fn apply_env(&mut self, vars: &HashMap<String, String>) {
        if let Some(url) = vars.get("ONSET_LM_URL") {
            match &mut self.lm {
                Some(lm) => lm.url = url.clone(),
                None => {
                    self.lm = Some(LmConfig {
                        url: url.clone(),
                        mode: WireMode::default(),
                        model: default_model(),
                        temperature: default_temperature(),
                        max_tokens: default_max_tokens(),
                        max_in_flight: default_in_flight(),
                    })
                }
            }
        }
        if let Some(url) = vars.get("ONSET_EMBED_URL") {
            self.embedding.url = Some(url.clone());
        }
        if let Some(url) = vars.get("ONSET_SPARQL_URL") {
            self.sparql_url = Some(url.clone());
        }
        if let Some(addr) = vars.get("ONSET_LISTEN") {
            self.listen = addr.clone();
        }
    }

    pub fn lm_settings(&self) -> LmSettings {
        match &self.lm {
            Some(lm) => LmSettings {
                model: lm.model.clone(),
                temperature: lm.temperature,
                max_tokens: lm.max_tokens,
                seed: Some(self.seed),
            },
            None => LmSettings { seed: Some(self.seed), ..LmSettings::default() },
        }
    }

    pub fn lm_backend(&self) -> Result<Option<Arc<dyn LmBackend>>, ConfigError> {
        let Some(lm) = &self.lm else { return Ok(None) };
        let backend = HttpBackend::new(&lm.url, lm.mode)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?
            .with_max_in_flight(lm.max_in_flight);
        Ok(Some(Arc::new(backend)))
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, ConfigError> {
        Ok(match &self.embedding.url {
            Some(url) => Arc::new(
                HttpEmbedder::new(url, &self.embedding.model).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            ),
            None => Arc::new(HashEmbedder::new(self.embedding.dim)),
        })
    }
}

/// A loaded ontology with its retrieval index and optional instance data.
pub struct LoadedOntology {
    pub index: OntologyIndex,
    pub sidx: SemanticIndex,
    pub triples: Option<TripleSet>,
}

impl OntologyConfig {
    pub fn load(&self, embedder: Arc<dyn Embedder>, cache_dir: Option<&Path>) -> Result<LoadedOntology, ConfigError> {
        let err = |message: String| ConfigError::Ontology { id: self.id.clone(), message };
        let (index, triples) = match self.builtin.as_deref() {
            Some("dbpedia_excerpt") => (
                fixtures::dbpedia_excerpt().clone(),
                Some(TripleSet::from_ntriples(fixtures::ALUMNI_TRIPLES_NT).map_err(|e| err(e.to_string()))?),
            ),
            Some("toy") => (fixtures::toy().clone(), None),
            Some(other) => return Err(err(format!("unknown builtin ontology `{other}`"))),
            None => {
                let sources = self
                    .paths
                    .iter()
                    .map(|p| OntologySource::from_file(p))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| err(e.to_string()))?;
                let counts = match &self.counts {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| err(format!("{}: {e}", p.display())))?;
                        Some(parse_count_table(&text).map_err(|e| err(e.to_string()))?)
                    }
                    None => None,
                };
                let (index, _) = load_ontology(&sources, counts.as_ref()).map_err(|e| err(e.to_string()))?;
                (index, None)
            }
        };
        let triples = match &self.triples {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| err(format!("{}: {e}", p.display())))?;
                Some(TripleSet::from_ntriples(&text).map_err(|e| err(e.to_string()))?)
            }
            None => triples,
        };
        let sidx = SemanticIndex::build(&index, embedder, cache_dir).map_err(|e| err(e.to_string()))?;
        Ok(LoadedOntology { index, sidx, triples })
    }
}
