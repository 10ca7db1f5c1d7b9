//! Optional TOML config file. Command-line flags and their environment
//! variables take precedence over anything set here.
//!
//! ```toml
//! ontology = "assets/ontology.toml"
//!
//! [extraction]
//! endpoint_url = "http://localhost:11434/v1"
//! model = "deepseek-r1:7b"
//! max_retries = 3
//! backoff_ms = 1000
//! workers = 4
//!
//! [retrieval]
//! k_entities = 5
//! k_relations = 10
//!
//! [serve]
//! bind_addr = "127.0.0.1:8080"
//! llm_url = "http://localhost:11434/v1"
//! embed_url = "http://localhost:8081/embed"
//!
//! [sparql]
//! endpoint = "http://localhost:7200/repositories/amd/statements"
//! ```

use std::path::{Path, PathBuf};

use causalkg_core::RetrievalConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub ontology: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub extraction: ExtractionSection,
    pub retrieval: RetrievalConfig,
    pub serve: ServeSection,
    pub sparql: SparqlSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    pub endpoint_url: Option<String>,
    pub model: Option<String>,
    pub mode: Option<String>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub workers: Option<usize>,
    pub temperature: Option<f32>,
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind_addr: Option<String>,
    pub llm_url: Option<String>,
    pub llm_model: Option<String>,
    pub embed_url: Option<String>,
    pub fallback_embedder: Option<bool>,
    pub embed_dim: Option<usize>,
    pub sessions_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparqlSection {
    pub endpoint: Option<String>,
    pub user: Option<String>,
    pub password: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().replace('\n', " ").trim().to_owned())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.ontology, &mut cfg.fixtures, &mut cfg.serve.sessions_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file() {
        let c = FileConfig::parse("[retrieval]\nk_entities = 7\n[serve]\nfallback_embedder = true\n").unwrap();
        assert_eq!(c.retrieval.k_entities, 7);
        assert_eq!(c.retrieval.k_relations, 10);
        assert_eq!(c.serve.fallback_embedder, Some(true));
        assert_eq!(FileConfig::parse("").unwrap(), FileConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(FileConfig::parse("[serve]\nbind = \"x\"\n").is_err());
        assert!(FileConfig::parse("nonsense = 1\n").is_err());
    }

    #[test]
    fn relative_paths_follow_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "ontology = \"o.toml\"\n").unwrap();
        assert_eq!(FileConfig::load(&p).unwrap().ontology, Some(dir.path().join("o.toml")));
    }
}
