use std::path::{Path, PathBuf};

use anyhow::Context as _;
use bpassist_core::agents::SuiteConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    /// Built web client to serve next to the API.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct ServerSection {
    server: ServerConfig,
}

/// Everything one config file holds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AppConfig {
    pub suite: SuiteConfig,
    pub server: ServerConfig,
}

impl AppConfig {
    /// Reads the file, or the built-in defaults when there is none.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let suite = SuiteConfig::load(path)?;
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let mut server = toml::from_str::<ServerSection>(&text)
            .with_context(|| format!("{}: [server]", path.display()))?
            .server;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(dir) = server.static_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = base.join(&*dir);
        }
        Ok(Self { suite, server })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.suite.world.seed = s;
        }
        self
    }
}
