//! Shipped models, schemas, rulesets, process definitions and fixtures,
//! embedded at build time. A directory with the same layout can override
//! any file.

use std::path::{Path, PathBuf};

pub const LOAN_SCHEMA: &str = include_str!("../assets/schemas/loans.toml");
pub const TRAVEL_SCHEMA: &str = include_str!("../assets/schemas/travel.toml");
pub const LOAN_RULESET: &str = include_str!("../assets/rulesets/loan_default.toml");
pub const TRAVEL_PROCESS: &str = include_str!("../assets/processes/travel.toml");
pub const LOAN_PROCESS: &str = include_str!("../assets/processes/loan.toml");
pub const PROFILES: &str = include_str!("../assets/fixtures/profiles.toml");

/// Agent ids with an NLU model under `models/`.
pub const MODEL_IDS: [&str; 9] = [
    "chit-chat",
    "data-query",
    "travel-query",
    "content-analyzer",
    "visualization",
    "data-export",
    "business-rules",
    "bp-execute",
    "alerts",
];

const MODELS: [&str; 9] = [
    include_str!("../assets/models/chit-chat.toml"),
    include_str!("../assets/models/data-query.toml"),
    include_str!("../assets/models/travel-query.toml"),
    include_str!("../assets/models/content-analyzer.toml"),
    include_str!("../assets/models/visualization.toml"),
    include_str!("../assets/models/data-export.toml"),
    include_str!("../assets/models/business-rules.toml"),
    include_str!("../assets/models/bp-execute.toml"),
    include_str!("../assets/models/alerts.toml"),
];

/// Embedded asset by relative path, e.g. `schemas/loans.toml`.
pub fn embedded(path: &str) -> Option<&'static str> {
    Some(match path {
        "schemas/loans.toml" => LOAN_SCHEMA,
        "schemas/travel.toml" => TRAVEL_SCHEMA,
        "rulesets/loan_default.toml" => LOAN_RULESET,
        "processes/travel.toml" => TRAVEL_PROCESS,
        "processes/loan.toml" => LOAN_PROCESS,
        "fixtures/profiles.toml" => PROFILES,
        _ => {
            let id = path.strip_prefix("models/")?.strip_suffix(".toml")?;
            let i = MODEL_IDS.iter().position(|m| *m == id)?;
            MODELS[i]
        }
    })
}

/// Reads assets from an optional override directory, falling back to the
/// embedded copies.
#[derive(Debug, Clone, Default)]
pub struct AssetSource {
    pub dir: Option<PathBuf>,
}

impl AssetSource {
    pub fn embedded() -> Self {
        Self { dir: None }
    }

    pub fn with_dir(dir: impl AsRef<Path>) -> Self {
        Self {
            dir: Some(dir.as_ref().to_path_buf()),
        }
    }

    pub fn read(&self, path: &str) -> std::io::Result<String> {
        if let Some(dir) = &self.dir {
            let p = dir.join(path);
            if p.exists() {
                return std::fs::read_to_string(p);
            }
        }
        embedded(path).map(str::to_string).ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("no asset `{path}`"))
        })
    }
}
