use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::{
    ids, load_model, AlertsAgent, BpExecuteAgent, BusinessRulesAgent, ChitChatAgent, ContentAnalyzerAgent,
    DataExportAgent, DataQueryAgent, DocumentStore, Profiles, Roster, SuiteError, TravelQueryAgent,
    VisualizationAgent, World, SESSION_ID, SESSION_USER,
};
use crate::assets::AssetSource;
use crate::contract::{Agent, AgentDescriptor, Context, DocumentRef, Role, Utterance, Value};
use crate::dataquery::{generate_dataset, DatasetConfig, TableSchema};
use crate::orchestrator::{AgentRegistry, Orchestrator, OrchestratorConfig, OrchestratorError, TurnResult};
use crate::process::{ProcessDefinition, ProcessStore};
use crate::rules::load_ruleset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    pub size: usize,
    /// Overrides for the embedded schemas, models, rulesets and fixtures.
    pub assets_dir: Option<PathBuf>,
    /// Extra documents for the content analyzer.
    pub documents_dir: Option<PathBuf>,
    /// Process journal; without one the process store lives in memory.
    pub journal: Option<PathBuf>,
    pub disabled_agents: Vec<String>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            size: 500,
            assets_dir: None,
            documents_dir: None,
            journal: None,
            disabled_agents: Vec::new(),
        }
    }
}

/// The `[world]` and `[orchestrator]` tables of the config file. Other
/// tables are left to the front ends.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub world: WorldConfig,
    pub orchestrator: OrchestratorConfig,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self, SuiteError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SuiteError::Config(e.to_string()))?;
        cfg.orchestrator
            .validate()
            .map_err(|e| SuiteError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path).map_err(|e| SuiteError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let w = &mut cfg.world;
        for p in [&mut w.assets_dir, &mut w.documents_dir, &mut w.journal].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn read(assets: &AssetSource, path: &str) -> Result<String, SuiteError> {
    assets.read(path).map_err(|e| SuiteError::Asset(format!("{path}: {e}")))
}

pub fn build_world(cfg: &WorldConfig) -> Result<World, SuiteError> {
    let assets = cfg.assets_dir.as_ref().map_or_else(AssetSource::embedded, AssetSource::with_dir);
    fn parsed<T, E: std::fmt::Display>(path: &str, r: Result<T, E>) -> Result<T, SuiteError> {
        r.map_err(|e| SuiteError::Asset(format!("{path}: {e}")))
    }
    let loan_schema = parsed("schemas/loans.toml", TableSchema::from_toml(&read(&assets, "schemas/loans.toml")?))?;
    let travel_schema = parsed("schemas/travel.toml", TableSchema::from_toml(&read(&assets, "schemas/travel.toml")?))?;
    let ruleset = parsed(
        "rulesets/loan_default.toml",
        load_ruleset(&read(&assets, "rulesets/loan_default.toml")?),
    )?;
    let profiles = Profiles::from_toml(&read(&assets, "fixtures/profiles.toml")?)?;
    let mut defs = Vec::new();
    for path in ["processes/travel.toml", "processes/loan.toml"] {
        defs.push(parsed(path, ProcessDefinition::from_toml(&read(&assets, path)?))?);
    }
    let processes = match &cfg.journal {
        Some(j) => ProcessStore::with_journal(defs, j),
        None => ProcessStore::new(defs),
    }
    .map_err(|e| SuiteError::Io(e.to_string()))?;

    let dataset = generate_dataset(&DatasetConfig::new(cfg.seed, cfg.size), &loan_schema, &travel_schema);
    let mut documents = DocumentStore::new(dataset.documents.clone());
    if let Some(dir) = &cfg.documents_dir {
        documents
            .load_dir(dir)
            .map_err(|e| SuiteError::Io(format!("{}: {e}", dir.display())))?;
    }
    Ok(World::new(
        loan_schema,
        travel_schema,
        dataset,
        documents,
        profiles,
        ruleset,
        Arc::new(processes),
    ))
}

/// The nine built-in agents in registration order, minus disabled ones.
pub fn build_agents(
    world: &Arc<World>,
    assets: &AssetSource,
    roster: &Roster,
    disabled: &[String],
) -> Result<Vec<Arc<dyn Agent>>, SuiteError> {
    let people = &world.people;
    let m = |id: &str| load_model(assets, id, people);
    let w = || Arc::clone(world);
    let all: Vec<Arc<dyn Agent>> = vec![
        Arc::new(ChitChatAgent::new(m(ids::CHIT_CHAT)?, Arc::clone(roster))),
        Arc::new(DataQueryAgent::new(m(ids::DATA_QUERY)?, w())),
        Arc::new(TravelQueryAgent::new(m(ids::TRAVEL_QUERY)?, w())),
        Arc::new(ContentAnalyzerAgent::new(m(ids::CONTENT_ANALYZER)?, w())),
        Arc::new(VisualizationAgent::new(m(ids::VISUALIZATION)?, w())),
        Arc::new(DataExportAgent::new(m(ids::DATA_EXPORT)?)),
        Arc::new(BusinessRulesAgent::new(m(ids::BUSINESS_RULES)?, w())),
        Arc::new(BpExecuteAgent::new(m(ids::BP_EXECUTE)?, w())),
        Arc::new(AlertsAgent::new(m(ids::ALERTS)?, w())),
    ];
    Ok(all.into_iter().filter(|a| !disabled.iter().any(|d| d == a.id())).collect())
}

/// One conversation: its context and turn counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub id: String,
    pub role: Role,
    pub context: Context,
    pub next_turn: u64,
}

impl Session {
    /// A new session. `user` names the speaker for forms filed on their
    /// behalf; without it the default employee is assumed.
    pub fn new(id: impl Into<String>, role: Role, user: Option<&str>) -> Self {
        let id = id.into();
        let mut context = Context::new();
        context.shared.insert(SESSION_ID.into(), Value::from(id.as_str()));
        if let Some(u) = user {
            context.shared.insert(SESSION_USER.into(), Value::from(u));
        }
        Self {
            id,
            role,
            context,
            next_turn: 0,
        }
    }
}

/// The world, the agent registry and the orchestrator together.
pub struct Assistant {
    world: Arc<World>,
    registry: RwLock<AgentRegistry>,
    roster: Roster,
    orchestrator: Orchestrator,
}

impl Assistant {
    pub fn build(cfg: &SuiteConfig) -> Result<Self, SuiteError> {
        cfg.orchestrator.validate().map_err(|e| SuiteError::Config(e.to_string()))?;
        let world = Arc::new(build_world(&cfg.world)?);
        let assets = cfg.world.assets_dir.as_ref().map_or_else(AssetSource::embedded, AssetSource::with_dir);
        let roster: Roster = Arc::new(RwLock::new(Vec::new()));
        let agents = build_agents(&world, &assets, &roster, &cfg.world.disabled_agents)?;
        let assistant = Self {
            world,
            registry: RwLock::new(AgentRegistry::new()),
            roster,
            orchestrator: Orchestrator::new(cfg.orchestrator.clone()),
        };
        for a in agents {
            assistant.register(a).map_err(|e| SuiteError::Config(e.to_string()))?;
        }
        Ok(assistant)
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn config(&self) -> &OrchestratorConfig {
        self.orchestrator.config()
    }

    /// Copy of the current registry; turns run against a copy so agents can
    /// be added or removed concurrently.
    pub fn registry(&self) -> AgentRegistry {
        self.registry.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn descriptors(&self) -> Vec<AgentDescriptor> {
        self.registry().descriptors()
    }

    pub fn register(&self, agent: Arc<dyn Agent>) -> Result<(), OrchestratorError> {
        let mut reg = self.registry.write().unwrap_or_else(|p| p.into_inner());
        reg.register(agent)?;
        *self.roster.write().unwrap_or_else(|p| p.into_inner()) = reg.descriptors();
        Ok(())
    }

    pub fn replace(&self, agent: Arc<dyn Agent>) -> Result<Arc<dyn Agent>, OrchestratorError> {
        let mut reg = self.registry.write().unwrap_or_else(|p| p.into_inner());
        let old = reg.replace(agent)?;
        *self.roster.write().unwrap_or_else(|p| p.into_inner()) = reg.descriptors();
        Ok(old)
    }

    pub fn remove(&self, agent_id: &str) -> bool {
        let mut reg = self.registry.write().unwrap_or_else(|p| p.into_inner());
        let removed = reg.remove(agent_id);
        *self.roster.write().unwrap_or_else(|p| p.into_inner()) = reg.descriptors();
        removed
    }

    /// One turn against the current registry, then alert matching.
    pub async fn run_turn(&self, utterance: &Utterance, ctx: &Context) -> Result<TurnResult, OrchestratorError> {
        let registry = self.registry();
        let result = self.orchestrator.run_turn(utterance, ctx, &registry).await?;
        self.world.pump_alerts();
        Ok(result)
    }

    /// Runs `text` as the session's next turn and advances the session.
    pub async fn say(
        &self,
        session: &mut Session,
        text: &str,
        attachments: Vec<DocumentRef>,
    ) -> Result<TurnResult, OrchestratorError> {
        let u = Utterance::new(text, session.role, session.next_turn)?.with_attachments(attachments);
        let result = self.run_turn(&u, &session.context).await?;
        session.context = result.context_after.clone();
        session.next_turn += 1;
        Ok(result)
    }
}
