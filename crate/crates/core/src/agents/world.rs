use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::alerts::{match_events, AlertRegistry, AlertRule, Notification, NotificationHub};
use super::{SuiteError, SESSION_ID, SESSION_USER};
use crate::contract::{Context, Role, Utterance, Value};
use crate::dataquery::{text_key, Dataset, TableSchema};
use crate::nlu::tokenize;
use crate::process::{ProcessStore, StoreSnapshot};
use crate::rules::RuleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub role: Role,
    pub department: String,
    #[serde(default)]
    pub manager: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
}

/// Employee directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Profiles {
    pub default_employee: String,
    #[serde(default)]
    pub profiles: Vec<Profile>,
}

impl Profiles {
    pub fn from_toml(text: &str) -> Result<Self, SuiteError> {
        toml::from_str(text).map_err(|e| SuiteError::Asset(format!("profiles: {e}")))
    }

    pub fn get(&self, name: &str) -> Option<&Profile> {
        let key = text_key(name);
        self.profiles.iter().find(|p| text_key(&p.name) == key)
    }
}

/// Named documents the content analyzer can read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentStore {
    docs: BTreeMap<String, String>,
}

/// How a turn's document reference resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum DocLookup {
    Found { name: String, text: String },
    Missing(String),
    NoReference,
}

impl DocumentStore {
    pub fn new(docs: BTreeMap<String, String>) -> Self {
        Self { docs }
    }

    /// Adds every regular file in `dir`, keyed by file name.
    pub fn load_dir(&mut self, dir: &Path) -> std::io::Result<usize> {
        let mut n = 0;
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                let name = entry.file_name().to_string_lossy().into_owned();
                self.docs.insert(name, std::fs::read_to_string(entry.path())?);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn insert(&mut self, name: impl Into<String>, text: impl Into<String>) {
        self.docs.insert(name.into(), text.into());
    }

    /// Lookup ignoring case and punctuation, with or without extension.
    pub fn get(&self, name: &str) -> Option<(&str, &str)> {
        let key = text_key(name);
        self.docs
            .iter()
            .find(|(n, _)| text_key(n) == key || text_key(stem(n)) == key)
            .map(|(n, t)| (n.as_str(), t.as_str()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// The first attachment, else the first stored document named in the
    /// text. An attachment that carries no content and is not stored is
    /// reported missing.
    pub fn resolve(&self, u: &Utterance) -> DocLookup {
        if let Some(a) = u.attachments.first() {
            return match (&a.content, self.get(&a.name)) {
                (Some(text), _) => DocLookup::Found {
                    name: a.name.clone(),
                    text: text.clone(),
                },
                (None, Some((name, text))) => DocLookup::Found {
                    name: name.to_string(),
                    text: text.to_string(),
                },
                (None, None) => DocLookup::Missing(a.name.clone()),
            };
        }
        let tokens = tokenize(&u.text);
        for (name, text) in &self.docs {
            for candidate in [name.as_str(), stem(name)] {
                let needle = tokenize(candidate);
                if !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice()) {
                    return DocLookup::Found {
                        name: name.clone(),
                        text: text.clone(),
                    };
                }
            }
        }
        // Something that looks like a file name but is not stored.
        let named = u
            .text
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .find(|w| {
                w.rsplit_once('.')
                    .is_some_and(|(s, ext)| !s.is_empty() && ext.len() <= 4 && ext.chars().all(|c| c.is_ascii_alphabetic()))
            });
        match named {
            Some(n) => DocLookup::Missing(n.to_string()),
            None => DocLookup::NoReference,
        }
    }
}

fn stem(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(s, _)| s)
}

/// World state that survives across turns and sessions: the loan data, the
/// process engine, and alerts.
#[derive(Debug)]
pub struct World {
    pub loan_schema: TableSchema,
    pub travel_schema: TableSchema,
    pub dataset: Dataset,
    pub documents: DocumentStore,
    pub profiles: Profiles,
    pub ruleset: RuleSet,
    /// Person-name gazetteer shared by the NLU models.
    pub people: Vec<String>,
    pub processes: Arc<ProcessStore>,
    pub alerts: AlertRegistry,
    pub hub: NotificationHub,
    cursor: Mutex<u64>,
}

/// Everything a turn could mutate, for before/after comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldSnapshot {
    pub processes: StoreSnapshot,
    pub alerts: Vec<AlertRule>,
    pub notifications: Vec<Notification>,
}

impl World {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        loan_schema: TableSchema,
        travel_schema: TableSchema,
        dataset: Dataset,
        documents: DocumentStore,
        profiles: Profiles,
        ruleset: RuleSet,
        processes: Arc<ProcessStore>,
    ) -> Self {
        let mut people = dataset.people.clone();
        for p in &profiles.profiles {
            if !people.iter().any(|q| text_key(q) == text_key(&p.name)) {
                people.push(p.name.clone());
            }
        }
        // Alerts only look forward, so replayed history is not re-announced.
        let cursor = processes.latest_event_id();
        Self {
            loan_schema,
            travel_schema,
            dataset,
            documents,
            profiles,
            ruleset,
            people,
            processes,
            alerts: AlertRegistry::new(),
            hub: NotificationHub::new(),
            cursor: Mutex::new(cursor),
        }
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            processes: self.processes.snapshot(),
            alerts: self.alerts.rules(),
            notifications: self.hub.all(),
        }
    }

    pub fn process_name(&self, process_id: &str) -> String {
        self.processes
            .definition(process_id)
            .map_or_else(|| process_id.to_string(), |d| d.display_name.clone())
    }

    /// Matches events committed since the last pump against alerts and
    /// queues the notifications. Returns how many were queued.
    pub fn pump_alerts(&self) -> usize {
        let mut cursor = self.cursor.lock().unwrap_or_else(|p| p.into_inner());
        let (rules, events) = self.alerts.rules_with(|| self.processes.events_since(*cursor));
        let Some(last) = events.last() else {
            return 0;
        };
        let last = last.event_id;
        let queued = match_events(&rules, &events, |p| self.process_name(p))
            .into_iter()
            .filter(|n| self.hub.push(n.clone()))
            .count();
        *cursor = last;
        queued
    }

    /// Pumps alerts whenever the process store commits an event.
    pub fn spawn_alert_matcher(self: &Arc<Self>) -> tokio::task::JoinHandle<()> {
        let world = Arc::clone(self);
        let mut rx = world.processes.subscribe(world.processes.latest_event_id());
        tokio::spawn(async move {
            loop {
                rx.next().await;
                world.pump_alerts();
            }
        })
    }

    /// Session id from the shared context, `default` when absent.
    pub fn session_id(ctx: &Context) -> String {
        ctx.shared(SESSION_ID)
            .and_then(Value::as_str)
            .unwrap_or("default")
            .to_string()
    }

    /// Who is speaking: the session user, else the default employee.
    pub fn current_user(&self, ctx: &Context) -> String {
        ctx.shared(SESSION_USER)
            .and_then(Value::as_str)
            .map_or_else(|| self.profiles.default_employee.clone(), str::to_string)
    }
}
