use std::collections::{BTreeMap, HashSet};
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::contract::Value;
use crate::process::{EventKind, ProcessEvent};
use crate::dataquery::text_key;

/// What an alert listens for. Unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertSpec {
    pub event_kind: Option<EventKind>,
    pub process_id: Option<String>,
    pub subject: Option<String>,
    pub description: String,
    /// Template with `{subject}`, `{process}`, `{instance}`, `{action}`,
    /// `{role}`, `{from}`, `{to}` and `{kind}` placeholders.
    pub delivery_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertRule {
    pub alert_id: u64,
    pub owner_session: String,
    #[serde(flatten)]
    pub spec: AlertSpec,
    pub active: bool,
    /// Latest event id when the alert was created; only later events match.
    pub created_after: u64,
    /// Latest event id when the alert was deleted.
    pub deleted_after: Option<u64>,
}

impl AlertRule {
    /// Whether the alert was live when event `event_id` was committed.
    pub fn active_at(&self, event_id: u64) -> bool {
        event_id > self.created_after && self.deleted_after.is_none_or(|d| event_id <= d)
    }

    pub fn matches(&self, e: &ProcessEvent) -> bool {
        self.spec.event_kind.is_none_or(|k| k == e.kind)
            && self.spec.process_id.as_ref().is_none_or(|p| *p == e.process_id)
            && self
                .spec
                .subject
                .as_ref()
                .is_none_or(|s| e.subject().is_some_and(|es| text_key(es) == text_key(s)))
    }

    pub fn render(&self, e: &ProcessEvent, process_name: &str) -> String {
        let field = |k: &str| e.payload.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
        let action = field("action");
        let past = match action.as_str() {
            "" => String::new(),
            a if a.ends_with('e') => format!("{a}d"),
            a => format!("{a}ed"),
        };
        self.spec
            .delivery_text
            .replace("{subject}", &field("subject"))
            .replace("{process}", process_name)
            .replace("{instance}", &e.instance_id.to_string())
            .replace("{action}", &past)
            .replace("{role}", &field("role"))
            .replace("{from}", &field("from"))
            .replace("{to}", &field("to"))
            .replace("{kind}", e.kind.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Notification {
    /// Position in the owner session's queue, from 1.
    pub seq: u64,
    pub session_id: String,
    pub alert_id: u64,
    pub event: ProcessEvent,
    pub rendered_text: String,
    pub delivered: bool,
}

/// Alert rules of all sessions. Ids are numbered per session from 1.
#[derive(Debug, Default)]
pub struct AlertRegistry {
    rules: Mutex<Vec<AlertRule>>,
}

impl AlertRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Vec<AlertRule>> {
        self.rules.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn next_id(&self, session: &str) -> u64 {
        next_id(&self.lock(), session)
    }

    /// Adds an alert. `cut` reads the latest committed event id; it runs
    /// under the registry lock so matching sees a consistent boundary.
    pub fn create(&self, session: &str, spec: AlertSpec, cut: impl FnOnce() -> u64) -> AlertRule {
        let mut rules = self.lock();
        let rule = AlertRule {
            alert_id: next_id(&rules, session),
            owner_session: session.to_string(),
            spec,
            active: true,
            created_after: cut(),
            deleted_after: None,
        };
        rules.push(rule.clone());
        rule
    }

    /// Deactivates an active alert of `session`; `None` if there is none.
    pub fn deactivate(&self, session: &str, alert_id: u64, cut: impl FnOnce() -> u64) -> Option<AlertRule> {
        let mut rules = self.lock();
        let rule = rules
            .iter_mut()
            .find(|r| r.owner_session == session && r.alert_id == alert_id && r.active)?;
        rule.active = false;
        rule.deleted_after = Some(cut());
        Some(rule.clone())
    }

    pub fn get(&self, session: &str, alert_id: u64) -> Option<AlertRule> {
        self.lock()
            .iter()
            .find(|r| r.owner_session == session && r.alert_id == alert_id)
            .cloned()
    }

    pub fn for_session(&self, session: &str) -> Vec<AlertRule> {
        self.lock().iter().filter(|r| r.owner_session == session).cloned().collect()
    }

    pub fn rules(&self) -> Vec<AlertRule> {
        self.lock().clone()
    }

    /// Rules and the result of `read_events`, taken together under the
    /// registry lock.
    pub fn rules_with<T>(&self, read_events: impl FnOnce() -> T) -> (Vec<AlertRule>, T) {
        let rules = self.lock();
        let t = read_events();
        (rules.clone(), t)
    }
}

fn next_id(rules: &[AlertRule], session: &str) -> u64 {
    rules
        .iter()
        .filter(|r| r.owner_session == session)
        .map(|r| r.alert_id)
        .max()
        .unwrap_or(0)
        + 1
}

/// Every (alert, event) pair where the alert was live at the event's commit
/// and matches it, in event order then registration order.
pub fn match_events(
    rules: &[AlertRule],
    events: &[ProcessEvent],
    process_name: impl Fn(&str) -> String,
) -> Vec<Notification> {
    let mut out = Vec::new();
    for e in events {
        for r in rules {
            if r.active_at(e.event_id) && r.matches(e) {
                out.push(Notification {
                    seq: 0,
                    session_id: r.owner_session.clone(),
                    alert_id: r.alert_id,
                    event: e.clone(),
                    rendered_text: r.render(e, &process_name(&e.process_id)),
                    delivered: false,
                });
            }
        }
    }
    out
}

#[derive(Debug, Default)]
struct HubState {
    queues: BTreeMap<String, Vec<Notification>>,
    seen: HashSet<(String, u64, u64)>,
}

/// Per-session notification queues. Each (session, alert, event) triple is
/// queued at most once.
#[derive(Debug, Default)]
pub struct NotificationHub {
    state: Mutex<HubState>,
}

impl NotificationHub {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, HubState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Queues a notification; false if it was already queued once.
    pub fn push(&self, mut n: Notification) -> bool {
        let mut state = self.lock();
        if !state.seen.insert((n.session_id.clone(), n.alert_id, n.event.event_id)) {
            return false;
        }
        let queue = state.queues.entry(n.session_id.clone()).or_default();
        n.seq = queue.len() as u64 + 1;
        n.delivered = false;
        queue.push(n);
        true
    }

    /// Undelivered notifications after `since`, oldest first, now marked
    /// delivered.
    pub fn poll(&self, session: &str, since: u64) -> Vec<Notification> {
        let mut state = self.lock();
        let Some(queue) = state.queues.get_mut(session) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for n in queue.iter_mut().filter(|n| n.seq > since && !n.delivered) {
            n.delivered = true;
            out.push(n.clone());
        }
        out
    }

    pub fn queue(&self, session: &str) -> Vec<Notification> {
        self.lock().queues.get(session).cloned().unwrap_or_default()
    }

    pub fn pending(&self, session: &str) -> usize {
        self.lock()
            .queues
            .get(session)
            .map_or(0, |q| q.iter().filter(|n| !n.delivered).count())
    }

    pub fn all(&self) -> Vec<Notification> {
        self.lock().queues.values().flatten().cloned().collect()
    }
}
