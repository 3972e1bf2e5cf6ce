use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use super::{
    EventKind, HistoryEntry, ProcessDefinition, ProcessError, ProcessEvent, ProcessInstance,
};
use crate::contract::{Role, Value};
use crate::dataquery::text_key;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceFilter {
    pub process_id: Option<String>,
    /// Matched ignoring case and punctuation.
    pub subject: Option<String>,
    pub state: Option<String>,
}

impl InstanceFilter {
    fn matches(&self, i: &ProcessInstance) -> bool {
        self.process_id.as_ref().is_none_or(|p| *p == i.process_id)
            && self.subject.as_ref().is_none_or(|s| text_key(s) == text_key(&i.subject))
            && self.state.as_ref().is_none_or(|s| *s == i.state)
    }
}

/// Point-in-time copy of everything the store holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub instances: Vec<ProcessInstance>,
    pub events: Vec<ProcessEvent>,
    pub journal_bytes: u64,
}

#[derive(Debug, Default)]
struct State {
    instances: BTreeMap<u64, ProcessInstance>,
    events: Vec<ProcessEvent>,
    next_instance: u64,
    journal_bytes: u64,
}

impl State {
    fn next_event_id(&self) -> u64 {
        self.events.len() as u64 + 1
    }
}

/// Process instances and their event log. Every mutation holds one lock for
/// its whole duration, so commands apply one at a time and readers see a
/// consistent state.
#[derive(Debug)]
pub struct ProcessStore {
    defs: BTreeMap<String, ProcessDefinition>,
    state: Mutex<State>,
    journal: Option<Mutex<File>>,
    latest: watch::Sender<u64>,
}

impl ProcessStore {
    pub fn new(defs: Vec<ProcessDefinition>) -> Result<Self, ProcessError> {
        let mut map = BTreeMap::new();
        for d in defs {
            d.validate()?;
            if map.insert(d.id.clone(), d).is_some() {
                return Err(ProcessError::Definition("duplicate process id".into()));
            }
        }
        Ok(Self {
            defs: map,
            state: Mutex::new(State {
                next_instance: 1,
                ..State::default()
            }),
            journal: None,
            latest: watch::channel(0).0,
        })
    }

    /// Opens (or creates) a journal file, replays it, and appends to it from
    /// then on. A torn final line from an interrupted write is ignored.
    pub fn with_journal(defs: Vec<ProcessDefinition>, path: &Path) -> Result<Self, ProcessError> {
        let mut store = Self::new(defs)?;
        let jerr = |e: std::io::Error| ProcessError::Journal(e.to_string());
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(jerr)?);
            let mut lines: Vec<String> = Vec::new();
            for line in reader.lines() {
                lines.push(line.map_err(jerr)?);
            }
            let raw = std::fs::read(path).map_err(jerr)?;
            let torn = !raw.is_empty() && !raw.ends_with(b"\n");
            let complete = if torn { lines.len().saturating_sub(1) } else { lines.len() };
            let mut valid_bytes = 0u64;
            for (n, line) in lines.iter().take(complete).enumerate() {
                let event = decode_record(line).map_err(|m| ProcessError::Journal(format!("line {}: {m}", n + 1)))?;
                store.replay_event(&event)?;
                valid_bytes += line.len() as u64 + 1;
            }
            if torn {
                let f = OpenOptions::new().write(true).open(path).map_err(jerr)?;
                f.set_len(valid_bytes).map_err(jerr)?;
            }
            store.lock().journal_bytes = valid_bytes;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(jerr)?;
        store.journal = Some(Mutex::new(file));
        let latest = store.lock().events.len() as u64;
        store.latest.send_replace(latest);
        Ok(store)
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn definition(&self, process_id: &str) -> Option<&ProcessDefinition> {
        self.defs.get(process_id)
    }

    pub fn definitions(&self) -> impl Iterator<Item = &ProcessDefinition> {
        self.defs.values()
    }

    fn def(&self, process_id: &str) -> Result<&ProcessDefinition, ProcessError> {
        self.defs
            .get(process_id)
            .ok_or_else(|| ProcessError::UnknownProcess(process_id.to_string()))
    }

    /// Writes the event to the journal (if any), then commits it.
    fn commit(&self, state: &mut State, instance: ProcessInstance, event: ProcessEvent) -> Result<(), ProcessError> {
        if let Some(journal) = &self.journal {
            let line = encode_record(&event);
            let mut f = journal.lock().unwrap_or_else(|p| p.into_inner());
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| ProcessError::Journal(e.to_string()))?;
            state.journal_bytes += line.len() as u64;
        }
        state.next_instance = state.next_instance.max(instance.instance_id + 1);
        state.instances.insert(instance.instance_id, instance);
        let id = event.event_id;
        state.events.push(event);
        self.latest.send_replace(id);
        Ok(())
    }

    pub fn submit(
        &self,
        process_id: &str,
        subject: &str,
        form: BTreeMap<String, Value>,
        actor_role: Role,
    ) -> Result<ProcessInstance, ProcessError> {
        let def = self.def(process_id)?;
        def.check_form(&form)?;
        if subject.trim().is_empty() {
            return Err(ProcessError::InvalidForm("the subject is blank".into()));
        }
        let mut state = self.lock();
        let event_id = state.next_event_id();
        let instance = ProcessInstance {
            instance_id: state.next_instance,
            process_id: process_id.to_string(),
            subject: subject.to_string(),
            state: def.initial.clone(),
            form: form.clone(),
            history: vec![HistoryEntry {
                timestamp: event_id,
                actor_role,
                action: "submit".into(),
                from: None,
                to: def.initial.clone(),
            }],
        };
        let mut payload = BTreeMap::new();
        payload.insert("subject".into(), Value::from(subject));
        payload.insert("role".into(), Value::from(actor_role.as_str()));
        payload.insert("to".into(), Value::from(def.initial.as_str()));
        payload.insert("form".into(), Value::Map(form));
        let event = ProcessEvent {
            event_id,
            instance_id: instance.instance_id,
            process_id: process_id.to_string(),
            kind: EventKind::Submitted,
            payload,
        };
        self.commit(&mut state, instance.clone(), event)?;
        Ok(instance)
    }

    pub fn transition(&self, instance_id: u64, action: &str, role: Role) -> Result<ProcessInstance, ProcessError> {
        let mut state = self.lock();
        let current = state
            .instances
            .get(&instance_id)
            .ok_or(ProcessError::UnknownInstance(instance_id))?;
        let def = self.def(&current.process_id)?;
        let t = def.find_transition(&current.state, action, role)?;
        let event_id = state.next_event_id();
        let mut next = current.clone();
        next.history.push(HistoryEntry {
            timestamp: event_id,
            actor_role: role,
            action: action.to_string(),
            from: Some(current.state.clone()),
            to: t.to.clone(),
        });
        next.state = t.to.clone();
        let mut payload = BTreeMap::new();
        payload.insert("subject".into(), Value::from(next.subject.as_str()));
        payload.insert("role".into(), Value::from(role.as_str()));
        payload.insert("action".into(), Value::from(action));
        payload.insert("from".into(), Value::from(current.state.as_str()));
        payload.insert("to".into(), Value::from(t.to.as_str()));
        let event = ProcessEvent {
            event_id,
            instance_id,
            process_id: next.process_id.clone(),
            kind: t.event,
            payload,
        };
        self.commit(&mut state, next.clone(), event)?;
        Ok(next)
    }

    fn replay_event(&mut self, e: &ProcessEvent) -> Result<(), ProcessError> {
        let bad = |m: &str| ProcessError::Journal(format!("event {}: {m}", e.event_id));
        let role: Role = e
            .payload
            .get("role")
            .and_then(Value::as_str)
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| bad("missing role"))?;
        if e.event_id != self.lock().next_event_id() {
            return Err(bad("out of sequence"));
        }
        let replayed = if e.kind == EventKind::Submitted {
            let form = e
                .payload
                .get("form")
                .and_then(Value::as_map)
                .cloned()
                .unwrap_or_default();
            let subject = e.subject().ok_or_else(|| bad("missing subject"))?;
            self.lock().next_instance = e.instance_id;
            self.submit(&e.process_id, subject, form, role)?
        } else {
            let action = e
                .payload
                .get("action")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("missing action"))?;
            self.transition(e.instance_id, action, role)?
        };
        let last = self.lock().events.last().cloned();
        if replayed.instance_id != e.instance_id || last.as_ref() != Some(e) {
            return Err(bad("does not reproduce"));
        }
        Ok(())
    }

    pub fn instance(&self, instance_id: u64) -> Option<ProcessInstance> {
        self.lock().instances.get(&instance_id).cloned()
    }

    /// Matching instances ordered by id.
    pub fn query_instances(&self, filter: &InstanceFilter) -> Vec<ProcessInstance> {
        self.lock()
            .instances
            .values()
            .filter(|i| filter.matches(i))
            .cloned()
            .collect()
    }

    /// Id the next submission will receive.
    pub fn next_instance_id(&self) -> u64 {
        self.lock().next_instance
    }

    pub fn latest_event_id(&self) -> u64 {
        self.lock().events.len() as u64
    }

    /// Events with id greater than `since`, in id order.
    pub fn events_since(&self, since: u64) -> Vec<ProcessEvent> {
        let state = self.lock();
        let start = (since as usize).min(state.events.len());
        state.events[start..].to_vec()
    }

    pub fn subscribe(self: &Arc<Self>, since: u64) -> Subscription {
        Subscription {
            store: Arc::clone(self),
            cursor: since,
            rx: self.latest.subscribe(),
        }
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        let state = self.lock();
        StoreSnapshot {
            instances: state.instances.values().cloned().collect(),
            events: state.events.clone(),
            journal_bytes: state.journal_bytes,
        }
    }
}

/// A cursor over the event log: first the backlog after `since`, then new
/// events as they are committed.
#[derive(Debug)]
pub struct Subscription {
    store: Arc<ProcessStore>,
    cursor: u64,
    rx: watch::Receiver<u64>,
}

impl Subscription {
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn try_next(&mut self) -> Option<ProcessEvent> {
        let state = self.store.lock();
        let e = state.events.get(self.cursor as usize).cloned()?;
        self.cursor = e.event_id;
        Some(e)
    }

    pub async fn next(&mut self) -> ProcessEvent {
        loop {
            self.rx.borrow_and_update();
            if let Some(e) = self.try_next() {
                return e;
            }
            // The store owns the sender and we hold the store, so this only
            // returns once a new event is committed.
            let _ = self.rx.changed().await;
        }
    }
}

fn encode_record(e: &ProcessEvent) -> String {
    let json = serde_json::to_string(e).expect("events serialize");
    format!("{} {json}\n", json.len())
}

fn decode_record(line: &str) -> Result<ProcessEvent, String> {
    let (len, json) = line.split_once(' ').ok_or("missing length prefix")?;
    let len: usize = len.parse().map_err(|_| "bad length prefix".to_string())?;
    if len != json.len() {
        return Err(format!("length {len} does not match record of {} bytes", json.len()));
    }
    serde_json::from_str(json).map_err(|e| e.to_string())
}
