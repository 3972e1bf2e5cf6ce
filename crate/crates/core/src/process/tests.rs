use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::assets;

fn defs() -> Vec<ProcessDefinition> {
    vec![
        ProcessDefinition::from_toml(assets::TRAVEL_PROCESS).unwrap(),
        ProcessDefinition::from_toml(assets::LOAN_PROCESS).unwrap(),
    ]
}

fn store() -> ProcessStore {
    ProcessStore::new(defs()).unwrap()
}

fn travel_form(dest: &str) -> BTreeMap<String, Value> {
    let mut f = BTreeMap::new();
    f.insert("destination".into(), Value::from(dest));
    f.insert("event".into(), Value::from("Loan procedures training"));
    f.insert("department".into(), Value::from("Consumer Lending"));
    f
}

#[test]
fn submit_travel_request() {
    let s = store();
    let i = s.submit("travel", "John Smith", travel_form("headquarters"), Role::Employee).unwrap();
    assert_eq!(i.state, "PendingManager");
    assert_eq!(s.events_since(0).len(), 1);
    assert_eq!(s.events_since(0)[0].kind, EventKind::Submitted);
}

#[test]
fn blank_destination_is_a_submission_error() {
    let s = store();
    let err = s.submit("travel", "John Smith", travel_form(""), Role::Employee).unwrap_err();
    assert_eq!(err, ProcessError::Submission(vec!["destination".into()]));
    assert!(s.events_since(0).is_empty());
}

#[test]
fn two_submissions_have_distinct_ids() {
    let s = store();
    let a = s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee).unwrap();
    let b = s.submit("travel", "V. Doe", travel_form("London"), Role::Employee).unwrap();
    assert_ne!(a.instance_id, b.instance_id);
    let ev = s.events_since(0);
    assert!(ev[0].event_id < ev[1].event_id);
}

#[test]
fn travel_chain_and_guards() {
    let s = store();
    let i = s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee).unwrap();
    assert!(matches!(
        s.transition(i.instance_id, "approve", Role::Employee),
        Err(ProcessError::Authorization { .. })
    ));
    let i = s.transition(i.instance_id, "approve", Role::Manager).unwrap();
    assert_eq!(i.state, "PendingDirector");
    let i = s.transition(i.instance_id, "approve", Role::Director).unwrap();
    assert_eq!(i.state, "Approved");
    assert!(matches!(
        s.transition(i.instance_id, "reject", Role::Director),
        Err(ProcessError::IllegalTransition { .. })
    ));
    let kinds: Vec<EventKind> = s.events_since(0).iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [EventKind::Submitted, EventKind::ManagerApproved, EventKind::DirectorApproved]);
    assert_eq!(i.replay(s.definition("travel").unwrap()).unwrap(), "Approved");
}

#[test]
fn loan_chain_emits_state_changed() {
    let s = store();
    let mut form = BTreeMap::new();
    form.insert("amount".into(), Value::Number(600000.0));
    let i = s.submit("loan", "V. Doe", form, Role::Employee).unwrap();
    assert_eq!(i.state, "PendingOfficer");
    let i = s.transition(i.instance_id, "approve", Role::LoanOfficer).unwrap();
    assert_eq!(i.state, "Approved");
    assert_eq!(s.events_since(1)[0].kind, EventKind::StateChanged);
}

#[test]
fn query_by_subject_and_state() {
    let s = store();
    let i = s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee).unwrap();
    s.submit("travel", "V. Doe", travel_form("Boston"), Role::Employee).unwrap();
    let by_name = InstanceFilter {
        subject: Some("john smith".into()),
        ..Default::default()
    };
    assert_eq!(s.query_instances(&by_name).len(), 1);
    let nobody = InstanceFilter {
        subject: Some("Nobody".into()),
        ..Default::default()
    };
    assert!(s.query_instances(&nobody).is_empty());
    s.transition(i.instance_id, "approve", Role::Manager).unwrap();
    let pending_director = InstanceFilter {
        state: Some("PendingDirector".into()),
        ..Default::default()
    };
    let found = s.query_instances(&pending_director);
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].instance_id, i.instance_id);
}

#[test]
fn definition_errors() {
    let bad = assets::TRAVEL_PROCESS.replace("initial = \"PendingManager\"", "initial = \"Approved\"");
    assert!(ProcessDefinition::from_toml(&bad).is_err());
    let bad = assets::TRAVEL_PROCESS.replace("to = \"PendingDirector\"", "to = \"Nowhere\"");
    assert!(ProcessDefinition::from_toml(&bad).is_err());
    let bad = assets::LOAN_PROCESS.replacen("from = \"PendingOfficer\"", "from = \"Approved\"", 1);
    assert!(ProcessDefinition::from_toml(&bad).is_err());
}

// Every (state, action, role) triple outside the definition fails and
// leaves the instance untouched.
#[test]
fn role_safety_exhaustive() {
    for def in defs() {
        let mut actions: Vec<String> = def.actions().iter().map(|a| a.to_string()).collect();
        actions.push("escalate".into());
        for state in &def.states {
            for action in &actions {
                for role in Role::ALL {
                    let allowed = def
                        .transitions
                        .iter()
                        .any(|t| &t.from == state && &t.action == action && t.role == role);
                    let s = store();
                    let inst = drive_to(&s, &def, state);
                    let before = s.snapshot();
                    let r = s.transition(inst, action, role);
                    assert_eq!(r.is_ok(), allowed, "{} {state} {action} {role}", def.id);
                    if !allowed {
                        assert_eq!(s.snapshot(), before);
                    }
                }
            }
        }
    }
}

/// Submits an instance and walks it to `target` along defined transitions.
fn drive_to(s: &ProcessStore, def: &ProcessDefinition, target: &str) -> u64 {
    let form = if def.id == "travel" {
        travel_form("Boston")
    } else {
        let mut f = BTreeMap::new();
        f.insert("amount".into(), Value::Number(1.0));
        f
    };
    let inst = s.submit(&def.id, "John Smith", form, Role::Employee).unwrap();
    let mut path = vec![def.initial.clone()];
    let mut frontier = vec![(def.initial.clone(), Vec::<&Transition>::new())];
    while let Some((st, steps)) = frontier.pop() {
        if st == target {
            for t in steps {
                s.transition(inst.instance_id, &t.action, t.role).unwrap();
            }
            return inst.instance_id;
        }
        for t in def.transitions.iter().filter(|t| t.from == st) {
            if !path.contains(&t.to) {
                path.push(t.to.clone());
                let mut next = steps.clone();
                next.push(t);
                frontier.push((t.to.clone(), next));
            }
        }
    }
    panic!("{target} unreachable");
}

#[test]
fn journal_replays_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.journal");
    let snapshot = {
        let s = ProcessStore::with_journal(defs(), &path).unwrap();
        let i = s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee).unwrap();
        s.transition(i.instance_id, "approve", Role::Manager).unwrap();
        s.submit("travel", "V. Doe", travel_form("London"), Role::Employee).unwrap();
        s.snapshot()
    };
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    let first = text.lines().next().unwrap();
    let (len, json) = first.split_once(' ').unwrap();
    assert_eq!(len.parse::<usize>().unwrap(), json.len());

    let reopened = ProcessStore::with_journal(defs(), &path).unwrap();
    assert_eq!(reopened.snapshot(), snapshot);
    let next = reopened.submit("travel", "Y. Doe", travel_form("Toronto"), Role::Employee).unwrap();
    assert_eq!(next.instance_id, 3);
    assert_eq!(reopened.latest_event_id(), 4);
}

#[test]
fn torn_tail_is_dropped_and_corruption_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.journal");
    {
        let s = ProcessStore::with_journal(defs(), &path).unwrap();
        s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee).unwrap();
    }
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.extend_from_slice(b"57 {\"eventId\":2");
    std::fs::write(&path, &bytes).unwrap();
    let s = ProcessStore::with_journal(defs(), &path).unwrap();
    assert_eq!(s.latest_event_id(), 1);

    std::fs::write(&path, b"99 {}\n").unwrap();
    assert!(matches!(ProcessStore::with_journal(defs(), &path), Err(ProcessError::Journal(_))));
}

#[tokio::test]
async fn subscribers_see_backlog_then_live_events() {
    let s = Arc::new(store());
    let i = s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee).unwrap();
    s.transition(i.instance_id, "approve", Role::Manager).unwrap();
    s.transition(i.instance_id, "approve", Role::Director).unwrap();
    let mut a = s.subscribe(0);
    let mut b = s.subscribe(0);
    for expected in 1..=3 {
        assert_eq!(a.next().await.event_id, expected);
        assert_eq!(b.next().await.event_id, expected);
    }
    let mut latest = s.subscribe(s.latest_event_id());
    assert!(latest.try_next().is_none());
    let s2 = Arc::clone(&s);
    let waiter = tokio::spawn(async move { latest.next().await });
    tokio::task::yield_now().await;
    s2.submit("travel", "V. Doe", travel_form("London"), Role::Employee).unwrap();
    let e = tokio::time::timeout(std::time::Duration::from_secs(2), waiter).await.unwrap().unwrap();
    assert_eq!(e.event_id, 4);
    assert_eq!(a.next().await, e);
}

#[derive(Debug, Clone)]
enum Op {
    Submit(bool),
    Act(usize, bool, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        any::<bool>().prop_map(Op::Submit),
        (0usize..6, any::<bool>(), 0usize..5).prop_map(|(i, a, r)| Op::Act(i, a, r)),
    ]
}

proptest! {
    // Committed operations and events stay in one-to-one correspondence,
    // histories replay to the current state and terminal states absorb.
    #[test]
    fn random_operation_sequences(ops in proptest::collection::vec(op(), 1..40)) {
        let s = store();
        let mut committed = 0usize;
        let mut terminal_seen: BTreeMap<u64, String> = BTreeMap::new();
        for op in ops {
            match op {
                Op::Submit(travel) => {
                    let r = if travel {
                        s.submit("travel", "John Smith", travel_form("Boston"), Role::Employee)
                    } else {
                        let mut f = BTreeMap::new();
                        f.insert("amount".into(), Value::Number(5.0));
                        s.submit("loan", "V. Doe", f, Role::Employee)
                    };
                    if r.is_ok() { committed += 1; }
                }
                Op::Act(i, approve, r) => {
                    let ids: Vec<u64> = s.query_instances(&InstanceFilter::default()).iter().map(|i| i.instance_id).collect();
                    if ids.is_empty() { continue; }
                    let id = ids[i % ids.len()];
                    let action = if approve { "approve" } else { "reject" };
                    if s.transition(id, action, Role::ALL[r]).is_ok() { committed += 1; }
                }
            }
            for inst in s.query_instances(&InstanceFilter::default()) {
                let def = s.definition(&inst.process_id).unwrap();
                prop_assert_eq!(inst.replay(def).unwrap(), inst.state.clone());
                if let Some(t) = terminal_seen.get(&inst.instance_id) {
                    prop_assert_eq!(t, &inst.state);
                }
                if def.is_terminal(&inst.state) {
                    terminal_seen.insert(inst.instance_id, inst.state.clone());
                }
            }
        }
        prop_assert_eq!(s.events_since(0).len(), committed);
        let ids: Vec<u64> = s.events_since(0).iter().map(|e| e.event_id).collect();
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}
