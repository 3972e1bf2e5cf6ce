//! The acceptance suite. Prints one PASS or FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use bpassist_cli::config::AppConfig;
use bpassist_cli::corpus::{check_queries, run_corpus};
use bpassist_cli::datagen::{check_pin, Answer, QueryCorpus};
use bpassist_cli::scenario::{discover, run_scenario, run_scenario_on, stack, Scenario, ScenarioReport};
use bpassist_core::agents::{build_world, ids, AlertSpec, Assistant, Session, SuiteConfig, WorldConfig};
use bpassist_core::assets;
use bpassist_core::contract::{
    Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, ResponsePayload, Role, Utterance, Value,
};
use bpassist_core::dataquery::oracle::{oracle_evaluate, random_instance};
use bpassist_core::dataquery::{evaluate, parse_query, render, text_key};
use bpassist_core::orchestrator::{broadcast, score, select, MaxScorer, Scorer};
use bpassist_core::process::{EventKind, InstanceFilter, ProcessDefinition, ProcessStore, Transition};
use bpassist_core::testkit::{oracle_select, ScriptedAgent};
use bpassist_gateway::{agent_router, serve, RegistrationError, RemoteAgent, WireResponse};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::json;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::runtime::Runtime;
use tokio::sync::oneshot;

type Outcome = Result<String, String>;

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("sample transcript", sample_transcript),
        ("cooperation scenarios", cooperation),
        ("orchestration properties", orchestration),
        ("preview purity and execute counts", preview_purity),
        ("query engine oracle equivalence", query_oracle),
        ("process engine guards", process_engine),
        ("alert exactness", alert_exactness),
        ("remote agent conformance", remote_conformance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!("{}/{} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn base_config() -> SuiteConfig {
    AppConfig::load(Some(&root().join("config/bpassist.toml"))).expect("shipped config").suite
}

fn runtime() -> Runtime {
    Runtime::new().expect("runtime")
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn scenario_failures(reports: &[ScenarioReport]) -> Result<(), String> {
    let failures: Vec<String> = reports
        .iter()
        .flat_map(|r| r.failures().into_iter().map(move |f| format!("{}: {f}", r.name)))
        .collect();
    ensure(failures.is_empty(), || failures.join("; "))
}

fn sample_transcript() -> Outcome {
    let start = Instant::now();
    let report = runtime()
        .block_on(run_corpus(&root().join("corpus/transcript_*.toml"), &base_config()))
        .map_err(|e| format!("{e:#}"))?;
    let elapsed = start.elapsed();
    scenario_failures(&report.scenarios)?;
    let rows = [
        ("transcript_manager", "Hello", ids::CHIT_CHAT),
        ("transcript_loan_officer", "Who are the top 3 borrowers with average amount more than 10000", ids::DATA_QUERY),
        (
            "transcript_loan_officer",
            "List all borrowers with yearly income more than 50000 but credit score less than 150",
            ids::DATA_QUERY,
        ),
        ("transcript_loan_officer", "Plot the bar chart per yearly income", ids::VISUALIZATION),
        ("transcript_loan_officer", "Export this data to a CSV file", ids::DATA_EXPORT),
        ("transcript_manager", "How many travel requests does John Smith have?", ids::TRAVEL_QUERY),
        ("transcript_manager", "Approve John Smith's request", ids::BP_EXECUTE),
    ];
    for (scenario, text, agent) in rows {
        let r = report.scenario(scenario).ok_or(format!("missing scenario {scenario}"))?;
        let step = r
            .steps
            .iter()
            .find(|s| s.turn.as_ref().is_some_and(|t| t.trace.utterance.text == text))
            .ok_or(format!("{scenario} lacks the row {text:?}"))?;
        ensure(step.agents == [agent], || format!("{text:?} answered by {:?}, not {agent}", step.agents))?;
    }
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} rows across {} scenarios answered by the right agents in {:.2}s",
        rows.len(),
        report.scenarios.len(),
        elapsed.as_secs_f64()
    ))
}

fn cooperation() -> Outcome {
    let rt = runtime();
    let base = base_config();
    let mut rendered = Vec::new();
    for run in 0..2 {
        let mut reports = Vec::new();
        for name in ["cooperation_conversation", "cooperation_document"] {
            let s = Scenario::load(&root().join(format!("corpus/{name}.toml"))).map_err(|e| format!("{e:#}"))?;
            reports.push(rt.block_on(run_scenario(&s, &base)));
        }
        scenario_failures(&reports)?;
        if run == 0 {
            // (a) one question per turn, each carrying stickiness from the second on
            let asks: Vec<&_> = reports[0]
                .steps
                .iter()
                .filter_map(|s| s.turn.as_ref())
                .filter(|t| t.selected == [ids::BUSINESS_RULES] && t.text().ends_with('?'))
                .collect();
            ensure(asks.len() == 4, || format!("{} questions, expected 4", asks.len()))?;
            for t in &asks[1..] {
                let k = t.trace.preview(ids::BUSINESS_RULES).map(|p| p.stickiness);
                ensure(k == Some(1), || format!("stickiness {k:?} on {:?}", t.trace.utterance.text))?;
            }
            // (b) producer first, a decision, no question
            let doc_turns: Vec<&_> = reports[1].steps.iter().filter_map(|s| s.turn.as_ref()).collect();
            for t in doc_turns {
                let order: Vec<&str> = t.responses.iter().map(|r| r.agent_id.as_str()).collect();
                ensure(order == [ids::CONTENT_ANALYZER, ids::BUSINESS_RULES], || format!("order {order:?}"))?;
                ensure(!t.text().contains('?'), || format!("asked a question: {}", t.text()))?;
                ensure(t.context_after.shared("loan.decision").is_some(), || "no decision".into())?;
            }
        }
        rendered.push(reports.iter().map(ToString::to_string).collect::<String>());
    }
    ensure(rendered[0] == rendered[1], || "two runs differ".into())?;
    Ok("conversation path asks 4 times then decides; document path sequences analyzer before rules with no questions; identical reruns".into())
}

fn vectors() -> impl Strategy<Value = Vec<(f64, bool)>> {
    let conf = prop_oneof![
        Just(0.0),
        Just(0.3),
        Just(1.0),
        (0u32..=10).prop_map(|n| f64::from(n) / 10.0),
        0.0f64..=1.0,
    ];
    proptest::collection::vec((conf, proptest::bool::weighted(0.25)), 0..10)
}

fn orchestration() -> Outcome {
    const CASES: u32 = 10_000;
    let start = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (vectors(), 1usize..5, prop_oneof![Just(0.0), Just(0.3), 0.0f64..=1.0]);
    runner
        .run(&strategy, |(v, k, t)| {
            let previews: Vec<AgentPreview> = v
                .iter()
                .enumerate()
                .map(|(i, (c, sticky))| AgentPreview::new(&format!("a{i}"), ResponsePayload::text("x"), *c, *sticky))
                .collect();
            let scored = score(&previews, &MaxScorer);
            for (s, (c, sticky)) in scored.iter().zip(&v) {
                prop_assert_eq!(s.score, if *sticky { 1.0 } else { *c });
                prop_assert_eq!(MaxScorer.score(&s.preview), s.score);
            }
            let got: Vec<String> = select(&scored, k, t).into_iter().map(|s| s.agent_id).collect();
            prop_assert_eq!(&got, &oracle_select(&scored, k, t));
            let above = scored.iter().filter(|s| s.score > t).count();
            prop_assert_eq!(got.len(), above.min(k));
            for id in &got {
                prop_assert!(scored.iter().any(|s| &s.agent_id == id && s.score > t));
            }
            // Tie-breaks depend on scores and positions only, not on input order.
            let mut reversed = scored.clone();
            reversed.reverse();
            let again: Vec<String> = select(&reversed, k, t).into_iter().map(|s| s.agent_id).collect();
            prop_assert_eq!(&again, &got);
            if let Some(first) = scored.iter().find(|s| s.preview.stickiness == 1) {
                let top: Vec<String> = select(&scored, 1, 0.3).into_iter().map(|s| s.agent_id).collect();
                prop_assert_eq!(top, vec![first.agent_id.clone()]);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{CASES} vectors in {:.2}s", elapsed.as_secs_f64()))
}

/// Counts calls to the agent it wraps.
struct Counted {
    inner: Arc<dyn Agent>,
    previews: AtomicUsize,
    executes: AtomicUsize,
}

#[async_trait]
impl Agent for Counted {
    fn descriptor(&self) -> &AgentDescriptor {
        self.inner.descriptor()
    }

    async fn preview(&self, u: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        self.previews.fetch_add(1, Ordering::SeqCst);
        self.inner.preview(u, ctx).await
    }

    async fn execute(&self, u: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        self.executes.fetch_add(1, Ordering::SeqCst);
        self.inner.execute(u, ctx).await
    }
}

const FUZZ_UTTERANCES: [&str; 24] = [
    "Hello",
    "Help",
    "Who are the top 3 borrowers with average amount more than 10000",
    "List all borrowers with yearly income more than 50000 but credit score less than 600",
    "Plot the bar chart per yearly income",
    "Export this data to a CSV file",
    "what is the average amount",
    "How many travel requests does John Smith have?",
    "Submit a travel request to the headquarters",
    "Submit a travel request to Boston for the risk workshop",
    "Approve John Smith's request",
    "Reject John Smith's request",
    "Notify me when an employee submits a travel request",
    "Notify me when a director approves John Smith's travel request",
    "list my alerts",
    "delete alert 1",
    "Should we approve this loan?",
    "The loan amount is $600,000",
    "550",
    "yearly income is 40000",
    "Should the loan in loan_0001.txt be approved?",
    "never mind",
    "what is the weather on mars",
    "cancel",
];

fn preview_purity() -> Outcome {
    let rt = runtime();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runner = TestRunner::new(Config {
        cases: 48,
        failure_persistence: None,
        ..Config::default()
    });
    let turns = AtomicUsize::new(0);
    let executes = AtomicUsize::new(0);
    let case = AtomicUsize::new(0);
    let strategy = proptest::collection::vec((0usize..3, 0usize..FUZZ_UTTERANCES.len()), 1..16);
    runner
        .run(&strategy, |script| {
            let journal = dir.path().join(format!("journal-{}.jsonl", case.fetch_add(1, Ordering::SeqCst)));
            let mut cfg = SuiteConfig::default();
            cfg.world.size = 60;
            cfg.world.journal = Some(journal.clone());
            cfg.orchestrator.k = 2;
            let assistant = Assistant::build(&cfg).expect("suite");
            let counted: Vec<Arc<Counted>> = assistant
                .registry()
                .agents()
                .iter()
                .map(|a| {
                    Arc::new(Counted {
                        inner: Arc::clone(a),
                        previews: AtomicUsize::new(0),
                        executes: AtomicUsize::new(0),
                    })
                })
                .collect();
            for c in &counted {
                assistant.replace(c.clone() as Arc<dyn Agent>).expect("replace");
            }
            let mut sessions = [
                Session::new("manager", Role::Manager, Some("Maria Lopez")),
                Session::new("employee", Role::Employee, Some("John Smith")),
                Session::new("officer", Role::LoanOfficer, None),
            ];
            let file = |p: &Path| std::fs::read(p).unwrap_or_default();
            for (who, i) in script {
                let session = &mut sessions[who];
                let text = FUZZ_UTTERANCES[i];
                let u = Utterance::new(text, session.role, session.next_turn).expect("utterance");
                let (world, bytes) = (assistant.world().snapshot(), file(&journal));
                let out = rt.block_on(broadcast(&u, &session.context, &assistant.registry(), Duration::from_secs(2)));
                prop_assert_eq!(out.len(), counted.len());
                prop_assert_eq!(&assistant.world().snapshot(), &world, "broadcast of {:?} changed the world", text);
                prop_assert_eq!(file(&journal), bytes, "broadcast of {:?} wrote the journal", text);

                let before: Vec<(usize, usize)> = counted
                    .iter()
                    .map(|c| (c.previews.load(Ordering::SeqCst), c.executes.load(Ordering::SeqCst)))
                    .collect();
                let turn = rt.block_on(assistant.say(session, text, Vec::new())).expect("turn");
                turns.fetch_add(1, Ordering::SeqCst);
                for (c, (p, e)) in counted.iter().zip(before) {
                    let id = &c.descriptor().agent_id;
                    let selected = turn.selected.iter().filter(|s| *s == id).count();
                    prop_assert_eq!(c.previews.load(Ordering::SeqCst) - p, 1, "{} previews", id);
                    prop_assert_eq!(c.executes.load(Ordering::SeqCst) - e, selected, "{} executes on {:?}", id, text);
                    executes.fetch_add(selected, Ordering::SeqCst);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{} fuzzed turns, world and journal unchanged by every broadcast, {} executes all matching selections",
        turns.load(Ordering::SeqCst),
        executes.load(Ordering::SeqCst)
    ))
}

fn query_oracle() -> Outcome {
    let mut answered = 0;
    for seed in 0..1_000u64 {
        let (table, ast) = random_instance(seed);
        ensure(table.rows.len() <= 50, || format!("seed {seed}: {} rows", table.rows.len()))?;
        let fast = evaluate(&ast, &table);
        let slow = oracle_evaluate(&ast, &table);
        ensure(fast == slow, || format!("seed {seed}: {ast:?}\nengine {fast:?}\noracle {slow:?}"))?;
        answered += usize::from(fast.is_ok());
    }
    let path = root().join("corpus/queries.toml");
    let report = check_queries(&path).map_err(|e| format!("{e:#}"))?;
    ensure(report.failures.is_empty(), || report.failures.join("; "))?;
    // The pins themselves must agree with the oracle, not only the engine.
    let corpus = QueryCorpus::load(&path).map_err(|e| format!("{e:#}"))?;
    let world = build_world(&WorldConfig {
        seed: corpus.seed,
        size: corpus.size,
        ..WorldConfig::default()
    })
    .map_err(|e| e.to_string())?;
    for pin in &corpus.queries {
        let oracle = match parse_query(&pin.text, &world.loan_schema) {
            Ok(ast) => Answer {
                text: pin.text.clone(),
                parsed: Ok(render(&ast, &world.loan_schema).unwrap_or_default()),
                result: oracle_evaluate(&ast, &world.dataset.loans).ok(),
            },
            Err(e) => Answer {
                text: pin.text.clone(),
                parsed: Err(e.to_string()),
                result: None,
            },
        };
        let diff = check_pin(pin, &oracle);
        ensure(diff.is_empty(), || format!("{:?} against the oracle: {}", pin.text, diff.join("; ")))?;
    }
    Ok(format!(
        "1000 random pairs identical ({answered} answered, {} errors), {} pinned queries hold for engine and oracle",
        1000 - answered,
        report.checked
    ))
}

fn process_defs() -> Vec<ProcessDefinition> {
    [assets::TRAVEL_PROCESS, assets::LOAN_PROCESS]
        .iter()
        .map(|t| ProcessDefinition::from_toml(t).expect("definition"))
        .collect()
}

fn form_for(def: &ProcessDefinition) -> BTreeMap<String, Value> {
    let mut f = BTreeMap::new();
    if def.id == "travel" {
        f.insert("destination".into(), Value::from("Boston"));
        f.insert("event".into(), Value::from("Risk workshop"));
        f.insert("department".into(), Value::from("Mortgages"));
    } else {
        f.insert("amount".into(), Value::Number(1000.0));
    }
    f
}

/// A fresh instance walked to `target` along a shortest path.
fn instance_in(store: &ProcessStore, def: &ProcessDefinition, target: &str) -> u64 {
    let inst = store.submit(&def.id, "John Smith", form_for(def), Role::Employee).expect("submit");
    let mut paths: BTreeMap<String, Vec<&Transition>> = BTreeMap::new();
    paths.insert(def.initial.clone(), Vec::new());
    let mut queue = vec![def.initial.clone()];
    while !queue.is_empty() {
        let state = queue.remove(0);
        for t in def.transitions.iter().filter(|t| t.from == state) {
            if !paths.contains_key(&t.to) {
                let mut p = paths[&state].clone();
                p.push(t);
                paths.insert(t.to.clone(), p);
                queue.push(t.to.clone());
            }
        }
    }
    for t in paths.get(target).unwrap_or_else(|| panic!("{target} unreachable")) {
        store.transition(inst.instance_id, &t.action, t.role).expect("defined transition");
    }
    inst.instance_id
}

fn process_engine() -> Outcome {
    let defs = process_defs();
    let mut combos = 0;
    for def in &defs {
        let mut actions: BTreeSet<String> = def.transitions.iter().map(|t| t.action.clone()).collect();
        actions.insert("escalate".into());
        for state in &def.states {
            for action in &actions {
                for role in Role::ALL {
                    combos += 1;
                    let rule = def
                        .transitions
                        .iter()
                        .find(|t| &t.from == state && &t.action == action && t.role == role);
                    let store = ProcessStore::new(defs.clone()).map_err(|e| e.to_string())?;
                    let id = instance_in(&store, def, state);
                    let before = store.snapshot();
                    let got = store.transition(id, action, role);
                    match (rule, got) {
                        (Some(t), Ok(inst)) => {
                            ensure(inst.state == t.to, || format!("{state} {action} {role} went to {}", inst.state))?;
                            let new = store.events_since(before.events.last().map_or(0, |e| e.event_id));
                            ensure(new.len() == 1 && new[0].kind == t.event, || format!("events {new:?}"))?;
                        }
                        (None, Err(_)) => {
                            ensure(store.snapshot() == before, || format!("{state} {action} {role} changed the store"))?;
                        }
                        (r, g) => return Err(format!("{} {state} {action} {role}: rule {r:?}, result {g:?}", def.id)),
                    }
                    if def.terminal.contains(state) {
                        ensure(rule.is_none(), || format!("terminal {state} has a transition"))?;
                    }
                }
            }
        }
    }

    let mut runner = TestRunner::new(Config {
        cases: 1_000,
        failure_persistence: None,
        ..Config::default()
    });
    let op = prop_oneof![
        any::<bool>().prop_map(|travel| (true, travel, 0usize, 0usize)),
        (any::<bool>(), 0usize..8, 0usize..5).prop_map(|(approve, i, r)| (false, approve, i, r)),
    ];
    let ops = proptest::collection::vec(op, 1..40);
    runner
        .run(&ops, |ops| {
            let store = ProcessStore::new(process_defs()).expect("store");
            let mut committed = 0usize;
            let mut terminal: BTreeMap<u64, String> = BTreeMap::new();
            for (submit, flag, i, r) in ops {
                let ok = if submit {
                    let def = &defs[usize::from(!flag)];
                    store.submit(&def.id, "V. Doe", form_for(def), Role::Employee).is_ok()
                } else {
                    let action = if flag { "approve" } else { "reject" };
                    store.transition(i as u64 + 1, action, Role::ALL[r]).is_ok()
                };
                committed += usize::from(ok);
                for inst in store.query_instances(&InstanceFilter::default()) {
                    let def = store.definition(&inst.process_id).expect("definition");
                    prop_assert_eq!(inst.replay(def).expect("replay"), inst.state.clone());
                    if let Some(t) = terminal.get(&inst.instance_id) {
                        prop_assert_eq!(t, &inst.state, "left a terminal state");
                    }
                    if def.is_terminal(&inst.state) {
                        terminal.insert(inst.instance_id, inst.state.clone());
                    }
                }
            }
            let events = store.events_since(0);
            prop_assert_eq!(events.len(), committed);
            prop_assert!(events.windows(2).all(|w| w[0].event_id < w[1].event_id));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{combos} state x action x role cases per definition, terminal states absorb, 1000 random sequences keep events equal to transitions"
    ))
}

const PEOPLE: [&str; 3] = ["John Smith", "V. Doe", "Y. Doe"];
const KINDS: [EventKind; 4] = [
    EventKind::Submitted,
    EventKind::ManagerApproved,
    EventKind::ManagerRejected,
    EventKind::DirectorApproved,
];

#[derive(Debug, Clone)]
enum AlertOp {
    Submit(usize),
    Move(u64, bool, bool),
    Create(usize, Option<usize>, Option<usize>),
    Delete(usize, u64),
    Pump,
}

fn alert_op() -> impl Strategy<Value = AlertOp> {
    prop_oneof![
        3 => (0..3usize).prop_map(AlertOp::Submit),
        3 => (1..9u64, any::<bool>(), any::<bool>()).prop_map(|(i, a, d)| AlertOp::Move(i, a, d)),
        2 => (0..3usize, proptest::option::of(0..4usize), proptest::option::of(0..3usize))
            .prop_map(|(s, k, p)| AlertOp::Create(s, k, p)),
        1 => (0..3usize, 1..4u64).prop_map(|(s, a)| AlertOp::Delete(s, a)),
        2 => Just(AlertOp::Pump),
    ]
}

fn alert_exactness() -> Outcome {
    let sessions = ["s0", "s1", "s2"];
    let travel = process_defs().remove(0);
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    let delivered_total = AtomicUsize::new(0);
    runner
        .run(&proptest::collection::vec(alert_op(), 1..60), |ops| {
            let world = build_world(&WorldConfig {
                size: 10,
                ..WorldConfig::default()
            })
            .expect("world");
            // (session, alert id, kind, subject, live)
            let mut alerts: Vec<(String, u64, Option<EventKind>, Option<String>, bool)> = Vec::new();
            let mut expected = BTreeSet::new();
            let mut cursor = 0;
            for op in &ops {
                match op {
                    AlertOp::Submit(p) => {
                        let _ = world.processes.submit("travel", PEOPLE[*p], form_for(&travel), Role::Employee);
                    }
                    AlertOp::Move(id, approve, director) => {
                        let role = if *director { Role::Director } else { Role::Manager };
                        let _ = world.processes.transition(*id, if *approve { "approve" } else { "reject" }, role);
                    }
                    AlertOp::Create(s, kind, person) => {
                        let spec = AlertSpec {
                            event_kind: kind.map(|k| KINDS[k]),
                            process_id: Some("travel".into()),
                            subject: person.map(|p| PEOPLE[p].to_string()),
                            description: String::new(),
                            delivery_text: "{subject} {kind}".into(),
                        };
                        let rule = world.alerts.create(sessions[*s], spec.clone(), || world.processes.latest_event_id());
                        alerts.push((sessions[*s].into(), rule.alert_id, spec.event_kind, spec.subject, true));
                    }
                    AlertOp::Delete(s, id) => {
                        world.alerts.deactivate(sessions[*s], *id, || world.processes.latest_event_id());
                        for a in alerts.iter_mut().filter(|a| a.0 == sessions[*s] && a.1 == *id) {
                            a.4 = false;
                        }
                    }
                    AlertOp::Pump => {
                        world.pump_alerts();
                    }
                }
                for e in world.processes.events_since(cursor) {
                    cursor = e.event_id;
                    for (s, id, kind, subject, live) in &alerts {
                        let who = subject
                            .as_ref()
                            .is_none_or(|p| e.subject().is_some_and(|x| text_key(x) == text_key(p)));
                        if *live && kind.is_none_or(|k| k == e.kind) && who {
                            expected.insert((s.clone(), *id, e.event_id));
                        }
                    }
                }
            }
            world.pump_alerts();
            world.pump_alerts();
            let mut got = Vec::new();
            for s in sessions {
                got.extend(world.hub.poll(s, 0).into_iter().map(|n| (n.session_id, n.alert_id, n.event.event_id)));
                prop_assert!(world.hub.poll(s, 0).is_empty());
            }
            let unique: BTreeSet<_> = got.iter().cloned().collect();
            prop_assert_eq!(unique.len(), got.len(), "duplicate delivery");
            prop_assert_eq!(unique, expected);
            delivered_total.fetch_add(got.len(), Ordering::SeqCst);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "500 random interleavings, {} deliveries, each matching pair exactly once",
        delivered_total.load(Ordering::SeqCst)
    ))
}

async fn serve_agent(agent: Arc<dyn Agent>) -> (String, oneshot::Sender<()>) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let url = format!("http://{}/", listener.local_addr().expect("addr"));
    let (tx, rx) = oneshot::channel::<()>();
    tokio::spawn(serve(listener, agent_router(agent), async move {
        let _ = rx.await;
    }));
    (url, tx)
}

/// Answers every request with `body`.
async fn serve_raw(body: String) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let url = format!("http://{}/", listener.local_addr().expect("addr"));
    tokio::spawn(async move {
        while let Ok((mut sock, _)) = listener.accept().await {
            let body = body.clone();
            tokio::spawn(async move {
                let mut buf = vec![0u8; 64 * 1024];
                let mut seen = Vec::new();
                // Read the head and as much body as Content-Length asks for.
                loop {
                    let Ok(n) = sock.read(&mut buf).await else { return };
                    if n == 0 {
                        return;
                    }
                    seen.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&seen);
                    if let Some(end) = text.find("\r\n\r\n") {
                        let len = text[..end]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().to_string()))
                            .and_then(|v| v.parse::<usize>().ok())
                            .unwrap_or(0);
                        if seen.len() >= end + 4 + len {
                            break;
                        }
                    }
                }
                let reply = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = sock.write_all(reply.as_bytes()).await;
                let _ = sock.shutdown().await;
            });
        }
    });
    url
}

fn remote_conformance() -> Outcome {
    let rt = runtime();
    let base = base_config();
    rt.block_on(async {
        let mut turns = 0;
        let mut scenarios = 0;
        let mut stops = Vec::new();
        for path in discover(&root().join("corpus")).map_err(|e| e.to_string())? {
            let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
            if text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("query")) {
                continue;
            }
            let s = Scenario::load(&path).map_err(|e| format!("{e:#}"))?;
            let local = stack(&s, &base).map_err(|e| format!("{e:#}"))?;
            let remote = stack(&s, &base).map_err(|e| format!("{e:#}"))?;
            for agent in remote.registry().agents().to_vec() {
                let (url, stop) = serve_agent(agent.clone()).await;
                stops.push(stop);
                let twin = RemoteAgent::connect(agent.descriptor().clone(), &url)
                    .await
                    .map_err(|e| format!("{}: {e}", agent.descriptor().agent_id))?;
                remote.replace(Arc::new(twin)).map_err(|e| e.to_string())?;
            }
            let a = run_scenario_on(&s, &local).await;
            let b = run_scenario_on(&s, &remote).await;
            for (x, y) in a.steps.iter().zip(&b.steps) {
                let (tx, ty) = (x.turn.as_ref().map(|t| t.without_timings()), y.turn.as_ref().map(|t| t.without_timings()));
                ensure(tx == ty, || format!("{}: {} differs over the wire", s.name, x.label))?;
                ensure(x.checks == y.checks, || format!("{}: {} checks differ", s.name, x.label))?;
                turns += usize::from(tx.is_some());
            }
            ensure(a.steps.len() == b.steps.len(), || format!("{}: step counts differ", s.name))?;
            ensure(local.world().snapshot() == remote.world().snapshot(), || format!("{}: worlds differ", s.name))?;
            scenarios += 1;
        }

        // A hand-rolled stub, since the agent router refuses to serve an
        // out-of-contract preview.
        let valid = WireResponse::from_preview(&AgentPreview::new("stub", ResponsePayload::text("pong"), 0.5, false));
        let valid = serde_json::to_value(valid).map_err(|e| e.to_string())?;
        let mut rejected = 0;
        for c in [json!(1.7), json!(-0.1), json!(1.0000001), json!(null), json!("0.5")] {
            let mut body = valid.clone();
            body["confidence"] = c.clone();
            let url = serve_raw(body.to_string()).await;
            let r = RemoteAgent::connect(ScriptedAgent::new("stub", 0.5).descriptor, &url).await;
            ensure(
                matches!(r, Err(RegistrationError::Contract(_) | RegistrationError::Malformed(_))),
                || format!("confidence {c} not rejected: {:?}", r.err()),
            )?;
            rejected += 1;
        }
        let url = serve_raw(valid.to_string()).await;
        RemoteAgent::connect(ScriptedAgent::new("stub", 0.5).descriptor, &url)
            .await
            .map_err(|e| format!("a well-formed stub was refused: {e}"))?;
        Ok(format!(
            "{turns} turns over {scenarios} scenarios identical to in-process twins, {rejected} malformed confidences rejected"
        ))
    })
}
