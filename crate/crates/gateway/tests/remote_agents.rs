use std::sync::Arc;

use async_trait::async_trait;
use axum::routing::post;
use axum::{Json, Router};
use bpassist_core::agents::{Assistant, Session, SuiteConfig};
use bpassist_core::contract::{
    Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, ContextDelta, DocumentRef,
    ResponsePayload, Role, TaxonomyClass, Utterance,
};
use bpassist_core::orchestrator::TurnResult;
use bpassist_gateway::{agent_router, router, Gateway, Health, RemoteAgent, WireResponse};
use serde_json::json;
use tokio::sync::oneshot;

/// Repeats whatever follows "echo".
struct Echo {
    descriptor: AgentDescriptor,
}

impl Echo {
    fn new() -> Self {
        Self {
            descriptor: AgentDescriptor::new("echo", "Echo", TaxonomyClass::Dialog, false),
        }
    }

    fn answer(&self, u: &Utterance) -> AgentPreview {
        match u.text.strip_prefix("echo ") {
            Some(rest) => AgentPreview::new("echo", ResponsePayload::text(rest), 0.9, false)
                .with_updates(ContextDelta::new().set_scoped("echo", "last", rest)),
            None => AgentPreview::new("echo", ResponsePayload::text(""), 0.0, false),
        }
    }
}

#[async_trait]
impl Agent for Echo {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, _: &Context) -> Result<AgentPreview, AgentError> {
        Ok(self.answer(u))
    }

    async fn execute(&self, u: &Utterance, _: &Context) -> Result<AgentResult, AgentError> {
        Ok(self.answer(u))
    }
}

/// Serves `app` until the returned sender fires or is dropped.
async fn spawn(app: Router) -> (String, oneshot::Sender<()>, tokio::task::JoinHandle<()>) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await;
    });
    (format!("http://{addr}/"), tx, task)
}

fn assistant(k: usize) -> Arc<Assistant> {
    let mut cfg = SuiteConfig::default();
    cfg.orchestrator.k = k;
    cfg.orchestrator.per_agent_deadline_ms = 3_000;
    Arc::new(Assistant::build(&cfg).unwrap())
}

#[tokio::test]
async fn echo_agent_registers_over_http_and_is_selected() {
    let (agent_url, _stop, _) = spawn(agent_router(Arc::new(Echo::new()))).await;
    let gw = Arc::new(Gateway::new(assistant(1)));
    let (base, _stop_gw, _) = spawn(router(gw.clone(), None)).await;
    let http = reqwest::Client::new();

    let body = json!({ "descriptor": Echo::new().descriptor, "endpoint": agent_url });
    let r = http.post(format!("{base}v1/agents")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let again = http.post(format!("{base}v1/agents")).json(&body).send().await.unwrap();
    assert_eq!(again.status(), 409);

    let s = gw.create_session(Role::Employee, None);
    let t = gw.post_message(&s, "echo over the wire", vec![]).await.unwrap();
    assert_eq!(t.selected, ["echo"]);
    assert_eq!(t.text(), "over the wire");
    assert_eq!(t.context_after.scoped("echo", "last").and_then(|v| v.as_str()), Some("over the wire"));
    let t = gw.post_message(&s, "Help", vec![]).await.unwrap();
    assert_eq!(t.selected, ["chit-chat"]);
    assert!(t.text().contains("Echo"), "{}", t.text());

    let listed = gw.agents();
    let echo = listed.iter().find(|a| a.descriptor.agent_id == "echo").unwrap();
    assert_eq!((echo.health, echo.endpoint.as_deref()), (Health::Up, Some(agent_url.as_str())));
}

fn fixed(reply: serde_json::Value) -> Router {
    Router::new().route("/", post(move || async move { Json(reply) }))
}

#[tokio::test]
async fn malformed_agents_are_rejected_at_registration() {
    let gw = Gateway::new(assistant(1));
    let good = WireResponse {
        response: ResponsePayload::text("hi"),
        confidence: 0.5,
        stickiness: 0,
        context_updates: ContextDelta::new(),
    };
    let mut bad_conf = serde_json::to_value(&good).unwrap();
    bad_conf["confidence"] = json!(1.7);
    let mut negative = serde_json::to_value(&good).unwrap();
    negative["confidence"] = json!(-0.1);
    let mut sticky = serde_json::to_value(&good).unwrap();
    sticky["stickiness"] = json!(2);
    let mut foreign = serde_json::to_value(&good).unwrap();
    foreign["contextUpdates"] = json!({ "agent": { "chit-chat": { "x": true } } });
    let cases = [
        (bad_conf, "confidence 1.7 outside [0, 1]"),
        (negative, "confidence -0.1 outside [0, 1]"),
        (sticky, "stickiness 2 is not 0 or 1"),
        (foreign, "namespace"),
        (json!({ "text": "hi" }), "malformed"),
    ];
    for (i, (reply, why)) in cases.into_iter().enumerate() {
        let (url, _stop, _) = spawn(fixed(reply)).await;
        let d = AgentDescriptor::new(format!("bad-{i}"), "Bad", TaxonomyClass::Dialog, false);
        let err = gw.register_remote(d, &url).await.unwrap_err().to_string();
        assert!(err.starts_with("registration rejected") && err.contains(why), "{err}");
    }
    let d = AgentDescriptor::new("gone", "Gone", TaxonomyClass::Dialog, false);
    let err = gw.register_remote(d, "http://127.0.0.1:9/").await.unwrap_err().to_string();
    assert!(err.contains("unreachable"), "{err}");
    assert_eq!(gw.agents().len(), 9);

    let (url, _stop, _) = spawn(fixed(serde_json::to_value(&good).unwrap())).await;
    let d = AgentDescriptor::new("fine", "Fine", TaxonomyClass::Dialog, false);
    gw.register_remote(d, &url).await.unwrap();
    assert_eq!(gw.agents().len(), 10);
}

#[tokio::test]
async fn unreachable_agents_go_down_and_turns_continue() {
    let (url, stop, task) = spawn(agent_router(Arc::new(Echo::new()))).await;
    let gw = Gateway::new(assistant(1));
    gw.register_remote(Echo::new().descriptor, &url).await.unwrap();
    let s = gw.create_session(Role::Employee, None);
    assert_eq!(gw.post_message(&s, "echo one", vec![]).await.unwrap().text(), "one");

    stop.send(()).unwrap();
    task.await.unwrap();
    let t = gw.post_message(&s, "echo two", vec![]).await.unwrap();
    assert!(t.fallback_used);
    let p = t.trace.preview("echo").unwrap();
    assert_eq!(p.confidence, 0.0);
    let t = gw.post_message(&s, "Hello", vec![]).await.unwrap();
    assert_eq!(t.selected, ["chit-chat"]);
    let echo = gw.agents().into_iter().find(|a| a.descriptor.agent_id == "echo").unwrap();
    assert_eq!(echo.health, Health::Down);
}

/// Every agent of a second assistant is moved behind its own endpoint. Both
/// assistants must answer every turn identically.
#[tokio::test]
async fn remote_twins_match_local_agents() {
    let local = assistant(2);
    let remote = assistant(2);
    let mut stops = Vec::new();
    for agent in remote.registry().agents().to_vec() {
        let (url, stop, _) = spawn(agent_router(agent.clone())).await;
        stops.push(stop);
        let twin = RemoteAgent::connect(agent.descriptor().clone(), &url).await.unwrap();
        remote.replace(Arc::new(twin)).unwrap();
    }

    let script: &[(&str, Role, Option<&str>, &str, Option<&str>)] = &[
        ("officer", Role::LoanOfficer, None, "Hello", None),
        ("officer", Role::LoanOfficer, None, "Who are the top 3 borrowers with average amount more than 10000", None),
        ("officer", Role::LoanOfficer, None, "List all borrowers with yearly income more than 50000 but credit score less than 600", None),
        ("officer", Role::LoanOfficer, None, "Plot the bar chart per yearly income", None),
        ("officer", Role::LoanOfficer, None, "Export this data to a CSV file", None),
        ("officer", Role::LoanOfficer, None, "Help", None),
        ("officer", Role::LoanOfficer, None, "Should we approve this loan?", None),
        ("officer", Role::LoanOfficer, None, "The loan amount is $600,000", None),
        ("officer", Role::LoanOfficer, None, "no idea", None),
        ("officer", Role::LoanOfficer, None, "550", None),
        ("officer", Role::LoanOfficer, None, "yearly income is 40000", None),
        ("officer", Role::LoanOfficer, None, "Should the loan in loan_0001.txt be approved?", None),
        ("officer", Role::LoanOfficer, None, "Approve the loan application in this document", Some("loan_0002.txt")),
        ("manager", Role::Manager, Some("Maria Lopez"), "Notify me when an employee submits a travel request", None),
        ("employee", Role::Employee, Some("John Smith"), "Submit a travel request to the headquarters", None),
        ("manager", Role::Manager, Some("Maria Lopez"), "How many travel requests does John Smith have?", None),
        ("manager", Role::Manager, Some("Maria Lopez"), "Approve John Smith's request", None),
        ("manager", Role::Manager, Some("Maria Lopez"), "list my alerts", None),
        ("manager", Role::Manager, Some("Maria Lopez"), "delete alert 1", None),
        ("manager", Role::Manager, Some("Maria Lopez"), "what is the weather on mars", None),
    ];
    let mut sessions: Vec<(Session, Session)> = Vec::new();
    for (sid, role, user, text, doc) in script {
        let i = match sessions.iter().position(|(s, _)| s.id == *sid) {
            Some(i) => i,
            None => {
                sessions.push((Session::new(*sid, *role, *user), Session::new(*sid, *role, *user)));
                sessions.len() - 1
            }
        };
        let docs: Vec<DocumentRef> = doc.iter().map(|d| DocumentRef::named(*d)).collect();
        let (a, b) = &mut sessions[i];
        let x: TurnResult = local.say(a, text, docs.clone()).await.unwrap();
        let y: TurnResult = remote.say(b, text, docs).await.unwrap();
        assert_eq!(x.without_timings(), y.without_timings(), "turn `{text}`");
    }
    assert_eq!(local.world().snapshot(), remote.world().snapshot());
    assert_eq!(
        local.world().hub.poll("manager", 0).len(),
        remote.world().hub.poll("manager", 0).len()
    );
}
