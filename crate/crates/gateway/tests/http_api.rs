use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use bpassist_core::agents::{Assistant, Notification, SuiteConfig};
use bpassist_core::contract::{
    Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, ResponsePayload, TaxonomyClass, Utterance,
};
use bpassist_core::orchestrator::TurnResult;
use bpassist_gateway::{router, AgentStatus, Gateway, Health};
use serde_json::{json, Value as Json};

fn gateway(k: usize) -> Arc<Gateway> {
    let mut cfg = SuiteConfig::default();
    cfg.orchestrator.k = k;
    Arc::new(Gateway::new(Arc::new(Assistant::build(&cfg).unwrap())))
}

async fn spawn(gw: Arc<Gateway>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(gw, None)).await });
    format!("http://{addr}")
}

struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    async fn new(gw: Arc<Gateway>) -> Self {
        Self {
            base: spawn(gw).await,
            http: reqwest::Client::new(),
        }
    }

    async fn post(&self, path: &str, body: Json) -> (u16, Json) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (u16, Json) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn session(&self, role: &str, user: Option<&str>) -> String {
        let (status, body) = self.post("/v1/sessions", json!({ "role": role, "user": user })).await;
        assert_eq!(status, 200, "{body}");
        body["sessionId"].as_str().unwrap().to_string()
    }

    async fn say(&self, session: &str, text: &str) -> TurnResult {
        let (status, body) = self
            .post(&format!("/v1/sessions/{session}/messages"), json!({ "text": text }))
            .await;
        assert_eq!(status, 200, "{body}");
        serde_json::from_value(body).unwrap()
    }

    async fn poll(&self, session: &str, since: u64) -> Vec<Notification> {
        let (status, body) = self.get(&format!("/v1/sessions/{session}/notifications?since={since}")).await;
        assert_eq!(status, 200, "{body}");
        serde_json::from_value(body).unwrap()
    }
}

#[tokio::test]
async fn sessions_and_turns() {
    let c = Client::new(gateway(2)).await;
    let a = c.session("LoanOfficer", None).await;
    let b = c.session("LoanOfficer", None).await;
    assert_ne!(a, b);
    assert!(a.len() >= 32);

    let (_, view) = c.get(&format!("/v1/sessions/{a}")).await;
    assert_eq!(view["nextTurn"], 0);
    assert_eq!(view["role"], "LoanOfficer");

    let t = c.say(&a, "Hello").await;
    assert_eq!((t.selected.clone(), t.text()), (vec!["chit-chat".to_string()], "Hi there".to_string()));
    c.say(&a, "List all borrowers with credit score less than 600").await;
    let t = c.say(&a, "Export this data to a CSV file").await;
    assert_eq!(t.selected, ["data-export"]);
    let csv = t.responses[0].response.find_attachment().unwrap();
    assert_eq!(csv.media_type, "text/csv");
    assert_eq!(String::from_utf8_lossy(&csv.bytes).lines().count(), 269);

    // the other session has no result to export
    let t = c.say(&b, "Export this data to a CSV file").await;
    assert!(t.responses[0].response.find_attachment().is_none());
    let (_, view) = c.get(&format!("/v1/sessions/{a}")).await;
    assert_eq!(view["nextTurn"], 3);
}

#[tokio::test]
async fn request_errors() {
    let c = Client::new(gateway(1)).await;
    let (status, body) = c.post("/v1/sessions", json!({ "role": "Pilot" })).await;
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("unknown role"));
    let (status, _) = c.post("/v1/sessions/nope/messages", json!({ "text": "Hello" })).await;
    assert_eq!(status, 404);
    let (status, _) = c.get("/v1/sessions/nope/notifications").await;
    assert_eq!(status, 404);
    let s = c.session("Manager", None).await;
    let (status, body) = c.post(&format!("/v1/sessions/{s}/messages"), json!({ "text": "   " })).await;
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("empty text"));
}

#[tokio::test]
async fn manager_is_notified_of_submission() {
    let c = Client::new(gateway(2)).await;
    let mgr = c.session("Manager", Some("Maria Lopez")).await;
    let mgr2 = c.session("Manager", None).await;
    let emp = c.session("Employee", Some("John Smith")).await;
    for s in [&mgr, &mgr2] {
        let t = c.say(s, "Notify me when an employee submits a travel request").await;
        assert_eq!(t.selected, ["alerts"]);
    }
    assert!(c.poll(&mgr, 0).await.is_empty());
    let t = c.say(&emp, "Submit a travel request to the headquarters").await;
    assert_eq!(t.selected, ["bp-execute"]);

    for s in [&mgr, &mgr2] {
        let notes = c.poll(s, 0).await;
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].rendered_text, "John Smith submitted a travel request (#1).");
        assert!(c.poll(s, 0).await.is_empty());
    }
    assert!(c.poll(&emp, 0).await.is_empty());

    let t = c.say(&mgr, "How many travel requests does John Smith have?").await;
    assert_eq!(t.text(), "John Smith has 1 application");
    let t = c.say(&mgr, "Approve John Smith's request").await;
    assert_eq!(t.text(), "John Smith's application has been approved");
}

#[tokio::test]
async fn lists_the_shipped_roster() {
    let c = Client::new(gateway(1)).await;
    let (status, body) = c.get("/v1/agents").await;
    assert_eq!(status, 200);
    let agents: Vec<AgentStatus> = serde_json::from_value(body).unwrap();
    let ids: Vec<&str> = agents.iter().map(|a| a.descriptor.agent_id.as_str()).collect();
    assert_eq!(
        ids,
        [
            "chit-chat",
            "data-query",
            "travel-query",
            "content-analyzer",
            "visualization",
            "data-export",
            "business-rules",
            "bp-execute",
            "alerts"
        ]
    );
    assert!(agents.iter().all(|a| a.health == Health::Up && a.endpoint.is_none()));
}

/// Answers every utterance after a delay, echoing it back.
struct Slow {
    descriptor: AgentDescriptor,
}

#[async_trait]
impl Agent for Slow {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, _: &Context) -> Result<AgentPreview, AgentError> {
        tokio::time::sleep(Duration::from_millis(40)).await;
        Ok(AgentPreview::new("slow", ResponsePayload::text(u.text.clone()), 1.0, false))
    }

    async fn execute(&self, u: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        self.preview(u, ctx).await
    }
}

#[tokio::test]
async fn turns_on_one_session_run_in_arrival_order() {
    let gw = gateway(1);
    gw.assistant()
        .register(Arc::new(Slow {
            descriptor: AgentDescriptor::new("slow", "Slow", TaxonomyClass::Dialog, false),
        }))
        .unwrap();
    let s = gw.create_session(bpassist_core::contract::Role::Employee, None);
    let mut tasks = Vec::new();
    for i in 0..6 {
        let gw = Arc::clone(&gw);
        let s = s.clone();
        tasks.push(tokio::spawn(async move { gw.post_message(&s, &format!("message {i}"), vec![]).await }));
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    for (i, t) in tasks.into_iter().enumerate() {
        let r = t.await.unwrap().unwrap();
        assert_eq!(r.trace.utterance.turn_index, i as u64);
        assert_eq!(r.text(), format!("message {i}"));
    }
    let view = gw.session(&s).await.unwrap();
    assert_eq!(view.next_turn, 6);
    let turns: Vec<u64> = view.context.turn_log.iter().map(|t| t.turn_index).collect();
    assert_eq!(turns, [0, 1, 2, 3, 4, 5]);
}
