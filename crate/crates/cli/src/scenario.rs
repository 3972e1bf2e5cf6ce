//! Scripted conversations with expectations on every turn, run against a
//! fresh in-process assistant each.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use bpassist_core::agents::{Assistant, Session, SuiteConfig};
use bpassist_core::contract::{Context, DocumentRef, Role, Value};
use bpassist_core::orchestrator::TurnResult;
use regex::Regex;
use serde::Deserialize;

pub const MAIN_SESSION: &str = "main";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub about: String,
    /// Role of the `main` session.
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub user: Option<String>,
    #[serde(default)]
    pub setup: Setup,
    #[serde(default)]
    pub sessions: Vec<SessionSpec>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setup {
    pub seed: Option<u64>,
    pub size: Option<usize>,
    /// Agents selected per turn.
    pub k: Option<usize>,
    /// Relative to the scenario file.
    pub documents_dir: Option<PathBuf>,
    #[serde(default)]
    pub instances: Vec<Preload>,
}

/// A process instance submitted before the first step.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preload {
    pub process: String,
    pub subject: String,
    #[serde(default = "employee")]
    pub role: Role,
    #[serde(default)]
    pub form: BTreeMap<String, toml::Value>,
    /// Actions applied after submission, each as `action:Role`.
    #[serde(default)]
    pub then: Vec<String>,
}

fn employee() -> Role {
    Role::Employee
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub user: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Attachment {
    Named(String),
    Inline { name: String, content: String },
}

impl Attachment {
    fn to_ref(&self) -> DocumentRef {
        match self {
            Attachment::Named(n) => DocumentRef::named(n.clone()),
            Attachment::Inline { name, content } => DocumentRef {
                name: name.clone(),
                content: Some(content.clone()),
            },
        }
    }
}

/// One user message, or a notification poll.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    #[serde(default)]
    pub session: Option<String>,
    pub say: Option<String>,
    /// Polls the named session's notifications instead of speaking.
    pub poll: Option<String>,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    #[serde(default)]
    pub expect: Expect,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    /// Responding agents in sequence order.
    pub agents: Option<Vec<String>>,
    pub text: Option<String>,
    pub text_matches: Option<String>,
    pub text_contains: Option<String>,
    /// Modalities of all responses, parts included, depth first.
    pub modalities: Option<Vec<String>>,
    pub fallback: Option<bool>,
    /// Agents whose preview carried stickiness 1.
    pub sticky: Option<Vec<String>>,
    #[serde(default)]
    pub context_has: Vec<String>,
    #[serde(default)]
    pub context_lacks: Vec<String>,
    /// Shared context values; tables in the expectation match a subset of keys.
    #[serde(default)]
    pub context: BTreeMap<String, toml::Value>,
    /// Row count of the first table in the responses.
    pub table_total: Option<usize>,
    pub chart: Option<String>,
    pub attachment: Option<String>,
    /// Notifications returned by a poll step.
    pub notifications: Option<usize>,
    pub notification_text: Option<Vec<String>>,
}

impl Step {
    fn session_id(&self) -> &str {
        self.poll
            .as_deref()
            .or(self.session.as_deref())
            .unwrap_or(MAIN_SESSION)
    }

    fn label(&self) -> String {
        match (&self.say, &self.poll) {
            (Some(t), _) => format!("[{}] \"{t}\"", self.session_id()),
            _ => format!("[{}] poll", self.session_id()),
        }
    }
}

impl Scenario {
    pub fn parse(text: &str, origin: &Path) -> anyhow::Result<Self> {
        let s: Scenario = toml::from_str(text).with_context(|| format!("{}", origin.display()))?;
        s.check().with_context(|| format!("{}", origin.display()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let mut s = Self::parse(&text, path)?;
        if let Some(dir) = s.setup.documents_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = path.parent().unwrap_or(Path::new(".")).join(&*dir);
        }
        Ok(s)
    }

    fn check(&self) -> anyhow::Result<()> {
        let known: Vec<&str> = std::iter::once(MAIN_SESSION)
            .chain(self.sessions.iter().map(|s| s.id.as_str()))
            .collect();
        for (i, step) in self.steps.iter().enumerate() {
            let n = i + 1;
            if step.say.is_some() == step.poll.is_some() {
                bail!("step {n}: give exactly one of `say` and `poll`");
            }
            if !known.contains(&step.session_id()) {
                bail!("step {n}: unknown session `{}`", step.session_id());
            }
            if let Some(p) = &step.expect.text_matches {
                Regex::new(p).with_context(|| format!("step {n}: text_matches"))?;
            }
        }
        for p in &self.setup.instances {
            for t in &p.then {
                parse_then(t)?;
            }
        }
        Ok(())
    }
}

fn parse_then(t: &str) -> anyhow::Result<(&str, Role)> {
    let (action, role) = t
        .split_once(':')
        .with_context(|| format!("`{t}`: expected action:Role"))?;
    Ok((action, role.parse()?))
}

/// The scenario files under `corpus`: a file, a directory of `*.toml`, or a
/// file-name pattern with `*` wildcards.
pub fn discover(corpus: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if corpus.is_file() {
        return Ok(vec![corpus.to_path_buf()]);
    }
    let (dir, pattern) = if corpus.is_dir() {
        (corpus.to_path_buf(), "*.toml".to_string())
    } else {
        let name = corpus.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let dir = corpus.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        (dir.to_path_buf(), name)
    };
    let re = Regex::new(&format!("^{}$", regex::escape(&pattern).replace(r"\*", ".*")))?;
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .with_context(|| dir.display().to_string())?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| re.is_match(&n.to_string_lossy())))
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("no scenarios match {}", corpus.display());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub what: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub label: String,
    pub agents: Vec<String>,
    pub checks: Vec<Check>,
    pub turn: Option<TurnResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub steps: Vec<StepReport>,
    /// Set when the scenario could not run at all.
    pub error: Option<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.steps.iter().all(|s| s.checks.iter().all(|c| c.ok))
    }

    pub fn counts(&self) -> (usize, usize) {
        let all = self.steps.iter().flat_map(|s| &s.checks);
        let total = all.clone().count();
        (all.filter(|c| c.ok).count(), total)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.error.iter().cloned().collect();
        for (i, s) in self.steps.iter().enumerate() {
            for c in s.checks.iter().filter(|c| !c.ok) {
                out.push(format!("step {} {}: {}: {}", i + 1, s.label, c.what, c.detail));
            }
        }
        out
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (ok, total) = self.counts();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(f, "{verdict} {} ({ok}/{total} checks)", self.name)?;
        if let Some(e) = &self.error {
            writeln!(f, "  error: {e}")?;
        }
        for (i, s) in self.steps.iter().enumerate() {
            let who = if s.agents.is_empty() { String::new() } else { format!(" -> {}", s.agents.join(", ")) };
            writeln!(f, "  {:>2}. {}{who}", i + 1, s.label)?;
            for c in &s.checks {
                let mark = if c.ok { "ok  " } else { "FAIL" };
                writeln!(f, "      {mark} {}: {}", c.what, c.detail)?;
            }
        }
        Ok(())
    }
}

fn check(what: &str, ok: bool, detail: String) -> Check {
    Check {
        what: what.to_string(),
        ok,
        detail,
    }
}

fn compare<T: PartialEq + fmt::Debug>(what: &str, want: &T, got: &T) -> Check {
    if want == got {
        check(what, true, format!("{got:?}"))
    } else {
        check(what, false, format!("expected {want:?}, got {got:?}"))
    }
}

/// True when every field of `want` is present in `got` with an equal value;
/// numbers compare numerically.
fn subset(want: &serde_json::Value, got: &serde_json::Value) -> bool {
    use serde_json::Value as J;
    match (want, got) {
        (J::Object(w), J::Object(g)) => w.iter().all(|(k, v)| g.get(k).is_some_and(|gv| subset(v, gv))),
        (J::Number(a), J::Number(b)) => a.as_f64() == b.as_f64(),
        (J::Array(a), J::Array(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| subset(x, y)),
        _ => want == got,
    }
}

fn has_key(ctx: &Context, key: &str) -> bool {
    match key.split_once('/') {
        Some((agent, k)) => ctx.scoped(agent, k).is_some(),
        None => ctx.shared(key).is_some(),
    }
}

fn check_turn(e: &Expect, t: &TurnResult) -> Vec<Check> {
    let mut out = Vec::new();
    let text = t.text();
    if let Some(a) = &e.agents {
        out.push(compare("agents", a, &t.selected));
    }
    if let Some(want) = &e.text {
        out.push(compare("text", want, &text));
    }
    if let Some(p) = &e.text_matches {
        // Checked when the scenario was loaded.
        let ok = Regex::new(p).is_ok_and(|re| re.is_match(&text));
        out.push(check("text_matches", ok, format!("/{p}/ against {text:?}")));
    }
    if let Some(s) = &e.text_contains {
        out.push(check("text_contains", text.contains(s.as_str()), format!("{s:?} in {text:?}")));
    }
    if let Some(m) = &e.modalities {
        let got: Vec<String> = t
            .responses
            .iter()
            .flat_map(|r| r.response.modalities())
            .map(|m| format!("{m:?}"))
            .collect();
        out.push(compare("modalities", m, &got));
    }
    if let Some(fb) = e.fallback {
        out.push(compare("fallback", &fb, &t.fallback_used));
    }
    if let Some(want) = &e.sticky {
        let got: Vec<String> = t
            .trace
            .previews
            .iter()
            .filter(|p| p.stickiness == 1)
            .map(|p| p.agent_id.clone())
            .collect();
        out.push(compare("sticky", want, &got));
    }
    let ctx = &t.context_after;
    for k in &e.context_has {
        out.push(check("context_has", has_key(ctx, k), k.clone()));
    }
    for k in &e.context_lacks {
        out.push(check("context_lacks", !has_key(ctx, k), k.clone()));
    }
    for (k, want) in &e.context {
        let want = serde_json::to_value(want).unwrap_or_default();
        let got = ctx.shared(k).and_then(|v| v.to_serde::<serde_json::Value>().ok());
        let ok = got.as_ref().is_some_and(|g| subset(&want, g));
        out.push(check(&format!("context {k}"), ok, format!("expected {want}, got {}", got.unwrap_or_default())));
    }
    if let Some(n) = e.table_total {
        let got = t.responses.iter().find_map(|r| r.response.find_table()).map(|t| t.total_count);
        out.push(compare("table_total", &Some(n), &got));
    }
    if let Some(kind) = &e.chart {
        let got = t
            .responses
            .iter()
            .find_map(|r| r.response.find_chart())
            .map(|c| c.kind.as_str().to_string());
        out.push(compare("chart", &Some(kind.clone()), &got));
    }
    if let Some(name) = &e.attachment {
        let got = t
            .responses
            .iter()
            .find_map(|r| r.response.find_attachment())
            .map(|a| a.filename.clone());
        out.push(compare("attachment", &Some(name.clone()), &got));
    }
    out
}

fn to_value(v: &toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::from(s.as_str()),
        toml::Value::Integer(i) => Value::Number(*i as f64),
        toml::Value::Float(f) => Value::Number(*f),
        toml::Value::Boolean(b) => Value::Bool(*b),
        other => Value::from(other.to_string()),
    }
}

/// Builds a fresh assistant for the scenario on top of `base`.
pub fn stack(s: &Scenario, base: &SuiteConfig) -> anyhow::Result<Assistant> {
    let mut cfg = base.clone();
    if let Some(seed) = s.setup.seed {
        cfg.world.seed = seed;
    }
    if let Some(size) = s.setup.size {
        cfg.world.size = size;
    }
    if let Some(k) = s.setup.k {
        cfg.orchestrator.k = k;
    }
    if let Some(d) = &s.setup.documents_dir {
        cfg.world.documents_dir = Some(d.clone());
    }
    // Scenarios never write to a shared journal.
    cfg.world.journal = None;
    let assistant = Assistant::build(&cfg)?;
    let store = &assistant.world().processes;
    for p in &s.setup.instances {
        let form = p.form.iter().map(|(k, v)| (k.clone(), to_value(v))).collect();
        let inst = store.submit(&p.process, &p.subject, form, p.role)?;
        for t in &p.then {
            let (action, role) = parse_then(t)?;
            store.transition(inst.instance_id, action, role)?;
        }
    }
    Ok(assistant)
}

/// Runs every step and records each expectation's outcome.
pub async fn run_scenario(s: &Scenario, base: &SuiteConfig) -> ScenarioReport {
    let mut report = ScenarioReport {
        name: s.name.clone(),
        steps: Vec::new(),
        error: None,
    };
    match stack(s, base) {
        Ok(a) => run_scenario_on(s, &a).await,
        Err(e) => {
            report.error = Some(format!("setup: {e:#}"));
            report
        }
    }
}

/// Runs the steps against an assistant already built with [`stack`].
pub async fn run_scenario_on(s: &Scenario, assistant: &Assistant) -> ScenarioReport {
    let mut report = ScenarioReport {
        name: s.name.clone(),
        steps: Vec::new(),
        error: None,
    };
    let mut sessions: BTreeMap<String, Session> = BTreeMap::new();
    sessions.insert(MAIN_SESSION.into(), Session::new(MAIN_SESSION, s.role, s.user.as_deref()));
    for spec in &s.sessions {
        sessions.insert(spec.id.clone(), Session::new(spec.id.clone(), spec.role, spec.user.as_deref()));
    }
    for step in &s.steps {
        let id = step.session_id().to_string();
        let mut r = StepReport {
            label: step.label(),
            agents: Vec::new(),
            checks: Vec::new(),
            turn: None,
        };
        if let Some(text) = &step.say {
            let Some(session) = sessions.get_mut(&id) else {
                r.checks.push(check("session", false, format!("unknown session {id}")));
                report.steps.push(r);
                continue;
            };
            let docs = step.attachments.iter().map(Attachment::to_ref).collect();
            match assistant.say(session, text, docs).await {
                Ok(t) => {
                    r.agents = t.selected.clone();
                    r.checks = check_turn(&step.expect, &t);
                    r.turn = Some(t);
                }
                Err(e) => r.checks.push(check("turn", false, e.to_string())),
            }
        } else {
            let notes = assistant.world().hub.poll(&id, 0);
            if let Some(n) = step.expect.notifications {
                r.checks.push(compare("notifications", &n, &notes.len()));
            }
            if let Some(want) = &step.expect.notification_text {
                let got: Vec<String> = notes.iter().map(|n| n.rendered_text.clone()).collect();
                r.checks.push(compare("notification_text", want, &got));
            }
        }
        report.steps.push(r);
    }
    report
}
