use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use bpassist_core::agents::{Assistant, Session};
use bpassist_core::contract::{Role, Value};
use bpassist_core::orchestrator::TurnResult;

use crate::render::render_turn;

pub const USAGE: &str = "commands: /role <Employee|Manager|Director|LoanOfficer>, /user <name>, /context, /trace, /notifications, /help, /quit";

/// One interactive conversation against an in-process assistant.
pub struct Repl {
    assistant: Arc<Assistant>,
    session: Session,
    save_dir: Option<PathBuf>,
    last: Option<TurnResult>,
}

pub enum Reply {
    Text(String),
    Quit,
}

impl Repl {
    pub fn new(assistant: Arc<Assistant>, role: Role, user: Option<&str>, save_dir: Option<PathBuf>) -> Self {
        Self {
            assistant,
            session: Session::new("repl", role, user),
            save_dir,
            last: None,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn last_turn(&self) -> Option<&TurnResult> {
        self.last.as_ref()
    }

    pub async fn handle(&mut self, line: &str) -> Reply {
        let line = line.trim();
        if line.is_empty() {
            return Reply::Text(String::new());
        }
        if let Some(cmd) = line.strip_prefix('/') {
            return self.meta(cmd);
        }
        match self.assistant.say(&mut self.session, line, Vec::new()).await {
            Ok(t) => {
                let mut out = render_turn(&t, self.save_dir.as_deref());
                for n in self.assistant.world().hub.poll(&self.session.id, 0) {
                    let _ = writeln!(out, "(notification) {}", n.rendered_text);
                }
                self.last = Some(t);
                Reply::Text(out)
            }
            Err(e) => Reply::Text(format!("error: {e}\n")),
        }
    }

    fn meta(&mut self, cmd: &str) -> Reply {
        let (name, arg) = cmd.split_once(' ').map_or((cmd, ""), |(a, b)| (a, b.trim()));
        let text = match name {
            "quit" | "exit" => return Reply::Quit,
            "help" => USAGE.to_string(),
            "role" => match arg.parse::<Role>() {
                Ok(r) if !arg.is_empty() => {
                    self.session.role = r;
                    format!("speaking as {r}")
                }
                _ => format!("usage: /role <Employee|Manager|Director|LoanOfficer>\n{USAGE}"),
            },
            "user" if !arg.is_empty() => {
                self.session.context.shared.insert("session.user".into(), Value::from(arg));
                format!("speaking for {arg}")
            }
            "context" => serde_json::to_string_pretty(&self.session.context).unwrap_or_default(),
            "trace" => match &self.last {
                Some(t) => trace_table(t),
                None => "no turn yet".into(),
            },
            "notifications" => {
                let notes = self.assistant.world().hub.poll(&self.session.id, 0);
                if notes.is_empty() {
                    "no new notifications".into()
                } else {
                    notes.iter().map(|n| n.rendered_text.as_str()).collect::<Vec<_>>().join("\n")
                }
            }
            _ => format!("unknown command /{name}\n{USAGE}"),
        };
        Reply::Text(text + "\n")
    }
}

/// Per-agent confidence, stickiness and score of a turn.
pub fn trace_table(t: &TurnResult) -> String {
    let width = t.trace.previews.iter().map(|p| p.agent_id.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  conf  κ  score  selected\n", "agent");
    for p in &t.trace.previews {
        let sel = t.selected.iter().position(|s| *s == p.agent_id).map_or(String::new(), |i| format!("#{}", i + 1));
        let late = if p.timed_out { " (timed out)" } else { "" };
        let _ = writeln!(
            out,
            "{:<width$}  {:.2}  {}  {:.2}  {sel}{late}",
            p.agent_id, p.confidence, p.stickiness, p.score
        );
    }
    if t.fallback_used {
        out.push_str("no agent above threshold; fallback used\n");
    }
    out
}
