use std::path::{Path, PathBuf};

use bpassist_cli::corpus::run_corpus;
use bpassist_cli::scenario::{discover, run_scenario, Scenario};
use bpassist_core::agents::SuiteConfig;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn parse(text: &str) -> anyhow::Result<Scenario> {
    Scenario::parse(text, Path::new("inline.toml"))
}

#[tokio::test]
async fn wrong_agent_fails_with_a_diff() {
    let s = parse(
        r#"
name = "wrong"
role = "Manager"

[[steps]]
say = "Hello"
expect.agents = ["data-query"]
expect.text = "Hi there"
"#,
    )
    .unwrap();
    let r = run_scenario(&s, &SuiteConfig::default()).await;
    assert!(!r.passed());
    assert_eq!(r.counts(), (1, 2));
    assert_eq!(
        r.failures(),
        [r#"step 1 [main] "Hello": agents: expected ["data-query"], got ["chit-chat"]"#]
    );
    assert!(r.to_string().starts_with("FAIL wrong (1/2 checks)\n"));
}

#[test]
fn malformed_file_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "name = \"broken\"\nrole = \"Manager\"\n\n[[steps]]\nsay = \"Hello\"\nexpct.text = \"Hi\"\n").unwrap();
    let err = format!("{:#}", Scenario::load(&path).unwrap_err());
    assert!(err.contains("broken.toml"), "{err}");
    assert!(err.contains("line 6"), "{err}");
    assert!(err.contains("expct"), "{err}");
}

#[test]
fn steps_are_validated_on_load() {
    let both = parse("name = \"x\"\nrole = \"Manager\"\n[[steps]]\nsay = \"Hello\"\npoll = \"main\"\n").unwrap_err();
    assert!(format!("{both:#}").contains("step 1: give exactly one of `say` and `poll`"));
    let who = parse("name = \"x\"\nrole = \"Manager\"\n[[steps]]\nsession = \"ghost\"\nsay = \"Hello\"\n").unwrap_err();
    assert!(format!("{who:#}").contains("unknown session `ghost`"));
    let re = parse("name = \"x\"\nrole = \"Manager\"\n[[steps]]\nsay = \"Hello\"\nexpect.text_matches = \"(\"\n").unwrap_err();
    assert!(format!("{re:#}").contains("text_matches"));
}

#[tokio::test]
async fn corpus_passes_and_reports_identically_twice() {
    let base = SuiteConfig::default();
    let a = run_corpus(&corpus(), &base).await.unwrap();
    let b = run_corpus(&corpus(), &base).await.unwrap();
    assert!(a.passed(), "{}", a.render());
    assert_eq!(a.render(), b.render());
    assert!(a.render().ends_with("6/6 scenarios passed; 1/1 query files passed\n"));
}

#[test]
fn discover_accepts_files_directories_and_patterns() {
    let all = discover(&corpus()).unwrap();
    assert_eq!(all.len(), 7);
    let transcript = discover(&corpus().join("transcript_*.toml")).unwrap();
    let names: Vec<_> = transcript.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["transcript_loan_officer.toml", "transcript_loan_officer_600.toml", "transcript_manager.toml"]);
    assert_eq!(discover(&corpus().join("alerts_manager.toml")).unwrap().len(), 1);
    assert!(discover(&corpus().join("nothing_*.toml")).is_err());
}

#[tokio::test]
async fn preloaded_instances_and_inline_attachments() {
    let s = parse(
        r#"
name = "preload"
role = "Director"

[[setup.instances]]
process = "travel"
subject = "John Smith"
form = { destination = "Boston", event = "Risk workshop", department = "Mortgages" }
then = ["approve:Manager"]

[[steps]]
say = "Approve John Smith's request"
expect.text = "John Smith's application has been approved"

[[steps]]
say = "Should we approve the loan in this file?"
attachments = [{ name = "a.txt", content = "Loan Amount: $100,000\nCredit Score: 350\nYearly Income: $90,000\n" }]
expect.agents = ["content-analyzer", "business-rules"]
expect.context."loan.decision" = { outcome = "Reject" }
"#,
    )
    .unwrap();
    let mut base = SuiteConfig::default();
    base.orchestrator.k = 2;
    let r = run_scenario(&s, &base).await;
    assert!(r.passed(), "{r}");
}
