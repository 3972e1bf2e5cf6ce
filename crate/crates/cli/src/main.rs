use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context as _;
use bpassist_cli::config::AppConfig;
use bpassist_cli::corpus::run_corpus;
use bpassist_cli::datagen::{write_dataset, QueryCorpus};
use bpassist_cli::repl::{Repl, Reply, USAGE};
use bpassist_core::agents::Assistant;
use bpassist_core::contract::Role;
use bpassist_gateway::{router, serve, shutdown_signal, Gateway};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bpassist", version, about = "Conversational assistant for business processes")]
struct Cli {
    /// Config file with [world], [orchestrator] and [server] tables.
    #[arg(long, global = true, env = "BPASSIST_CONFIG")]
    config: Option<PathBuf>,
    /// Dataset seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chat with the assistant in the terminal.
    Repl {
        #[arg(long, default_value = "LoanOfficer")]
        role: Role,
        /// Person the session speaks for.
        #[arg(long)]
        user: Option<String>,
        /// Where attachments are saved.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run scenario and pinned-query files.
    Run {
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
    },
    /// Write the seeded dataset, its documents and the corpus answers.
    Datagen {
        #[arg(long, default_value_t = 500)]
        size: usize,
        #[arg(long, default_value = "data")]
        out: PathBuf,
        /// Pinned query file whose queries are answered into answers.json.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Serve the HTTP gateway.
    Serve {
        /// Listen address, overriding the config.
        #[arg(long)]
        listen: Option<String>,
    },
}

/// Failures that are the configuration's fault exit with 2.
struct ConfigError(anyhow::Error);

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli, &runtime) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(ConfigError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli, rt: &tokio::runtime::Runtime) -> Result<bool, ConfigError> {
    let config = AppConfig::load(cli.config.as_deref()).map_err(ConfigError)?.with_seed(cli.seed);
    let build = || Assistant::build(&config.suite).map(Arc::new).map_err(|e| ConfigError(e.into()));
    match cli.command {
        Command::Repl { role, user, out } => {
            let assistant = build()?;
            let mut repl = Repl::new(assistant, role, user.as_deref(), Some(out));
            println!("{USAGE}");
            let stdin = std::io::stdin();
            let mut stdout = std::io::stdout();
            for line in stdin.lock().lines() {
                let Ok(line) = line else { break };
                match rt.block_on(repl.handle(&line)) {
                    Reply::Text(t) => {
                        let _ = stdout.write_all(t.as_bytes());
                        let _ = stdout.flush();
                    }
                    Reply::Quit => break,
                }
            }
            Ok(true)
        }
        Command::Run { corpus } => {
            let report = rt.block_on(run_corpus(&corpus, &config.suite)).map_err(ConfigError)?;
            print!("{}", report.render());
            Ok(report.passed())
        }
        Command::Datagen { size, out, corpus } => {
            let queries = match corpus {
                Some(p) => QueryCorpus::load(&p)
                    .map_err(ConfigError)?
                    .queries
                    .into_iter()
                    .map(|q| q.text)
                    .collect(),
                None => Vec::new(),
            };
            let w = write_dataset(config.suite.world.seed, size, &out, &queries)
                .with_context(|| out.display().to_string())
                .map_err(ConfigError)?;
            println!(
                "wrote {} loans, {} travel requests, {} documents and {} answers to {}",
                w.loans,
                w.travel,
                w.documents,
                w.answers,
                out.display()
            );
            Ok(true)
        }
        Command::Serve { listen } => {
            let assistant = build()?;
            let addr = listen.unwrap_or(config.server.listen.clone());
            rt.block_on(async {
                let matcher = assistant.world().spawn_alert_matcher();
                let gateway = Arc::new(Gateway::new(assistant));
                let app = router(gateway, config.server.static_dir.as_deref());
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("listen on {addr}"))
                    .map_err(ConfigError)?;
                tracing::info!(%addr, "serving");
                eprintln!("listening on http://{}", listener.local_addr().map_or(addr.clone(), |a| a.to_string()));
                let served = serve(listener, app, shutdown_signal()).await;
                matcher.abort();
                served.map_err(|e| ConfigError(e.into()))?;
                Ok(true)
            })
        }
    }
}
