//! `vtteach`: headless access to the teaching workbench.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use vtteach_service::{ClientKind, ServiceError, SessionConfig};

#[derive(Parser)]
#[command(name = "vtteach", version, about = "Rule synthesis, counterfactuals and teaching sessions")]
pub struct Cli {
    /// Structured JSON output instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for the split, the learner and the completion client.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Session config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Completion backend; overrides the config.
    #[arg(long, global = true, value_enum)]
    pub client: Option<ClientArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ClientArg {
    Mock,
    Remote,
}

impl From<ClientArg> for ClientKind {
    fn from(c: ClientArg) -> Self {
        match c {
            ClientArg::Mock => ClientKind::Mock,
            ClientArg::Remote => ClientKind::Remote,
        }
    }
}

#[derive(Args, Clone, Default)]
pub struct InputArgs {
    /// Corpus JSONL (`id`, `text`, optional gold `labels`).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Label definitions JSONL.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Synonym lexicon JSONL.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Phrasebook JSONL for the mock client.
    #[arg(long)]
    pub phrasebook: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Tokenize and tag a corpus.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Write the annotated corpus here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn rules from gold labels, or retrain a saved session.
    Synth {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        session: Option<PathBuf>,
    },
    /// List the sentences a pattern matches.
    Match {
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Generate counterfactuals for one labeled sentence.
    Cf {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        sentence: String,
        /// Append the client transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Answer from a recorded transcript instead of a live client.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Word-level alignment of two sentences.
    Diff {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Score predictions against gold labels, or show a session's history.
    Eval {
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Predictions JSONL (`id`, `labels`).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Scripted annotator runs with and without counterfactuals.
    Simulate {
        #[command(flatten)]
        inputs: InputArgs,
        /// Keyword oracle JSON for resolving counterfactuals.
        #[arg(long)]
        keywords: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, default_value_t = 10)]
        budget: usize,
    },
    /// Run the HTTP API.
    Serve {
        /// Directory holding session folders.
        #[arg(long, default_value = "sessions")]
        root: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080", env = "VTTEACH_ADDR")]
        addr: std::net::SocketAddr,
    },
}

/// An operational failure, reported as one JSON object on stderr.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: e.to_string(),
        }
    }
}

impl Cli {
    pub fn session_config(&self) -> Result<SessionConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => SessionConfig::load(p)?,
            None => SessionConfig::default(),
        };
        if let Some(seed) = self.seed {
            c = c.with_seed(seed);
        }
        if let Some(kind) = self.client {
            c.client.kind = kind.into();
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    match commands::run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({"ok": false, "error": {"kind": f.kind, "message": f.message}}));
            ExitCode::FAILURE
        }
    }
}
