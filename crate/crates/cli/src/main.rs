mod args;
mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Map, Value};

use args::Cli;

/// Why a run stopped; picks the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, files or parameters: exit 2.
    Input(String),
    /// Numerical breakdown or a failed certificate: exit 3.
    Numerical(String),
}

impl From<fockdens::Error> for Failure {
    fn from(e: fockdens::Error) -> Self {
        use fockdens::Error as E;
        match e {
            E::Domain(_) | E::Input(_) => Failure::Input(e.to_string()),
            E::Numerical { .. } | E::Pole { .. } | E::Certificate(_) => Failure::Numerical(e.to_string()),
        }
    }
}

/// What a subcommand produced.
pub struct Outcome {
    pub summary: String,
    pub fields: Map<String, Value>,
    /// False when a certificate in the result failed; the artifact is still written.
    pub certified: bool,
}

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("FOCKDENS_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::Input(format!("FOCKDENS_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Input(e.to_string()))
}

fn run() -> Result<bool, Failure> {
    let argv = config::merge(std::env::args_os().collect()).map_err(Failure::Input)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Err(Failure::Input(String::new())) } else { Ok(true) };
        }
    };
    threads()?;
    let start = std::time::Instant::now();
    let out = commands::dispatch(&cli)?;
    log::info!("{} finished in {:.2}s", cli.command.name(), start.elapsed().as_secs_f64());

    let mut artifact = out.fields;
    artifact.insert("command".into(), json!(cli.command.name()));
    artifact.insert("summary".into(), json!(out.summary));
    artifact.insert("seed".into(), json!(cli.common.seed));
    artifact.insert("config".into(), serde_json::to_value(&cli).map_err(|e| Failure::Input(e.to_string()))?);
    artifact.insert("certified".into(), json!(out.certified));
    let to_stdout = cli.common.out.as_deref().is_some_and(|p| p.as_os_str() == "-");
    if to_stdout {
        eprintln!("{}", out.summary);
    } else {
        println!("{}", out.summary);
    }
    if let Some(path) = &cli.common.out {
        io::write_json(path, &Value::Object(artifact))?;
    }
    Ok(out.certified)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certificate failed");
            ExitCode::from(3)
        }
        Err(Failure::Input(msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
