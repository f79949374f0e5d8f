mod args;
mod commands;
mod config;
mod tsv;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use provenance_core::Error;

use args::{Cli, Command};
use commands::Ctx;
use config::{pick, Config};

/// Error carrying the process exit code: 1 for usage, 2 for data.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) => Failure::usage(e.to_string()),
            e => Failure::data(e.to_string()),
        }
    }
}

fn version() -> String {
    let v = provenance_core::FORMAT_VERSION;
    format!(
        "{} (formats: SIPD v{v}, SIPH v{v}, SIPF v{v}, SIPX v{v})",
        env!("CARGO_PKG_VERSION")
    )
}

fn command() -> clap::Command {
    Cli::command().version(version())
}

/// First line of a clap error plus the flags valid where it occurred.
fn usage_line(err: &clap::Error, argv: &[OsString]) -> String {
    let rendered = err.to_string();
    let first = match err.kind() {
        ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
            "error: a subcommand is required"
        }
        _ => rendered
            .lines()
            .next()
            .unwrap_or("error: invalid arguments")
            .trim(),
    };
    let mut cmd = command();
    let mut path = Vec::new();
    for a in argv.iter().skip(1).filter_map(|a| a.to_str()) {
        let next = cmd.find_subcommand(a).cloned();
        match next {
            Some(sub) => {
                path.push(a.to_string());
                cmd = sub;
            }
            None if a.starts_with('-') => continue,
            None => {}
        }
    }
    let mut flags: Vec<String> = cmd
        .get_arguments()
        .filter_map(|arg| arg.get_long().map(|l| format!("--{l}")))
        .collect();
    for g in ["--seed", "--threads", "--quiet", "--config", "--help"] {
        if !flags.iter().any(|f| f == g) {
            flags.push(g.to_string());
        }
    }
    let subs: Vec<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
    let mut line = format!("{first}; valid flags: {}", flags.join(" "));
    if !subs.is_empty() {
        line.push_str(&format!("; subcommands: {}", subs.join(" ")));
    }
    line
}

fn run(argv: Vec<OsString>) -> Result<(), Failure> {
    let matches = match command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    Ok(())
                }
                _ => Err(Failure::usage(usage_line(&e, &argv))),
            }
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::usage(usage_line(&e, &argv)))?;
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::data(e.to_string()))?;
    }
    let ctx = Ctx {
        seed: pick(cli.seed, config.seed, 0),
        quiet: cli.quiet,
        config,
    };
    match &cli.command {
        Command::Describe(a) => commands::describe(&ctx, a),
        Command::TrainIndex(a) => commands::train_index(&ctx, a),
        Command::Add(a) => commands::add(&ctx, a),
        Command::Search(a) => commands::search(&ctx, a),
        Command::Rerank(a) => commands::rerank(&ctx, a),
        Command::Dewarp(a) => commands::dewarp_cmd(&ctx, a),
        Command::Heatmap(a) => commands::heatmap(&ctx, a),
        Command::Eval(c) => commands::eval(&ctx, c),
        Command::Bench(a) => commands::bench(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = f.message.replace('\n', " ");
            if msg.starts_with("error") {
                eprintln!("{msg}");
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(f.code)
        }
    }
}
