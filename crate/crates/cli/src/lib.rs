//! Operator command line for the orchestration engine.
//!
//! Every subcommand is a thin adapter over `ranorch_core`; [`run_cli`] is
//! the whole binary minus process plumbing, so tests can drive it in-process.

use std::ffi::OsString;
use std::io::{BufRead, Write};

use clap::error::ErrorKind;
use clap::Parser;

pub mod app;
pub mod args;
pub mod commands;
mod render;

pub use app::{App, CliError, Exit, Settings};
pub use args::{Cli, Command};
pub use commands::{execute, Output};

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).target(env_logger::Target::Stderr).try_init();
}

/// Writes a result in the requested mode and returns the exit code.
fn emit(result: Result<Output, CliError>, json: bool, compact: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let output = result.unwrap_or_else(|e| Output { doc: serde_json::Value::Null, text: String::new(), error: Some(e) });
    if json {
        let doc = output.json();
        let text = if compact { serde_json::to_string(&doc) } else { serde_json::to_string_pretty(&doc) }.expect("JSON output serializes");
        let _ = writeln!(out, "{text}");
    } else {
        let _ = out.write_all(output.text.as_bytes());
        if let Some(e) = &output.error {
            let _ = writeln!(err, "error: {e}");
            if let Some(p) = &e.path {
                let _ = writeln!(err, "  at {p}");
            }
        }
    }
    let _ = out.flush();
    output.exit().code()
}

fn usage_error(e: clap::Error, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
        let _ = write!(out, "{}", e.render());
        return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { Exit::Validation.code() } else { 0 };
    }
    let message = e.render().to_string();
    if json {
        let first = message.lines().next().unwrap_or("usage error").trim_start_matches("error: ").to_owned();
        let _ = writeln!(out, "{}", CliError::validation(first).to_json());
    }
    let _ = write!(err, "{message}");
    Exit::Validation.code()
}

/// Parses `args` (including the program name) and runs the command.
/// `serve` reads its commands from `input`.
pub fn run_cli<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let wants_json = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => return usage_error(e, wants_json, out, err),
    };
    init_logging(cli.global.verbose);
    let json = cli.global.json;
    let settings = match Settings::resolve(&cli.global) {
        Ok(s) => s,
        Err(e) => return emit(Err(e), json, false, out, err),
    };
    let mut app = match App::new(settings) {
        Ok(a) => a,
        Err(e) => return emit(Err(e), json, false, out, err),
    };
    match &cli.command {
        Command::Serve => serve(&mut app, input, out, err),
        cmd => emit(execute(&mut app, cmd), json, false, out, err),
    }
}

/// One command per input line against a single long-lived simulation.
/// In `--json` mode each reply is one JSON document on its own line.
fn serve(app: &mut App, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let json = app.settings.json;
    let mut line = String::new();
    loop {
        line.clear();
        match input.read_line(&mut line) {
            Ok(0) => return 0,
            Ok(_) => {}
            Err(e) => {
                let _ = writeln!(err, "error: reading commands: {e}");
                return Exit::Infrastructure.code();
            }
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if matches!(trimmed, "quit" | "exit") {
            return 0;
        }
        let words = match shell_words::split(trimmed) {
            Ok(w) => w,
            Err(e) => {
                emit(Err(CliError::validation(format!("cannot split command line: {e}"))), json, true, out, err);
                continue;
            }
        };
        let parsed = match args::ServeLine::try_parse_from(&words) {
            Ok(p) => p,
            Err(e) => {
                if json && !matches!(e.kind(), ErrorKind::DisplayHelp) {
                    let first = e.render().to_string().lines().next().unwrap_or("usage error").trim_start_matches("error: ").to_owned();
                    let _ = writeln!(out, "{}", CliError::validation(first).to_json());
                } else {
                    let target: &mut dyn Write = if e.use_stderr() { err } else { out };
                    let _ = write!(target, "{}", e.render());
                }
                continue;
            }
        };
        emit(execute(app, &parsed.command), json, true, out, err);
    }
}
