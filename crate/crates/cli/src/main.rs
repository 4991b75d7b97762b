//! Command-line front end for the statmanifold engine.

mod args;
mod commands;
mod model;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Map, Value};
use statmanifold::family::spec::SCHEMA_VERSION;
use statmanifold::{Error, ErrorClass, ENGINE_VERSION};

use args::{Cli, Command, Format};
use commands::{Body, Outcome, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};

fn exit_for(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation => EXIT_VALIDATION,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Io => EXIT_IO,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("STATMANIFOLD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Invalid(format!("STATMANIFOLD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Invalid(e.to_string()))
}

/// Command name, subcommand arguments and shared knobs as one JSON object.
fn base_config(cmd: &Command) -> Value {
    let args = match cmd {
        Command::Validate(a) => serde_json::to_value(a),
        Command::Fisher(a) => serde_json::to_value(a),
        Command::Connection(a) => serde_json::to_value(a),
        Command::Curvature(a) => serde_json::to_value(a),
        Command::Geodesic(a) => serde_json::to_value(a),
        Command::CramerRao(a) => serde_json::to_value(a),
        Command::MseExpansion(a) => serde_json::to_value(a),
    };
    let mut config = Map::new();
    config.insert("command".into(), json!(cmd.name()));
    for part in [args, serde_json::to_value(cmd.common())] {
        if let Ok(Value::Object(m)) = part {
            config.extend(m);
        }
    }
    config.insert(
        "threads".into(),
        std::env::var("STATMANIFOLD_THREADS").map_or(Value::Null, Value::String),
    );
    Value::Object(config)
}

fn header(config: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA_VERSION));
    m.insert("engine_version".into(), json!(ENGINE_VERSION));
    m.insert("config".into(), config);
    m
}

fn render(config: Value, body: Body) -> String {
    match body {
        Body::Json(v) => {
            let mut out = header(config);
            out.insert("result".into(), v);
            let mut s = serde_json::to_string_pretty(&Value::Object(out)).expect("values serialize");
            s.push('\n');
            s
        }
        Body::Csv(table) => {
            let head = serde_json::to_string(&Value::Object(header(config))).expect("values serialize");
            format!("# {head}\n{table}")
        }
    }
}

fn emit(cmd: &Command, text: &str) -> Result<(), Error> {
    match &cmd.common().output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn dispatch(cmd: &Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Validate(a) => commands::validate(a),
        Command::Fisher(a) => commands::fisher(a),
        Command::Connection(a) => commands::connection(a),
        Command::Curvature(a) => commands::curvature(a),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::CramerRao(a) => commands::cramer_rao(a),
        Command::MseExpansion(a) => commands::mse_expansion(a),
    }
}

fn run(cmd: &Command) -> i32 {
    let mut config = base_config(cmd);
    let result = configure_threads().and_then(|_| dispatch(cmd));
    let (text, status) = match result {
        Ok(outcome) => {
            if let (Value::Object(c), Value::Object(extra)) = (&mut config, outcome.resolved) {
                c.extend(extra);
            }
            (render(config, outcome.body), outcome.status)
        }
        Err(e) => {
            eprintln!("statmanifold {}: {e}", cmd.name());
            let status = exit_for(&e);
            if status == EXIT_IO || cmd.common().format == Format::Csv {
                return status;
            }
            let class = match e.class() {
                ErrorClass::Validation => "validation",
                ErrorClass::Numerical => "numerical",
                ErrorClass::Io => "io",
            };
            let body = Body::Json(json!({ "error": { "class": class, "message": e.to_string() } }));
            (render(config, body), status)
        }
    };
    match emit(cmd, &text) {
        Ok(()) => status,
        Err(e) => {
            eprintln!("statmanifold {}: {e}", cmd.name());
            EXIT_IO
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { EXIT_OK as u8 });
        }
    };
    ExitCode::from(run(&cli.command) as u8)
}
