//! The `nthought` command line. [`dispatch`] parses arguments, resolves
//! settings (flags over `--config` JSON over defaults), validates them
//! before any compute, runs the subcommand and records a [`RunManifest`]
//! next to its file outputs.
//!
//! Exit codes: 0 success, 1 runtime failure or replay mismatch, 2 usage
//! error.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod settings;

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use serde::Serialize;
use serde_json::{Map, Value};

use args::{Cli, Command, Common};
pub use manifest::RunManifest;
use manifest::{hash_all, manifest_path};
use settings::{
    EncodeSettings, EvalSettings, ExpandSettings, GenerateSettings, InspectSettings, RetrieveSettings, Settings,
    TrainSettings,
};

/// Invalid invocation: reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

/// Runs the command line against the process's standard streams.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`dispatch`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    if cli.version {
        let v = serde_json::json!({
            "name": "nthought",
            "version": env!("CARGO_PKG_VERSION"),
            "checkpoint_version": nthought::models::CHECKPOINT_VERSION,
        });
        let _ = writeln!(out, "{v}");
        return 0;
    }
    let Some(command) = cli.command else {
        let _ = write!(err, "{}", Cli::command().render_usage());
        let _ = writeln!(err, "\nno subcommand given; see --help");
        return 2;
    };
    match run_command(command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

type Runner<S> = fn(&S, &mut dyn Write, &mut dyn Write) -> Result<()>;

fn run_command(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Train(a) => execute::<TrainSettings>(&a, &a.common, commands::run_train, out, err),
        Command::Encode(a) => execute::<EncodeSettings>(&a, &a.common, commands::run_encode, out, err),
        Command::Eval(a) => execute::<EvalSettings>(&a, &a.common, commands::run_eval, out, err),
        Command::Retrieve(a) => execute::<RetrieveSettings>(&a, &a.common, commands::run_retrieve, out, err),
        Command::Generate(a) => execute::<GenerateSettings>(&a, &a.common, commands::run_generate, out, err),
        Command::ExpandVocab(a) => execute::<ExpandSettings>(&a, &a.common, commands::run_expand, out, err),
        Command::InspectCkpt(a) => execute::<InspectSettings>(&a, &a.common, commands::run_inspect, out, err),
        Command::Replay(a) => replay(&a.manifest, a.out_dir.as_deref(), out, err),
    }
}

/// Flags as a JSON object, dropping absent options and unset switches.
fn explicit_flags(flags: &impl Serialize) -> Result<Map<String, Value>> {
    let Value::Object(map) = serde_json::to_value(flags)? else {
        unreachable!("flag structs serialize to objects");
    };
    Ok(map
        .into_iter()
        .filter(|(_, v)| !v.is_null() && *v != Value::Bool(false))
        .collect())
}

/// Layers explicit flags over the `--config` object.
pub fn resolve<S: Settings>(flags: &impl Serialize, config: Option<&Path>) -> Result<S> {
    let mut base = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("reading {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text).map_err(|e| usage(format!("parsing {}: {e}", p.display())))? {
                Value::Object(m) => m,
                _ => return Err(usage(format!("{} must hold a JSON object", p.display()))),
            }
        }
        None => Map::new(),
    };
    base.extend(explicit_flags(flags)?);
    serde_json::from_value(Value::Object(base)).map_err(|e| usage(format!("{}: {e}", S::NAME)))
}

fn execute<S: Settings>(
    flags: &impl Serialize,
    common: &Common,
    runner: Runner<S>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let settings: S = resolve(flags, common.config.as_deref())?;
    settings.validate().map_err(usage)?;
    if common.dump_config {
        writeln!(out, "{}", serde_json::to_string_pretty(&settings)?)?;
        return Ok(0);
    }
    run_and_record(&settings, runner, out, err)?;
    Ok(0)
}

fn run_and_record<S: Settings>(
    settings: &S,
    runner: Runner<S>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Option<RunManifest>> {
    runner(settings, out, err)?;
    let outputs = settings.outputs();
    let Some(primary) = outputs.first() else {
        return Ok(None);
    };
    let manifest = RunManifest {
        tool: "nthought".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: S::NAME.into(),
        settings: serde_json::to_value(settings)?,
        seed: settings.seed(),
        inputs: hash_all(&settings.inputs())?.into_iter().collect(),
        outputs: hash_all(&outputs)?,
    };
    manifest.write(&manifest_path(primary))?;
    Ok(Some(manifest))
}

fn replay_as<S: Settings>(
    m: &RunManifest,
    dir: &Path,
    runner: Runner<S>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool> {
    let mut settings: S =
        serde_json::from_value(m.settings.clone()).map_err(|e| usage(format!("manifest settings: {e}")))?;
    for (path, want) in &m.inputs {
        let got = manifest::sha256_file(Path::new(path))?;
        if got != *want {
            return Err(usage(format!("input {path} changed since the recorded run")));
        }
    }
    settings.redirect(dir);
    let (mut quiet_out, mut quiet_err) = (io::sink(), io::sink());
    let replayed = run_and_record(&settings, runner, &mut quiet_out, &mut quiet_err)?
        .context("the recorded run wrote no files")?;
    let mut same = replayed.outputs.len() == m.outputs.len();
    for ((orig, want), (new, got)) in m.outputs.iter().zip(&replayed.outputs) {
        let ok = want == got;
        same &= ok;
        writeln!(out, "{} {orig} {new}", if ok { "identical" } else { "DIFFERS" })?;
    }
    if !same {
        writeln!(err, "replay did not reproduce the recorded outputs")?;
    }
    Ok(same)
}

fn fresh_dir() -> Result<PathBuf> {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let dir = std::env::temp_dir().join(format!("nthought-replay-{}-{nanos}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn replay(manifest: &Path, out_dir: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let m = RunManifest::read(manifest).map_err(usage)?;
    let (dir, temporary) = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            (d.to_path_buf(), false)
        }
        None => (fresh_dir()?, true),
    };
    let result = match m.subcommand.as_str() {
        "train" => replay_as::<TrainSettings>(&m, &dir, commands::run_train, out, err),
        "encode" => replay_as::<EncodeSettings>(&m, &dir, commands::run_encode, out, err),
        "eval" => replay_as::<EvalSettings>(&m, &dir, commands::run_eval, out, err),
        "retrieve" => replay_as::<RetrieveSettings>(&m, &dir, commands::run_retrieve, out, err),
        "generate" => replay_as::<GenerateSettings>(&m, &dir, commands::run_generate, out, err),
        "expand-vocab" => replay_as::<ExpandSettings>(&m, &dir, commands::run_expand, out, err),
        other => Err(usage(format!("cannot replay subcommand {other:?}"))),
    };
    if temporary {
        let _ = std::fs::remove_dir_all(&dir);
    }
    Ok(if result? { 0 } else { 1 })
}
