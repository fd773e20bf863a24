//! Command-line front end.
//!
//! Exit codes are a stable contract: 0 success, 1 paper-suite failure,
//! 2 validation, 3 undefined regime, 4 I/O.

pub mod config;
pub mod report;
pub mod suite;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::experiment::{choice_events, validate, ExperimentError, Mode};
use crate::kinematics::{boost_time, SIMULTANEITY_TOL};
use crate::montecarlo::{distributions, run, SampleError};
use crate::stats::DEFAULT_K;
use crate::theories::{predict, TheoryError, TheoryModel};
use config::{describe, ConfigDocument};
use report::{write_records, Format, ResultBundle, RunMetadata};

/// Bundled scenario files, by name.
pub const SCENARIOS: &[(&str, &str)] = &[
    ("fig1_rest.cfg", include_str!("../../scenarios/fig1_rest.cfg")),
    ("fig1_moving.cfg", include_str!("../../scenarios/fig1_moving.cfg")),
    ("twoparticle_std.cfg", include_str!("../../scenarios/twoparticle_std.cfg")),
    ("twoparticle_bb.cfg", include_str!("../../scenarios/twoparticle_bb.cfg")),
    ("chsh_qm.cfg", include_str!("../../scenarios/chsh_qm.cfg")),
    ("chsh_bb.cfg", include_str!("../../scenarios/chsh_bb.cfg")),
];

pub fn scenario(name: &str) -> &'static str {
    SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .unwrap_or_else(|| panic!("no bundled scenario {name}"))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("undefined regime: {0}")]
    UndefinedRegime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    SuiteFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SuiteFailed(_) => 1,
            CliError::Validation(_) => 2,
            CliError::UndefinedRegime(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "multisim", version, about = "Preferred-frame QM vs Multisimultaneity interferometer simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the timing regime of a setup's choice events.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the exact outcome distribution as JSON.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: Option<TheoryModel>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Sample trials and write the records and report files.
    Run(RunArgs),
    /// Run every bundled scenario and check it against the acceptance table.
    PaperSuite {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long = "tolerance-k", default_value_t = DEFAULT_K)]
        tolerance_k: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub model: Option<TheoryModel>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "tolerance-k", default_value_t = DEFAULT_K)]
    pub tolerance_k: f64,
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ConfigDocument, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&path.display().to_string(), &text)
}

pub fn parse_config(name: &str, text: &str) -> Result<ConfigDocument, CliError> {
    let doc = ConfigDocument::parse(text).map_err(|e| CliError::Validation(vec![format!("{name}: {e}")]))?;
    let v = validate(&doc.experiment());
    if !v.is_empty() {
        return Err(CliError::Validation(describe(name, text, &v)));
    }
    Ok(doc)
}

fn theory_error(e: TheoryError) -> CliError {
    match e {
        TheoryError::UndefinedRegime => CliError::UndefinedRegime(
            "choice events are simultaneous in a device frame; Multisimultaneity gives no rule there".into(),
        ),
        other => CliError::Validation(vec![other.to_string()]),
    }
}

fn sample_error(e: SampleError) -> CliError {
    match e {
        SampleError::Theory(t) => theory_error(t),
        SampleError::Plan(p) => CliError::Validation(vec![p]),
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io(Path::new("<stdout>"), e)
}

pub fn cmd_classify(path: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let doc = load_config(path)?;
    let cfg = doc.experiment();
    let (a, b) = match choice_events(&cfg) {
        Ok(p) => p,
        Err(ExperimentError::SingleChoiceSite) => {
            writeln!(out, "timing: none (single choice site)").map_err(stdout_err)?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Validation(vec![e.to_string()])),
    };
    let timing = crate::experiment::timing_of(&a, &b, SIMULTANEITY_TOL);
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(stdout_err);
    w(out, format!("timing: {timing}"))?;
    w(out, format!("choice devices: A = {}, B = {}", a.device_id, b.device_id))?;
    w(
        out,
        format!("{:<10} {:<14} {:>8} {:>10} {:>10} {:>14} {:>14}", "device", "kind", "beta", "t_lab", "x_lab", "t'(A)", "t'(B)"),
    )?;
    for d in &cfg.devices {
        let f = d.frame().map_err(|e| CliError::Validation(vec![e.to_string()]))?;
        let kind = serde_json::to_value(d.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        w(
            out,
            format!(
                "{:<10} {:<14} {:>8} {:>10} {:>10} {:>14.9} {:>14.9}",
                d.id,
                kind,
                d.beta,
                d.t,
                d.x,
                boost_time(&a.event, &f),
                boost_time(&b.event, &f)
            ),
        )?;
    }
    Ok(())
}

/// The analytic distribution as a JSON value.
pub fn prediction_json(doc: &ConfigDocument, model: TheoryModel, alpha: f64, beta: f64) -> Result<serde_json::Value, CliError> {
    let d = predict(model, &doc.experiment(), alpha, beta).map_err(theory_error)?;
    let probabilities = match d.mode {
        Mode::SingleParticle => json!({
            "exclusive_plus": d.probs[0],
            "exclusive_minus": d.probs[1],
            "joint": d.joint_fire(),
            "none": d.no_fire(),
            "exclusive": d.exclusive(),
        }),
        Mode::TwoParticle => {
            let mut m = serde_json::Map::new();
            for (o, p) in d.iter() {
                m.insert(o.code().to_string(), json!(p));
            }
            m.insert("E".into(), json!(d.correlation()));
            serde_json::Value::Object(m)
        }
    };
    Ok(json!({
        "model": model,
        "mode": d.mode,
        "timing": d.timing,
        "alpha": alpha,
        "beta": beta,
        "probabilities": probabilities,
    }))
}

pub fn cmd_predict(
    path: &Path,
    model: Option<TheoryModel>,
    alpha: Option<f64>,
    beta: Option<f64>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let doc = load_config(path)?;
    let (da, db) = doc.experiment().default_settings();
    let v = prediction_json(&doc, model.unwrap_or(doc.model), alpha.unwrap_or(da), beta.unwrap_or(db))?;
    serde_json::to_writer_pretty(&mut *out, &v).map_err(|e| stdout_err(e.into()))?;
    writeln!(out).map_err(stdout_err)
}

/// Paths of the files written by `run`.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub records: PathBuf,
    pub report: PathBuf,
    pub bundle: ResultBundle,
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutputs, CliError> {
    let mut doc = load_config(&args.config)?;
    if let Some(m) = args.model {
        doc.model = m;
    }
    if let Some(t) = args.trials {
        doc.trials = t;
    }
    if let Some(s) = args.seed {
        doc.seed = s;
    }
    let plan = doc.plan();
    let analytic = distributions(&plan).map_err(sample_error)?;
    let records = run(&plan).map_err(sample_error)?;
    let meta = RunMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        format_version: 1,
        model: plan.model,
        mode: plan.config.mode,
        timing: crate::experiment::classify_timing(&plan.config, SIMULTANEITY_TOL).ok(),
        seed: plan.seed,
        trials_per_setting: plan.trials_per_setting,
        k: args.tolerance_k,
    };
    let bundle = ResultBundle::build(meta, analytic, &records);

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let ext = args.format.extension();
    let records_path = args.out.join(format!("records.{ext}"));
    let report_path = args.out.join(format!("report.{ext}"));
    let write = |path: &Path, f: &dyn Fn(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>| {
        let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
    };
    write(&records_path, &|w| write_records(w, &records, args.format))?;
    write(&report_path, &|w| bundle.write(w, args.format))?;
    Ok(RunOutputs {
        records: records_path,
        report: report_path,
        bundle,
    })
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Classify { config } => cmd_classify(&config, &mut out),
        Command::Predict { config, model, alpha, beta } => cmd_predict(&config, model, alpha, beta, &mut out),
        Command::Run(args) => cmd_run(&args).map(|o| {
            let _ = writeln!(out, "wrote {} and {}", o.records.display(), o.report.display());
        }),
        Command::PaperSuite {
            out: dir,
            trials,
            seed,
            tolerance_k,
        } => {
            let opts = suite::SuiteOptions {
                trials,
                seed,
                k: tolerance_k,
                out: dir,
            };
            suite::cmd_paper_suite(&opts, &suite::Engines::default(), &mut out)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
