//! `hscale`: run rate studies, the verification suite, or re-render tables.
//!
//! Exit codes: 0 success, 1 study or verification failure, 2 configuration or usage error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use hscale::harness::tables::{to_json_string, SCHEMA_VERSION};
use hscale::harness::{emit_tables, run_study, verify_suite, RateStudyConfig, RateStudyResult, Rule, TableFormat};
use serde::{Deserialize, Serialize};

use config::{parse_ladder, parse_list, FileConfig, StudyFlags};

#[derive(Parser, Debug)]
#[command(
    name = "hscale",
    version,
    about = "Tikhonov regularization in Hilbert scales: rate studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate study on the periodic data smoothing problem.
    Smoothing(StudyArgs),
    /// Rate study on the ODE coefficient identification problem.
    ParamId(StudyArgs),
    /// Run the invariant battery and write a report.
    Verify(CommonArgs),
    /// Re-render a results.json as csv, markdown or json.
    Tables(TablesArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    /// Override a config value, e.g. `--set param_id.grid_n=100` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Parameter choice rule.
    #[arg(long, value_parser = parse_rule)]
    rule: Option<Rule>,
    /// Penalty indices, comma separated.
    #[arg(long, value_parser = list_arg)]
    s: Option<FloatList>,
    /// Smoothness indices, comma separated; each selects a reference solution.
    #[arg(long, value_parser = list_arg)]
    u: Option<FloatList>,
    /// Error norm indices r, comma separated.
    #[arg(long, value_parser = list_arg)]
    norms: Option<FloatList>,
    /// Ladder δ_j = δ₀·2^{-j} for j = j0..j1.
    #[arg(long, value_name = "j0..j1", value_parser = parse_ladder)]
    deltas: Option<(u32, u32)>,
    /// Noise realizations per ladder point.
    #[arg(long)]
    reps: Option<u32>,
}

#[derive(Args, Debug)]
struct TablesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input results.json.
    #[arg(long, value_name = "PATH")]
    input: Option<String>,
    /// csv, markdown or json.
    #[arg(long)]
    format: Option<String>,
}

/// A comma-separated list taken as one flag value.
#[derive(Debug, Clone)]
struct FloatList(Vec<f64>);

fn list_arg(s: &str) -> Result<FloatList, String> {
    parse_list(s).map(FloatList)
}

fn parse_rule(s: &str) -> Result<Rule, String> {
    s.parse::<Rule>().map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

type Outcome = Result<(), Failure>;

fn config_err(e: anyhow::Error) -> Failure {
    Failure::Config(e)
}

fn run_err(e: anyhow::Error) -> Failure {
    Failure::Run(e)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    schema_version: u32,
    subcommand: &'a str,
    seed: u64,
    noise_generator: &'static str,
    /// Re-run with `--config <out>/config.toml` to reproduce the outputs.
    config_file: &'static str,
    config: &'a FileConfig,
    outputs: Vec<String>,
}

fn effective_config(common: &CommonArgs) -> Result<FileConfig, Failure> {
    let mut cfg = FileConfig::load(common.config.as_deref())
        .and_then(|c| c.apply_overrides(&common.overrides))
        .map_err(config_err)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_outputs(out: &Path, subcommand: &str, cfg: &FileConfig, files: &[(&str, String)]) -> Outcome {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(run_err)?;
    let mut names = Vec::new();
    let toml = cfg.to_toml().map_err(run_err)?;
    for (name, body) in files
        .iter()
        .map(|(n, b)| (*n, b.as_str()))
        .chain([("config.toml", toml.as_str())])
    {
        let path = out.join(name);
        fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(run_err)?;
        names.push(name.to_string());
    }
    let manifest = Manifest {
        tool: "hscale",
        version: env!("CARGO_PKG_VERSION"),
        core_version: hscale::VERSION,
        schema_version: SCHEMA_VERSION,
        subcommand,
        seed: cfg.seed,
        noise_generator: hscale::harness::NoiseModel::GENERATOR,
        config_file: "config.toml",
        config: cfg,
        outputs: names,
    };
    let body = to_json_string(&manifest).map_err(|e| run_err(e.into()))?;
    fs::write(out.join("manifest.json"), body)
        .context("writing manifest.json")
        .map_err(run_err)
}

fn run_studies(name: &str, configs: &[RateStudyConfig], cfg: &FileConfig, out: &Path) -> Outcome {
    for c in configs {
        c.validate().map_err(|e| config_err(e.into()))?;
    }
    let mut results: Vec<RateStudyResult> = Vec::new();
    for c in configs {
        let res = run_study(c).map_err(|e| match e {
            hscale::Error::Parameter(_) | hscale::Error::Config(_) => config_err(e.into()),
            other => run_err(anyhow!("{} {}: {other}", c.problem.reference_name(), c.problem.s())),
        })?;
        let kappas: Vec<String> = res
            .norms
            .iter()
            .map(|n| match n.fit {
                Some(f) => format!("κ̂(r={}) = {:.3}", n.r, f.kappa_hat),
                None => format!("κ̂(r={}) = n/a", n.r),
            })
            .collect();
        eprintln!(
            "{name} {} s={} u={} {}: α ~ δ^{:.3}, {}{}",
            res.reference,
            res.s,
            res.u,
            res.rule,
            res.alpha_exponent,
            kappas.join(", "),
            if res.failures > 0 {
                format!(" ({} failed cells)", res.failures)
            } else {
                String::new()
            }
        );
        results.push(res);
    }
    let render = |f| emit_tables(&results, f).map_err(|e| run_err(e.into()));
    let files = [
        ("results.csv", render(TableFormat::Csv)?),
        ("results.json", render(TableFormat::Json)?),
        ("results.md", render(TableFormat::Markdown)?),
    ];
    write_outputs(out, name, cfg, &files)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn study(args: StudyArgs, param_id: bool) -> Outcome {
    let mut cfg = effective_config(&args.common)?;
    let flags = StudyFlags {
        rule: args.rule,
        s: args.s.map(|l| l.0),
        u: args.u.map(|l| l.0),
        norms: args.norms.map(|l| l.0),
        deltas: args.deltas,
        reps: args.reps,
    };
    if param_id {
        cfg.param_id.apply(&flags);
    } else {
        cfg.smoothing.apply(&flags);
    }
    if args.common.print_config {
        print!("{}", cfg.to_toml().map_err(config_err)?);
        return Ok(());
    }
    let (name, configs) = if param_id {
        ("param-id", cfg.param_id.studies(cfg.seed))
    } else {
        ("smoothing", cfg.smoothing.studies(cfg.seed))
    };
    let configs = configs.map_err(config_err)?;
    run_studies(name, &configs, &cfg, &args.common.out)
}

fn verify(args: CommonArgs) -> Outcome {
    let cfg = effective_config(&args)?;
    if args.print_config {
        print!("{}", cfg.to_toml().map_err(config_err)?);
        return Ok(());
    }
    let report = verify_suite();
    for c in &report.checks {
        println!(
            "{:<4} {:<34} measured {:>12.4e}  threshold {:>10.3e}  margin {:>11.4e}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.margin
        );
    }
    let body = to_json_string(&report).map_err(|e| run_err(e.into()))?;
    write_outputs(&args.out, "verify", &cfg, &[("verify.json", body)])?;
    let failed = report.failed().len();
    if failed > 0 {
        return Err(Failure::Run(anyhow!(
            "{failed} of {} checks failed",
            report.checks.len()
        )));
    }
    println!("all {} checks passed", report.checks.len());
    Ok(())
}

#[derive(Deserialize)]
struct ResultsDocument {
    schema_version: u32,
    studies: Vec<RateStudyResult>,
}

fn tables(args: TablesArgs) -> Outcome {
    let mut cfg = effective_config(&args.common)?;
    if let Some(i) = args.input {
        cfg.tables.input = i;
    }
    if let Some(f) = args.format {
        cfg.tables.format = f;
    }
    if args.common.print_config {
        print!("{}", cfg.to_toml().map_err(config_err)?);
        return Ok(());
    }
    let format: TableFormat = cfg
        .tables
        .format
        .parse()
        .map_err(|e: hscale::Error| config_err(e.into()))?;
    let text = fs::read_to_string(&cfg.tables.input)
        .with_context(|| format!("reading {}", cfg.tables.input))
        .map_err(config_err)?;
    let doc: ResultsDocument = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", cfg.tables.input))
        .map_err(config_err)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(config_err(anyhow!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            cfg.tables.input,
            doc.schema_version
        )));
    }
    let body = emit_tables(&doc.studies, format).map_err(|e| run_err(e.into()))?;
    print!("{body}");
    let ext = match format {
        TableFormat::Csv => "csv",
        TableFormat::Markdown => "md",
        TableFormat::Json => "json",
    };
    write_outputs(
        &args.common.out,
        "tables",
        &cfg,
        &[(&format!("tables.{ext}"), body.clone())],
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Smoothing(a) => study(a, false),
        Command::ParamId(a) => study(a, true),
        Command::Verify(a) => verify(a),
        Command::Tables(a) => tables(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Run(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
