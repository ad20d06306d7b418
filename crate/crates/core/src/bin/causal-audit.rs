//! `causal-audit`: command-line front end for the causal fairness library.

use std::collections::BTreeMap;
use std::io::{IsTerminal, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use causal_fairness::audit::{load_dataset, load_spec, run_audit, AuditConfig};
use causal_fairness::checks::{self, CheckReport};
use causal_fairness::dsl::spec_from_discrete;
use causal_fairness::estimators::{Backend, Metric};
use causal_fairness::scenarios::{ScenarioId, ScenarioSpec};
use causal_fairness::scm::PathSelection;
use causal_fairness::{Error, Result};

#[derive(Parser)]
#[command(
    name = "causal-audit",
    version,
    about = "Causal fairness audits of a decision process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full audit: metrics, assumption checks, path classification and legal mapping.
    Audit(AuditArgs),
    /// Fairness metrics only.
    Effects(AuditArgs),
    /// Assumption checks only.
    Check(CheckArgs),
    /// List and classify every path between the sensitive attribute and the outcome.
    Paths(PathsArgs),
    /// Sample a built-in scenario to CSV.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Exact,
    Linear,
    Plugin,
}

#[derive(Args)]
struct AuditArgs {
    /// Graph specification file.
    #[arg(long)]
    spec: String,
    /// Observational data (CSV, header = observed nodes).
    #[arg(long)]
    data: Option<String>,
    /// Sensitive attribute with baseline and comparison levels: `A=a0,a1`.
    #[arg(long)]
    sensitive: String,
    /// Outcome with its positive level: `Y=y`.
    #[arg(long)]
    outcome: String,
    /// Comma-separated subset of tv,te,ate,nde,nie,pse.
    #[arg(long)]
    metrics: Option<String>,
    /// Edges of the PSE path selection: `A>M,M>Y`.
    #[arg(long)]
    pi: Option<String>,
    #[arg(long, default_value_t = checks::DEFAULT_ALPHA)]
    alpha: f64,
    /// Bootstrap replicates for plug-in confidence intervals.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add-alpha smoothing for plug-in estimates.
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    spec: String,
    #[arg(long)]
    data: String,
    /// Optional `A=a0,a1`; enables positivity and ignorability checks.
    #[arg(long)]
    sensitive: Option<String>,
    /// Optional `Y=y`.
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long, default_value_t = checks::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct PathsArgs {
    #[arg(long)]
    spec: String,
    #[arg(long)]
    sensitive: String,
    #[arg(long)]
    outcome: String,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
}

#[derive(Args)]
struct GenerateArgs {
    /// One of visa, hiring, district, banknote-collider, love-confounder, popularity-mediation.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: String,
    /// Also write the scenario's graph specification.
    #[arg(long)]
    emit_spec: Option<String>,
    /// Override a scenario parameter: `--param p_Age=0.4`.
    #[arg(long = "param")]
    params: Vec<String>,
}

fn split_pair<'a>(flag: &str, text: &'a str) -> Result<(&'a str, &'a str)> {
    text.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| Error::Usage(format!("--{flag} expects NAME=VALUE, got '{text}'")))
}

fn parse_sensitive(text: &str) -> Result<(String, String, String)> {
    let (name, levels) = split_pair("sensitive", text)?;
    match levels.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [a0, a1] if !a0.is_empty() && !a1.is_empty() && a0 != a1 => {
            Ok((name.to_string(), a0.to_string(), a1.to_string()))
        }
        _ => Err(Error::Usage(format!(
            "--sensitive expects A=a0,a1 with two distinct levels, got '{text}'"
        ))),
    }
}

fn audit_config(args: &AuditArgs, run_checks: bool) -> Result<AuditConfig> {
    let (a, a0, a1) = parse_sensitive(&args.sensitive)?;
    let (y, positive) = split_pair("outcome", &args.outcome)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::Usage(format!(
            "--alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let mut cfg = AuditConfig::new(a, a0, a1, y, positive);
    cfg.spec_path = Some(args.spec.clone());
    cfg.data_path = args.data.clone();
    if let Some(m) = &args.metrics {
        cfg.metrics = m
            .split(',')
            .map(|s| Metric::parse(s.trim()))
            .collect::<Result<_>>()?;
        cfg.metrics.dedup();
    }
    cfg.selection = args.pi.as_deref().map(PathSelection::parse).transpose()?;
    cfg.alpha = args.alpha;
    cfg.bootstrap = args.bootstrap;
    cfg.seed = args.seed;
    cfg.smoothing = args.smoothing;
    cfg.run_checks = run_checks;
    cfg.backend = match args.backend {
        BackendArg::Auto => None,
        BackendArg::Exact => Some(Backend::Exact),
        BackendArg::Linear => Some(Backend::Linear),
        BackendArg::Plugin => Some(Backend::Plugin),
    };
    Ok(cfg)
}

fn emit(out: Option<&str>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.into(),
            message: e.to_string(),
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

fn run_report(args: &AuditArgs, run_checks: bool) -> Result<u8> {
    let report = run_audit(&audit_config(args, run_checks)?)?;
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Markdown => report.to_markdown(),
    };
    emit(args.out.as_deref(), &text)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(report.exit_code() as u8)
}

fn run_check(args: &CheckArgs) -> Result<u8> {
    if let (Some(s), Some(o)) = (&args.sensitive, &args.outcome) {
        let audit_args = AuditArgs {
            spec: args.spec.clone(),
            data: Some(args.data.clone()),
            sensitive: s.clone(),
            outcome: o.clone(),
            metrics: None,
            pi: None,
            alpha: args.alpha,
            bootstrap: None,
            seed: 0,
            smoothing: None,
            backend: BackendArg::Auto,
            format: args.format,
            out: args.out.clone(),
        };
        let mut cfg = audit_config(&audit_args, true)?;
        cfg.run_metrics = false;
        let report = run_audit(&cfg)?;
        let text = match args.format {
            Format::Json => {
                serde_json::to_string_pretty(
                    &serde_json::to_value(&report.checks).expect("serializable"),
                )
                .expect("serializable")
                    + "\n"
            }
            Format::Markdown => report.to_markdown(),
        };
        return emit(args.out.as_deref(), &text).map(|_| 0);
    }
    if args.sensitive.is_some() != args.outcome.is_some() {
        return Err(Error::Usage(
            "--sensitive and --outcome must be given together".into(),
        ));
    }
    let spec = load_spec(&args.spec)?;
    let data = load_dataset(&args.data, &spec)?;
    let g = &spec.graph;
    let mut reports: Vec<CheckReport> = vec![
        checks::check_markov(&data, g, args.alpha)?,
        checks::check_faithfulness(&data, g, args.alpha, checks::DEFAULT_MIN_EFFECT)?,
    ];
    reports.push(match checks::check_linearity(&data, g, args.alpha) {
        Err(Error::NoNumericChild) => {
            CheckReport::untestable("linearity", "no numeric child with parents")
        }
        r => r?,
    });
    reports.extend(checks::untestable_disclosures(g, None)?);
    let text = match args.format {
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::to_value(&reports).expect("serializable"))
                .expect("serializable")
                + "\n"
        }
        Format::Markdown => {
            let mut s = String::from("| assumption | status | violations |\n|---|---|---|\n");
            for r in &reports {
                s += &format!(
                    "| {} | {:?} | {} |\n",
                    r.assumption,
                    r.status,
                    r.violations.len()
                );
            }
            s
        }
    };
    emit(args.out.as_deref(), &text).map(|_| 0)
}

fn run_paths(args: &PathsArgs) -> Result<u8> {
    let spec = load_spec(&args.spec)?;
    let paths = spec
        .graph
        .classify_paths(&args.sensitive, &args.outcome, &spec.roles)?;
    let text = match args.format {
        Format::Json => {
            let rows: Vec<BTreeMap<&str, String>> = paths
                .iter()
                .map(|c| {
                    BTreeMap::from([
                        ("path", c.path.to_string()),
                        ("label", c.label.as_str().to_string()),
                    ])
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
        }
        Format::Markdown => {
            let mut s = String::from("| path | label |\n|---|---|\n");
            for c in &paths {
                s += &format!("| {} | {} |\n", c.path, c.label.as_str());
            }
            s
        }
    };
    emit(None, &text).map(|_| 0)
}

fn run_generate(args: &GenerateArgs) -> Result<u8> {
    let id: ScenarioId = args.scenario.parse()?;
    if args.n == 0 {
        return Err(Error::Usage("--n must be positive".into()));
    }
    let mut spec = ScenarioSpec::new(id);
    for p in &args.params {
        let (name, value) = split_pair("param", p)?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::Usage(format!("--param {name}: '{value}' is not a number")))?;
        spec = spec.with(name, v)?;
    }
    let scenario = spec.build()?;
    let data = scenario.sample(args.n, args.seed);
    emit(Some(&args.out), &data.to_csv_string())?;
    if let Some(path) = &args.emit_spec {
        let params: Vec<String> = scenario
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let meta = BTreeMap::from([
            ("scenario".to_string(), id.as_str().to_string()),
            ("params".to_string(), params.join("; ")),
        ]);
        let text = spec_from_discrete(&scenario.scm, &scenario.roles, meta).to_text();
        emit(Some(path), &text)?;
    }
    Ok(0)
}

fn report_error(e: &Error) {
    let color = std::io::stderr().is_terminal() && std::env::var_os("NO_COLOR").is_none();
    if color {
        eprintln!("\x1b[31merror:\x1b[0m {e}");
    } else {
        eprintln!("error: {e}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Audit(a) => run_report(a, true),
        Command::Effects(a) => run_report(a, false),
        Command::Check(a) => run_check(a),
        Command::Paths(a) => run_paths(a),
        Command::Generate(a) => run_generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            report_error(&e);
            ExitCode::from(1)
        }
    }
}
