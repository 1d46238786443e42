//! The `cloudgate` command line.
//!
//! [`run`] takes the argument vector and two writers so that tests can drive
//! it in-process. Exit codes follow [`ExitStatus`].

mod table;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cloudgate_core::formats::{export_dot, format_model_text, parse_model_text, DotOptions};
use cloudgate_core::procedure::{suggest_obstacles, suggest_tactics, Suggestion};
use cloudgate_core::repository::{load_repository, Entry, ObstacleFilter, TacticFilter};
use cloudgate_core::risk::{assess, CoverageStatus};
use cloudgate_core::{
    coverage_check, risk_of, CheckReport, Consequence, DatasetSource, GoalModel, Likelihood, MigrationType, Repository,
    RiskLevel, TacticCategory,
};
use serde_json::Value;

use crate::table::Table;

/// Process exit codes. Stable across releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Uncovered or unassessed obstacles, structural violations, or
    /// dataset integrity errors.
    CheckFailed = 1,
    Usage = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Parser)]
#[command(name = "cloudgate", version, about = "Goal-obstacle analysis for cloud migration")]
struct Cli {
    /// Dataset file to use instead of the bundled catalogue.
    #[arg(long, global = true, env = "CLOUDGATE_DATASET")]
    dataset: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Query the evidence repository.
    #[command(subcommand)]
    Repo(RepoCmd),
    /// Print the risk level for a likelihood and consequence.
    Risk { likelihood: Likelihood, consequence: Consequence },
    /// Check that every serious obstacle in a model is resolved.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Threshold::High)]
        threshold: Threshold,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Rate an obstacle and rewrite the model file canonically.
    Assess {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        likelihood: Likelihood,
        #[arg(long)]
        consequence: Consequence,
        #[arg(long = "override")]
        override_level: Option<RiskLevel>,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Suggest repository obstacles or tactics for a model.
    Suggest {
        what: SuggestWhat,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        node: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Rewrite a model file in canonical form.
    Fmt { file: PathBuf },
    /// Export a model.
    #[command(subcommand)]
    Export(ExportCmd),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = cloudgate_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "sessions")]
        sessions_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum RepoCmd {
    /// List catalogue entries, optionally filtered.
    List(ListArgs),
    /// Show one entry by id (G1, O21, T41, S7).
    Show {
        id: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the dataset integrity check.
    Verify {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Debug, Args)]
struct ListArgs {
    what: ListWhat,
    #[arg(long)]
    goal: Option<String>,
    #[arg(long)]
    migration_type: Option<MigrationType>,
    #[arg(long)]
    obstacle: Option<String>,
    #[arg(long)]
    category: Option<TacticCategory>,
    /// Leave out universal tactics when listing by obstacle.
    #[arg(long)]
    no_universal: bool,
    #[arg(long)]
    text: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum ExportCmd {
    /// Graphviz DOT.
    Dot {
        #[arg(long)]
        model: PathBuf,
        /// Output file, `-` for standard output.
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        #[arg(long)]
        show_risk: bool,
        #[arg(long)]
        show_ids: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ListWhat {
    Goals,
    Obstacles,
    Tactics,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuggestWhat {
    Obstacles,
    Tactics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Threshold {
    High,
    Extreme,
    VeryExtreme,
}

impl From<Threshold> for RiskLevel {
    fn from(t: Threshold) -> RiskLevel {
        match t {
            Threshold::High => RiskLevel::H,
            Threshold::Extreme => RiskLevel::E,
            Threshold::VeryExtreme => RiskLevel::V,
        }
    }
}

/// A failure with its exit status; the message goes to standard error.
struct Failure(ExitStatus, String);

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure(ExitStatus::Usage, msg.to_string())
}

fn io(msg: impl std::fmt::Display) -> Failure {
    Failure(ExitStatus::Io, msg.to_string())
}

type Outcome = Result<ExitStatus, Failure>;

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return status;
        }
    };
    match dispatch(cli, out) {
        Ok(status) => status,
        Err(Failure(status, msg)) => {
            if !msg.is_empty() {
                let _ = writeln!(err, "error: {msg}");
            }
            status
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Outcome {
    let dataset = cli.dataset;
    let repo = || -> Result<Repository, Failure> {
        let source = dataset.clone().map(DatasetSource::Path).unwrap_or_default();
        load_repository(&source).map_err(|e| io(format!("cannot load dataset: {e}")))
    };
    match cli.command {
        Cmd::Repo(RepoCmd::List(args)) => repo_list(&repo()?, args, out),
        Cmd::Repo(RepoCmd::Show { id, format }) => repo_show(&repo()?, &id, format, out),
        Cmd::Repo(RepoCmd::Verify { format }) => repo_verify(&repo()?, format, out),
        Cmd::Risk { likelihood, consequence } => {
            emit(out, format_args!("{}\n", risk_of(likelihood, consequence)))?;
            Ok(ExitStatus::Success)
        }
        Cmd::Check { model, threshold, format } => {
            let m = load_model(&model, &repo()?)?;
            check(&m, threshold.into(), format, out)
        }
        Cmd::Assess { model, node, likelihood, consequence, override_level, note } => {
            let mut m = load_model(&model, &repo()?)?;
            let a = assess(&mut m, &node, likelihood, consequence, &note, override_level).map_err(usage)?;
            write_model(&model, &m)?;
            emit(out, format_args!("{node}: {likelihood} x {consequence} = {}", a.computed))?;
            if let Some(o) = a.override_level {
                emit(out, format_args!(" (overridden to {o})"))?;
            }
            emit(out, format_args!("\n"))?;
            Ok(ExitStatus::Success)
        }
        Cmd::Suggest { what, model, node, format } => {
            let r = repo()?;
            let m = load_model(&model, &r)?;
            suggest(&r, &m, what, node.as_deref(), format, out)
        }
        Cmd::Fmt { file } => {
            let m = load_model(&file, &repo()?)?;
            write_model(&file, &m)?;
            Ok(ExitStatus::Success)
        }
        Cmd::Export(ExportCmd::Dot { model, output, show_risk, show_ids }) => {
            let m = load_model(&model, &repo()?)?;
            let dot = export_dot(&m, DotOptions { show_risk, show_ids }).map_err(usage)?;
            if output.as_os_str() == "-" {
                emit(out, format_args!("{dot}"))?;
            } else {
                std::fs::write(&output, dot).map_err(|e| io(format!("{}: {e}", output.display())))?;
            }
            Ok(ExitStatus::Success)
        }
        Cmd::Serve { port, host, sessions_dir } => {
            let config = cloudgate_service::ServiceConfig { host, port, dataset, sessions_dir };
            serve(config, out)
        }
    }
}

fn emit(out: &mut dyn Write, args: std::fmt::Arguments) -> Result<(), Failure> {
    out.write_fmt(args).map_err(|e| match e.kind() {
        // The reader went away (`| head`); nothing left worth reporting.
        std::io::ErrorKind::BrokenPipe => Failure(ExitStatus::Success, String::new()),
        _ => io(format!("cannot write output: {e}")),
    })
}

fn emit_json(out: &mut dyn Write, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    emit(out, format_args!("{text}\n"))
}

fn load_model(path: &Path, repo: &Repository) -> Result<GoalModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io(format!("{}: {e}", path.display())))?;
    parse_model_text(&text, repo).map_err(|e| usage(format!("{}:{e}", path.display())))
}

fn write_model(path: &Path, model: &GoalModel) -> Result<(), Failure> {
    let text = format_model_text(model).map_err(usage)?;
    std::fs::write(path, text).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn repo_list(repo: &Repository, args: ListArgs, out: &mut dyn Write) -> Outcome {
    let json = args.format == Format::Json;
    match args.what {
        ListWhat::Goals => {
            if json {
                emit_json(out, &serde_json::to_value(repo.goals()).expect("serializable"))?;
            } else {
                let mut t = Table::new(["ID", "NAME", "STUDIES"]);
                for g in repo.goals() {
                    t.row([g.id.clone(), g.name.clone(), g.source_studies.len().to_string()]);
                }
                emit(out, format_args!("{t}"))?;
            }
        }
        ListWhat::Obstacles => {
            let filter = ObstacleFilter { goal: args.goal, migration_type: args.migration_type, text: args.text };
            let found = repo.query_obstacles(&filter).map_err(usage)?;
            if json {
                emit_json(out, &serde_json::to_value(&found).expect("serializable"))?;
            } else {
                let mut t = Table::new(["ID", "NAME", "GOALS", "TYPES"]);
                for o in found {
                    let types: Vec<&str> = o.migration_types.iter().map(|m| m.as_str()).collect();
                    t.row([o.id.clone(), o.name.clone(), o.impacted_goals.join(","), types.join(",")]);
                }
                emit(out, format_args!("{t}"))?;
            }
        }
        ListWhat::Tactics => {
            let filter =
                TacticFilter { obstacle: args.obstacle, category: args.category, include_universal: !args.no_universal };
            let mut found = repo.query_tactics(&filter).map_err(usage)?;
            if let Some(text) = args.text.as_deref().map(str::to_lowercase) {
                found.retain(|m| {
                    m.tactic.name.to_lowercase().contains(&text) || m.tactic.definition.to_lowercase().contains(&text)
                });
            }
            if json {
                emit_json(out, &serde_json::to_value(&found).expect("serializable"))?;
            } else {
                let mut t = Table::new(["ID", "NAME", "CATEGORY", "UNIVERSAL"]);
                for m in found {
                    let universal = if m.tactic.universal { "yes" } else { "no" };
                    t.row([m.tactic.id.clone(), m.tactic.name.clone(), m.tactic.category.to_string(), universal.into()]);
                }
                emit(out, format_args!("{t}"))?;
            }
        }
    }
    Ok(ExitStatus::Success)
}

fn repo_show(repo: &Repository, id: &str, format: Format, out: &mut dyn Write) -> Outcome {
    let entry = repo.get_entry(id).map_err(usage)?;
    if format == Format::Json {
        emit_json(out, &serde_json::to_value(entry).expect("serializable"))?;
        return Ok(ExitStatus::Success);
    }
    let mut lines = Vec::new();
    let notes = match entry {
        Entry::Goal(g) => {
            lines.push(format!("{}  {}", g.id, g.name));
            lines.push(g.definition.clone());
            lines.push(format!("studies: {}", g.source_studies.join(", ")));
            &g.data_quality_notes
        }
        Entry::Obstacle(o) => {
            lines.push(format!("{}  {}", o.id, o.name));
            lines.push(o.definition.clone());
            lines.push(format!("impacted goals: {}", o.impacted_goals.join(", ")));
            let types: Vec<&str> = o.migration_types.iter().map(|m| m.as_str()).collect();
            lines.push(format!("migration types: {}", types.join(", ")));
            lines.push(format!("studies: {}", o.source_studies.join(", ")));
            &o.data_quality_notes
        }
        Entry::Tactic(t) => {
            lines.push(format!("{}  {}", t.id, t.name));
            lines.push(t.definition.clone());
            lines.push(format!("category: {}", t.category));
            if t.universal {
                lines.push("applies to every obstacle".into());
            } else {
                lines.push(format!("resolves: {}", t.related_obstacles.join(", ")));
            }
            lines.push(format!("studies: {}", t.source_studies.join(", ")));
            &t.data_quality_notes
        }
        Entry::Study(s) => {
            lines.push(format!("{}  ({})", s.id, s.year));
            lines.push(s.citation.clone());
            &Vec::new()
        }
    };
    lines.extend(notes.iter().map(|n| format!("note: {n}")));
    emit(out, format_args!("{}\n", lines.join("\n")))?;
    Ok(ExitStatus::Success)
}

fn repo_verify(repo: &Repository, format: Format, out: &mut dyn Write) -> Outcome {
    let report = repo.integrity_check();
    if format == Format::Json {
        emit_json(out, &serde_json::to_value(&report).expect("serializable"))?;
    } else {
        emit(
            out,
            format_args!(
                "dataset {}: {} goals, {} obstacles, {} tactics, {} studies\n",
                repo.version(),
                repo.goals().len(),
                repo.obstacles().len(),
                repo.tactics().len(),
                repo.studies().len()
            ),
        )?;
        for e in &report.errors {
            emit(out, format_args!("error: {e}\n"))?;
        }
        for w in &report.warnings {
            emit(out, format_args!("warning: {w}\n"))?;
        }
        emit(out, format_args!("{} errors, {} warnings\n", report.errors.len(), report.warnings.len()))?;
    }
    Ok(if report.is_clean() { ExitStatus::Success } else { ExitStatus::CheckFailed })
}

fn status_word(s: CoverageStatus) -> &'static str {
    match s {
        CoverageStatus::Covered => "covered",
        CoverageStatus::Uncovered => "uncovered",
        CoverageStatus::Unassessed => "unassessed",
    }
}

/// Renders a report as a table. One row per obstacle, then violations and
/// a summary line.
pub fn render_check(report: &CheckReport) -> String {
    let mut t = Table::new(["NODE", "STATUS", "RISK", "REASON", "TACTICS", "NAME"]);
    for v in &report.verdicts {
        let reason = v
            .reason
            .map(|r| serde_json::to_value(r).expect("serializable").as_str().unwrap_or_default().to_string())
            .unwrap_or_else(|| "-".into());
        t.row([
            v.node.clone(),
            status_word(v.status).into(),
            v.effective_risk.map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
            reason,
            if v.tactics.is_empty() { "-".into() } else { v.tactics.join(",") },
            v.name.clone(),
        ]);
    }
    let mut s = format!("threshold: {} ({})\n{t}", report.threshold.describe(), report.threshold);
    for v in &report.violations {
        s.push_str(&format!("violation: {v}\n"));
    }
    let (uncovered, unassessed) = (report.uncovered().len(), report.unassessed().len());
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    s.push_str(&format!(
        "{verdict}: {uncovered} uncovered, {unassessed} unassessed, {} violations\n",
        report.violations.len()
    ));
    s
}

fn check(model: &GoalModel, threshold: RiskLevel, format: Format, out: &mut dyn Write) -> Outcome {
    let report = coverage_check(model, threshold);
    if format == Format::Json {
        let mut v = serde_json::to_value(&report).expect("serializable");
        v["passed"] = Value::Bool(report.passed());
        emit_json(out, &v)?;
    } else {
        emit(out, format_args!("{}", render_check(&report)))?;
    }
    Ok(if report.passed() { ExitStatus::Success } else { ExitStatus::CheckFailed })
}

fn suggestion_table(rows: &[Suggestion]) -> Table {
    let mut t = Table::new(["ID", "GOALS", "STUDIES", "UNIVERSAL", "TARGETS", "NAME"]);
    for s in rows {
        t.row([
            s.repo_id.clone(),
            s.matched_goals.to_string(),
            s.study_count.to_string(),
            if s.universal { "yes".into() } else { "no".into() },
            s.targets.join(","),
            s.name.clone(),
        ]);
    }
    t
}

fn suggest(
    repo: &Repository,
    model: &GoalModel,
    what: SuggestWhat,
    node: Option<&str>,
    format: Format,
    out: &mut dyn Write,
) -> Outcome {
    match what {
        SuggestWhat::Obstacles => {
            let found = suggest_obstacles(model, repo).map_err(usage)?;
            if format == Format::Json {
                emit_json(out, &serde_json::to_value(&found).expect("serializable"))?;
            } else {
                emit(out, format_args!("{}", suggestion_table(&found)))?;
            }
        }
        SuggestWhat::Tactics => {
            let node = node.ok_or_else(|| usage("`suggest tactics` needs --node"))?;
            let found = suggest_tactics(model, repo, node).map_err(usage)?;
            if format == Format::Json {
                emit_json(out, &serde_json::to_value(&found).expect("serializable"))?;
            } else {
                emit(out, format_args!("{}", suggestion_table(&found.suggestions)))?;
                if let Some(n) = &found.notice {
                    emit(out, format_args!("note: {n}\n"))?;
                }
            }
        }
    }
    Ok(ExitStatus::Success)
}

fn serve(config: cloudgate_service::ServiceConfig, out: &mut dyn Write) -> Outcome {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| io(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let handle = cloudgate_service::serve(config).await.map_err(io)?;
        emit(out, format_args!("listening on http://{}\n", handle.local_addr))?;
        let _ = out.flush();
        tokio::signal::ctrl_c().await.map_err(|e| io(format!("cannot wait for ctrl-c: {e}")))?;
        handle.shutdown().await.map_err(io)?;
        Ok(ExitStatus::Success)
    })
}
