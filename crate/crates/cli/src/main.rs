//! `qflow`: run sessions headless, analyze energy tables, export traces.
//!
//! Exit codes: 0 ok, 1 session failed, 2 config or input error,
//! 3 budget exceeded, 4 recovery exhausted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qflow_core::agent::SessionState;
use qflow_core::config::{Config, ExecKind, RunOptions};
use qflow_core::thermo::analysis::{self, AcidPair, Analysis};
use qflow_core::thermo::{Constants, EnergyTable, Property};
use qflow_core::trace::{export_log, export_notebook, Trace, TRACE_FILE};

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_RECOVERY: u8 = 4;

#[derive(Parser)]
#[command(name = "qflow", version, about = "Hierarchical agents for quantum-chemistry workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task to completion and print the session result as JSON.
    Run(RunArgs),
    /// Post-analysis on an energy table.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Export a finished session's trace.
    ExportTrace(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Scripted,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum Exec {
    Mock,
    Shell,
}

#[derive(Args)]
struct RunArgs {
    /// Task text, or a file holding it. Defaults to the config's task.
    task: Option<String>,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long, value_enum)]
    exec: Option<Exec>,
    /// Session directory: work/, trace and global memory go here.
    #[arg(long)]
    workdir: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    /// Write the notebook export here after the run.
    #[arg(long)]
    export_trace: Option<PathBuf>,
}

#[derive(Args)]
struct TableArg {
    /// Energy table (CSV with a label column and H/G/E columns).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// pKa from a ΔG or from an acid/anion pair in a table.
    Pka {
        #[arg(long, allow_hyphen_values = true)]
        delta_g: Option<f64>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// acid:anion
        #[arg(long)]
        pair: Option<AcidPair>,
        /// Proton free energy in hartree.
        #[arg(long, allow_hyphen_values = true)]
        proton_g: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Proton-solvation corrections from references with known pKa.
    CalibratePka {
        #[command(flatten)]
        table: TableArg,
        /// acid:anion:pka, repeatable
        #[arg(long = "ref", required = true)]
        references: Vec<AcidPair>,
        /// acid:anion to predict
        #[arg(long)]
        target: Option<AcidPair>,
        /// Label of the proton record in the table.
        #[arg(long)]
        proton: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        proton_g: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Ring strain through isodesmic methyl transfers.
    RingStrain {
        #[command(flatten)]
        table: TableArg,
        #[arg(long, default_value_t = 6)]
        reference: u32,
        #[arg(long)]
        json: bool,
    },
    /// ΔH and ΔG of reactions such as "a + 2 b -> c".
    Reaction {
        #[command(flatten)]
        table: TableArg,
        #[arg(long = "reaction", required = true)]
        reactions: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Energies relative to the lowest entry.
    Relative {
        #[command(flatten)]
        table: TableArg,
        #[arg(long)]
        property: Option<Property>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Notebook,
    Log,
}

#[derive(Args)]
struct ExportArgs {
    session: String,
    /// Directory holding session directories.
    #[arg(long, default_value = ".qflow")]
    root: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Notebook)]
    format: Format,
    /// Defaults to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_CONFIG, e.to_string())
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("QFLOW_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze(a),
        Command::ExportTrace(a) => export(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(a: RunArgs) -> Result<u8, Failure> {
    let config = Config::load(&a.config)?;
    let id = a
        .id
        .unwrap_or_else(|| format!("run-{}", chrono::Utc::now().format("%Y%m%dT%H%M%S%.3f")));
    let session_root = a.workdir.unwrap_or_else(|| Path::new(".qflow").join(&id));
    if session_root.join(TRACE_FILE).exists() {
        return Err(Failure(EXIT_CONFIG, format!("{} already holds a session", session_root.display())));
    }
    let task = match a.task {
        Some(t) if Path::new(&t).is_file() => Some(std::fs::read_to_string(&t)?),
        other => other,
    };
    let opts = RunOptions {
        id,
        task,
        session_root,
        backend: a.backend.map(|b| match b {
            Backend::Scripted => "scripted".to_string(),
            Backend::Live => "live".to_string(),
        }),
        exec: a.exec.map(|e| match e {
            Exec::Mock => ExecKind::Mock,
            Exec::Shell => ExecKind::Shell,
        }),
    };
    let mut session = config.build(&opts)?;
    let result = session.run();
    println!("{}", serde_json::to_string_pretty(&result)?);
    for n in session.notices() {
        eprintln!("note: {n}");
    }
    if let Some(path) = a.export_trace {
        let nb = export_notebook(session.trace().events())?;
        std::fs::write(&path, serde_json::to_string_pretty(&nb)? + "\n")?;
    }
    Ok(match result.status {
        SessionState::BudgetExceeded => EXIT_BUDGET,
        _ if result.recovery_exhausted => EXIT_RECOVERY,
        SessionState::Done => 0,
        _ => EXIT_FAILED,
    })
}

fn table(path: &Path) -> Result<EnergyTable, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    EnergyTable::parse(&text).map_err(|e| Failure(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn analyze(cmd: AnalyzeCommand) -> Result<u8, Failure> {
    let (a, input, json) = match cmd {
        AnalyzeCommand::Pka { delta_g, input, pair, proton_g, json } => {
            (Analysis::Pka { delta_g, pair, proton_g }, input, json)
        }
        AnalyzeCommand::CalibratePka { table, references, target, proton, proton_g, json } => (
            Analysis::CalibratePka { references, target, proton, proton_g },
            Some(table.input),
            json,
        ),
        AnalyzeCommand::RingStrain { table, reference, json } => {
            (Analysis::RingStrain { reference }, Some(table.input), json)
        }
        AnalyzeCommand::Reaction { table, reactions, json } => {
            (Analysis::Reaction { reactions }, Some(table.input), json)
        }
        AnalyzeCommand::Relative { table, property, title, json } => {
            (Analysis::Relative { property, title }, Some(table.input), json)
        }
    };
    let t = input.as_deref().map(table).transpose()?;
    let out = analysis::run(&a, t.as_ref(), &Constants::default())?;
    if json {
        println!("{}", serde_json::to_string_pretty(&out.values)?);
    } else {
        print!("{}", out.render());
    }
    Ok(0)
}

fn export(a: ExportArgs) -> Result<u8, Failure> {
    let dir = a.root.join(&a.session);
    if !dir.join(TRACE_FILE).is_file() {
        return Err(Failure(EXIT_CONFIG, format!("no session {:?} under {}", a.session, a.root.display())));
    }
    let trace = Trace::open(&dir)?;
    let text = match a.format {
        Format::Notebook => serde_json::to_string_pretty(&export_notebook(trace.events())?)? + "\n",
        Format::Log => export_log(trace.events()),
    };
    match a.output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
