//! The `qwb` command line. Stages exchange a [`PipelineDoc`] on
//! stdin/stdout, so `qwb build ... | qwb transpile ... | qwb run ... |
//! qwb export` is a complete job.
//!
//! Exit codes: 0 success, 1 user error, 2 internal error.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qwb_core::analysis::{esp, match_gates};
use qwb_core::circuit::verify;
use qwb_core::jobdata::{bundle_from_str, export_bundle, retrieve_bundle, simulator_from_bundle, JobBundle, JobParts};
use qwb_core::machine::{
    builtin_registry, load_query, run_query, Aggregation, MachineRegistry, PropertyQuery, Selector, TimeRange,
};
use qwb_core::problems::{build, parse_pgm, ProblemKind, ProblemSpec};
use qwb_core::qasm::{emit_qasm, parse_qasm};
use qwb_core::results::{
    find_period_and_factors, hypothetical_error_adjustment, to_contingency, to_image, to_integer_histogram,
    to_truth_table, ImageSource,
};
use qwb_core::sim::{run, Counts, RunConfig};
use qwb_core::transpile::{compare_strategies, standard_presets, transpile, LayoutMethod, TranspileOptions};
use serde::Serialize;
use uuid::Uuid;

use crate::config::{ServiceConfig, DATA_DIR_ENV};
use crate::error::ApiError;
use crate::ops::{self, MachineSelect};
use crate::pipeline::{PipelineDoc, PIPELINE_FORMAT};
use crate::store::JobStore;

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Internal(m) => m,
        }
    }
}

fn user(e: impl Display) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl Display) -> CliError {
    CliError::Internal(e.to_string())
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        if e.is_user_error() {
            CliError::User(e.message)
        } else {
            CliError::Internal(e.message)
        }
    }
}

/// Engine errors are user errors; routed through [`ApiError`] so status
/// classification matches the service.
fn engine<E: Into<ApiError>>(e: E) -> CliError {
    e.into().into()
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "qwb", version, about = "Build, transpile, run, analyze and share quantum circuits")]
pub struct Cli {
    /// Directory of extra machine files; defaults to `$QWB_DATA_DIR/machines`.
    #[arg(long, global = true)]
    pub machines_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Pipeline document, job bundle or OpenQASM file; `-` reads stdin.
    #[arg(short, long, default_value = "-")]
    pub input: String,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Machine name; defaults to the calibration already in the document.
    #[arg(long)]
    pub machine: Option<String>,
    /// Use the snapshot in force at this time (RFC 3339).
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProblemArg {
    Bell,
    Ghz,
    Qft,
    Shor,
    Truthtable,
    Image,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Trivial,
    ErrorAware,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    Ideal,
    Calibrated,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a problem circuit.
    Build(BuildArgs),
    /// Check a circuit for structural errors.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Verify the physical circuit instead of the logical one.
        #[arg(long)]
        physical: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compile the circuit for a machine.
    Transpile(TranspileArgs),
    /// Compare the standard transpilation strategies.
    Compare {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        machine: String,
        #[arg(long)]
        at: Option<DateTime<Utc>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Sample the circuit.
    Run(RunArgs),
    /// Estimated success probability of the executable circuit.
    Esp {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        target: Target,
        /// Emit the pipeline document with the report attached.
        #[arg(long)]
        attach: bool,
    },
    /// Map logical gates to physical gates.
    Match {
        #[command(flatten)]
        input: Input,
        /// Ignore recorded provenance and use the wire-walk heuristic.
        #[arg(long)]
        heuristic: bool,
    },
    /// Hypothetical error adjustment of the counts.
    Hea {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        attach: bool,
    },
    /// Decode counts into a problem-specific view.
    Decode {
        #[command(subcommand)]
        view: DecodeView,
    },
    /// Write the job as a `.qjob` bundle.
    Export {
        #[command(flatten)]
        input: Input,
        /// Output path; defaults to `<job id>.qjob`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        job_id: Option<Uuid>,
        #[arg(long)]
        created_at: Option<DateTime<Utc>>,
    },
    /// Copy a bundle into the service's job store.
    Import {
        bundle: PathBuf,
        /// Defaults to `$QWB_DATA_DIR`, then `qwb-data`.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Re-run a bundle's physical circuit from its embedded calibration.
    Rerun {
        #[arg(long)]
        bundle: PathBuf,
        /// Replaces the recorded seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 1 unless the counts equal the recorded ones.
        #[arg(long)]
        check: bool,
    },
    /// Inspect machines and their calibration history.
    Machine {
        #[command(subcommand)]
        action: MachineAction,
    },
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemArg>,
    /// Problem spec as JSON instead of flags.
    #[arg(long, conflicts_with = "problem")]
    pub spec: Option<PathBuf>,
    /// Qubit count for ghz and qft.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub base: Option<u64>,
    #[arg(long = "mod")]
    pub modulus: Option<u64>,
    #[arg(long)]
    pub inputs: Option<usize>,
    #[arg(long)]
    pub outputs: Option<usize>,
    /// Output bitstrings for inputs 0, 1, 2, ... separated by commas.
    #[arg(long, value_delimiter = ',')]
    pub table: Vec<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Row-major intensities separated by commas.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub pixels: Vec<f64>,
    /// Grayscale image in plain PGM (P2) format.
    #[arg(long, conflicts_with = "pixels")]
    pub pgm: Option<PathBuf>,
    /// Place builder qubit i on circuit qubit map[i].
    #[arg(long, value_delimiter = ',')]
    pub qubit_map: Vec<usize>,
    /// Print OpenQASM instead of the pipeline document.
    #[arg(long)]
    pub qasm: bool,
}

#[derive(Debug, Args)]
pub struct TranspileArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub machine: String,
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
    #[arg(long, default_value_t = 1)]
    pub level: u8,
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace the machine's basis gates.
    #[arg(long, value_delimiter = ',')]
    pub basis: Vec<String>,
    /// Print the physical OpenQASM instead of the pipeline document.
    #[arg(long)]
    pub qasm: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, default_value_t = 1024)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "ideal")]
    pub noise: NoiseArg,
    /// Machine for calibrated noise when the document has no calibration.
    #[arg(long)]
    pub machine: Option<String>,
    /// Print only the counts.
    #[arg(long)]
    pub counts: bool,
}

#[derive(Debug, Subcommand)]
pub enum DecodeView {
    /// Integer histogram of the outcomes.
    Integer {
        #[command(flatten)]
        source: DecodeSource,
        #[arg(long)]
        include_zero: bool,
    },
    /// Image from outcome frequencies.
    Image {
        #[command(flatten)]
        source: DecodeSource,
        /// Defaults to the image problem's dimensions.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        normalization: Option<f64>,
    },
    /// Outcome table grouped by input bits.
    Truthtable {
        #[command(flatten)]
        source: DecodeSource,
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        outputs: Vec<usize>,
    },
    /// Two-way table over two bit groups.
    Contingency {
        #[command(flatten)]
        source: DecodeSource,
        #[arg(long, value_delimiter = ',', required = true)]
        rows: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        cols: Vec<usize>,
    },
    /// Period and factors from Shor counts.
    Factors {
        #[command(flatten)]
        source: DecodeSource,
        /// Defaults to the Shor problem's parameters.
        #[arg(long)]
        base: Option<u64>,
        #[arg(long = "mod")]
        modulus: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct DecodeSource {
    #[command(flatten)]
    pub input: Input,
    /// Read a bundle file (same as `--input`).
    #[arg(long, conflicts_with = "input")]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum MachineAction {
    List {
        #[arg(long)]
        json: bool,
    },
    Show {
        name: String,
        #[arg(long)]
        at: Option<DateTime<Utc>>,
    },
    Series {
        name: String,
        /// `qubit.<field>` or `gate.<gate>.<field>`.
        #[arg(long)]
        selector: String,
        #[arg(long)]
        from: Option<DateTime<Utc>>,
        #[arg(long)]
        to: Option<DateTime<Utc>>,
        #[arg(long)]
        json: bool,
    },
    /// Run a property query from a file or from flags.
    Query {
        #[arg(long)]
        file: Option<PathBuf>,
        /// Overrides the query file's machine list.
        #[arg(long, value_delimiter = ',')]
        machines: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        select: Vec<String>,
        #[arg(long)]
        from: Option<DateTime<Utc>>,
        #[arg(long)]
        to: Option<DateTime<Utc>>,
        #[arg(long)]
        agg: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run_cli<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => 1,
            };
        }
    };
    match execute(cli, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult {
    let machines = || registry(cli.machines_dir.as_deref());
    match cli.command {
        Command::Build(args) => cmd_build(args, out),
        Command::Verify { input, physical, json } => {
            let doc = load_doc(&input.input, stdin)?;
            let circuit = if physical { doc.executable() } else { &doc.logical };
            let report = verify(circuit);
            if json {
                write_json(out, &report)?;
            } else {
                emit(out, format!("{}\n", report.summary()))?;
            }
            if report.ok {
                Ok(())
            } else {
                Err(CliError::User(format!("{} failed verification", circuit.name)))
            }
        }
        Command::Transpile(args) => cmd_transpile(args, &machines()?, stdin, out),
        Command::Compare {
            input,
            machine,
            at,
            seed,
            json,
        } => {
            let doc = load_doc(&input.input, stdin)?;
            let reg = machines()?;
            let snapshot = MachineSelect { machine, at }.snapshot(&reg)?;
            let presets = standard_presets(seed);
            let options: Vec<TranspileOptions> = presets.iter().map(|(_, o)| o.clone()).collect();
            let rows = compare_strategies(&doc.logical, snapshot, &options).map_err(engine)?;
            if json {
                return write_json(out, &rows);
            }
            let mut text = String::from("strategy\tgates\ttwo_qubit\tlayers\tduration_ns\tcumulative_esp\n");
            for (row, (name, _)) in rows.iter().zip(&presets) {
                text.push_str(&format!(
                    "{name}\t{}\t{}\t{}\t{}\t{:.6}\n",
                    row.gate_count, row.result.metrics.two_qubit_count, row.layer_count, row.duration_ns, row.cumulative_esp
                ));
            }
            emit(out, text)
        }
        Command::Run(args) => cmd_run(args, &machines()?, stdin, out),
        Command::Esp { input, target, attach } => {
            let mut doc = load_doc(&input.input, stdin)?;
            let snapshot = doc_snapshot(&doc, &target, &machines()?)?;
            let report = esp(doc.executable(), &snapshot).map_err(engine)?;
            if attach {
                doc.esp = Some(report);
                emit(out, doc.to_json())
            } else {
                write_json(out, &report)
            }
        }
        Command::Match { input, heuristic } => {
            let doc = load_doc(&input.input, stdin)?;
            let t = doc
                .transpiled
                .as_ref()
                .ok_or_else(|| user("matching needs a transpiled document"))?;
            let provenance = (!heuristic).then_some(t.provenance.as_slice());
            let map = match_gates(&doc.logical, &t.physical, &t.layout, provenance).map_err(engine)?;
            write_json(out, &map)
        }
        Command::Hea {
            input,
            target,
            trials,
            seed,
            attach,
        } => {
            let mut doc = load_doc(&input.input, stdin)?;
            let snapshot = doc_snapshot(&doc, &target, &machines()?)?;
            let counts = doc.counts.as_ref().ok_or_else(|| user("hea needs counts; run the circuit first"))?;
            let report =
                hypothetical_error_adjustment(counts, doc.executable(), &snapshot, trials, seed).map_err(engine)?;
            if attach {
                doc.hea = Some(report);
                emit(out, doc.to_json())
            } else {
                write_json(out, &report)
            }
        }
        Command::Decode { view } => cmd_decode(view, stdin, out),
        Command::Export {
            input,
            out: path,
            job_id,
            created_at,
        } => {
            let doc = load_doc(&input.input, stdin)?;
            let bundle = bundle_of(&doc, job_id, created_at)?;
            let path = path.unwrap_or_else(|| PathBuf::from(format!("{}.qjob", bundle.job_id)));
            let written = export_bundle(&bundle, &path).map_err(engine)?;
            let mut text = String::new();
            for p in written {
                text.push_str(&format!("{}\n", p.display()));
            }
            emit(out, text)
        }
        Command::Import { bundle, data_dir } => {
            let config = ServiceConfig::default().with_env();
            let data_dir = data_dir.unwrap_or(config.data_dir);
            let parsed = retrieve_bundle(&bundle).map_err(engine)?;
            let store = JobStore::open(data_dir.join("jobs"))?;
            let summary = store.insert(parsed)?;
            emit(out, format!("{}\n", summary.job_id))
        }
        Command::Rerun { bundle, seed, check } => {
            let parsed = retrieve_bundle(&bundle).map_err(engine)?;
            let (circuit, mut config) = simulator_from_bundle(&parsed).map_err(engine)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let counts = run(&circuit, &config).map_err(engine)?;
            write_json(out, &counts)?;
            if check && counts != parsed.counts {
                return Err(user("rerun counts differ from the bundle"));
            }
            Ok(())
        }
        Command::Machine { action } => cmd_machine(action, &machines()?, out),
        Command::Serve(args) => cmd_serve(args, cli.machines_dir, out),
    }
}

fn emit(out: &mut dyn Write, text: impl AsRef<str>) -> CliResult {
    out.write_all(text.as_ref().as_bytes()).map_err(internal)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(internal)?;
    text.push('\n');
    emit(out, text)
}

/// Built-in machines plus machine files from `dir` or `$QWB_DATA_DIR/machines`.
pub fn registry(dir: Option<&Path>) -> Result<MachineRegistry, CliError> {
    let mut reg = builtin_registry();
    let env_dir = std::env::var_os(DATA_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join("machines"));
    match (dir, env_dir) {
        (Some(d), _) => {
            reg.load_dir(d).map_err(engine)?;
        }
        (None, Some(d)) if d.is_dir() => {
            reg.load_dir(&d).map_err(engine)?;
        }
        _ => {}
    }
    Ok(reg)
}

fn read_input(input: &str, stdin: &mut dyn Read) -> Result<String, CliError> {
    if input == "-" {
        let mut text = String::new();
        stdin.read_to_string(&mut text).map_err(|e| user(format!("reading stdin: {e}")))?;
        Ok(text)
    } else {
        std::fs::read_to_string(input).map_err(|e| user(format!("{input}: {e}")))
    }
}

/// Loads a pipeline document, a job bundle or OpenQASM text.
pub fn load_doc(input: &str, stdin: &mut dyn Read) -> Result<PipelineDoc, CliError> {
    if input != "-" && input.ends_with(".qjob") {
        let bundle = retrieve_bundle(Path::new(input)).map_err(engine)?;
        return PipelineDoc::from_bundle(&bundle).map_err(user);
    }
    let text = read_input(input, stdin)?;
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(user("empty input; pipe a document or pass --input"));
    }
    if trimmed.starts_with("OPENQASM") {
        let circuit = parse_qasm(&text).map_err(engine)?;
        return Ok(PipelineDoc::from_circuit(circuit));
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| user(format!("input is not JSON or OpenQASM: {e}")))?;
    if value.get("format_version").is_some() {
        let base = (input != "-").then(|| Path::new(input).parent().unwrap_or(Path::new(".")));
        let bundle = bundle_from_str(&text, base).map_err(engine)?;
        return PipelineDoc::from_bundle(&bundle).map_err(user);
    }
    match value.get("format").and_then(|f| f.as_str()) {
        Some(PIPELINE_FORMAT) => serde_json::from_value(value).map_err(|e| user(format!("pipeline document: {e}"))),
        Some(other) => Err(user(format!("unsupported document format `{other}` (expected `{PIPELINE_FORMAT}`)"))),
        None => Err(user("input is neither a pipeline document, a job bundle nor OpenQASM")),
    }
}

fn doc_snapshot(
    doc: &PipelineDoc,
    target: &Target,
    machines: &MachineRegistry,
) -> Result<qwb_core::machine::CalibrationSnapshot, CliError> {
    match (&target.machine, &doc.snapshot) {
        (Some(name), _) => Ok(MachineSelect {
            machine: name.clone(),
            at: target.at,
        }
        .snapshot(machines)?
        .clone()),
        (None, Some(s)) => Ok(s.clone()),
        (None, None) => Err(user("no calibration in the document; pass --machine")),
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| user(format!("--{what} is required for this problem")))
}

pub fn problem_spec(args: &BuildArgs) -> Result<ProblemSpec, CliError> {
    if let Some(path) = &args.spec {
        let text = std::fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| user(format!("{}: {e}", path.display())));
    }
    let problem = args.problem.ok_or_else(|| user("pass --problem or --spec"))?;
    let kind = match problem {
        ProblemArg::Bell => ProblemKind::Bell,
        ProblemArg::Ghz => ProblemKind::Ghz { n: require(args.n, "n")? },
        ProblemArg::Qft => ProblemKind::Qft { n: require(args.n, "n")? },
        ProblemArg::Shor => ProblemKind::Shor {
            base: require(args.base, "base")?,
            modulus: require(args.modulus, "mod")?,
        },
        ProblemArg::Truthtable => ProblemKind::TruthTable {
            inputs: require(args.inputs, "inputs")?,
            outputs: require(args.outputs, "outputs")?,
            table: args.table.clone(),
        },
        ProblemArg::Image => match &args.pgm {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
                let (width, height, pixels) = parse_pgm(&text).map_err(engine)?;
                ProblemKind::Image { width, height, pixels }
            }
            None => ProblemKind::Image {
                width: require(args.width, "width")?,
                height: require(args.height, "height")?,
                pixels: args.pixels.clone(),
            },
        },
    };
    let mut spec = ProblemSpec::from(kind);
    if !args.qubit_map.is_empty() {
        spec.auto_qubits = false;
        spec.manual_qubit_map = Some(args.qubit_map.clone());
    }
    Ok(spec)
}

fn cmd_build(args: BuildArgs, out: &mut dyn Write) -> CliResult {
    let spec = problem_spec(&args)?;
    let built = build(&spec).map_err(engine)?;
    if args.qasm {
        return emit(out, emit_qasm(&built.circuit).map_err(engine)?);
    }
    emit(out, PipelineDoc::from_build(built).to_json())
}

fn cmd_transpile(args: TranspileArgs, machines: &MachineRegistry, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult {
    let mut doc = load_doc(&args.input.input, stdin)?;
    let snapshot = MachineSelect {
        machine: args.machine,
        at: args.at,
    }
    .snapshot(machines)?
    .clone();
    let mut options = TranspileOptions::level(args.level, args.seed);
    options.layout_method = args.layout.map(|l| match l {
        LayoutArg::Trivial => LayoutMethod::Trivial,
        LayoutArg::ErrorAware => LayoutMethod::ErrorAware,
    });
    if !args.basis.is_empty() {
        options.basis = Some(args.basis);
    }
    let result = transpile(&doc.logical, &snapshot, &options).map_err(engine)?;
    if args.qasm {
        return emit(out, emit_qasm(&result.physical).map_err(engine)?);
    }
    doc.set_transpiled(result, snapshot);
    emit(out, doc.to_json())
}

fn cmd_run(args: RunArgs, machines: &MachineRegistry, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult {
    let mut doc = load_doc(&args.input.input, stdin)?;
    let config = match args.noise {
        NoiseArg::Ideal => RunConfig::ideal(args.shots, args.seed),
        NoiseArg::Calibrated => {
            let snapshot = match (&args.machine, &doc.snapshot) {
                (Some(name), _) => MachineSelect::new(name.clone()).snapshot(machines)?.clone(),
                (None, Some(s)) => s.clone(),
                (None, None) => return Err(user("calibrated noise needs a transpiled document or --machine")),
            };
            if args.machine.is_some() && doc.transpiled.is_none() {
                doc.snapshot = Some(snapshot.clone());
            }
            RunConfig::calibrated(args.shots, args.seed, snapshot)
        }
    };
    let counts = run(doc.executable(), &config).map_err(engine)?;
    if args.counts {
        return write_json(out, &counts);
    }
    doc.run = Some((&config).into());
    doc.counts = Some(counts);
    doc.esp = None;
    doc.hea = None;
    emit(out, doc.to_json())
}

fn bundle_of(doc: &PipelineDoc, job_id: Option<Uuid>, created_at: Option<DateTime<Utc>>) -> Result<JobBundle, CliError> {
    let transpiled = doc
        .transpiled
        .as_ref()
        .ok_or_else(|| user("export needs a transpiled document"))?;
    let snapshot = doc
        .snapshot
        .as_ref()
        .ok_or_else(|| user("export needs the calibration used for transpiling"))?;
    let counts = doc.counts.clone().ok_or_else(|| user("export needs counts; run the circuit first"))?;
    let config = doc.run_config().ok_or_else(|| user("export needs the run configuration"))?;
    JobBundle::from_parts(JobParts {
        job_id,
        created_at,
        problem: doc.problem.as_ref(),
        logical: &doc.logical,
        transpiled,
        snapshot,
        run: &config,
        counts,
        esp: doc.esp.clone(),
        hea: doc.hea.clone(),
    })
    .map_err(engine)
}

fn decode_doc(source: &DecodeSource, stdin: &mut dyn Read) -> Result<(PipelineDoc, Counts), CliError> {
    let doc = match &source.bundle {
        Some(path) => load_doc(&path.to_string_lossy(), stdin)?,
        None => load_doc(&source.input.input, stdin)?,
    };
    let counts = doc.counts.clone().ok_or_else(|| user("no counts to decode; run the circuit first"))?;
    Ok((doc, counts))
}

fn cmd_decode(view: DecodeView, stdin: &mut dyn Read, out: &mut dyn Write) -> CliResult {
    match view {
        DecodeView::Integer { source, include_zero } => {
            let (_, counts) = decode_doc(&source, stdin)?;
            let hist = to_integer_histogram(&counts, include_zero).map_err(engine)?;
            if source.json {
                return write_json(out, &hist);
            }
            let mut text = String::from("value\tbitstring\tcount\tfrequency\n");
            for r in &hist.rows {
                text.push_str(&format!("{}\t{}\t{}\t{:.6}\n", r.value, r.bitstring, r.count, r.frequency));
            }
            emit(out, text)
        }
        DecodeView::Image {
            source,
            width,
            height,
            normalization,
        } => {
            let (doc, counts) = decode_doc(&source, stdin)?;
            let problem = doc.problem.as_ref();
            let dims = problem.and_then(|p| match &p.problem.kind {
                ProblemKind::Image { width, height, .. } => Some((*width, *height)),
                _ => None,
            });
            let width = width.or(dims.map(|d| d.0)).ok_or_else(|| user("--width is required"))?;
            let height = height.or(dims.map(|d| d.1)).ok_or_else(|| user("--height is required"))?;
            let norm = normalization
                .or(problem.and_then(|p| p.normalization))
                .ok_or_else(|| user("--normalization is required"))?;
            let img = to_image(ImageSource::Counts(&counts), width, height, norm).map_err(engine)?;
            if source.json {
                return write_json(out, &img);
            }
            let mut text = String::new();
            for row in img.pixels.chunks(img.width) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
                text.push_str(&cells.join(" "));
                text.push('\n');
            }
            if img.warning {
                text.push_str(&format!("# {:.4} of the mass fell outside the image\n", img.out_of_range_mass));
            }
            emit(out, text)
        }
        DecodeView::Truthtable { source, inputs, outputs } => {
            let (_, counts) = decode_doc(&source, stdin)?;
            let view = to_truth_table(&counts, &inputs, &outputs).map_err(engine)?;
            if source.json {
                return write_json(out, &view);
            }
            let mut text = String::from("input\toutput\tcount\n");
            for row in &view.rows {
                for (output, n) in &row.outputs {
                    text.push_str(&format!("{}\t{output}\t{n}\n", row.input));
                }
            }
            emit(out, text)
        }
        DecodeView::Contingency { source, rows, cols } => {
            let (_, counts) = decode_doc(&source, stdin)?;
            let table = to_contingency(&counts, &rows, &cols).map_err(engine)?;
            if source.json {
                return write_json(out, &table);
            }
            let mut text = format!("\t{}\ttotal\n", table.col_labels.join("\t"));
            for ((label, cells), m) in table.row_labels.iter().zip(&table.cells).zip(&table.row_marginals) {
                let cells: Vec<String> = cells.iter().map(u64::to_string).collect();
                text.push_str(&format!("{label}\t{}\t{m}\n", cells.join("\t")));
            }
            let cols: Vec<String> = table.col_marginals.iter().map(u64::to_string).collect();
            text.push_str(&format!("total\t{}\t{}\n", cols.join("\t"), table.total));
            emit(out, text)
        }
        DecodeView::Factors { source, base, modulus } => {
            let (doc, counts) = decode_doc(&source, stdin)?;
            let shor = doc.problem.as_ref().and_then(|p| match p.problem.kind {
                ProblemKind::Shor { base, modulus } => Some((base, modulus)),
                _ => None,
            });
            let base = base.or(shor.map(|s| s.0)).ok_or_else(|| user("--base is required"))?;
            let modulus = modulus.or(shor.map(|s| s.1)).ok_or_else(|| user("--mod is required"))?;
            let hist = to_integer_histogram(&counts, false).map_err(engine)?;
            let result = find_period_and_factors(&hist, base, modulus).map_err(engine)?;
            if source.json {
                return write_json(out, &result);
            }
            let r = result.period.map_or("none".to_string(), |r| r.to_string());
            let f = result.factors.map_or("none".to_string(), |(p, q)| format!("{p},{q}"));
            emit(out, format!("r={r} factors={f}\n"))
        }
    }
}

fn cmd_machine(action: MachineAction, machines: &MachineRegistry, out: &mut dyn Write) -> CliResult {
    match action {
        MachineAction::List { json } => {
            let summaries: Vec<_> = machines.iter().map(|m| m.summary()).collect();
            if json {
                return write_json(out, &summaries);
            }
            let mut text = String::from("name\tqubits\tonline\tpending_jobs\tsnapshots\n");
            for s in summaries {
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    s.name,
                    s.num_qubits,
                    s.online,
                    s.pending_jobs,
                    s.snapshot_times.len()
                ));
            }
            emit(out, text)
        }
        MachineAction::Show { name, at } => {
            let detail = ops::machine_detail(machines.get(&name).map_err(engine)?, at)?;
            write_json(out, &detail)
        }
        MachineAction::Series {
            name,
            selector,
            from,
            to,
            json,
        } => {
            let series = ops::machine_series(machines.get(&name).map_err(engine)?, &selector, &TimeRange { from, to })?;
            if json {
                return write_json(out, &series);
            }
            let mut text = String::from("index\tat\tvalue\n");
            for s in &series {
                for p in &s.points {
                    text.push_str(&format!("{}\t{}\t{}\n", s.index, p.taken_at.to_rfc3339(), p.value));
                }
            }
            emit(out, text)
        }
        MachineAction::Query {
            file,
            machines: names,
            select,
            from,
            to,
            agg,
            json,
        } => {
            let mut query = match &file {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
                    load_query(&text).map_err(|e| user(format!("{}: {e}", path.display())))?
                }
                None => PropertyQuery {
                    machines: Vec::new(),
                    properties: Vec::new(),
                    time_range: TimeRange::all(),
                    aggregation: Aggregation::None,
                },
            };
            if !names.is_empty() {
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                query = query.for_machines(&names);
            }
            if !select.is_empty() {
                query.properties = select
                    .iter()
                    .map(|s| Selector::from_str(s))
                    .collect::<Result<_, _>>()
                    .map_err(engine)?;
            }
            if from.is_some() {
                query.time_range.from = from;
            }
            if to.is_some() {
                query.time_range.to = to;
            }
            if let Some(a) = agg {
                query.aggregation = a.parse().map_err(user)?;
            }
            if query.machines.is_empty() || query.properties.is_empty() {
                return Err(user("a query needs machines and properties (--file, --machines, --select)"));
            }
            let table = run_query(&query, machines).map_err(engine)?;
            if json {
                write_json(out, &table)
            } else {
                emit(out, table.to_tsv())
            }
        }
    }
}

/// Config file, then `QWB_DATA_DIR`, then flags.
pub fn serve_config(args: &ServeArgs) -> Result<ServiceConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::load(path).map_err(user)?,
        None => ServiceConfig::default(),
    }
    .with_env();
    if let Some(b) = &args.bind {
        config.bind = b.clone();
    }
    if let Some(p) = args.port {
        config.port = p;
    }
    if let Some(d) = &args.data_dir {
        config.data_dir = d.clone();
    }
    if let Some(u) = &args.ui_dir {
        config.ui_dir = Some(u.clone());
    }
    Ok(config)
}

fn cmd_serve(args: ServeArgs, machines_dir: Option<PathBuf>, out: &mut dyn Write) -> CliResult {
    let config = serve_config(&args)?;
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    runtime.block_on(async {
        let (listener, app) = crate::bind(config, machines_dir.as_deref()).await.map_err(user)?;
        let addr = listener.local_addr().map_err(internal)?;
        emit(out, format!("listening on http://{addr}\n"))?;
        out.flush().map_err(internal)?;
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(internal)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut input = stdin.as_bytes();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(std::iter::once("qwb").chain(args.iter().copied()), &mut input, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn build_emits_a_pipeline_document() {
        let (code, out, _) = cli(&["build", "--problem", "ghz", "--n", "3"], "");
        assert_eq!(code, 0);
        let doc: PipelineDoc = serde_json::from_str(&out).unwrap();
        assert_eq!(doc.logical.num_qubits, 3);
        assert!(doc.problem.is_some());
    }

    #[test]
    fn user_errors_exit_with_one() {
        let (code, _, err) = cli(&["build", "--problem", "shor", "--base", "5"], "");
        assert_eq!(code, 1);
        assert!(err.starts_with("error: --mod is required"), "{err}");
        assert_eq!(cli(&["build", "--problem", "nonsense"], "").0, 1);
        assert_eq!(cli(&["run"], "").0, 1);
        assert_eq!(cli(&["transpile", "--machine", "nowhere-like"], "OPENQASM 2.0;\nqreg q[1];\n").0, 1);
        assert_eq!(cli(&["--help"], "").0, 0);
    }

    #[test]
    fn qasm_on_stdin_runs_directly() {
        let qasm = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\ncreg c[1];\nx q[0];\nmeasure q[0] -> c[0];\n";
        let (code, out, _) = cli(&["run", "--shots", "16", "--counts"], qasm);
        assert_eq!(code, 0);
        let counts: Counts = serde_json::from_str(&out).unwrap();
        assert_eq!(counts.get_bits("1"), 16);
    }

    #[test]
    fn verify_reports_failures() {
        let mut bad = qwb_core::circuit::Circuit::new("bad", 1, 0);
        bad.x(3);
        let doc = PipelineDoc::from_circuit(bad);
        let (code, _, err) = cli(&["verify"], &doc.to_json());
        assert_eq!(code, 1, "{err}");
        let (ok, out, _) = cli(&["verify"], "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\nh q[0];\n");
        assert_eq!(ok, 0);
        assert!(!out.is_empty());
    }

    #[test]
    fn machine_list_has_the_builtins() {
        let (code, out, _) = cli(&["machine", "list"], "");
        assert_eq!(code, 0);
        assert!(out.lines().any(|l| l.starts_with("vigo-like\t5\t")));
    }
}
