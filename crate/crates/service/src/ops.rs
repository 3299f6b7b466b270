//! Request bodies and the synchronous engine calls behind each endpoint.
//! Handlers in [`crate::api`] only add transport concerns.

use std::path::Path;

use chrono::{DateTime, Utc};
use qwb_core::analysis::{esp, match_gates, EspReport, MatchMap};
use qwb_core::circuit::{schedule, verify, Circuit, LayerSchedule, VerificationReport};
use qwb_core::jobdata::{bundle_from_str, retrieve_bundle, JobBundle};
use qwb_core::machine::{
    load_query, property_series, run_query, snapshot_at, CalibrationSnapshot, MachineRecord, MachineRegistry,
    MachineSummary, PropertyQuery, QueryTable, Selector, Series, TimeRange,
};
use qwb_core::problems::{build, BuildResult, ProblemSpec};
use qwb_core::qasm::parse_qasm;
use qwb_core::results::{
    find_period_and_factors, hypothetical_error_adjustment, to_contingency, to_image, to_integer_histogram,
    to_truth_table, ContingencyTable, DecodedImage, HeaReport, ImageSource, IntegerHistogram, PeriodResult,
    TruthTableView, MIN_HEA_TRIALS,
};
use qwb_core::sim::{run, Counts, NoiseMode, RunConfig};
use qwb_core::transpile::{compare_strategies, standard_presets, transpile, Layout, Origin, StrategyRow, TranspileOptions, TranspileResult};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// A circuit given either as OpenQASM 2.0 text or as circuit JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitInput {
    Qasm(String),
    Circuit(Circuit),
}

impl CircuitInput {
    pub fn resolve(&self) -> Result<Circuit, ApiError> {
        match self {
            CircuitInput::Qasm(text) => Ok(parse_qasm(text)?),
            CircuitInput::Circuit(c) => Ok(c.clone()),
        }
    }
}

impl From<&Circuit> for CircuitInput {
    fn from(c: &Circuit) -> Self {
        CircuitInput::Circuit(c.clone())
    }
}

/// Machine by name, at its latest snapshot or the one in force at `at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSelect {
    pub machine: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<DateTime<Utc>>,
}

impl MachineSelect {
    pub fn new(machine: impl Into<String>) -> Self {
        MachineSelect {
            machine: machine.into(),
            at: None,
        }
    }

    pub fn snapshot<'a>(&self, machines: &'a MachineRegistry) -> Result<&'a CalibrationSnapshot, ApiError> {
        let record = machines.get(&self.machine)?;
        Ok(match self.at {
            Some(at) => snapshot_at(record, at)?.snapshot,
            None => record.latest()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseRequest {
    pub qasm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResponse {
    pub circuit: Circuit,
    pub verification: VerificationReport,
    /// Present when the circuit verifies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<LayerSchedule>,
}

pub fn parse_circuit(req: &ParseRequest) -> Result<ParseResponse, ApiError> {
    let circuit = parse_qasm(&req.qasm)?;
    let verification = verify(&circuit);
    let schedule = schedule(&circuit).ok();
    Ok(ParseResponse {
        circuit,
        verification,
        schedule,
    })
}

pub fn build_circuit(spec: &ProblemSpec) -> Result<BuildResult, ApiError> {
    Ok(build(spec)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileRequest {
    pub circuit: CircuitInput,
    #[serde(flatten)]
    pub target: MachineSelect,
    #[serde(default)]
    pub options: TranspileOptions,
}

pub fn transpile_circuit(machines: &MachineRegistry, req: &TranspileRequest) -> Result<TranspileResult, ApiError> {
    let circuit = req.circuit.resolve()?;
    Ok(transpile(&circuit, req.target.snapshot(machines)?, &req.options)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub circuit: CircuitInput,
    #[serde(flatten)]
    pub target: MachineSelect,
    /// Defaults to the four standard presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<TranspileOptions>>,
    #[serde(default)]
    pub seed: u64,
}

pub fn compare(machines: &MachineRegistry, req: &CompareRequest) -> Result<Vec<StrategyRow>, ApiError> {
    let circuit = req.circuit.resolve()?;
    let strategies = req
        .strategies
        .clone()
        .unwrap_or_else(|| standard_presets(req.seed).into_iter().map(|(_, o)| o).collect());
    Ok(compare_strategies(&circuit, req.target.snapshot(machines)?, &strategies)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub circuit: CircuitInput,
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "ideal")]
    pub noise: NoiseMode,
    /// Required for calibrated noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<MachineSelect>,
}

fn ideal() -> NoiseMode {
    NoiseMode::Ideal
}

pub fn run_config(machines: &MachineRegistry, req: &RunRequest) -> Result<RunConfig, ApiError> {
    Ok(match req.noise {
        NoiseMode::Ideal => RunConfig::ideal(req.shots, req.seed),
        NoiseMode::Calibrated => {
            let target = req
                .target
                .as_ref()
                .ok_or_else(|| ApiError::bad_request("calibrated noise needs a target machine"))?;
            RunConfig::calibrated(req.shots, req.seed, target.snapshot(machines)?.clone())
        }
    })
}

pub fn run_circuit(machines: &MachineRegistry, req: &RunRequest) -> Result<Counts, ApiError> {
    let circuit = req.circuit.resolve()?;
    Ok(run(&circuit, &run_config(machines, req)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspRequest {
    pub circuit: CircuitInput,
    #[serde(flatten)]
    pub target: MachineSelect,
}

pub fn esp_report(machines: &MachineRegistry, req: &EspRequest) -> Result<EspReport, ApiError> {
    let circuit = req.circuit.resolve()?;
    Ok(esp(&circuit, req.target.snapshot(machines)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRequest {
    pub logical: CircuitInput,
    pub physical: CircuitInput,
    pub layout: Layout,
    /// Without provenance the heuristic matcher runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<Origin>>,
}

pub fn match_circuits(req: &MatchRequest) -> Result<MatchMap, ApiError> {
    let logical = req.logical.resolve()?;
    let physical = req.physical.resolve()?;
    Ok(match_gates(&logical, &physical, &req.layout, req.provenance.as_deref())?)
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaRequest {
    pub counts: Counts,
    /// The physical circuit that produced `counts`.
    pub circuit: CircuitInput,
    #[serde(flatten)]
    pub target: MachineSelect,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

pub fn hea(machines: &MachineRegistry, req: &HeaRequest) -> Result<HeaReport, ApiError> {
    let circuit = req.circuit.resolve()?;
    if req.trials < MIN_HEA_TRIALS {
        return Err(qwb_core::results::ResultsError::TooFewTrials {
            got: req.trials,
            min: MIN_HEA_TRIALS,
        }
        .into());
    }
    Ok(hypothetical_error_adjustment(
        &req.counts,
        &circuit,
        req.target.snapshot(machines)?,
        req.trials,
        req.seed,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "view", rename_all = "snake_case")]
pub enum DecodeRequest {
    Integer {
        counts: Counts,
        #[serde(default)]
        include_zero: bool,
    },
    /// Exactly one of `counts` and `probabilities`.
    Image {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        counts: Option<Counts>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probabilities: Option<Vec<f64>>,
        width: usize,
        height: usize,
        normalization: f64,
    },
    TruthTable {
        counts: Counts,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
    },
    Contingency {
        counts: Counts,
        rows: Vec<usize>,
        cols: Vec<usize>,
    },
    Factors {
        counts: Counts,
        base: u64,
        modulus: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decoded {
    Integer(IntegerHistogram),
    Image(DecodedImage),
    TruthTable(TruthTableView),
    Contingency(ContingencyTable),
    Factors(PeriodResult),
}

pub fn decode(req: &DecodeRequest) -> Result<Decoded, ApiError> {
    Ok(match req {
        DecodeRequest::Integer { counts, include_zero } => Decoded::Integer(to_integer_histogram(counts, *include_zero)?),
        DecodeRequest::Image {
            counts,
            probabilities,
            width,
            height,
            normalization,
        } => {
            let source = match (counts, probabilities) {
                (Some(c), None) => ImageSource::Counts(c),
                (None, Some(p)) => ImageSource::Probabilities(p),
                _ => return Err(ApiError::bad_request("image decoding needs exactly one of counts and probabilities")),
            };
            Decoded::Image(to_image(source, *width, *height, *normalization)?)
        }
        DecodeRequest::TruthTable { counts, inputs, outputs } => {
            Decoded::TruthTable(to_truth_table(counts, inputs, outputs)?)
        }
        DecodeRequest::Contingency { counts, rows, cols } => Decoded::Contingency(to_contingency(counts, rows, cols)?),
        DecodeRequest::Factors { counts, base, modulus } => {
            let hist = to_integer_histogram(counts, false)?;
            Decoded::Factors(find_period_and_factors(&hist, *base, *modulus)?)
        }
    })
}

/// A structured query, or the text of a saved query file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryRequest {
    Query { query: PropertyQuery },
    Text { text: String },
}

pub fn query(machines: &MachineRegistry, req: &QueryRequest) -> Result<QueryTable, ApiError> {
    let query = match req {
        QueryRequest::Query { query } => query.clone(),
        QueryRequest::Text { text } => load_query(text)?,
    };
    Ok(run_query(&query, machines)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineDetail {
    pub summary: MachineSummary,
    pub snapshot: CalibrationSnapshot,
    /// The requested time precedes every snapshot.
    pub stale: bool,
}

pub fn machine_detail(record: &MachineRecord, at: Option<DateTime<Utc>>) -> Result<MachineDetail, ApiError> {
    let (snapshot, stale) = match at {
        Some(at) => {
            let pick = snapshot_at(record, at)?;
            (pick.snapshot.clone(), pick.stale)
        }
        None => (record.latest()?.clone(), false),
    };
    Ok(MachineDetail {
        summary: record.summary(),
        snapshot,
        stale,
    })
}

pub fn machine_series(record: &MachineRecord, selector: &str, range: &TimeRange) -> Result<Vec<Series>, ApiError> {
    let selector: Selector = selector.parse()?;
    Ok(property_series(record, selector, range))
}

/// Bundle text plus the NDJSON sidecar it references, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportRequest {
    pub bundle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts_ndjson: Option<String>,
}

/// Validates an uploaded bundle. A sidecar is materialized in a scratch
/// directory under the name the bundle refers to.
pub fn import_bundle(req: &ImportRequest, scratch: &Path) -> Result<JobBundle, ApiError> {
    let Some(ndjson) = &req.counts_ndjson else {
        return Ok(bundle_from_str(&req.bundle, None)?);
    };
    let value: serde_json::Value = serde_json::from_str(&req.bundle)
        .map_err(|e| ApiError::unprocessable("job-corrupt", format!("bundle is not JSON: {e}")))?;
    let name = value
        .pointer("/counts_sidecar/path")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ApiError::bad_request("counts_ndjson given but the bundle references no sidecar"))?;
    let plain = Path::new(name).file_name().is_some_and(|f| f == name) && !name.starts_with('.');
    if !plain {
        return Err(ApiError::unprocessable("job-schema", format!("sidecar name `{name}` is not a plain file name")));
    }
    let dir = tempdir_in(scratch)?;
    let write = |file: &str, text: &str| {
        std::fs::write(dir.join(file), text).map_err(|e| ApiError::internal(format!("staging import: {e}")))
    };
    write(name, ndjson)?;
    write("import.qjob", &req.bundle)?;
    let result = retrieve_bundle(&dir.join("import.qjob")).map_err(ApiError::from);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn tempdir_in(parent: &Path) -> Result<std::path::PathBuf, ApiError> {
    let dir = parent.join(format!(".import-{}", uuid::Uuid::new_v4()));
    std::fs::create_dir_all(&dir).map_err(|e| ApiError::internal(format!("staging import: {e}")))?;
    Ok(dir)
}
