//! Portable job bundles (`.qjob`) and the chunked counts stream.
//!
//! A bundle is canonical JSON: sorted keys, shortest round-trip numbers,
//! two-space indentation and a trailing newline. Counts with more than
//! [`INLINE_COUNTS_LIMIT`] entries move to an NDJSON sidecar next to the
//! bundle file.

mod chunk;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::analysis::EspReport;
use crate::circuit::{verify, Circuit};
use crate::machine::CalibrationSnapshot;
use crate::problems::{BuildResult, ProblemSpec};
use crate::qasm::{emit_qasm, parse_qasm};
use crate::results::HeaReport;
use crate::sim::{Counts, NoiseMode, RunConfig};
use crate::transpile::{Layout, Origin, TranspileMetrics, TranspileOptions, TranspileResult};

pub use chunk::{
    assemble, chunk_count, chunk_counts, chunk_iter, read_ndjson, write_ndjson, CountsChunk, StreamAssembler,
    DEFAULT_CHUNK_SIZE,
};

pub const BUNDLE_FORMAT: &str = "qjob/1";
pub const INLINE_COUNTS_LIMIT: usize = 65_536;
pub const BUNDLE_EXTENSION: &str = "qjob";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    Corrupt,
    Schema,
    WidthMismatch,
    VersionMismatch,
    Invalid,
    Chunk,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Corrupt => "corrupt",
            ErrorCode::Schema => "schema",
            ErrorCode::WidthMismatch => "width-mismatch",
            ErrorCode::VersionMismatch => "version-mismatch",
            ErrorCode::Invalid => "invalid",
            ErrorCode::Chunk => "chunk",
            ErrorCode::Io => "io",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct JobDataError {
    pub code: ErrorCode,
    pub message: String,
}

impl JobDataError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        JobDataError {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemEcho {
    pub spec: ProblemSpec,
    pub qubit_roles: BTreeMap<String, Vec<usize>>,
    pub clbit_roles: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
}

impl From<&BuildResult> for ProblemEcho {
    fn from(b: &BuildResult) -> Self {
        ProblemEcho {
            spec: b.problem.clone(),
            qubit_roles: b.qubit_roles.clone(),
            clbit_roles: b.clbit_roles.clone(),
            normalization: b.normalization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileEcho {
    pub options: TranspileOptions,
    pub metrics: TranspileMetrics,
    /// Indexed by physical gate id.
    pub provenance: Vec<Origin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEcho {
    pub shots: u64,
    pub seed: u64,
    pub noise: NoiseMode,
}

impl From<&RunConfig> for RunEcho {
    fn from(c: &RunConfig) -> Self {
        RunEcho {
            shots: c.shots,
            seed: c.seed,
            noise: c.mode(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobBundle {
    pub format_version: String,
    pub job_id: Uuid,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemEcho>,
    pub logical_qasm: String,
    pub physical_qasm: String,
    pub layout: Layout,
    pub transpile: TranspileEcho,
    pub machine_name: String,
    pub calibration: CalibrationSnapshot,
    pub run: RunEcho,
    pub counts: Counts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub esp: Option<EspReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hea: Option<HeaReport>,
}

/// Reference from a bundle file to its counts sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarRef {
    /// File name relative to the bundle's directory.
    pub path: String,
    pub width: usize,
    pub shots: u64,
    pub entries: usize,
}

/// On-disk shape: exactly one of `counts` and `counts_sidecar` is set.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    format_version: String,
    job_id: Uuid,
    created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    problem: Option<ProblemEcho>,
    logical_qasm: String,
    physical_qasm: String,
    layout: Layout,
    transpile: TranspileEcho,
    machine_name: String,
    calibration: CalibrationSnapshot,
    run: RunEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts_sidecar: Option<SidecarRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    esp: Option<EspReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hea: Option<HeaReport>,
}

/// Components of a finished job.
pub struct JobParts<'a> {
    pub job_id: Option<Uuid>,
    pub created_at: Option<DateTime<Utc>>,
    pub problem: Option<&'a BuildResult>,
    pub logical: &'a Circuit,
    pub transpiled: &'a TranspileResult,
    pub snapshot: &'a CalibrationSnapshot,
    pub run: &'a RunConfig,
    pub counts: Counts,
    pub esp: Option<EspReport>,
    pub hea: Option<HeaReport>,
}

impl JobBundle {
    /// Builds and validates a bundle. A missing id or timestamp is filled
    /// with a fresh UUID v4 or the current time.
    pub fn from_parts(parts: JobParts<'_>) -> Result<JobBundle, JobDataError> {
        let emit = |c: &Circuit, what: &str| {
            emit_qasm(c).map_err(|e| JobDataError::new(ErrorCode::Invalid, format!("{what} circuit: {e}")))
        };
        let bundle = JobBundle {
            format_version: BUNDLE_FORMAT.to_string(),
            job_id: parts.job_id.unwrap_or_else(Uuid::new_v4),
            created_at: parts.created_at.unwrap_or_else(Utc::now),
            problem: parts.problem.map(ProblemEcho::from),
            logical_qasm: emit(parts.logical, "logical")?,
            physical_qasm: emit(&parts.transpiled.physical, "physical")?,
            layout: parts.transpiled.layout.clone(),
            transpile: TranspileEcho {
                options: parts.transpiled.options.clone(),
                metrics: parts.transpiled.metrics.clone(),
                provenance: parts.transpiled.provenance.clone(),
            },
            machine_name: parts.snapshot.machine_name.clone(),
            calibration: parts.snapshot.clone(),
            run: RunEcho::from(parts.run),
            counts: parts.counts,
            esp: parts.esp,
            hea: parts.hea,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn logical_circuit(&self) -> Result<Circuit, JobDataError> {
        checked_circuit(&self.logical_qasm, "logical")
    }

    pub fn physical_circuit(&self) -> Result<Circuit, JobDataError> {
        checked_circuit(&self.physical_qasm, "physical")
    }

    /// Structural checks shared by export and retrieval.
    pub fn validate(&self) -> Result<(), JobDataError> {
        let invalid = |m: String| JobDataError::new(ErrorCode::Invalid, m);
        if self.format_version != BUNDLE_FORMAT {
            return Err(version_error(&self.format_version));
        }
        self.logical_circuit()?;
        let physical = self.physical_circuit()?;
        if self.counts.width() != physical.num_clbits {
            return Err(JobDataError::new(
                ErrorCode::WidthMismatch,
                format!(
                    "counts width {} does not match the physical circuit's {} classical bits",
                    self.counts.width(),
                    physical.num_clbits
                ),
            ));
        }
        if self.counts.shots() == 0 {
            return Err(invalid("bundle has no counts".into()));
        }
        if self.counts.shots() != self.run.shots {
            return Err(invalid(format!(
                "counts total {} does not match run shots {}",
                self.counts.shots(),
                self.run.shots
            )));
        }
        self.calibration.validate().map_err(|e| invalid(format!("calibration: {e}")))?;
        if self.machine_name != self.calibration.machine_name {
            return Err(invalid(format!(
                "machine name {} does not match the calibration's {}",
                self.machine_name, self.calibration.machine_name
            )));
        }
        if physical.num_qubits != self.calibration.num_qubits() {
            return Err(invalid(format!(
                "physical circuit has {} qubits, machine has {}",
                physical.num_qubits,
                self.calibration.num_qubits()
            )));
        }
        for (name, map) in [("initial", &self.layout.initial), ("final", &self.layout.final_map)] {
            let mut sorted = map.clone();
            sorted.sort_unstable();
            if sorted != (0..physical.num_qubits).collect::<Vec<_>>() {
                return Err(invalid(format!("{name} layout is not a permutation of the physical qubits")));
            }
        }
        if self.transpile.provenance.len() != physical.len() {
            return Err(invalid(format!(
                "provenance has {} entries for {} physical gates",
                self.transpile.provenance.len(),
                physical.len()
            )));
        }
        Ok(())
    }
}

fn checked_circuit(text: &str, what: &str) -> Result<Circuit, JobDataError> {
    let c = parse_qasm(text).map_err(|e| JobDataError::new(ErrorCode::Schema, format!("{what} QASM: {e}")))?;
    let report = verify(&c);
    if !report.ok {
        return Err(JobDataError::new(
            ErrorCode::Schema,
            format!("{what} circuit fails verification: {}", report.summary()),
        ));
    }
    Ok(c)
}

fn version_error(found: &str) -> JobDataError {
    JobDataError::new(
        ErrorCode::VersionMismatch,
        format!("bundle format {found} cannot be read as {BUNDLE_FORMAT}; no migration exists"),
    )
}

fn json_error(e: serde_json::Error, what: &str) -> JobDataError {
    use serde_json::error::Category;
    let code = match e.classify() {
        Category::Syntax | Category::Eof => ErrorCode::Corrupt,
        Category::Data => ErrorCode::Schema,
        Category::Io => ErrorCode::Io,
    };
    JobDataError::new(code, format!("{what}: {e}"))
}

fn io_error(e: std::io::Error, path: &Path) -> JobDataError {
    JobDataError::new(ErrorCode::Io, format!("{}: {e}", path.display()))
}

fn canonical_text<T: Serialize>(value: &T) -> String {
    // serde_json's Map is a BTreeMap, so a round trip through Value sorts keys
    let v = serde_json::to_value(value).expect("bundle types serialize");
    let mut text = serde_json::to_string_pretty(&v).expect("values serialize");
    text.push('\n');
    text
}

/// Canonical text of a bundle with counts inline, whatever their size.
pub fn bundle_to_string(bundle: &JobBundle) -> Result<String, JobDataError> {
    bundle.validate()?;
    Ok(canonical_text(bundle))
}

/// Parses and validates a bundle. A sidecar reference is resolved against
/// `base_dir`; without one such bundles are rejected.
pub fn bundle_from_str(text: &str, base_dir: Option<&Path>) -> Result<JobBundle, JobDataError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| json_error(e, "bundle"))?;
    match value.get("format_version") {
        Some(serde_json::Value::String(v)) if v == BUNDLE_FORMAT => {}
        Some(serde_json::Value::String(v)) => return Err(version_error(v)),
        _ => return Err(JobDataError::new(ErrorCode::Schema, "bundle has no format_version string")),
    }
    let file: BundleFile = serde_json::from_value(value).map_err(|e| json_error(e, "bundle"))?;
    let counts = match (file.counts, file.counts_sidecar) {
        (Some(c), None) => c,
        (None, Some(side)) => {
            let dir = base_dir.ok_or_else(|| {
                JobDataError::new(ErrorCode::Schema, "bundle references a counts sidecar but no directory was given")
            })?;
            read_sidecar(dir, &side)?
        }
        _ => {
            return Err(JobDataError::new(
                ErrorCode::Schema,
                "bundle needs exactly one of counts and counts_sidecar",
            ))
        }
    };
    let bundle = JobBundle {
        format_version: file.format_version,
        job_id: file.job_id,
        created_at: file.created_at,
        problem: file.problem,
        logical_qasm: file.logical_qasm,
        physical_qasm: file.physical_qasm,
        layout: file.layout,
        transpile: file.transpile,
        machine_name: file.machine_name,
        calibration: file.calibration,
        run: file.run,
        counts,
        esp: file.esp,
        hea: file.hea,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn read_sidecar(dir: &Path, side: &SidecarRef) -> Result<Counts, JobDataError> {
    let rel = Path::new(&side.path);
    if rel.components().count() != 1 || rel.is_absolute() {
        return Err(JobDataError::new(ErrorCode::Schema, "sidecar path must be a plain file name"));
    }
    let path = dir.join(rel);
    let file = fs::File::open(&path).map_err(|e| io_error(e, &path))?;
    let counts = read_ndjson(BufReader::new(file))?;
    if counts.width() != side.width || counts.shots() != side.shots || counts.len() != side.entries {
        return Err(JobDataError::new(ErrorCode::Corrupt, "sidecar does not match its reference"));
    }
    Ok(counts)
}

/// Sidecar file name used for a bundle written to `path`.
pub fn sidecar_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("job");
    format!("{stem}.counts.ndjson")
}

/// Writes the bundle, plus a sidecar when the counts are large. Returns
/// the files written. Validation happens before anything touches disk.
pub fn export_bundle(bundle: &JobBundle, path: &Path) -> Result<Vec<PathBuf>, JobDataError> {
    bundle.validate()?;
    let mut written = Vec::new();
    let (counts, sidecar) = if bundle.counts.len() > INLINE_COUNTS_LIMIT {
        let name = sidecar_name(path);
        let side_path = path.with_file_name(&name);
        let file = fs::File::create(&side_path).map_err(|e| io_error(e, &side_path))?;
        let job_id = bundle.job_id.to_string();
        let chunks = chunk_iter(&bundle.counts, &job_id, DEFAULT_CHUNK_SIZE);
        write_ndjson(chunks, std::io::BufWriter::new(file)).map_err(|e| io_error(e, &side_path))?;
        written.push(side_path);
        let side = SidecarRef {
            path: name,
            width: bundle.counts.width(),
            shots: bundle.counts.shots(),
            entries: bundle.counts.len(),
        };
        (None, Some(side))
    } else {
        (Some(bundle.counts.clone()), None)
    };
    let file = BundleFile {
        format_version: bundle.format_version.clone(),
        job_id: bundle.job_id,
        created_at: bundle.created_at,
        problem: bundle.problem.clone(),
        logical_qasm: bundle.logical_qasm.clone(),
        physical_qasm: bundle.physical_qasm.clone(),
        layout: bundle.layout.clone(),
        transpile: bundle.transpile.clone(),
        machine_name: bundle.machine_name.clone(),
        calibration: bundle.calibration.clone(),
        run: bundle.run,
        counts,
        counts_sidecar: sidecar,
        esp: bundle.esp.clone(),
        hea: bundle.hea.clone(),
    };
    fs::write(path, canonical_text(&file)).map_err(|e| io_error(e, path))?;
    written.insert(0, path.to_path_buf());
    Ok(written)
}

pub fn retrieve_bundle(path: &Path) -> Result<JobBundle, JobDataError> {
    let bytes = fs::read(path).map_err(|e| io_error(e, path))?;
    let text = String::from_utf8(bytes).map_err(|_| JobDataError::new(ErrorCode::Corrupt, "bundle is not UTF-8"))?;
    bundle_from_str(&text, path.parent())
}

/// Physical circuit and run configuration that replay the bundle's run on
/// its embedded calibration.
pub fn simulator_from_bundle(bundle: &JobBundle) -> Result<(Circuit, RunConfig), JobDataError> {
    let circuit = bundle.physical_circuit()?;
    let config = match bundle.run.noise {
        NoiseMode::Ideal => RunConfig::ideal(bundle.run.shots, bundle.run.seed),
        NoiseMode::Calibrated => RunConfig::calibrated(bundle.run.shots, bundle.run.seed, bundle.calibration.clone()),
    };
    Ok((circuit, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::builtin_registry;
    use crate::problems::build;
    use crate::sim::run;
    use crate::transpile::transpile;

    fn bell_bundle(noise: NoiseMode, seed: u64) -> JobBundle {
        let reg = builtin_registry();
        let snap = reg.get("vigo-like").unwrap().latest().unwrap().clone();
        let built = build(&ProblemSpec::bell()).unwrap();
        let t = transpile(&built.circuit, &snap, &TranspileOptions::level(1, 3)).unwrap();
        let config = match noise {
            NoiseMode::Ideal => RunConfig::ideal(1024, seed),
            NoiseMode::Calibrated => RunConfig::calibrated(1024, seed, snap.clone()),
        };
        let counts = run(&t.physical, &config).unwrap();
        JobBundle::from_parts(JobParts {
            job_id: Some(Uuid::from_u128(7)),
            created_at: Some(DateTime::parse_from_rfc3339("2026-01-02T03:04:05Z").unwrap().into()),
            problem: Some(&built),
            logical: &built.circuit,
            transpiled: &t,
            snapshot: &snap,
            run: &config,
            counts,
            esp: None,
            hea: None,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let b = bell_bundle(NoiseMode::Calibrated, 5);
        let text = bundle_to_string(&b).unwrap();
        assert_eq!(text, bundle_to_string(&b).unwrap());
        let back = bundle_from_str(&text, None).unwrap();
        assert_eq!(back, b);
        assert_eq!(bundle_to_string(&back).unwrap(), text);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = bell_bundle(NoiseMode::Ideal, 1);
        let path = dir.path().join("bell.qjob");
        let files = export_bundle(&b, &path).unwrap();
        assert_eq!(files, vec![path.clone()]);
        let first = fs::read(&path).unwrap();
        export_bundle(&b, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        assert_eq!(retrieve_bundle(&path).unwrap(), b);
    }

    #[test]
    fn rerun_reproduces_counts() {
        for mode in [NoiseMode::Ideal, NoiseMode::Calibrated] {
            let b = bell_bundle(mode, 21);
            let (c, cfg) = simulator_from_bundle(&b).unwrap();
            assert_eq!(run(&c, &cfg).unwrap(), b.counts);
        }
    }

    #[test]
    fn error_codes() {
        let b = bell_bundle(NoiseMode::Ideal, 1);
        let text = bundle_to_string(&b).unwrap();
        let truncated = &text[..text.len() / 2];
        assert_eq!(bundle_from_str(truncated, None).unwrap_err().code, ErrorCode::Corrupt);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["format_version"] = "qjob/0".into();
        let err = bundle_from_str(&v.to_string(), None).unwrap_err();
        assert_eq!(err.code, ErrorCode::VersionMismatch);
        assert!(err.message.contains("qjob/0") && err.message.contains(BUNDLE_FORMAT));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("layout");
        assert_eq!(bundle_from_str(&v.to_string(), None).unwrap_err().code, ErrorCode::Schema);

        let mut wide = b.clone();
        wide.counts = Counts::from_bitstrings([("000", 1024)]).unwrap();
        assert_eq!(bundle_to_string(&wide).unwrap_err().code, ErrorCode::WidthMismatch);

        let mut empty = b.clone();
        empty.counts = Counts::new(2).unwrap();
        assert_eq!(bundle_to_string(&empty).unwrap_err().code, ErrorCode::Invalid);
    }

    #[test]
    fn large_counts_use_a_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = bell_bundle(NoiseMode::Ideal, 1);
        // widen the physical circuit's classical register to hold 2^17 states
        let mut phys = b.physical_circuit().unwrap();
        phys.num_clbits = 17;
        b.physical_qasm = emit_qasm(&phys).unwrap();
        b.counts = Counts::from_entries(17, (0..1u64 << 17).map(|s| (s, 1))).unwrap();
        b.run.shots = 1 << 17;
        let path = dir.path().join("big.qjob");
        let files = export_bundle(&b, &path).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[1].ends_with("big.counts.ndjson"));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"counts_sidecar\""));
        assert!(bundle_from_str(&text, None).is_err());
        assert_eq!(retrieve_bundle(&path).unwrap(), b);
    }
}
