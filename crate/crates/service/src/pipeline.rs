//! The JSON document passed between CLI stages on stdin/stdout. Each
//! stage fills in its part; transpiling again clears everything after it.

use qwb_core::analysis::EspReport;
use qwb_core::circuit::Circuit;
use qwb_core::jobdata::JobBundle;
use qwb_core::machine::CalibrationSnapshot;
use qwb_core::problems::BuildResult;
use qwb_core::results::HeaReport;
use qwb_core::sim::{Counts, NoiseMode, RunConfig};
use qwb_core::jobdata::RunEcho;
use qwb_core::qasm::parse_qasm;
use qwb_core::transpile::TranspileResult;
use serde::{Deserialize, Serialize};

pub const PIPELINE_FORMAT: &str = "qwb-pipeline/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDoc {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<BuildResult>,
    pub logical: Circuit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transpiled: Option<TranspileResult>,
    /// Calibration the circuit was transpiled against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<CalibrationSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunEcho>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub esp: Option<EspReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hea: Option<HeaReport>,
}

impl PipelineDoc {
    pub fn from_circuit(logical: Circuit) -> Self {
        PipelineDoc {
            format: PIPELINE_FORMAT.into(),
            problem: None,
            logical,
            transpiled: None,
            snapshot: None,
            run: None,
            counts: None,
            esp: None,
            hea: None,
        }
    }

    pub fn from_build(build: BuildResult) -> Self {
        let mut doc = Self::from_circuit(build.circuit.clone());
        doc.problem = Some(build);
        doc
    }

    /// Rebuilds every stage from a job bundle.
    pub fn from_bundle(bundle: &JobBundle) -> Result<Self, String> {
        let logical = parse_qasm(&bundle.logical_qasm).map_err(|e| format!("logical circuit: {e}"))?;
        let physical = parse_qasm(&bundle.physical_qasm).map_err(|e| format!("physical circuit: {e}"))?;
        let physical = Circuit {
            name: format!("{}@{}", logical.name, bundle.machine_name),
            ..physical
        };
        let problem = bundle.problem.as_ref().map(|p| BuildResult {
            circuit: logical.clone(),
            qubit_roles: p.qubit_roles.clone(),
            clbit_roles: p.clbit_roles.clone(),
            normalization: p.normalization,
            problem: p.spec.clone(),
        });
        Ok(PipelineDoc {
            format: PIPELINE_FORMAT.into(),
            problem,
            transpiled: Some(TranspileResult {
                machine_name: bundle.machine_name.clone(),
                physical,
                layout: bundle.layout.clone(),
                provenance: bundle.transpile.provenance.clone(),
                options: bundle.transpile.options.clone(),
                metrics: bundle.transpile.metrics.clone(),
            }),
            logical,
            snapshot: Some(bundle.calibration.clone()),
            run: Some(bundle.run),
            counts: Some(bundle.counts.clone()),
            esp: bundle.esp.clone(),
            hea: bundle.hea.clone(),
        })
    }

    pub fn set_transpiled(&mut self, result: TranspileResult, snapshot: CalibrationSnapshot) {
        self.transpiled = Some(result);
        self.snapshot = Some(snapshot);
        self.run = None;
        self.counts = None;
        self.esp = None;
        self.hea = None;
    }

    /// The circuit a run executes: physical when transpiled.
    pub fn executable(&self) -> &Circuit {
        self.transpiled.as_ref().map_or(&self.logical, |t| &t.physical)
    }

    /// Run configuration recorded by the run stage.
    pub fn run_config(&self) -> Option<RunConfig> {
        let echo = self.run?;
        match echo.noise {
            NoiseMode::Ideal => Some(RunConfig::ideal(echo.shots, echo.seed)),
            NoiseMode::Calibrated => Some(RunConfig::calibrated(echo.shots, echo.seed, self.snapshot.clone()?)),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("pipeline document serializes");
        text.push('\n');
        text
    }
}
