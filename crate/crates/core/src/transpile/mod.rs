//! Logical-to-physical compilation for a calibrated machine.
//!
//! Pipeline: unroll gates wider than two qubits, choose an initial layout,
//! route with shortest-path swaps, translate into the basis gates and (from
//! level 1) run peephole passes. Every physical gate records its origin:
//! the logical gate it came from, or routing overhead.

mod layout;
mod optimize;
mod route;
mod translate;
mod unroll;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::esp;
use crate::circuit::{self, unitary_of, verify, Circuit, CircuitError, GateKind, Matrix};
use crate::machine::CalibrationSnapshot;

pub use layout::qubit_score;
pub use translate::{translate_gate, BasisError};
pub use unroll::{unroll_gate, RawGate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranspileError {
    #[error("circuit failed verification: {0}")]
    Unverified(String),
    #[error("circuit has {qubits} qubits but the machine only {available}")]
    TooWide { qubits: usize, available: usize },
    #[error("physical qubits {a} and {b} are not connected")]
    Disconnected { a: usize, b: usize },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("calibration incomplete for the physical circuit: {0}")]
    Calibration(String),
    #[error("strategy {index}: {source}")]
    Strategy {
        index: usize,
        #[source]
        source: Box<TranspileError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMethod {
    Trivial,
    ErrorAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMethod {
    #[default]
    ShortestPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileOptions {
    pub optimization_level: u8,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the level's default layout (trivial below level 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_method: Option<LayoutMethod>,
    #[serde(default)]
    pub routing_method: RoutingMethod,
    /// Replaces the machine's basis gates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<String>>,
}

impl Default for TranspileOptions {
    fn default() -> Self {
        TranspileOptions::level(1, 0)
    }
}

impl TranspileOptions {
    pub fn level(optimization_level: u8, seed: u64) -> Self {
        TranspileOptions {
            optimization_level,
            seed,
            layout_method: None,
            routing_method: RoutingMethod::ShortestPath,
            basis: None,
        }
    }

    pub fn with_layout(mut self, method: LayoutMethod) -> Self {
        self.layout_method = Some(method);
        self
    }

    pub fn effective_layout(&self) -> LayoutMethod {
        self.layout_method.unwrap_or(if self.optimization_level >= 2 {
            LayoutMethod::ErrorAware
        } else {
            LayoutMethod::Trivial
        })
    }

    /// Named preset: `level0`, `level1` or `level2`.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "level0" => Some(Self::level(0, seed)),
            "level1" => Some(Self::level(1, seed)),
            "level2" => Some(Self::level(2, seed)),
            _ => None,
        }
    }
}

/// The four strategies used for side-by-side comparisons.
pub fn standard_presets(seed: u64) -> Vec<(String, TranspileOptions)> {
    vec![
        ("level0".into(), TranspileOptions::level(0, seed)),
        ("level0-error-aware".into(), TranspileOptions::level(0, seed).with_layout(LayoutMethod::ErrorAware)),
        ("level1".into(), TranspileOptions::level(1, seed)),
        ("level2".into(), TranspileOptions::level(2, seed)),
    ]
}

/// `virtual -> physical` maps over every machine qubit. Virtual qubits
/// `0..num_logical` are the circuit's qubits; the rest are ancillas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub num_logical: usize,
    pub initial: Vec<usize>,
    #[serde(rename = "final")]
    pub final_map: Vec<usize>,
}

impl Layout {
    pub fn trivial(num_logical: usize, num_physical: usize) -> Self {
        let id: Vec<usize> = (0..num_physical).collect();
        Layout {
            num_logical,
            initial: id.clone(),
            final_map: id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Logical(usize),
    RoutingOverhead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileMetrics {
    /// Unitary gates (measures and barriers excluded).
    pub gate_count: usize,
    pub two_qubit_count: usize,
    pub routing_gate_count: usize,
    pub layer_count: usize,
    pub duration_ns: f64,
    pub cumulative_esp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileResult {
    pub machine_name: String,
    pub physical: Circuit,
    pub layout: Layout,
    /// Indexed by physical gate id.
    pub provenance: Vec<Origin>,
    pub options: TranspileOptions,
    pub metrics: TranspileMetrics,
}

pub fn transpile(
    circuit: &Circuit,
    snapshot: &CalibrationSnapshot,
    options: &TranspileOptions,
) -> Result<TranspileResult, TranspileError> {
    if options.optimization_level > 2 {
        return Err(TranspileError::InvalidOptions(format!(
            "optimization_level must be 0, 1 or 2, got {}",
            options.optimization_level
        )));
    }
    let report = verify(circuit);
    if !report.ok {
        return Err(TranspileError::Unverified(report.summary()));
    }
    let big_n = snapshot.num_qubits();
    if circuit.num_qubits > big_n {
        return Err(TranspileError::TooWide {
            qubits: circuit.num_qubits,
            available: big_n,
        });
    }
    let basis = options.basis.clone().unwrap_or_else(|| snapshot.basis_gates.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut unrolled = Vec::new();
    for g in &circuit.gates {
        for raw in unroll_gate(g.kind, &g.qubits, &g.params) {
            unrolled.push((raw, Origin::Logical(g.id)));
        }
    }

    let initial = match options.effective_layout() {
        LayoutMethod::Trivial => (0..big_n).collect(),
        LayoutMethod::ErrorAware => {
            let raw: Vec<RawGate> = unrolled.iter().map(|(g, _)| g.clone()).collect();
            layout::error_aware(circuit.num_qubits, &raw, snapshot, &mut rng)
        }
    };
    let (routed, final_map) = route::route(unrolled, &initial, &snapshot.coupling, &mut rng)?;

    let mut translated = Vec::with_capacity(routed.len() * 3);
    for ((kind, qubits, params), origin) in routed {
        for raw in translate_gate(kind, &qubits, &params, &basis)? {
            translated.push((raw, origin));
        }
    }
    if options.optimization_level >= 1 {
        translated = optimize::peephole(translated, big_n);
    }

    let mut physical = Circuit::new(format!("{}@{}", circuit.name, snapshot.machine_name), big_n, circuit.num_clbits);
    let mut provenance = Vec::with_capacity(translated.len());
    for ((kind, qubits, params), origin) in translated {
        let clbits = if kind == GateKind::Measure {
            // measure clbits are not part of RawGate; recover from the origin
            match origin {
                Origin::Logical(id) => circuit.gates[id].clbits.clone(),
                Origin::RoutingOverhead => Vec::new(),
            }
        } else {
            Vec::new()
        };
        physical.add_gate(kind, qubits, clbits, params);
        provenance.push(origin);
    }
    let metrics = metrics(&physical, &provenance, snapshot)?;
    Ok(TranspileResult {
        machine_name: snapshot.machine_name.clone(),
        physical,
        layout: Layout {
            num_logical: circuit.num_qubits,
            initial,
            final_map,
        },
        provenance,
        options: options.clone(),
        metrics,
    })
}

fn metrics(physical: &Circuit, provenance: &[Origin], snapshot: &CalibrationSnapshot) -> Result<TranspileMetrics, TranspileError> {
    let schedule = circuit::schedule(physical).map_err(|e| TranspileError::Calibration(e.to_string()))?;
    let duration_ns = circuit::duration(physical, snapshot).map_err(|e| TranspileError::Calibration(e.to_string()))?;
    let report = esp(physical, snapshot).map_err(|e| TranspileError::Calibration(e.to_string()))?;
    Ok(TranspileMetrics {
        gate_count: physical.gates.iter().filter(|g| g.kind.is_unitary()).count(),
        two_qubit_count: physical.gates.iter().filter(|g| g.kind.is_unitary() && g.qubits.len() == 2).count(),
        routing_gate_count: provenance.iter().filter(|o| **o == Origin::RoutingOverhead).count(),
        layer_count: schedule.len(),
        duration_ns,
        cumulative_esp: report.total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub index: usize,
    pub options: TranspileOptions,
    pub gate_count: usize,
    pub layer_count: usize,
    pub duration_ns: f64,
    pub cumulative_esp: f64,
    pub result: TranspileResult,
}

/// One row per option set, in the given order.
pub fn compare_strategies(
    circuit: &Circuit,
    snapshot: &CalibrationSnapshot,
    options: &[TranspileOptions],
) -> Result<Vec<StrategyRow>, TranspileError> {
    if options.is_empty() {
        return Err(TranspileError::InvalidOptions("at least one strategy is required".into()));
    }
    options
        .iter()
        .enumerate()
        .map(|(index, opt)| {
            let result = transpile(circuit, snapshot, opt).map_err(|e| TranspileError::Strategy {
                index,
                source: Box::new(e),
            })?;
            Ok(StrategyRow {
                index,
                options: opt.clone(),
                gate_count: result.metrics.gate_count,
                layer_count: result.metrics.layer_count,
                duration_ns: result.metrics.duration_ns,
                cumulative_esp: result.metrics.cumulative_esp,
                result,
            })
        })
        .collect()
}

/// Phase-insensitive distance between the physical unitary and the
/// logical unitary conjugated by the initial and final layouts:
/// `U_phys · P_initial` against `P_final · U_logical`.
pub fn layout_equivalence_error(logical: &Circuit, result: &TranspileResult) -> Result<f64, CircuitError> {
    let mut padded = logical.without_directives();
    padded.num_qubits = result.physical.num_qubits;
    let u_log = unitary_of(&padded)?;
    let u_phys = unitary_of(&result.physical.without_directives())?;
    let p_init = Matrix::qubit_permutation(&result.layout.initial);
    let p_final = Matrix::qubit_permutation(&result.layout.final_map);
    Ok(u_phys.mul(&p_init).phase_insensitive_diff(&p_final.mul(&u_log)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::builtin_registry;
    use crate::machine::testing::linear_snapshot;
    use crate::qasm::emit_qasm;

    #[test]
    fn single_h_is_three_gates_from_gate_zero() {
        let snap = linear_snapshot(2, 35.0, 300.0, 0.001, 0.01);
        let mut c = Circuit::new("h", 1, 0);
        c.h(0);
        let r = transpile(&c, &snap, &TranspileOptions::level(0, 0)).unwrap();
        assert_eq!(r.physical.len(), 3);
        assert!(r.provenance.iter().all(|o| *o == Origin::Logical(0)));
        assert!(layout_equivalence_error(&c, &r).unwrap() < 1e-10);
    }

    #[test]
    fn adjacent_cx_is_untouched() {
        let snap = linear_snapshot(3, 35.0, 300.0, 0.0, 0.0);
        let mut c = Circuit::new("cx", 2, 0);
        c.cx(0, 1);
        let r = transpile(&c, &snap, &TranspileOptions::level(0, 0)).unwrap();
        assert_eq!(r.physical.len(), 1);
        assert_eq!(r.metrics.routing_gate_count, 0);
    }

    #[test]
    fn toffoli_on_a_line_with_routing() {
        let snap = linear_snapshot(3, 35.0, 300.0, 0.001, 0.01);
        let mut c = Circuit::new("ccx", 3, 0);
        c.ccx(0, 2, 1);
        for level in 0..=2 {
            let r = transpile(&c, &snap, &TranspileOptions::level(level, 5)).unwrap();
            assert!(r.physical.count_kind(GateKind::Cx) >= 6);
            for g in r.physical.gates.iter().filter(|g| g.qubits.len() == 2) {
                assert!(snap.coupling.are_coupled(g.qubits[0], g.qubits[1]));
            }
            assert!(layout_equivalence_error(&c, &r).unwrap() < 1e-8, "level {level}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let reg = builtin_registry();
        let snap = reg.get("vigo-like").unwrap().latest().unwrap();
        let mut c = Circuit::new("t", 4, 4);
        c.h(0).cx(0, 3).ccx(3, 1, 2).cu1(2, 0, 0.3).swap(1, 3);
        for q in 0..4 {
            c.measure(q, q);
        }
        for level in 0..=2 {
            let a = transpile(&c, snap, &TranspileOptions::level(level, 42)).unwrap();
            let b = transpile(&c, snap, &TranspileOptions::level(level, 42)).unwrap();
            assert_eq!(emit_qasm(&a.physical).unwrap(), emit_qasm(&b.physical).unwrap());
            assert_eq!(a, b);
            assert!(layout_equivalence_error(&c, &a).unwrap() < 1e-8);
            assert_eq!(a.physical.measurements().len(), 4);
        }
    }

    #[test]
    fn peephole_never_grows_the_circuit() {
        let reg = builtin_registry();
        let snap = reg.get("bogota-like").unwrap().latest().unwrap();
        let mut c = Circuit::new("p", 3, 0);
        c.h(0).h(0).cx(0, 2).cx(0, 2).rz(1, 0.5).rz(1, -0.5).ccx(0, 1, 2);
        let l0 = transpile(&c, snap, &TranspileOptions::level(0, 1)).unwrap();
        let l1 = transpile(&c, snap, &TranspileOptions::level(1, 1)).unwrap();
        assert!(l1.metrics.gate_count < l0.metrics.gate_count);
        assert!(layout_equivalence_error(&c, &l1).unwrap() < 1e-8);
    }

    #[test]
    fn compare_rows_follow_input_order() {
        let reg = builtin_registry();
        let snap = reg.get("vigo-like").unwrap().latest().unwrap();
        let mut c = Circuit::new("toffoli", 3, 3);
        c.ccx(0, 1, 2).measure(0, 0).measure(1, 1).measure(2, 2);
        let opts: Vec<TranspileOptions> = standard_presets(7).into_iter().map(|p| p.1).collect();
        let rows = compare_strategies(&c, snap, &opts).unwrap();
        assert_eq!(rows.len(), 4);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.index, i);
            assert!(r.cumulative_esp > 0.0 && r.cumulative_esp <= 1.0);
            assert!(r.duration_ns > 0.0);
        }
        let twice = compare_strategies(&c, snap, &[opts[0].clone(), opts[0].clone()]).unwrap();
        assert_eq!(twice[0].result, twice[1].result);
    }

    #[test]
    fn errors() {
        let snap = linear_snapshot(2, 35.0, 300.0, 0.0, 0.0);
        let c = Circuit::new("wide", 3, 0);
        assert!(matches!(
            transpile(&c, &snap, &TranspileOptions::level(0, 0)),
            Err(TranspileError::TooWide { .. })
        ));
        let mut bad = TranspileOptions::level(0, 0);
        bad.basis = Some(vec!["cx".into()]);
        let mut h = Circuit::new("h", 1, 0);
        h.h(0);
        assert!(matches!(transpile(&h, &snap, &bad), Err(TranspileError::Basis(_))));
        let err = compare_strategies(&c, &snap, &[TranspileOptions::level(0, 0)]).unwrap_err();
        assert!(err.to_string().starts_with("strategy 0"));
    }

    #[test]
    fn options_json() {
        let o: TranspileOptions = serde_json::from_str(r#"{"optimization_level":2,"seed":9}"#).unwrap();
        assert_eq!(o.effective_layout(), LayoutMethod::ErrorAware);
        assert_eq!(o, TranspileOptions::preset("level2", 9).unwrap());
    }
}
