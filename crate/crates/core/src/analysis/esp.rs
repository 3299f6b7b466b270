//! Estimated success probability: products of `1 - error` over gates and
//! readouts of a physical circuit.

use serde::{Deserialize, Serialize};

use crate::circuit::{schedule, Circuit};
use crate::machine::CalibrationSnapshot;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EspError {
    #[error("circuit failed verification: {0}")]
    Unverified(String),
    #[error("no error entry for gate {gate} ({label})")]
    MissingGate { gate: usize, label: String },
    #[error("no readout error for qubit {qubit}")]
    MissingReadout { qubit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspReport {
    pub per_layer: Vec<f64>,
    pub cumulative_by_layer: Vec<f64>,
    /// `[qubit][layer]`: product over gates touching the qubit up to and
    /// including that layer.
    pub per_qubit_cumulative: Vec<Vec<f64>>,
    /// Gate product times `1 - readout_error` of every measured qubit.
    pub total: f64,
    pub total_without_readout: f64,
    pub measured_qubits: Vec<usize>,
}

impl EspReport {
    pub fn layer_count(&self) -> usize {
        self.per_layer.len()
    }

    /// Cumulative value of one qubit after the last layer (1 for an empty
    /// circuit).
    pub fn qubit_final(&self, q: usize) -> f64 {
        self.per_qubit_cumulative
            .get(q)
            .and_then(|row| row.last().copied())
            .unwrap_or(1.0)
    }
}

pub fn esp(circuit: &Circuit, snapshot: &CalibrationSnapshot) -> Result<EspReport, EspError> {
    let sched = schedule(circuit).map_err(|e| EspError::Unverified(e.to_string()))?;
    let layers = sched.len();
    let mut per_layer = vec![1.0; layers];
    let mut qubit_factor = vec![vec![1.0; layers]; circuit.num_qubits];
    for g in &circuit.gates {
        if !g.kind.is_unitary() {
            continue;
        }
        let e = snapshot.gate_error(g.kind.name(), &g.qubits).ok_or_else(|| EspError::MissingGate {
            gate: g.id,
            label: g.label(),
        })?;
        let layer = sched.layer_of[g.id];
        per_layer[layer] *= 1.0 - e;
        for &q in &g.qubits {
            qubit_factor[q][layer] *= 1.0 - e;
        }
    }
    let mut cumulative_by_layer = Vec::with_capacity(layers);
    let mut acc = 1.0;
    for &p in &per_layer {
        acc *= p;
        cumulative_by_layer.push(acc);
    }
    let per_qubit_cumulative = qubit_factor
        .into_iter()
        .map(|row| {
            let mut acc = 1.0;
            row.into_iter()
                .map(|f| {
                    acc *= f;
                    acc
                })
                .collect()
        })
        .collect();
    let measured_qubits = circuit.measured_qubits();
    let mut total = acc;
    for &q in &measured_qubits {
        let r = snapshot.readout_error(q).ok_or(EspError::MissingReadout { qubit: q })?;
        total *= 1.0 - r;
    }
    Ok(EspReport {
        per_layer,
        cumulative_by_layer,
        per_qubit_cumulative,
        total,
        total_without_readout: acc,
        measured_qubits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspDelta {
    pub total_a: f64,
    pub total_b: f64,
    /// `(b - a) / a`; absent when `a` is zero.
    pub relative: Option<f64>,
    /// `relative` as a percentage with one decimal, e.g. `+9.0%`.
    pub relative_label: String,
    pub layers_a: usize,
    pub layers_b: usize,
    pub layer_delta: i64,
}

pub fn esp_delta(a: &EspReport, b: &EspReport) -> EspDelta {
    let relative = (a.total != 0.0).then(|| (b.total - a.total) / a.total);
    EspDelta {
        total_a: a.total,
        total_b: b.total,
        relative,
        relative_label: relative.map_or_else(|| "n/a".to_string(), percent_label),
        layers_a: a.layer_count(),
        layers_b: b.layer_count(),
        layer_delta: b.layer_count() as i64 - a.layer_count() as i64,
    }
}

fn percent_label(r: f64) -> String {
    let pct = format!("{:.1}", (r * 100.0).abs());
    if pct == "0.0" {
        "0.0%".into()
    } else if r > 0.0 {
        format!("+{pct}%")
    } else {
        format!("-{pct}%")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::testing::linear_snapshot;
    use crate::machine::GateKey;

    fn snap3() -> CalibrationSnapshot {
        let mut s = linear_snapshot(3, 35.0, 300.0, 0.001, 0.01);
        for q in &mut s.qubits {
            q.readout_error = 0.02;
        }
        s
    }

    #[test]
    fn sequential_product() {
        let s = snap3();
        let mut c = Circuit::new("c", 2, 0);
        c.sx(0).cx(0, 1);
        let r = esp(&c, &s).unwrap();
        assert_eq!(r.per_layer.len(), 2);
        assert!((r.total - 0.999 * 0.99).abs() < 1e-15);
        assert!((r.total - 0.98901).abs() < 1e-12);
    }

    #[test]
    fn empty_circuit() {
        let r = esp(&Circuit::new("e", 2, 0), &snap3()).unwrap();
        assert!(r.per_layer.is_empty() && r.cumulative_by_layer.is_empty());
        assert_eq!(r.per_qubit_cumulative, vec![Vec::<f64>::new(); 2]);
        assert_eq!(r.total, 1.0);
    }

    #[test]
    fn one_layer_per_qubit_rows() {
        let s = snap3();
        let mut c = Circuit::new("c", 3, 0);
        c.sx(0).cx(1, 2);
        let r = esp(&c, &s).unwrap();
        assert_eq!(r.per_layer.len(), 1);
        assert!((r.per_layer[0] - 0.98901).abs() < 1e-12);
        assert_eq!(r.per_qubit_cumulative[0], vec![0.999]);
        assert_eq!(r.per_qubit_cumulative[1], vec![0.99]);
        assert_eq!(r.per_qubit_cumulative[2], vec![0.99]);
    }

    #[test]
    fn readout_only_in_total() {
        let s = snap3();
        let mut c = Circuit::new("c", 2, 2);
        c.sx(0).measure(0, 0).measure(0, 1);
        let r = esp(&c, &s).unwrap();
        assert_eq!(r.per_layer, vec![0.999, 1.0, 1.0]);
        assert_eq!(r.total_without_readout, 0.999);
        // the same qubit measured twice pays readout once
        assert!((r.total - 0.999 * 0.98).abs() < 1e-15);
    }

    #[test]
    fn missing_entry_names_the_gate() {
        let mut s = snap3();
        s.gates.remove(&GateKey {
            gate: "cx".into(),
            qubits: vec![1, 2],
        });
        let mut c = Circuit::new("c", 3, 0);
        c.sx(0).cx(1, 2);
        let err = esp(&c, &s).unwrap_err();
        assert_eq!(
            err,
            EspError::MissingGate {
                gate: 1,
                label: "cx[1,2]".into()
            }
        );
    }

    #[test]
    fn delta_labels() {
        let mk = |t: f64| EspReport {
            per_layer: vec![],
            cumulative_by_layer: vec![],
            per_qubit_cumulative: vec![],
            total: t,
            total_without_readout: t,
            measured_qubits: vec![],
        };
        assert_eq!(esp_delta(&mk(0.9), &mk(0.981)).relative_label, "+9.0%");
        assert_eq!(esp_delta(&mk(0.5), &mk(0.25)).relative_label, "-50.0%");
        let same = esp_delta(&mk(0.7), &mk(0.7));
        assert_eq!(same.relative, Some(0.0));
        assert_eq!(same.relative_label, "0.0%");
        assert_eq!(esp_delta(&mk(0.0), &mk(0.5)).relative, None);
    }
}
