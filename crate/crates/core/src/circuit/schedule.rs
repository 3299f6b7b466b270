use serde::{Deserialize, Serialize};

use super::{verify, Circuit, CircuitError, GateInstance, GateKind};
use crate::machine::CalibrationSnapshot;

/// ASAP layering of a circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSchedule {
    /// Gate ids per layer, ascending within each layer.
    pub layers: Vec<Vec<usize>>,
    /// Layer index of every gate, indexed by gate id.
    pub layer_of: Vec<usize>,
}

impl LayerSchedule {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Greedy as-soon-as-possible layering. A gate lands one layer after the
/// latest gate sharing any of its qubits. Barriers follow the same rule and
/// so align all of their qubits on one layer.
pub fn schedule(circuit: &Circuit) -> Result<LayerSchedule, CircuitError> {
    let report = verify(circuit);
    if !report.ok {
        return Err(CircuitError::Unverified(report.summary()));
    }
    Ok(schedule_unchecked(circuit))
}

pub(crate) fn schedule_unchecked(circuit: &Circuit) -> LayerSchedule {
    // frontier[q] = number of layers already occupied on qubit q
    let mut frontier = vec![0usize; circuit.num_qubits];
    let mut layers: Vec<Vec<usize>> = Vec::new();
    let mut layer_of = Vec::with_capacity(circuit.gates.len());
    for g in &circuit.gates {
        let layer = g.qubits.iter().map(|&q| frontier[q]).max().unwrap_or(0);
        for &q in &g.qubits {
            frontier[q] = layer + 1;
        }
        if layers.len() <= layer {
            layers.resize_with(layer + 1, Vec::new);
        }
        layers[layer].push(g.id);
        layer_of.push(layer);
    }
    LayerSchedule { layers, layer_of }
}

pub(crate) fn gate_duration(g: &GateInstance, snapshot: &CalibrationSnapshot) -> Option<f64> {
    match g.kind {
        GateKind::Measure => snapshot.readout_duration(g.qubits[0]),
        GateKind::Barrier => Some(snapshot.gate_duration(GateKind::Barrier.name(), &g.qubits).unwrap_or(0.0)),
        kind => snapshot.gate_duration(kind.name(), &g.qubits),
    }
}

/// Total duration in nanoseconds: the sum over layers of the longest gate in
/// each layer.
pub fn duration(circuit: &Circuit, snapshot: &CalibrationSnapshot) -> Result<f64, CircuitError> {
    let sched = schedule(circuit)?;
    let mut total = 0.0;
    for layer in &sched.layers {
        let mut longest: f64 = 0.0;
        for &id in layer {
            let g = &circuit.gates[id];
            let d = gate_duration(g, snapshot).ok_or_else(|| CircuitError::MissingDuration {
                gate: id,
                label: g.label(),
            })?;
            longest = longest.max(d);
        }
        total += longest;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::testing::two_qubit_snapshot;

    #[test]
    fn bell_layers() {
        let mut c = Circuit::new("bell", 2, 0);
        c.h(0).cx(0, 1);
        let s = schedule(&c).unwrap();
        assert_eq!(s.layers, vec![vec![0], vec![1]]);
        assert_eq!(s.layer_of, vec![0, 1]);
    }

    #[test]
    fn disjoint_gates_share_a_layer() {
        let mut c = Circuit::new("hh", 2, 0);
        c.h(0).h(1);
        assert_eq!(schedule(&c).unwrap().layers, vec![vec![0, 1]]);
    }

    #[test]
    fn asap_hand_trace() {
        let mut c = Circuit::new("t", 3, 0);
        c.cx(0, 1).h(2).cx(1, 2);
        assert_eq!(schedule(&c).unwrap().layers, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn barrier_fences_its_qubits() {
        let mut c = Circuit::new("b", 3, 0);
        c.h(0).h(0).barrier(&[0, 1]).h(1).h(2);
        let s = schedule(&c).unwrap();
        assert_eq!(s.layer_of, vec![0, 1, 2, 3, 0]);
    }

    #[test]
    fn rejects_unverified() {
        let mut c = Circuit::new("bad", 1, 0);
        c.cx(0, 0);
        assert!(matches!(schedule(&c), Err(CircuitError::Unverified(_))));
    }

    #[test]
    fn duration_is_sum_of_layer_maxima() {
        let snap = two_qubit_snapshot(35.0, 300.0);
        let mut c = Circuit::new("d", 2, 0);
        c.sx(0).cx(0, 1);
        assert_eq!(duration(&c, &snap).unwrap(), 335.0);

        let mut par = Circuit::new("p", 3, 0);
        par.sx(2).cx(0, 1);
        let snap3 = crate::machine::testing::linear_snapshot(3, 35.0, 300.0, 0.0, 0.0);
        assert_eq!(duration(&par, &snap3).unwrap(), 300.0);

        assert_eq!(duration(&Circuit::new("e", 2, 0), &snap).unwrap(), 0.0);
    }

    #[test]
    fn missing_duration_names_the_gate() {
        let snap = two_qubit_snapshot(35.0, 300.0);
        let mut c = Circuit::new("d", 2, 0);
        c.h(1);
        match duration(&c, &snap) {
            Err(CircuitError::MissingDuration { gate, label }) => {
                assert_eq!(gate, 0);
                assert_eq!(label, "h[1]");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
