//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered list of [`GateInstance`]s over a flat qubit
//! index space and a flat classical-bit index space. List order is program
//! order and gate ids always equal list positions.
//!
//! Basis-state indices treat qubit 0 as the least-significant bit; rendered
//! bitstrings place classical bit 0 rightmost.

mod gate;
mod schedule;
mod unitary;
mod verify;

use serde::{Deserialize, Serialize};

pub use gate::{GateInstance, GateKind, UnknownGate};
pub use schedule::{duration, schedule, LayerSchedule};
pub use unitary::{gate_matrix, unitary_of, Matrix, MAX_UNITARY_QUBITS};
pub use verify::{verify, Issue, Severity, VerificationReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("circuit failed verification: {0}")]
    Unverified(String),
    #[error("circuit has {qubits} qubits, at most {max} supported here")]
    TooManyQubits { qubits: usize, max: usize },
    #[error("no duration entry for gate {gate} ({label})")]
    MissingDuration { gate: usize, label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    pub num_qubits: usize,
    pub num_clbits: usize,
    pub gates: Vec<GateInstance>,
}

impl Circuit {
    pub fn new(name: impl Into<String>, num_qubits: usize, num_clbits: usize) -> Self {
        Circuit {
            name: name.into(),
            num_qubits,
            num_clbits,
            gates: Vec::new(),
        }
    }

    /// Appends a gate without validating it; problems surface in [`verify`].
    /// Returns the new gate's id.
    pub fn add_gate(
        &mut self,
        kind: GateKind,
        qubits: Vec<usize>,
        clbits: Vec<usize>,
        params: Vec<f64>,
    ) -> usize {
        let id = self.gates.len();
        self.gates.push(GateInstance {
            id,
            kind,
            qubits,
            clbits,
            params,
        });
        id
    }

    /// Value-style variant of [`Circuit::add_gate`].
    pub fn with_gate(
        mut self,
        kind: GateKind,
        qubits: Vec<usize>,
        clbits: Vec<usize>,
        params: Vec<f64>,
    ) -> Self {
        self.add_gate(kind, qubits, clbits, params);
        self
    }

    /// Equality ignoring the circuit name.
    pub fn same_structure(&self, other: &Circuit) -> bool {
        self.num_qubits == other.num_qubits && self.num_clbits == other.num_clbits && self.gates == other.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gate(&mut self, kind: GateKind, qubits: &[usize]) -> &mut Self {
        self.add_gate(kind, qubits.to_vec(), Vec::new(), Vec::new());
        self
    }

    pub fn rotation(&mut self, kind: GateKind, qubit: usize, angle: f64) -> &mut Self {
        self.add_gate(kind, vec![qubit], Vec::new(), vec![angle]);
        self
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::H, &[q])
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::X, &[q])
    }

    pub fn sx(&mut self, q: usize) -> &mut Self {
        self.gate(GateKind::Sx, &[q])
    }

    pub fn rz(&mut self, q: usize, angle: f64) -> &mut Self {
        self.rotation(GateKind::Rz, q, angle)
    }

    pub fn ry(&mut self, q: usize, angle: f64) -> &mut Self {
        self.rotation(GateKind::Ry, q, angle)
    }

    pub fn cx(&mut self, control: usize, target: usize) -> &mut Self {
        self.gate(GateKind::Cx, &[control, target])
    }

    pub fn cu1(&mut self, control: usize, target: usize, angle: f64) -> &mut Self {
        self.add_gate(GateKind::Cu1, vec![control, target], Vec::new(), vec![angle]);
        self
    }

    pub fn swap(&mut self, a: usize, b: usize) -> &mut Self {
        self.gate(GateKind::Swap, &[a, b])
    }

    pub fn ccx(&mut self, c0: usize, c1: usize, target: usize) -> &mut Self {
        self.gate(GateKind::Ccx, &[c0, c1, target])
    }

    /// Multi-controlled X, normalized to `x`, `cx` or `ccx` for fewer than
    /// three controls so that every emitted circuit stays QASM-encodable.
    pub fn mcx(&mut self, controls: &[usize], target: usize) -> &mut Self {
        match controls {
            [] => self.x(target),
            [c] => self.cx(*c, target),
            [c0, c1] => self.ccx(*c0, *c1, target),
            _ => {
                let mut qs = controls.to_vec();
                qs.push(target);
                self.gate(GateKind::Mcx, &qs)
            }
        }
    }

    pub fn measure(&mut self, qubit: usize, clbit: usize) -> &mut Self {
        self.add_gate(GateKind::Measure, vec![qubit], vec![clbit], Vec::new());
        self
    }

    pub fn barrier(&mut self, qubits: &[usize]) -> &mut Self {
        self.gate(GateKind::Barrier, qubits)
    }

    /// Appends every gate of `other`, renumbering ids. Register sizes grow
    /// to cover both circuits.
    pub fn append(&mut self, other: &Circuit) {
        self.num_qubits = self.num_qubits.max(other.num_qubits);
        self.num_clbits = self.num_clbits.max(other.num_clbits);
        for g in &other.gates {
            self.add_gate(g.kind, g.qubits.clone(), g.clbits.clone(), g.params.clone());
        }
    }

    pub fn concat(a: &Circuit, b: &Circuit) -> Circuit {
        let mut out = a.clone();
        out.append(b);
        out
    }

    /// Reassigns ids to list positions after structural edits.
    pub fn renumber(&mut self) {
        for (i, g) in self.gates.iter_mut().enumerate() {
            g.id = i;
        }
    }

    /// `(qubit, clbit)` pairs of every measure in program order.
    pub fn measurements(&self) -> Vec<(usize, usize)> {
        self.gates
            .iter()
            .filter(|g| g.kind == GateKind::Measure)
            .filter_map(|g| Some((*g.qubits.first()?, *g.clbits.first()?)))
            .collect()
    }

    /// Distinct measured qubits in ascending order.
    pub fn measured_qubits(&self) -> Vec<usize> {
        let mut qs: Vec<usize> = self.measurements().into_iter().map(|(q, _)| q).collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    }

    /// For each clbit, the qubit whose measurement last writes it.
    pub fn clbit_sources(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.num_clbits];
        for (q, c) in self.measurements() {
            if let Some(slot) = out.get_mut(c) {
                *slot = Some(q);
            }
        }
        out
    }

    /// Copy without measures and barriers.
    pub fn without_directives(&self) -> Circuit {
        let mut out = Circuit::new(self.name.clone(), self.num_qubits, self.num_clbits);
        for g in self.gates.iter().filter(|g| g.kind.is_unitary()) {
            out.add_gate(g.kind, g.qubits.clone(), g.clbits.clone(), g.params.clone());
        }
        out
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_pair_by_appending() {
        let mut c = Circuit::new("bell", 2, 0);
        c.h(0).cx(0, 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c.gates[1].kind, GateKind::Cx);
        assert_eq!(c.gates[1].qubits, vec![0, 1]);
        assert_eq!(c.gates.iter().map(|g| g.id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn measure_gets_id_zero() {
        let c = Circuit::new("m", 1, 1).with_gate(GateKind::Measure, vec![0], vec![0], vec![]);
        assert_eq!(c.gates[0].id, 0);
        assert_eq!(c.gates[0].clbits, vec![0]);
    }

    #[test]
    fn rz_keeps_its_parameter() {
        let mut c = Circuit::new("rz", 1, 0);
        c.rz(0, std::f64::consts::PI);
        assert_eq!(c.gates[0].params, vec![std::f64::consts::PI]);
    }

    #[test]
    fn mcx_normalizes_small_control_counts() {
        let mut c = Circuit::new("m", 5, 0);
        c.mcx(&[0], 1).mcx(&[0, 1], 2).mcx(&[0, 1, 2], 3);
        let kinds: Vec<_> = c.gates.iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::Cx, GateKind::Ccx, GateKind::Mcx]);
        assert_eq!(c.gates[2].qubits, vec![0, 1, 2, 3]);
    }

    #[test]
    fn concat_renumbers() {
        let mut a = Circuit::new("a", 1, 0);
        a.h(0);
        let mut b = Circuit::new("b", 2, 0);
        b.cx(0, 1);
        let c = Circuit::concat(&a, &b);
        assert_eq!(c.num_qubits, 2);
        assert_eq!(c.gates[1].id, 1);
    }
}
