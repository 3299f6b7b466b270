use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::MachineError;

/// Undirected coupling graph. Edges are stored as `(low, high)` pairs,
/// sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CouplingRepr", into = "CouplingRepr")]
pub struct CouplingMap {
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CouplingRepr {
    num_qubits: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<CouplingRepr> for CouplingMap {
    type Error = MachineError;

    fn try_from(r: CouplingRepr) -> Result<Self, Self::Error> {
        CouplingMap::new(r.num_qubits, r.edges.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<CouplingMap> for CouplingRepr {
    fn from(c: CouplingMap) -> Self {
        CouplingRepr {
            num_qubits: c.num_qubits,
            edges: c.edges.into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

impl CouplingMap {
    pub fn new(num_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, MachineError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(MachineError::Invalid(format!("self-loop on qubit {a}")));
            }
            if a >= num_qubits || b >= num_qubits {
                return Err(MachineError::Invalid(format!(
                    "edge ({a},{b}) outside {num_qubits} qubits"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CouplingMap {
            num_qubits,
            edges: set.into_iter().collect(),
        })
    }

    pub fn linear(num_qubits: usize) -> Self {
        CouplingMap::new(num_qubits, (1..num_qubits).map(|q| (q - 1, q))).expect("valid chain")
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn are_coupled(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Neighbours of `q` in ascending order.
    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| match q {
                _ if a == q => Some(b),
                _ if b == q => Some(a),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, q: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == q || b == q).count()
    }

    /// BFS distances from `src`; `None` for unreachable qubits.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_qubits];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(q) = queue.pop_front() {
            let d = dist[q].unwrap_or(0);
            for n in self.neighbors(q) {
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Every shortest path from `src` to `dst` (inclusive of both ends), in
    /// lexicographic order. Empty when unreachable.
    pub fn shortest_paths(&self, src: usize, dst: usize) -> Vec<Vec<usize>> {
        let to_dst = self.distances_from(dst);
        let Some(total) = to_dst[src] else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut path = vec![src];
        self.extend_paths(&to_dst, total, &mut path, &mut out);
        out
    }

    fn extend_paths(&self, to_dst: &[Option<usize>], remaining: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(path.clone());
            return;
        }
        let here = *path.last().expect("non-empty path");
        for n in self.neighbors(here) {
            if to_dst[n] == Some(remaining - 1) {
                path.push(n);
                self.extend_paths(to_dst, remaining - 1, path, out);
                path.pop();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "QubitRepr", into = "QubitRepr")]
pub struct QubitProps {
    /// Relaxation time, µs.
    pub t1: f64,
    /// Dephasing time, µs. Defaults to `t1` when absent from the source file.
    pub t2: f64,
    pub t2_defaulted: bool,
    /// GHz.
    pub frequency: f64,
    pub readout_error: f64,
    /// ns.
    pub readout_duration: f64,
}

#[derive(Serialize, Deserialize)]
struct QubitRepr {
    t1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t2: Option<f64>,
    frequency: f64,
    readout_error: f64,
    readout_duration: f64,
}

impl From<QubitRepr> for QubitProps {
    fn from(r: QubitRepr) -> Self {
        QubitProps {
            t1: r.t1,
            t2: r.t2.unwrap_or(r.t1),
            t2_defaulted: r.t2.is_none(),
            frequency: r.frequency,
            readout_error: r.readout_error,
            readout_duration: r.readout_duration,
        }
    }
}

impl From<QubitProps> for QubitRepr {
    fn from(p: QubitProps) -> Self {
        QubitRepr {
            t1: p.t1,
            t2: (!p.t2_defaulted).then_some(p.t2),
            frequency: p.frequency,
            readout_error: p.readout_error,
            readout_duration: p.readout_duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateProps {
    pub error: f64,
    /// ns.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateKey {
    pub gate: String,
    pub qubits: Vec<usize>,
}

/// Physical properties of one machine at one point in time, including the
/// coupling map so a snapshot alone suffices to transpile and simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SnapshotRepr", into = "SnapshotRepr")]
pub struct CalibrationSnapshot {
    pub machine_name: String,
    pub taken_at: DateTime<Utc>,
    pub coupling: CouplingMap,
    pub basis_gates: Vec<String>,
    pub qubits: Vec<QubitProps>,
    pub gates: BTreeMap<GateKey, GateProps>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct GateEntry {
    gate: String,
    qubits: Vec<usize>,
    error: f64,
    duration: f64,
}

/// Snapshot body as stored inside a machine file (name and coupling come
/// from the enclosing record).
#[derive(Serialize, Deserialize)]
pub(crate) struct SnapshotBody {
    pub(crate) taken_at: DateTime<Utc>,
    pub(crate) basis_gates: Vec<String>,
    pub(crate) qubits: Vec<QubitProps>,
    pub(crate) gates: Vec<GateEntry>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotRepr {
    machine_name: String,
    coupling: CouplingMap,
    #[serde(flatten)]
    body: SnapshotBody,
}

impl TryFrom<SnapshotRepr> for CalibrationSnapshot {
    type Error = MachineError;

    fn try_from(r: SnapshotRepr) -> Result<Self, Self::Error> {
        CalibrationSnapshot::from_body(r.machine_name, r.coupling, r.body)
    }
}

impl From<CalibrationSnapshot> for SnapshotRepr {
    fn from(s: CalibrationSnapshot) -> Self {
        let machine_name = s.machine_name.clone();
        let coupling = s.coupling.clone();
        SnapshotRepr {
            machine_name,
            coupling,
            body: s.into_body(),
        }
    }
}

impl CalibrationSnapshot {
    pub(crate) fn from_body(machine_name: String, coupling: CouplingMap, body: SnapshotBody) -> Result<Self, MachineError> {
        let mut gates = BTreeMap::new();
        for e in body.gates {
            let key = GateKey {
                gate: e.gate,
                qubits: e.qubits,
            };
            if gates
                .insert(key.clone(), GateProps { error: e.error, duration: e.duration })
                .is_some()
            {
                return Err(MachineError::Invalid(format!(
                    "duplicate gate entry {}{:?}",
                    key.gate, key.qubits
                )));
            }
        }
        let snap = CalibrationSnapshot {
            machine_name,
            taken_at: body.taken_at,
            coupling,
            basis_gates: body.basis_gates,
            qubits: body.qubits,
            gates,
        };
        snap.validate()?;
        Ok(snap)
    }

    pub(crate) fn into_body(self) -> SnapshotBody {
        SnapshotBody {
            taken_at: self.taken_at,
            basis_gates: self.basis_gates,
            qubits: self.qubits,
            gates: self
                .gates
                .into_iter()
                .map(|(k, p)| GateEntry {
                    gate: k.gate,
                    qubits: k.qubits,
                    error: p.error,
                    duration: p.duration,
                })
                .collect(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.coupling.num_qubits()
    }

    pub fn qubit(&self, q: usize) -> Option<&QubitProps> {
        self.qubits.get(q)
    }

    pub fn readout_error(&self, q: usize) -> Option<f64> {
        self.qubits.get(q).map(|p| p.readout_error)
    }

    pub fn readout_duration(&self, q: usize) -> Option<f64> {
        self.qubits.get(q).map(|p| p.readout_duration)
    }

    pub fn gate_props(&self, gate: &str, qubits: &[usize]) -> Option<GateProps> {
        // BTreeMap lookup needs an owned key; gate tables are small.
        self.gates
            .get(&GateKey {
                gate: gate.to_string(),
                qubits: qubits.to_vec(),
            })
            .copied()
    }

    pub fn gate_error(&self, gate: &str, qubits: &[usize]) -> Option<f64> {
        self.gate_props(gate, qubits).map(|p| p.error)
    }

    pub fn gate_duration(&self, gate: &str, qubits: &[usize]) -> Option<f64> {
        self.gate_props(gate, qubits).map(|p| p.duration)
    }

    pub fn supports(&self, gate: &str) -> bool {
        self.basis_gates.iter().any(|g| g == gate)
    }

    /// Checks value ranges and basis-gate coverage.
    pub fn validate(&self) -> Result<(), MachineError> {
        let n = self.num_qubits();
        let bad = |msg: String| Err(MachineError::Invalid(format!("{}: {msg}", self.machine_name)));
        if self.qubits.len() != n {
            return bad(format!("{} qubit entries for {n} qubits", self.qubits.len()));
        }
        for (q, p) in self.qubits.iter().enumerate() {
            if !(p.t1 > 0.0 && p.t2 > 0.0 && p.readout_duration > 0.0 && p.frequency > 0.0) {
                return bad(format!("qubit {q}: t1, t2, frequency and readout_duration must be positive"));
            }
            if !(0.0..=1.0).contains(&p.readout_error) {
                return bad(format!("qubit {q}: readout_error {} outside [0,1]", p.readout_error));
            }
        }
        for (k, p) in &self.gates {
            if !(0.0..=1.0).contains(&p.error) {
                return bad(format!("{}{:?}: error {} outside [0,1]", k.gate, k.qubits, p.error));
            }
            // virtual rz gates legitimately take zero time
            if !(p.duration >= 0.0 && p.duration.is_finite()) {
                return bad(format!("{}{:?}: negative duration", k.gate, k.qubits));
            }
            if k.qubits.iter().any(|&q| q >= n) {
                return bad(format!("{}{:?}: qubit out of range", k.gate, k.qubits));
            }
        }
        for g in &self.basis_gates {
            let Some(kind) = crate::circuit::GateKind::from_name(g) else {
                return bad(format!("unknown basis gate {g}"));
            };
            match kind.arity() {
                Some(1) => {
                    for q in 0..n {
                        if self.gate_props(g, &[q]).is_none() {
                            return bad(format!("basis gate {g} missing on qubit {q}"));
                        }
                    }
                }
                Some(2) => {
                    for &(a, b) in self.coupling.edges() {
                        if self.gate_props(g, &[a, b]).is_none() || self.gate_props(g, &[b, a]).is_none() {
                            return bad(format!("basis gate {g} missing on edge ({a},{b})"));
                        }
                    }
                }
                _ => return bad(format!("basis gate {g} must act on one or two qubits")),
            }
        }
        Ok(())
    }

    /// Copy with every gate and readout error replaced by `error`.
    pub fn with_uniform_errors(&self, gate_error: f64, readout_error: f64) -> CalibrationSnapshot {
        let mut out = self.clone();
        for p in out.gates.values_mut() {
            p.error = gate_error;
        }
        for q in &mut out.qubits {
            q.readout_error = readout_error;
        }
        out
    }
}

/// Inputs for [`CalibrationSnapshot::synthetic`].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticProps {
    pub sx_duration: f64,
    pub cx_duration: f64,
    pub error_1q: f64,
    pub error_2q: f64,
    pub readout_error: f64,
    pub readout_duration: f64,
}

impl Default for SyntheticProps {
    fn default() -> Self {
        SyntheticProps {
            sx_duration: 35.0,
            cx_duration: 300.0,
            error_1q: 0.0,
            error_2q: 0.0,
            readout_error: 0.0,
            readout_duration: 5000.0,
        }
    }
}

impl CalibrationSnapshot {
    /// Uniform snapshot on an arbitrary coupling map with basis
    /// `{rz, sx, x, cx}`; `rz` is virtual (zero error and duration).
    pub fn synthetic(name: &str, coupling: CouplingMap, props: SyntheticProps) -> CalibrationSnapshot {
        let n = coupling.num_qubits();
        let mut gates = BTreeMap::new();
        for q in 0..n {
            let one = |gate: &str, error, duration| {
                (
                    GateKey {
                        gate: gate.into(),
                        qubits: vec![q],
                    },
                    GateProps { error, duration },
                )
            };
            for (k, v) in [
                one("rz", 0.0, 0.0),
                one("sx", props.error_1q, props.sx_duration),
                one("x", props.error_1q, props.sx_duration),
            ] {
                gates.insert(k, v);
            }
        }
        for &(a, b) in coupling.edges() {
            for qs in [vec![a, b], vec![b, a]] {
                gates.insert(
                    GateKey {
                        gate: "cx".into(),
                        qubits: qs,
                    },
                    GateProps {
                        error: props.error_2q,
                        duration: props.cx_duration,
                    },
                );
            }
        }
        CalibrationSnapshot {
            machine_name: name.to_string(),
            taken_at: DateTime::<Utc>::from_timestamp(1_622_505_600, 0).expect("valid timestamp"),
            coupling,
            basis_gates: ["rz", "sx", "x", "cx"].iter().map(|s| s.to_string()).collect(),
            qubits: (0..n)
                .map(|_| QubitProps {
                    t1: 100.0,
                    t2: 80.0,
                    t2_defaulted: false,
                    frequency: 5.0,
                    readout_error: props.readout_error,
                    readout_duration: props.readout_duration,
                })
                .collect(),
            gates,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_rejects_self_loops() {
        assert!(CouplingMap::new(2, [(1, 1)]).is_err());
        assert!(CouplingMap::new(2, [(0, 2)]).is_err());
    }

    #[test]
    fn shortest_paths_on_a_ring() {
        let ring = CouplingMap::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(ring.shortest_paths(0, 2), vec![vec![0, 1, 2], vec![0, 3, 2]]);
        assert_eq!(ring.shortest_paths(0, 1), vec![vec![0, 1]]);
        let split = CouplingMap::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(split.shortest_paths(0, 3).is_empty());
    }

    #[test]
    fn missing_t2_defaults_to_t1() {
        let p: QubitProps =
            serde_json::from_str(r#"{"t1": 90.5, "frequency": 5.0, "readout_error": 0.02, "readout_duration": 5000}"#)
                .unwrap();
        assert_eq!(p.t2, 90.5);
        assert!(p.t2_defaulted);
        let back = serde_json::to_string(&p).unwrap();
        assert!(!back.contains("t2"));
    }

    #[test]
    fn synthetic_snapshot_validates() {
        let s = CalibrationSnapshot::synthetic("lin", CouplingMap::linear(3), SyntheticProps::default());
        s.validate().unwrap();
        assert_eq!(s.gate_duration("cx", &[2, 1]), Some(300.0));
        assert_eq!(s.gate_error("cx", &[0, 2]), None);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut s = CalibrationSnapshot::synthetic("lin", CouplingMap::linear(2), SyntheticProps::default());
        s.qubits[0].readout_error = 1.5;
        assert!(s.validate().is_err());
        let mut s = CalibrationSnapshot::synthetic("lin", CouplingMap::linear(2), SyntheticProps::default());
        s.gates.remove(&GateKey {
            gate: "cx".into(),
            qubits: vec![1, 0],
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn snapshot_json_round_trip() {
        let s = CalibrationSnapshot::synthetic(
            "lin",
            CouplingMap::linear(3),
            SyntheticProps {
                error_2q: 0.012345678901234567,
                ..SyntheticProps::default()
            },
        );
        let text = serde_json::to_string(&s).unwrap();
        let back: CalibrationSnapshot = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
