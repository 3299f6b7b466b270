//! Logical-to-physical gate correspondence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateInstance, GateKind};
use crate::transpile::{translate_gate, unroll_gate, Layout, Origin, RawGate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Provenance,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchMap {
    /// Every logical gate id, each with its physical gate ids in program
    /// order.
    pub assignments: BTreeMap<usize, Vec<usize>>,
    /// Physical gates attributed to routing.
    pub unattributed: Vec<usize>,
    pub method: MatchMethod,
}

impl MatchMap {
    /// Logical gate that produced a physical gate, if any.
    pub fn logical_of(&self, physical_id: usize) -> Option<usize> {
        self.assignments
            .iter()
            .find(|(_, ps)| ps.contains(&physical_id))
            .map(|(&l, _)| l)
    }

    /// True when every physical gate in `0..physical_len` appears exactly once
    /// and each list is increasing.
    pub fn is_partition(&self, physical_len: usize) -> bool {
        let mut seen = vec![false; physical_len];
        let lists = self.assignments.values().chain(std::iter::once(&self.unattributed));
        for list in lists {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return false;
            }
            for &p in list {
                if p >= physical_len || seen[p] {
                    return false;
                }
                seen[p] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("physical circuit exhausted while matching logical gate {gate} ({label})")]
    Exhausted { gate: usize, label: String },
    #[error("logical gate {gate} ({label}) does not match physical gate {physical}")]
    Mismatch { gate: usize, label: String, physical: usize },
    #[error("logical gate {gate} ({label}) cannot be expanded: {reason}")]
    Untranslatable { gate: usize, label: String, reason: String },
    #[error("provenance does not fit the circuits: {0}")]
    BadProvenance(String),
    #[error("layout does not fit the circuits: {0}")]
    BadLayout(String),
}

/// Uses `provenance` when given, otherwise the heuristic wire walk.
pub fn match_gates(
    logical: &Circuit,
    physical: &Circuit,
    layout: &Layout,
    provenance: Option<&[Origin]>,
) -> Result<MatchMap, MatchError> {
    match provenance {
        Some(p) => from_provenance(logical, physical, p),
        None => heuristic(logical, physical, layout),
    }
}

pub fn from_provenance(logical: &Circuit, physical: &Circuit, provenance: &[Origin]) -> Result<MatchMap, MatchError> {
    if provenance.len() != physical.len() {
        return Err(MatchError::BadProvenance(format!(
            "{} entries for {} physical gates",
            provenance.len(),
            physical.len()
        )));
    }
    let mut assignments: BTreeMap<usize, Vec<usize>> = (0..logical.len()).map(|i| (i, Vec::new())).collect();
    let mut unattributed = Vec::new();
    for (pid, origin) in provenance.iter().enumerate() {
        match origin {
            Origin::Logical(l) => assignments
                .get_mut(l)
                .ok_or_else(|| MatchError::BadProvenance(format!("logical gate {l} does not exist")))?
                .push(pid),
            Origin::RoutingOverhead => unattributed.push(pid),
        }
    }
    Ok(MatchMap {
        assignments,
        unattributed,
        method: MatchMethod::Provenance,
    })
}

fn same_op(g: &GateInstance, kind: GateKind, qubits: &[usize]) -> bool {
    g.kind == kind && g.qubits == qubits
}

/// Walks logical gates in program order. Each logical gate is unrolled and
/// translated under the current placement; matching physical gates are
/// consumed one by one. A `cx(a,b) cx(b,a) cx(a,b)` triple that the
/// expected sequence does not account for is routing: it goes to
/// `unattributed` and the placement is updated. A physical gate that
/// differs from the expectation but stays on the logical gate's wires is
/// still consumed (optimized circuits); the run ends at the first gate
/// touching another wire.
pub fn heuristic(logical: &Circuit, physical: &Circuit, layout: &Layout) -> Result<MatchMap, MatchError> {
    let big_n = physical.num_qubits;
    if layout.initial.len() != big_n || logical.num_qubits > big_n {
        return Err(MatchError::BadLayout(format!(
            "layout over {} qubits, physical circuit has {big_n}",
            layout.initial.len()
        )));
    }
    let mut v2p = layout.initial.clone();
    let mut p2v = vec![usize::MAX; big_n];
    for (v, &p) in v2p.iter().enumerate() {
        if p >= big_n || p2v[p] != usize::MAX {
            return Err(MatchError::BadLayout("initial layout is not a permutation".into()));
        }
        p2v[p] = v;
    }
    let basis: Vec<String> = physical
        .gates
        .iter()
        .filter(|g| g.kind.is_unitary())
        .map(|g| g.kind.name().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let gates = &physical.gates;
    let mut cursor = 0usize;
    let mut assignments = BTreeMap::new();
    let mut unattributed = Vec::new();

    for lg in &logical.gates {
        let mut consumed = Vec::new();
        let mut wires: BTreeSet<usize> = lg.qubits.iter().map(|&v| v2p[v]).collect();
        let subgates = unroll_gate(lg.kind, &lg.qubits, &lg.params);
        let mut fallback = false;
        'sub: for (kind, vqs, params) in subgates {
            let untranslatable = |reason| MatchError::Untranslatable {
                gate: lg.id,
                label: lg.label(),
                reason,
            };
            let mut expect = expand(kind, &vqs, &params, &v2p, &basis).map_err(untranslatable)?;
            let mut i = 0;
            while i < expect.len() {
                let Some(g) = gates.get(cursor) else {
                    if fallback {
                        break 'sub;
                    }
                    return Err(MatchError::Exhausted {
                        gate: lg.id,
                        label: lg.label(),
                    });
                };
                let (ek, eq, _) = &expect[i];
                if same_op(g, *ek, eq) {
                    consumed.push(cursor);
                    cursor += 1;
                    i += 1;
                } else if i == 0 && is_swap_triple(gates, cursor) {
                    let (a, b) = (gates[cursor].qubits[0], gates[cursor].qubits[1]);
                    unattributed.extend(cursor..cursor + 3);
                    cursor += 3;
                    let (va, vb) = (p2v[a], p2v[b]);
                    p2v.swap(a, b);
                    v2p[va] = b;
                    v2p[vb] = a;
                    wires = lg.qubits.iter().map(|&v| v2p[v]).collect();
                    expect = expand(kind, &vqs, &params, &v2p, &basis).map_err(untranslatable)?;
                } else if g.qubits.iter().all(|q| wires.contains(q)) {
                    fallback = true;
                    consumed.push(cursor);
                    cursor += 1;
                } else if fallback {
                    break 'sub;
                } else {
                    return Err(MatchError::Mismatch {
                        gate: lg.id,
                        label: lg.label(),
                        physical: cursor,
                    });
                }
            }
        }
        assignments.insert(lg.id, consumed);
    }
    unattributed.extend(cursor..gates.len());
    unattributed.sort_unstable();
    Ok(MatchMap {
        assignments,
        unattributed,
        method: MatchMethod::Heuristic,
    })
}

fn expand(kind: GateKind, vqs: &[usize], params: &[f64], v2p: &[usize], basis: &[String]) -> Result<Vec<RawGate>, String> {
    let pqs: Vec<usize> = vqs.iter().map(|&v| v2p[v]).collect();
    translate_gate(kind, &pqs, params, basis).map_err(|e| e.to_string())
}

fn is_swap_triple(gates: &[GateInstance], at: usize) -> bool {
    let [g0, g1, g2] = match gates.get(at..at + 3) {
        Some([a, b, c]) => [a, b, c],
        _ => return false,
    };
    let (a, b) = match g0.qubits[..] {
        [a, b] if g0.kind == GateKind::Cx => (a, b),
        _ => return false,
    };
    same_op(g1, GateKind::Cx, &[b, a]) && same_op(g2, GateKind::Cx, &[a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::testing::linear_snapshot;
    use crate::transpile::{transpile, TranspileOptions};

    #[test]
    fn identity_transpilation_is_bijective() {
        let snap = linear_snapshot(3, 35.0, 300.0, 0.001, 0.01);
        let mut c = Circuit::new("c", 3, 1);
        c.sx(0).rz(1, 0.3).cx(0, 1).cx(1, 2).measure(2, 0);
        let r = transpile(&c, &snap, &TranspileOptions::level(0, 0)).unwrap();
        let m = heuristic(&c, &r.physical, &r.layout).unwrap();
        assert!(m.unattributed.is_empty());
        for (l, ps) in &m.assignments {
            assert_eq!(ps, &vec![*l]);
        }
    }

    #[test]
    fn h_maps_to_its_three_gates() {
        let snap = linear_snapshot(2, 35.0, 300.0, 0.001, 0.01);
        let mut c = Circuit::new("c", 2, 0);
        c.x(1).h(0).cx(0, 1);
        let r = transpile(&c, &snap, &TranspileOptions::level(0, 0)).unwrap();
        let m = heuristic(&c, &r.physical, &r.layout).unwrap();
        assert_eq!(m.assignments[&1], vec![1, 2, 3]);
        let kinds: Vec<GateKind> = m.assignments[&1].iter().map(|&p| r.physical.gates[p].kind).collect();
        assert_eq!(kinds, vec![GateKind::Rz, GateKind::Sx, GateKind::Rz]);
        assert_eq!(m, from_provenance(&c, &r.physical, &r.provenance).map(|mut p| {
            p.method = MatchMethod::Heuristic;
            p
        }).unwrap());
    }

    #[test]
    fn routed_toffoli_agrees_with_provenance() {
        let snap = linear_snapshot(5, 35.0, 300.0, 0.001, 0.01);
        let mut c = Circuit::new("toffoli", 5, 3);
        c.h(0).ccx(0, 4, 2).cx(4, 0).measure(0, 0).measure(2, 1).measure(4, 2);
        let r = transpile(&c, &snap, &TranspileOptions::level(0, 3)).unwrap();
        assert!(r.metrics.routing_gate_count > 0);
        let truth = from_provenance(&c, &r.physical, &r.provenance).unwrap();
        let guess = heuristic(&c, &r.physical, &r.layout).unwrap();
        assert_eq!(guess.assignments, truth.assignments);
        assert_eq!(guess.unattributed, truth.unattributed);
        assert!(guess.is_partition(r.physical.len()));
    }

    #[test]
    fn short_physical_circuit_is_exhausted() {
        let snap = linear_snapshot(2, 35.0, 300.0, 0.001, 0.01);
        let mut c = Circuit::new("c", 2, 0);
        c.h(0).h(1);
        let r = transpile(&c, &snap, &TranspileOptions::level(0, 0)).unwrap();
        let mut short = r.physical.clone();
        short.gates.truncate(4);
        let err = heuristic(&c, &short, &r.layout).unwrap_err();
        assert_eq!(err, MatchError::Exhausted { gate: 1, label: "h[1]".into() });
    }

    #[test]
    fn bad_provenance_is_rejected() {
        let c = Circuit::new("c", 1, 0);
        let mut p = Circuit::new("p", 1, 0);
        p.sx(0);
        assert!(from_provenance(&c, &p, &[]).is_err());
        assert!(from_provenance(&c, &p, &[Origin::Logical(0)]).is_err());
        let m = from_provenance(&c, &p, &[Origin::RoutingOverhead]).unwrap();
        assert!(m.is_partition(1));
    }
}
