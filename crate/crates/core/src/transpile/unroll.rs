//! Decomposition of gates on three or more qubits into one- and two-qubit
//! catalog gates.

use std::f64::consts::PI;

use crate::circuit::GateKind;

/// A gate before layout: kind, operand list, parameters.
pub type RawGate = (GateKind, Vec<usize>, Vec<f64>);

/// Splits a gate into gates on at most two qubits; other gates pass through.
pub fn unroll_gate(kind: GateKind, qubits: &[usize], params: &[f64]) -> Vec<RawGate> {
    match (kind, qubits.len()) {
        (GateKind::Ccx, _) | (GateKind::Mcx, 3) => toffoli(qubits[0], qubits[1], qubits[2]),
        (GateKind::Mcx, 1) => vec![(GateKind::X, qubits.to_vec(), vec![])],
        (GateKind::Mcx, 2) => vec![(GateKind::Cx, qubits.to_vec(), vec![])],
        (GateKind::Mcx, _) => multi_controlled_x(qubits),
        _ => vec![(kind, qubits.to_vec(), params.to_vec())],
    }
}

/// Six-cx Toffoli with controls `a`, `b` and target `c`.
fn toffoli(a: usize, b: usize, c: usize) -> Vec<RawGate> {
    use GateKind::*;
    let g = |k: GateKind, qs: &[usize]| (k, qs.to_vec(), vec![]);
    vec![
        g(H, &[c]),
        g(Cx, &[b, c]),
        g(Tdg, &[c]),
        g(Cx, &[a, c]),
        g(T, &[c]),
        g(Cx, &[b, c]),
        g(Tdg, &[c]),
        g(Cx, &[a, c]),
        g(T, &[b]),
        g(T, &[c]),
        g(H, &[c]),
        g(Cx, &[a, b]),
        g(T, &[a]),
        g(Tdg, &[b]),
        g(Cx, &[a, b]),
    ]
}

/// `h(t) · CZ(all) · h(t)`, with the all-ones phase spread over the parity
/// of every non-empty operand subset. Subsets are grouped by their highest
/// member (the anchor), which accumulates the parity while the lower
/// members are walked in Gray-code order.
fn multi_controlled_x(qubits: &[usize]) -> Vec<RawGate> {
    let m = qubits.len();
    let target = qubits[m - 1];
    let phi = PI / (1u64 << (m - 1)) as f64;
    let mut out = vec![(GateKind::H, vec![target], vec![])];
    for anchor in 0..m {
        let mut prev = 0usize;
        for i in 0..1usize << anchor {
            let code = i ^ (i >> 1);
            let changed = code ^ prev;
            if changed != 0 {
                out.push((GateKind::Cx, vec![qubits[changed.trailing_zeros() as usize], qubits[anchor]], vec![]));
            }
            prev = code;
            let size = code.count_ones() + 1;
            let sign = if size % 2 == 1 { 1.0 } else { -1.0 };
            out.push((GateKind::Rz, vec![qubits[anchor]], vec![sign * phi]));
        }
        if prev != 0 {
            out.push((GateKind::Cx, vec![qubits[prev.trailing_zeros() as usize], qubits[anchor]], vec![]));
        }
    }
    out.push((GateKind::H, vec![target], vec![]));
    out
}
