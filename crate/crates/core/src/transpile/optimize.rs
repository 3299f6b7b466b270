//! Peephole passes: adjacent cx-pair cancellation, rz merging and rz(0)
//! removal, repeated to a fixed point.

use std::f64::consts::TAU;

use super::unroll::RawGate;
use super::Origin;
use crate::circuit::GateKind;

/// True when `rz(angle)` is the identity up to global phase.
fn is_trivial_rz(angle: f64) -> bool {
    let r = angle.rem_euclid(TAU);
    r < 1e-12 || TAU - r < 1e-12
}

/// One sweep. Each qubit keeps a stack of surviving gate positions, so a
/// removal exposes the previous gate for further cancellation.
fn sweep(gates: Vec<(RawGate, Origin)>, num_qubits: usize) -> (Vec<(RawGate, Origin)>, bool) {
    let mut out: Vec<Option<(RawGate, Origin)>> = Vec::with_capacity(gates.len());
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); num_qubits];
    let mut changed = false;
    for (gate, origin) in gates {
        let (kind, qubits, params) = &gate;
        match kind {
            GateKind::Rz => {
                let q = qubits[0];
                if is_trivial_rz(params[0]) {
                    changed = true;
                    continue;
                }
                if let Some(&top) = stacks[q].last() {
                    if let Some(((GateKind::Rz, _, prev), _)) = &mut out[top] {
                        prev[0] += params[0];
                        changed = true;
                        if is_trivial_rz(prev[0]) {
                            out[top] = None;
                            stacks[q].pop();
                        }
                        continue;
                    }
                }
            }
            GateKind::Cx => {
                let (c, t) = (qubits[0], qubits[1]);
                if let (Some(&tc), Some(&tt)) = (stacks[c].last(), stacks[t].last()) {
                    if tc == tt && matches!(&out[tc], Some(((GateKind::Cx, q, _), _)) if q[0] == c && q[1] == t) {
                        out[tc] = None;
                        stacks[c].pop();
                        stacks[t].pop();
                        changed = true;
                        continue;
                    }
                }
            }
            _ => {}
        }
        let pos = out.len();
        for &q in qubits {
            stacks[q].push(pos);
        }
        out.push(Some((gate, origin)));
    }
    (out.into_iter().flatten().collect(), changed)
}

/// Runs sweeps until nothing changes, capped at `10 * gate_count` sweeps.
pub fn peephole(mut gates: Vec<(RawGate, Origin)>, num_qubits: usize) -> Vec<(RawGate, Origin)> {
    let cap = 10 * gates.len().max(1);
    for _ in 0..cap {
        let (next, changed) = sweep(gates, num_qubits);
        gates = next;
        if !changed {
            break;
        }
    }
    gates
}
