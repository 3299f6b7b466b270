//! Shortest-path SWAP routing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::unroll::RawGate;
use super::{Origin, TranspileError};
use crate::circuit::GateKind;
use crate::machine::CouplingMap;

/// Maps virtual-qubit gates onto physical qubits, inserting swaps that walk
/// the first operand of each non-adjacent two-qubit gate along a shortest
/// path. Paths are tie-broken by the lower maximum qubit index, then by a
/// seeded draw. Returns the physical gates and the final `virtual ->
/// physical` map.
pub fn route(
    gates: Vec<(RawGate, Origin)>,
    initial: &[usize],
    coupling: &CouplingMap,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<(RawGate, Origin)>, Vec<usize>), TranspileError> {
    let mut v2p = initial.to_vec();
    let mut p2v = vec![0usize; v2p.len()];
    for (v, &p) in v2p.iter().enumerate() {
        p2v[p] = v;
    }
    let mut out = Vec::with_capacity(gates.len());
    for ((kind, qubits, params), origin) in gates {
        if qubits.len() == 2 && kind != GateKind::Barrier {
            let (pa, pb) = (v2p[qubits[0]], v2p[qubits[1]]);
            if !coupling.are_coupled(pa, pb) {
                let path = choose_path(coupling, pa, pb, rng).ok_or(TranspileError::Disconnected { a: pa, b: pb })?;
                // stop one short of pb: the moving qubit ends adjacent to it
                for w in path[..path.len() - 1].windows(2) {
                    let (x, y) = (w[0], w[1]);
                    out.push(((GateKind::Swap, vec![x, y], vec![]), Origin::RoutingOverhead));
                    let (vx, vy) = (p2v[x], p2v[y]);
                    p2v.swap(x, y);
                    v2p[vx] = y;
                    v2p[vy] = x;
                }
            }
        }
        let mapped = qubits.iter().map(|&v| v2p[v]).collect();
        out.push(((kind, mapped, params), origin));
    }
    Ok((out, v2p))
}

fn choose_path(coupling: &CouplingMap, a: usize, b: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let paths = coupling.shortest_paths(a, b);
    let best = paths.iter().map(|p| p.iter().max().copied().unwrap_or(0)).min()?;
    let mut ties: Vec<Vec<usize>> = paths
        .into_iter()
        .filter(|p| p.iter().max().copied().unwrap_or(0) == best)
        .collect();
    let pick = if ties.len() == 1 { 0 } else { rng.random_range(0..ties.len()) };
    Some(ties.swap_remove(pick))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn adjacent_gate_needs_no_swaps() {
        let coupling = CouplingMap::linear(3);
        let gates = vec![((GateKind::Cx, vec![0, 1], vec![]), Origin::Logical(0))];
        let (out, fin) = route(gates, &[0, 1, 2], &coupling, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(fin, vec![0, 1, 2]);
    }

    #[test]
    fn distant_gate_walks_first_operand() {
        let coupling = CouplingMap::linear(4);
        let gates = vec![((GateKind::Cx, vec![0, 3], vec![]), Origin::Logical(0))];
        let (out, fin) = route(gates, &[0, 1, 2, 3], &coupling, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let labels: Vec<(Vec<usize>, Origin)> = out.iter().map(|(g, o)| (g.1.clone(), *o)).collect();
        assert_eq!(
            labels,
            vec![
                (vec![0, 1], Origin::RoutingOverhead),
                (vec![1, 2], Origin::RoutingOverhead),
                (vec![2, 3], Origin::Logical(0)),
            ]
        );
        assert_eq!(fin, vec![2, 0, 1, 3]);
    }

    #[test]
    fn disconnected_is_an_error() {
        let coupling = CouplingMap::new(4, [(0, 1), (2, 3)]).unwrap();
        let gates = vec![((GateKind::Cx, vec![0, 3], vec![]), Origin::Logical(0))];
        assert!(matches!(
            route(gates, &[0, 1, 2, 3], &coupling, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(TranspileError::Disconnected { .. })
        ));
    }
}
