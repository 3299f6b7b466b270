//! Initial placement of virtual qubits on physical qubits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::unroll::RawGate;
use crate::machine::CalibrationSnapshot;

/// Error score of a physical qubit: readout error plus the mean error of
/// incident two-qubit gate entries.
pub fn qubit_score(snapshot: &CalibrationSnapshot, q: usize) -> f64 {
    let readout = snapshot.readout_error(q).unwrap_or(1.0);
    let incident: Vec<f64> = snapshot
        .gates
        .iter()
        .filter(|(k, _)| k.qubits.len() == 2 && k.qubits.contains(&q))
        .map(|(_, p)| p.error)
        .collect();
    let mean = if incident.is_empty() {
        0.0
    } else {
        incident.iter().sum::<f64>() / incident.len() as f64
    };
    readout + mean
}

/// Picks uniformly among the indices of `items` that minimize `key`.
fn argmin_seeded<T: Copy>(items: &[T], key: impl Fn(T) -> f64, rng: &mut ChaCha8Rng) -> T {
    let best = items.iter().map(|&i| key(i)).fold(f64::INFINITY, f64::min);
    let ties: Vec<T> = items.iter().copied().filter(|&i| key(i) <= best + 1e-15).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Full permutation `virtual -> physical` placing the first `n` virtual
/// qubits by interaction degree onto a low-error connected region; the
/// remaining physical qubits take the ancilla indices in ascending order.
pub fn error_aware(n: usize, gates: &[RawGate], snapshot: &CalibrationSnapshot, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let coupling = &snapshot.coupling;
    let big_n = coupling.num_qubits();
    let score: Vec<f64> = (0..big_n).map(|q| qubit_score(snapshot, q)).collect();

    // grow a connected region of n physical qubits
    let all: Vec<usize> = (0..big_n).collect();
    let mut region = vec![argmin_seeded(&all, |q| score[q], rng)];
    while region.len() < n {
        let mut frontier: Vec<usize> = region
            .iter()
            .flat_map(|&q| coupling.neighbors(q))
            .filter(|q| !region.contains(q))
            .collect();
        frontier.sort_unstable();
        frontier.dedup();
        if frontier.is_empty() {
            // disconnected machine: continue from the best unused qubit
            frontier = all.iter().copied().filter(|q| !region.contains(q)).collect();
        }
        region.push(argmin_seeded(&frontier, |q| score[q], rng));
    }

    // interaction weights between virtual qubits
    let mut weight = vec![vec![0usize; n]; n];
    for (_, qs, _) in gates {
        if let [a, b] = qs[..] {
            weight[a][b] += 1;
            weight[b][a] += 1;
        }
    }
    let degree: Vec<usize> = (0..n).map(|v| weight[v].iter().sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(degree[v]), v));

    let dist: Vec<Vec<Option<usize>>> = (0..big_n).map(|q| coupling.distances_from(q)).collect();
    let mut placed: Vec<Option<usize>> = vec![None; n];
    let mut free = region.clone();
    for &v in &order {
        let cost = |p: usize| -> f64 {
            let spread: f64 = (0..n)
                .filter_map(|u| placed[u].map(|pu| (u, pu)))
                .map(|(u, pu)| weight[v][u] as f64 * dist[p][pu].unwrap_or(big_n) as f64)
                .sum();
            let internal = region.iter().filter(|&&r| coupling.are_coupled(p, r)).count() as f64;
            // spread dominates; prefer well-connected then low-error qubits
            spread * 1e3 - internal + score[p]
        };
        let p = argmin_seeded(&free, cost, rng);
        free.retain(|&f| f != p);
        placed[v] = Some(p);
    }
    let mut perm: Vec<usize> = placed.into_iter().map(|p| p.expect("every virtual qubit placed")).collect();
    let ancillas: Vec<usize> = (0..big_n).filter(|p| !perm.contains(p)).collect();
    perm.extend(ancillas);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use crate::machine::builtin_registry;
    use rand::SeedableRng;

    #[test]
    fn error_aware_is_a_permutation_on_a_connected_region() {
        let reg = builtin_registry();
        for m in reg.iter() {
            let snap = m.latest().unwrap();
            let gates = vec![(GateKind::Cx, vec![0, 1], vec![]), (GateKind::Cx, vec![1, 2], vec![])];
            let perm = error_aware(3, &gates, snap, &mut ChaCha8Rng::seed_from_u64(3));
            let mut sorted = perm.clone();
            sorted.sort();
            assert_eq!(sorted, (0..snap.num_qubits()).collect::<Vec<_>>());
            // the most-interacting virtual qubit sits next to both partners
            assert!(snap.coupling.are_coupled(perm[1], perm[0]) || snap.coupling.are_coupled(perm[1], perm[2]));
        }
    }

    #[test]
    fn avoids_the_worst_qubit() {
        let reg = builtin_registry();
        let snap = reg.get("bogota-like").unwrap().latest().unwrap();
        let worst = (0..5).max_by(|&a, &b| qubit_score(snap, a).total_cmp(&qubit_score(snap, b))).unwrap();
        let perm = error_aware(1, &[], snap, &mut ChaCha8Rng::seed_from_u64(0));
        assert_ne!(perm[0], worst);
    }
}
