//! Basis translation. Templates are applied recursively until every gate's
//! kind is in the target basis; equality holds up to global phase.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::unroll::RawGate;
use crate::circuit::GateKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("gate {gate} cannot be expressed in basis [{basis}]")]
pub struct BasisError {
    pub gate: String,
    pub basis: String,
}

/// One template step, or `None` when the kind has no rule.
fn template(kind: GateKind, q: &[usize], params: &[f64], has_x: bool) -> Option<Vec<RawGate>> {
    use GateKind::*;
    let rz = |q: usize, a: f64| (Rz, vec![q], vec![a]);
    let g = |k: GateKind, qs: &[usize]| (k, qs.to_vec(), vec![]);
    let theta = params.first().copied().unwrap_or(0.0);
    let out = match kind {
        H => vec![rz(q[0], FRAC_PI_2), g(Sx, q), rz(q[0], FRAC_PI_2)],
        Y if has_x => vec![rz(q[0], PI), g(X, q)],
        Y => vec![rz(q[0], PI), g(Sx, q), g(Sx, q)],
        X => vec![g(Sx, q), g(Sx, q)],
        Z => vec![rz(q[0], PI)],
        S => vec![rz(q[0], FRAC_PI_2)],
        Sdg => vec![rz(q[0], -FRAC_PI_2)],
        T => vec![rz(q[0], FRAC_PI_4)],
        Tdg => vec![rz(q[0], -FRAC_PI_4)],
        Rx => vec![rz(q[0], FRAC_PI_2), g(Sx, q), rz(q[0], theta + PI), g(Sx, q), rz(q[0], FRAC_PI_2)],
        Ry => vec![g(Sx, q), rz(q[0], theta + PI), g(Sx, q), rz(q[0], PI)],
        Cz => vec![g(H, &q[1..]), g(Cx, q), g(H, &q[1..])],
        Swap => vec![g(Cx, &[q[0], q[1]]), g(Cx, &[q[1], q[0]]), g(Cx, &[q[0], q[1]])],
        Cu1 => vec![
            rz(q[0], theta / 2.0),
            g(Cx, &[q[0], q[1]]),
            rz(q[1], -theta / 2.0),
            g(Cx, &[q[0], q[1]]),
            rz(q[1], theta / 2.0),
        ],
        Rz | Sx | Cx | Ccx | Mcx | Measure | Barrier => return None,
    };
    Some(out)
}

/// Expands one gate into `basis` (measure and barrier always pass through).
pub fn translate_gate(kind: GateKind, qubits: &[usize], params: &[f64], basis: &[String]) -> Result<Vec<RawGate>, BasisError> {
    let in_basis = |k: GateKind| matches!(k, GateKind::Measure | GateKind::Barrier) || basis.iter().any(|b| b == k.name());
    let mut out = Vec::new();
    let mut stack = vec![(kind, qubits.to_vec(), params.to_vec())];
    while let Some((k, q, p)) = stack.pop() {
        if in_basis(k) {
            out.push((k, q, p));
            continue;
        }
        let expansion = template(k, &q, &p, in_basis(GateKind::X)).ok_or_else(|| BasisError {
            gate: k.name().to_string(),
            basis: basis.join(","),
        })?;
        stack.extend(expansion.into_iter().rev());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{unitary_of, Circuit};

    fn basis(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn every_catalog_gate_translates_up_to_phase() {
        for b in [basis(&["rz", "sx", "x", "cx"]), basis(&["rz", "sx", "cx"])] {
            for kind in GateKind::ALL.into_iter().filter(|k| k.is_unitary()) {
                let qs: Vec<usize> = match kind.arity() {
                    Some(1) => vec![1],
                    Some(2) => vec![1, 0],
                    _ => continue,
                };
                for theta in [0.0, 0.37, -2.1, PI] {
                    let params: Vec<f64> = (0..kind.param_count()).map(|_| theta).collect();
                    let got = translate_gate(kind, &qs, &params, &b).unwrap();
                    let mut want = Circuit::new("w", 2, 0);
                    want.add_gate(kind, qs.clone(), vec![], params.clone());
                    let mut have = Circuit::new("h", 2, 0);
                    for (k, q, p) in &got {
                        assert!(b.iter().any(|n| n == k.name()), "{kind} produced {k}");
                        have.add_gate(*k, q.clone(), vec![], p.clone());
                    }
                    let d = unitary_of(&have).unwrap().phase_insensitive_diff(&unitary_of(&want).unwrap());
                    assert!(d < 1e-10, "{kind}({theta}) diff {d}");
                }
            }
        }
    }

    #[test]
    fn h_is_three_gates() {
        let got = translate_gate(GateKind::H, &[0], &[], &basis(&["rz", "sx", "x", "cx"])).unwrap();
        let kinds: Vec<GateKind> = got.iter().map(|g| g.0).collect();
        assert_eq!(kinds, vec![GateKind::Rz, GateKind::Sx, GateKind::Rz]);
    }

    #[test]
    fn missing_basis_is_an_error() {
        assert!(translate_gate(GateKind::H, &[0], &[], &basis(&["cx"])).is_err());
        assert!(translate_gate(GateKind::Cx, &[0, 1], &[], &basis(&["rz", "sx"])).is_err());
    }
}
