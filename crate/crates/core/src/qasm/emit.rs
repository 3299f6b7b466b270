use std::fmt::Write as _;

use super::pi_fraction;
use crate::circuit::{Circuit, GateKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmitError {
    #[error("gate {gate} ({label}) cannot be encoded: {reason}")]
    Unencodable { gate: usize, label: String, reason: String },
}

/// Canonical text for an angle: `k*pi/d` with `d <= 16` when that is bit-exact,
/// otherwise the shortest decimal that parses back to the same value.
pub fn format_param(value: f64) -> Option<String> {
    if !value.is_finite() {
        return None;
    }
    if value != 0.0 {
        for d in 1u64..=16 {
            let k = (value * d as f64 / std::f64::consts::PI).round();
            if k == 0.0 || k.abs() > 1e15 {
                continue;
            }
            let k = k as i64;
            if pi_fraction(k, d) == value {
                return Some(pi_text(k, d));
            }
        }
    }
    Some(format!("{value:?}"))
}

fn pi_text(k: i64, d: u64) -> String {
    let sign = if k < 0 { "-" } else { "" };
    let mag = k.unsigned_abs();
    let num = if mag == 1 { "pi".to_string() } else { format!("{mag}*pi") };
    if d == 1 {
        format!("{sign}{num}")
    } else {
        format!("{sign}{num}/{d}")
    }
}

/// Canonical QASM: header, single `q`/`c` registers, one statement per line.
pub fn emit_qasm(circuit: &Circuit) -> Result<String, EmitError> {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if circuit.num_qubits > 0 {
        let _ = writeln!(out, "qreg q[{}];", circuit.num_qubits);
    }
    if circuit.num_clbits > 0 {
        let _ = writeln!(out, "creg c[{}];", circuit.num_clbits);
    }
    for g in &circuit.gates {
        let fail = |reason: &str| EmitError::Unencodable {
            gate: g.id,
            label: g.label(),
            reason: reason.to_string(),
        };
        let qs = |qubits: &[usize]| qubits.iter().map(|q| format!("q[{q}]")).collect::<Vec<_>>().join(",");
        match g.kind {
            GateKind::Measure => {
                let (Some(q), Some(c)) = (g.qubits.first(), g.clbits.first()) else {
                    return Err(fail("measure needs one qubit and one clbit"));
                };
                let _ = writeln!(out, "measure q[{q}] -> c[{c}];");
            }
            GateKind::Barrier => {
                let _ = writeln!(out, "barrier {};", qs(&g.qubits));
            }
            GateKind::Mcx => {
                let name = match g.qubits.len() {
                    1 => "x",
                    2 => "cx",
                    3 => "ccx",
                    4 => "c3x",
                    5 => "c4x",
                    _ => return Err(fail("mcx with more than 4 controls must be decomposed first")),
                };
                let _ = writeln!(out, "{name} {};", qs(&g.qubits));
            }
            kind => {
                if g.params.len() != kind.param_count() {
                    return Err(fail("wrong parameter count"));
                }
                let mut params = Vec::new();
                for p in &g.params {
                    params.push(format_param(*p).ok_or_else(|| fail("non-finite parameter"))?);
                }
                if params.is_empty() {
                    let _ = writeln!(out, "{} {};", kind.name(), qs(&g.qubits));
                } else {
                    let _ = writeln!(out, "{}({}) {};", kind.name(), params.join(","), qs(&g.qubits));
                }
            }
        }
    }
    Ok(out)
}
