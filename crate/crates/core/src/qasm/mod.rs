//! OpenQASM 2.0 subset: parsing into [`Circuit`] and canonical emission.
//!
//! Supported: the header, `include` lines (ignored), `qreg`/`creg`,
//! catalog gates with decimal or `k*pi/d` parameters, `measure a -> b`,
//! `barrier`, and register broadcasting. Multiple registers are flattened
//! into one index space in declaration order.

mod emit;
mod lexer;
mod parser;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateInstance};

pub use emit::{emit_qasm, format_param, EmitError};

/// Upper bound on the total qubits (and separately clbits) a file may declare.
pub const MAX_REGISTER_BITS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("line {line}, column {column}: {message} (at `{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub token: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, message: impl Into<String>, token: &str) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
            token: token.chars().take(40).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub size: usize,
    /// First flat index of this register.
    pub offset: usize,
    pub quantum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub gate: GateInstance,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QasmDocument {
    pub version: String,
    pub registers: Vec<Register>,
    pub num_qubits: usize,
    pub num_clbits: usize,
    pub statements: Vec<Statement>,
}

impl QasmDocument {
    pub fn into_circuit(self, name: impl Into<String>) -> Circuit {
        let mut c = Circuit::new(name, self.num_qubits, self.num_clbits);
        c.gates = self.statements.into_iter().map(|s| s.gate).collect();
        c
    }
}

/// `k*pi/d`, computed one way everywhere so emitted angles reparse bit-exact.
pub fn pi_fraction(k: i64, d: u64) -> f64 {
    (k as f64 * std::f64::consts::PI) / d as f64
}

pub fn parse_document(text: &str) -> Result<QasmDocument, ParseError> {
    parser::parse_document(text)
}

pub fn parse_qasm(text: &str) -> Result<Circuit, ParseError> {
    parse_document(text).map(|d| d.into_circuit("qasm"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use std::f64::consts::PI;

    #[test]
    fn bell_from_short_form() {
        let c = parse_qasm("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q->c;").unwrap();
        assert_eq!((c.num_qubits, c.num_clbits, c.len()), (2, 2, 4));
        assert_eq!(c.gates[1].kind, GateKind::Cx);
        assert_eq!(c.gates[1].qubits, vec![0, 1]);
        assert_eq!(c.measurements(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn empty_body() {
        let c = parse_qasm("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];").unwrap();
        assert_eq!((c.num_qubits, c.len()), (1, 0));
    }

    #[test]
    fn out_of_range_index_points_at_statement() {
        let e = parse_qasm("qreg q[2];\nh q[5];").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.token, "5");
    }

    #[test]
    fn pi_expressions() {
        let c = parse_qasm("qreg q[1]; rz(pi) q[0]; rz(pi/2) q[0]; rz(-pi/4) q[0]; rz(3*pi/2) q[0]; rz(0.25) q[0]; rz(-1e-3) q[0]; rz(π/8) q[0];")
            .unwrap();
        let got: Vec<f64> = c.gates.iter().map(|g| g.params[0]).collect();
        let want = [PI, PI / 2.0, -PI / 4.0, 3.0 * PI / 2.0, 0.25, -1e-3, PI / 8.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-15, "{g} vs {w}");
        }
    }

    #[test]
    fn registers_flatten_in_declaration_order() {
        let d = parse_document("qreg a[2]; qreg b[3]; creg m[1]; creg n[2]; cx a[1],b[2]; measure b[0] -> n[1];").unwrap();
        assert_eq!((d.num_qubits, d.num_clbits), (5, 3));
        assert_eq!(d.statements[0].gate.qubits, vec![1, 4]);
        assert_eq!(d.statements[1].gate.qubits, vec![2]);
        assert_eq!(d.statements[1].gate.clbits, vec![2]);
        assert_eq!((d.statements[1].line, d.statements[1].column), (1, 59));
    }

    #[test]
    fn broadcast_gates() {
        let c = parse_qasm("qreg q[3]; qreg r[3]; h q; cx q, r; cx q[0], r;").unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c.gates[4].qubits, vec![1, 4]);
        assert_eq!(c.gates[8].qubits, vec![0, 5]);
    }

    #[test]
    fn aliases() {
        let c = parse_qasm("qreg q[2]; CX q[0],q[1]; cp(pi/2) q[0],q[1]; u1(0.5) q[1];").unwrap();
        let kinds: Vec<_> = c.gates.iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::Cx, GateKind::Cu1, GateKind::Rz]);
    }

    #[test]
    fn errors_are_reported() {
        let cases = [
            ("qreg q[1]; foo q[0];", "unknown gate"),
            ("qreg q[2]; cx q[0];", "takes 2 qubit"),
            ("qreg q[1]; h r[0];", "undeclared register"),
            ("qreg q[1]; rz(*pi) q[0];", "malformed"),
            ("qreg q[1]; rz(2/3) q[0];", "expected `)`"),
            ("gate foo a { h a; }", "not supported"),
            ("OPENQASM 3.0;", "2.0"),
            ("qreg q[2]; cx q[0],q[0];", "duplicate"),
            ("qreg q[1]; qreg q[2];", "already declared"),
            ("qreg q[1]; creg c[2]; measure q -> c;", "equal-size"),
            ("qreg q[1]; rz q[0];", "parameter"),
            ("qreg q[1]; rz(pi/0) q[0];", "division by zero"),
        ];
        for (src, want) in cases {
            let e = parse_qasm(src).unwrap_err();
            assert!(e.message.contains(want), "{src}: {e}");
        }
    }

    #[test]
    fn register_cap() {
        assert!(parse_qasm("qreg q[99999999999];").is_err());
        assert!(parse_qasm("qreg q[4000]; qreg r[100];").is_err());
    }
}
