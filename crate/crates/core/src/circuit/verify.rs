use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Circuit, GateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl VerificationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    /// One-line summary of the error issues.
    pub fn summary(&self) -> String {
        self.errors()
            .map(|i| match i.gate {
                Some(g) => format!("gate {g}: {}", i.message),
                None => i.message.clone(),
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

struct Collector {
    issues: Vec<Issue>,
}

impl Collector {
    fn error(&mut self, code: &str, message: impl Into<String>, gate: usize) {
        self.issues.push(Issue {
            severity: Severity::Error,
            code: code.into(),
            message: message.into(),
            gate: Some(gate),
            register: None,
        });
    }

    fn warn(&mut self, code: &str, message: impl Into<String>, gate: Option<usize>, register: Option<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            code: code.into(),
            message: message.into(),
            gate,
            register,
        });
    }
}

/// Structural verification. Never fails; the report carries every problem.
pub fn verify(circuit: &Circuit) -> VerificationReport {
    let mut out = Collector { issues: Vec::new() };
    let mut measured = vec![false; circuit.num_qubits];
    let mut written = vec![false; circuit.num_clbits];

    for (pos, g) in circuit.gates.iter().enumerate() {
        if g.id != pos {
            out.error("gate_id", format!("gate id {} does not match position {pos}", g.id), pos);
        }
        let id = pos;

        match g.kind.arity() {
            Some(n) if g.qubits.len() != n => {
                out.error(
                    "arity",
                    format!("{} takes {n} qubit(s), got {}", g.kind, g.qubits.len()),
                    id,
                );
            }
            None if g.kind == GateKind::Mcx && g.qubits.len() < 2 => {
                out.error("mcx_controls", "mcx needs at least one control", id);
            }
            None if g.kind == GateKind::Barrier && g.qubits.is_empty() => {
                out.error("arity", "barrier needs at least one qubit", id);
            }
            _ => {}
        }

        if g.params.len() != g.kind.param_count() {
            out.error(
                "param_count",
                format!(
                    "{} takes {} parameter(s), got {}",
                    g.kind,
                    g.kind.param_count(),
                    g.params.len()
                ),
                id,
            );
        }
        if g.params.iter().any(|p| !p.is_finite()) {
            out.error("param_value", "parameter is not finite", id);
        }

        for &q in &g.qubits {
            if q >= circuit.num_qubits {
                out.error(
                    "qubit_out_of_range",
                    format!("qubit {q} out of range (circuit has {})", circuit.num_qubits),
                    id,
                );
            }
        }
        let distinct: HashSet<usize> = g.qubits.iter().copied().collect();
        if distinct.len() != g.qubits.len() {
            out.error("duplicate_qubits", "duplicate qubit operands", id);
        }

        if g.kind == GateKind::Measure {
            if g.clbits.len() != 1 {
                out.error("measure_operands", "measure needs exactly one classical bit", id);
            }
            for &c in &g.clbits {
                if c >= circuit.num_clbits {
                    out.error(
                        "clbit_out_of_range",
                        format!("classical bit out of range ({c} >= {})", circuit.num_clbits),
                        id,
                    );
                } else {
                    written[c] = true;
                }
            }
        } else if !g.clbits.is_empty() {
            out.error("clbit_operands", format!("{} takes no classical bits", g.kind), id);
        }

        if g.kind != GateKind::Measure && g.kind != GateKind::Barrier {
            if let Some(&q) = g
                .qubits
                .iter()
                .find(|&&q| q < circuit.num_qubits && measured[q])
            {
                out.warn(
                    "gate_after_measure",
                    format!("{} acts on qubit {q} after it was measured", g.kind),
                    Some(id),
                    None,
                );
            }
        }
        if g.kind == GateKind::Measure {
            for &q in &g.qubits {
                if q < circuit.num_qubits {
                    measured[q] = true;
                }
            }
        }
    }

    if circuit.num_clbits > 0 {
        for (q, &m) in measured.iter().enumerate() {
            if !m {
                out.warn(
                    "qubit_never_measured",
                    format!("qubit {q} is never measured"),
                    None,
                    Some(format!("q[{q}]")),
                );
            }
        }
    }
    for (c, &w) in written.iter().enumerate() {
        if !w {
            out.warn(
                "clbit_never_written",
                format!("classical bit {c} is never written"),
                None,
                Some(format!("c[{c}]")),
            );
        }
    }

    let ok = !out.issues.iter().any(|i| i.severity == Severity::Error);
    VerificationReport { ok, issues: out.issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell_measured() -> Circuit {
        let mut c = Circuit::new("bell", 2, 2);
        c.h(0).cx(0, 1).measure(0, 0).measure(1, 1);
        c
    }

    #[test]
    fn bell_is_clean() {
        let r = verify(&bell_measured());
        assert!(r.ok);
        assert!(r.issues.is_empty(), "{:?}", r.issues);
    }

    #[test]
    fn duplicate_operands() {
        let mut c = Circuit::new("bad", 2, 0);
        c.cx(0, 0);
        let r = verify(&c);
        assert!(!r.ok);
        assert!(r.issues.iter().any(|i| i.message == "duplicate qubit operands"));
    }

    #[test]
    fn measure_into_missing_clbit() {
        let mut c = Circuit::new("bad", 2, 0);
        c.measure(1, 0);
        let r = verify(&c);
        assert!(!r.ok);
        let issue = r.errors().next().unwrap();
        assert!(issue.message.starts_with("classical bit out of range"));
        assert_eq!(issue.gate, Some(0));
    }

    #[test]
    fn structural_errors() {
        let mut c = Circuit::new("bad", 2, 1);
        c.h(5);
        c.add_gate(GateKind::Rz, vec![0], vec![], vec![]);
        c.add_gate(GateKind::Mcx, vec![1], vec![], vec![]);
        c.add_gate(GateKind::Cx, vec![0], vec![], vec![]);
        let r = verify(&c);
        for code in ["qubit_out_of_range", "param_count", "mcx_controls", "arity"] {
            assert!(r.has_code(code), "missing {code}: {:?}", r.issues);
        }
    }

    #[test]
    fn warnings_do_not_fail() {
        let mut c = Circuit::new("warn", 2, 2);
        c.measure(0, 0).h(0);
        let r = verify(&c);
        assert!(r.ok);
        assert!(r.has_code("gate_after_measure"));
        assert!(r.has_code("qubit_never_measured"));
        assert!(r.has_code("clbit_never_written"));
    }
}
