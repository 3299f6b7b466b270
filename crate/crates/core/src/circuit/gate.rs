use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Closed catalog of gates a [`Circuit`](super::Circuit) may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    Sx,
    Cx,
    Cz,
    Cu1,
    Swap,
    Ccx,
    /// Multi-controlled X. Operands are the controls followed by the target.
    Mcx,
    Measure,
    Barrier,
}

impl GateKind {
    pub const ALL: [GateKind; 20] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::Sx,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Cu1,
        GateKind::Swap,
        GateKind::Ccx,
        GateKind::Mcx,
        GateKind::Measure,
        GateKind::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Sx => "sx",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Cu1 => "cu1",
            GateKind::Swap => "swap",
            GateKind::Ccx => "ccx",
            GateKind::Mcx => "mcx",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Fixed qubit count, or `None` for the variadic `mcx` and `barrier`.
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Cx | GateKind::Cz | GateKind::Cu1 | GateKind::Swap => Some(2),
            GateKind::Ccx => Some(3),
            GateKind::Mcx | GateKind::Barrier => None,
            _ => Some(1),
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Cu1 => 1,
            _ => 0,
        }
    }

    /// True for gates with a unitary action (everything except measure and barrier).
    pub fn is_unitary(self) -> bool {
        !matches!(self, GateKind::Measure | GateKind::Barrier)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gate `{0}`")]
pub struct UnknownGate(pub String);

impl FromStr for GateKind {
    type Err = UnknownGate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::from_name(s).ok_or_else(|| UnknownGate(s.to_string()))
    }
}

/// One gate application inside a circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateInstance {
    pub id: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clbits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl GateInstance {
    pub fn touches(&self, qubit: usize) -> bool {
        self.qubits.contains(&qubit)
    }

    /// Label used in diagnostics, e.g. `cx[0,1]`.
    pub fn label(&self) -> String {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        format!("{}[{}]", self.kind, qs.join(","))
    }
}
