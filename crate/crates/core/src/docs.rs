//! In-situ glossary served next to every view.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub key: String,
    pub title: String,
    pub body: String,
    pub related: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DocLookup {
    Found(DocEntry),
    NotFound { term: String },
}

impl DocLookup {
    pub fn entry(&self) -> Option<&DocEntry> {
        match self {
            DocLookup::Found(e) => Some(e),
            DocLookup::NotFound { .. } => None,
        }
    }
}

struct RawEntry {
    key: &'static str,
    title: &'static str,
    body: &'static str,
    related: &'static [&'static str],
}

const GLOSSARY: &[RawEntry] = &[
    RawEntry {
        key: "qubit",
        title: "Qubit",
        body: "The basic unit of quantum computation. A qubit holds a superposition of 0 and 1 and reads out as a single 0 or 1 when measured, with probabilities given by its amplitudes.",
        related: &["gate", "shots", "t1_t2"],
    },
    RawEntry {
        key: "gate",
        title: "Gate",
        body: "A discrete operation on one or more qubits, such as Hadamard (h), C-NOT (cx) or Toffoli (ccx). Gates drawn in the same column run at the same time.",
        related: &["layer", "basis_gates"],
    },
    RawEntry {
        key: "layer",
        title: "Layer",
        body: "A set of gates that act on disjoint qubits and can execute simultaneously. Circuits are layered as soon as possible: each gate goes one layer after the latest gate sharing a qubit with it.",
        related: &["gate", "duration"],
    },
    RawEntry {
        key: "shots",
        title: "Shots",
        body: "A circuit is executed many times; each execution is a shot. Tallying the measured bitstrings over all shots gives the counts distribution.",
        related: &["counts", "qubit"],
    },
    RawEntry {
        key: "counts",
        title: "Counts",
        body: "Map from measured bitstring to the number of shots that produced it. Classical bit 0 is the rightmost character.",
        related: &["shots", "hea"],
    },
    RawEntry {
        key: "t1_t2",
        title: "T1 and T2",
        body: "T1 and T2 describe how long the qubit can hold its state and phase, respectively. Beyond these times it becomes hard to trust that the qubit still carries the intended state. Both are reported in microseconds.",
        related: &["qubit", "readout_error", "calibration"],
    },
    RawEntry {
        key: "readout_error",
        title: "Readout error",
        body: "Probability that measuring a qubit reports the flipped bit.",
        related: &["esp", "hea"],
    },
    RawEntry {
        key: "gate_error",
        title: "Gate error",
        body: "Probability that a physical gate does not perform its ideal operation. One minus the gate error is the gate's success rate.",
        related: &["esp", "calibration"],
    },
    RawEntry {
        key: "esp",
        title: "Estimated success probability (ESP)",
        body: "ESP is the product of the success rates (1 - error) of every gate in a physical circuit. It is reported per layer, cumulatively over layers, per qubit, and in total including the readout error of each measured qubit.",
        related: &["gate_error", "readout_error", "layer"],
    },
    RawEntry {
        key: "basis_gates",
        title: "Basis gates",
        body: "The gate set a machine executes natively. Every other gate is rewritten into basis gates during transpilation.",
        related: &["transpilation", "gate"],
    },
    RawEntry {
        key: "coupling_map",
        title: "Coupling map",
        body: "Graph of qubit pairs on which the machine allows two-qubit gates. Gates between uncoupled qubits need SWAP routing.",
        related: &["transpilation", "swap"],
    },
    RawEntry {
        key: "swap",
        title: "SWAP",
        body: "Exchanges the states of two qubits. Routing inserts SWAPs (three C-NOTs each) to bring distant qubits next to each other, which adds error.",
        related: &["coupling_map", "transpilation"],
    },
    RawEntry {
        key: "transpilation",
        title: "Transpilation",
        body: "Compiles a logical circuit into a physical circuit for one machine: choosing physical qubits, routing over the coupling map, translating into basis gates and optimizing. Results depend on the optimization level and the random seed.",
        related: &["basis_gates", "coupling_map", "esp"],
    },
    RawEntry {
        key: "calibration",
        title: "Calibration snapshot",
        body: "Timestamped record of a machine's physical properties: T1, T2, qubit frequency, readout error and duration, and per-gate error and duration. Properties drift between snapshots.",
        related: &["t1_t2", "gate_error"],
    },
    RawEntry {
        key: "hea",
        title: "Hypothetical error adjustment",
        body: "Monte-Carlo resampling of measured counts: every shot's bits are flipped with each qubit's estimated error probability, many times over, giving a mean and a 95% interval per state. The adjustment pulls counts toward the uniform center; states whose interval excludes that center are well differentiated.",
        related: &["counts", "esp", "readout_error"],
    },
    RawEntry {
        key: "duration",
        title: "Circuit duration",
        body: "Sum over layers of the longest gate in each layer, in nanoseconds. Measurement uses the qubit's readout duration.",
        related: &["layer"],
    },
    RawEntry {
        key: "qasm",
        title: "OpenQASM",
        body: "Text format for gate-based circuits. Circuits are exchanged as OpenQASM 2.0 with the qelib1 gate names.",
        related: &["gate"],
    },
    RawEntry {
        key: "job_bundle",
        title: "Job bundle",
        body: "Self-contained record of one execution: logical and physical circuits, layout, the calibration snapshot used, run configuration and counts. A bundle can be shared and re-run on a simulator with the same machine properties.",
        related: &["calibration", "counts"],
    },
    RawEntry {
        key: "amplitude_encoding",
        title: "Amplitude encoding",
        body: "Stores a normalized non-negative vector, such as image intensities, in the squared magnitudes of a state's amplitudes.",
        related: &["qubit"],
    },
];

pub fn docs_lookup(term: &str) -> DocLookup {
    let key = term.trim().to_ascii_lowercase();
    match GLOSSARY.iter().find(|e| e.key == key) {
        Some(e) => DocLookup::Found(DocEntry {
            key: e.key.to_string(),
            title: e.title.to_string(),
            body: e.body.to_string(),
            related: e.related.iter().map(|s| s.to_string()).collect(),
        }),
        None => DocLookup::NotFound { term: term.to_string() },
    }
}

pub fn glossary_keys() -> Vec<&'static str> {
    GLOSSARY.iter().map(|e| e.key).collect()
}
