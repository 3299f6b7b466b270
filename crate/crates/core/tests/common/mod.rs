//! Seeded random circuits shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};

use qwb_core::circuit::{Circuit, GateKind};
use qwb_core::qasm::parse_qasm;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONE_QUBIT: [GateKind; 12] = [
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
];

const TWO_QUBIT: [GateKind; 4] = [GateKind::Cx, GateKind::Cz, GateKind::Cu1, GateKind::Swap];

fn angle(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        let k = rng.random_range(-8..=8) as f64;
        k * PI / 8.0
    } else {
        rng.random_range(-4.0..4.0)
    }
}

fn distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut qs: Vec<usize> = (0..n).collect();
    qs.shuffle(rng);
    qs.truncate(k);
    qs
}

pub struct CorpusOptions {
    pub max_qubits: usize,
    pub max_gates: usize,
    /// Allow `mcx`, which QASM 2.0 output cannot carry beyond three qubits.
    pub mcx: bool,
    pub barriers: bool,
    pub measure: bool,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            max_qubits: 4,
            max_gates: 14,
            mcx: true,
            barriers: true,
            measure: true,
        }
    }
}

pub fn random_circuit(seed: u64, opts: &CorpusOptions) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=opts.max_qubits);
    let len = rng.random_range(1..=opts.max_gates);
    let mut c = Circuit::new(format!("random-{seed}"), n, if opts.measure { n } else { 0 });
    for _ in 0..len {
        let roll = rng.random_range(0..100);
        if roll < 55 || n == 1 {
            let kind = *ONE_QUBIT.choose(&mut rng).unwrap();
            let q = rng.random_range(0..n);
            let params = if kind.param_count() == 1 { vec![angle(&mut rng)] } else { vec![] };
            c.add_gate(kind, vec![q], vec![], params);
        } else if roll < 85 || n == 2 {
            let kind = *TWO_QUBIT.choose(&mut rng).unwrap();
            let qs = distinct(&mut rng, n, 2);
            let params = if kind == GateKind::Cu1 { vec![angle(&mut rng)] } else { vec![] };
            c.add_gate(kind, qs, vec![], params);
        } else if roll < 93 {
            c.add_gate(GateKind::Ccx, distinct(&mut rng, n, 3), vec![], vec![]);
        } else if roll < 97 && opts.mcx {
            let k = rng.random_range(2..=n);
            c.add_gate(GateKind::Mcx, distinct(&mut rng, n, k), vec![], vec![]);
        } else if opts.barriers {
            let k = rng.random_range(1..=n);
            let mut qs = distinct(&mut rng, n, k);
            qs.sort_unstable();
            c.add_gate(GateKind::Barrier, qs, vec![], vec![]);
        }
    }
    if opts.measure {
        for q in 0..n {
            c.measure(q, q);
        }
    }
    c
}

pub fn corpus(count: usize, base_seed: u64, opts: &CorpusOptions) -> Vec<Circuit> {
    (0..count as u64).map(|i| random_circuit(base_seed + i, opts)).collect()
}

/// Applies one random edit: byte flip, insertion, deletion or truncation.
fn mutate(rng: &mut ChaCha8Rng, mut bytes: Vec<u8>) -> Vec<u8> {
    const INTERESTING: &[u8] = b"qc[];,()->*/+-.0123456789pi \n\"{}#\xff\x00";
    for _ in 0..rng.random_range(1..4) {
        if bytes.is_empty() {
            bytes.push(rng.random());
            continue;
        }
        let at = rng.random_range(0..bytes.len());
        match rng.random_range(0..5) {
            0 => bytes[at] = rng.random(),
            1 => bytes[at] = INTERESTING[rng.random_range(0..INTERESTING.len())],
            2 => bytes.insert(at, INTERESTING[rng.random_range(0..INTERESTING.len())]),
            3 => {
                bytes.remove(at);
            }
            _ => bytes.truncate(at),
        }
    }
    bytes
}

pub struct FuzzSummary {
    pub ok: usize,
    pub err: usize,
    /// Inputs that made the parser panic.
    pub crashes: Vec<String>,
}

/// Feeds `cases` inputs to the parser: every tenth is random bytes, the
/// rest are mutations of `seeds`. Error positions must be 1-based.
pub fn fuzz_parser(seeds: &[String], cases: usize, seed: u64) -> FuzzSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = FuzzSummary {
        ok: 0,
        err: 0,
        crashes: Vec::new(),
    };
    for case in 0..cases {
        let bytes = if case % 10 == 0 {
            (0..rng.random_range(0..200)).map(|_| rng.random::<u8>()).collect()
        } else {
            let base = seeds[rng.random_range(0..seeds.len())].as_bytes().to_vec();
            mutate(&mut rng, base)
        };
        let text = String::from_utf8_lossy(&bytes).into_owned();
        match catch_unwind(AssertUnwindSafe(|| parse_qasm(&text))) {
            Ok(Ok(_)) => summary.ok += 1,
            Ok(Err(e)) if e.line >= 1 && e.column >= 1 => summary.err += 1,
            _ => summary.crashes.push(text),
        }
    }
    summary
}
