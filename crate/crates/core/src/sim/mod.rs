//! Dense statevector execution: exact amplitudes and outcome
//! probabilities, ideal shot sampling, and a calibrated mode with Pauli
//! trajectories and readout flips driven by a calibration snapshot.
//!
//! Every shot draws from its own ChaCha8 stream pair derived from the run
//! seed (stream `2s` samples the outcome, stream `2s+1` drives noise), so
//! results do not depend on evaluation order and a calibrated run with zero
//! error rates reproduces the ideal run.

mod counts;
mod state;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{verify, Circuit, GateKind};
use crate::machine::CalibrationSnapshot;

pub use counts::{parse_bitstring, to_bitstring, Counts, CountsError, MAX_COUNTS_WIDTH};
use state::State;

pub const MAX_SIM_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("circuit needs {qubits} simulated qubits, at most {max} supported")]
    TooWide { qubits: usize, max: usize },
    #[error("circuit measures no qubits")]
    NoMeasurements,
    #[error("shots must be at least 1")]
    NoShots,
    #[error("circuit failed verification: {0}")]
    Unverified(String),
    #[error("missing calibration: {0}")]
    MissingCalibration(String),
    #[error(transparent)]
    Counts(#[from] CountsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Ideal,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Ideal,
    Calibrated(Box<CalibrationSnapshot>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub shots: u64,
    pub seed: u64,
    pub noise: Noise,
}

impl RunConfig {
    pub fn ideal(shots: u64, seed: u64) -> Self {
        RunConfig {
            shots,
            seed,
            noise: Noise::Ideal,
        }
    }

    pub fn calibrated(shots: u64, seed: u64, snapshot: CalibrationSnapshot) -> Self {
        RunConfig {
            shots,
            seed,
            noise: Noise::Calibrated(Box::new(snapshot)),
        }
    }

    pub fn mode(&self) -> NoiseMode {
        match self.noise {
            Noise::Ideal => NoiseMode::Ideal,
            Noise::Calibrated(_) => NoiseMode::Calibrated,
        }
    }
}

/// Circuit restricted to the qubits it touches, renumbered densely.
struct Compact {
    n: usize,
    gates: Vec<(GateKind, Vec<usize>, Vec<f64>)>,
    /// Compact source qubit of each clbit (last measure wins).
    sources: Vec<Option<usize>>,
}

fn compact(circuit: &Circuit) -> Result<Compact, SimError> {
    let mut index = vec![usize::MAX; circuit.num_qubits];
    let mut n = 0;
    for g in &circuit.gates {
        for &q in &g.qubits {
            if index[q] == usize::MAX {
                index[q] = n;
                n += 1;
            }
        }
    }
    if n > MAX_SIM_QUBITS {
        return Err(SimError::TooWide {
            qubits: n,
            max: MAX_SIM_QUBITS,
        });
    }
    let gates = circuit
        .gates
        .iter()
        .map(|g| (g.kind, g.qubits.iter().map(|&q| index[q]).collect(), g.params.clone()))
        .collect();
    let sources = circuit.clbit_sources().into_iter().map(|s| s.map(|q| index[q])).collect();
    Ok(Compact { n, gates, sources })
}

fn checked(circuit: &Circuit) -> Result<(), SimError> {
    let report = verify(circuit);
    if !report.ok {
        return Err(SimError::Unverified(report.summary()));
    }
    Ok(())
}

/// Final amplitudes over the full qubit register (measures skipped).
pub fn statevector(circuit: &Circuit) -> Result<Vec<Complex64>, SimError> {
    checked(circuit)?;
    if circuit.num_qubits > MAX_SIM_QUBITS {
        return Err(SimError::TooWide {
            qubits: circuit.num_qubits,
            max: MAX_SIM_QUBITS,
        });
    }
    let mut s = State::zero(circuit.num_qubits);
    for g in &circuit.gates {
        s.apply(g.kind, &g.qubits, &g.params);
    }
    Ok(s.amps)
}

/// Sparse outcome distribution, ascending by outcome, zero entries dropped.
fn outcome_distribution(state: &State, sources: &[Option<usize>]) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = state
        .amps
        .iter()
        .enumerate()
        .filter_map(|(x, a)| {
            let p = a.norm_sqr();
            (p > 0.0).then(|| (outcome_of(x, sources), p))
        })
        .collect();
    out.sort_unstable_by_key(|e| e.0);
    out.dedup_by(|next, prev| {
        if next.0 == prev.0 {
            prev.1 += next.1;
            true
        } else {
            false
        }
    });
    out
}

fn outcome_of(basis: usize, sources: &[Option<usize>]) -> u64 {
    sources
        .iter()
        .enumerate()
        .fold(0u64, |acc, (c, s)| match s {
            Some(q) if basis >> q & 1 == 1 => acc | 1 << c,
            _ => acc,
        })
}

/// Exact outcome distribution over all `2^num_clbits` classical values.
pub fn probabilities(circuit: &Circuit) -> Result<Vec<f64>, SimError> {
    checked(circuit)?;
    if circuit.num_clbits > MAX_SIM_QUBITS {
        return Err(SimError::TooWide {
            qubits: circuit.num_clbits,
            max: MAX_SIM_QUBITS,
        });
    }
    let c = compact(circuit)?;
    let state = evolve(&c, &[]);
    let mut dense = vec![0.0; 1 << circuit.num_clbits];
    for (o, p) in outcome_distribution(&state, &c.sources) {
        dense[o as usize] += p;
    }
    Ok(dense)
}

/// Runs the compact circuit, injecting `pattern` Paulis after the listed gates.
fn evolve(c: &Compact, pattern: &[(u32, u32)]) -> State {
    let mut s = State::zero(c.n);
    let mut next = pattern.iter().peekable();
    for (i, (kind, qs, params)) in c.gates.iter().enumerate() {
        s.apply(*kind, qs, params);
        while let Some((_, code)) = next.next_if(|(g, _)| *g as usize == i) {
            for (k, &q) in qs.iter().enumerate() {
                s.pauli(q, (code >> (2 * k) & 3) as u8);
            }
        }
    }
    s
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Sampler {
    outcomes: Vec<u64>,
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(dist: &[(u64, f64)]) -> Self {
        let mut acc = 0.0;
        let cumulative = dist
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Sampler {
            outcomes: dist.iter().map(|e| e.0).collect(),
            cumulative,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let total = *self.cumulative.last().expect("empty distribution");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|c| *c <= u);
        self.outcomes[i.min(self.outcomes.len() - 1)]
    }
}

/// Samples `config.shots` outcomes of the measured clbits.
pub fn run(circuit: &Circuit, config: &RunConfig) -> Result<Counts, SimError> {
    checked(circuit)?;
    if config.shots == 0 {
        return Err(SimError::NoShots);
    }
    if circuit.measurements().is_empty() {
        return Err(SimError::NoMeasurements);
    }
    if circuit.num_clbits > MAX_COUNTS_WIDTH {
        return Err(CountsError::TooWide(circuit.num_clbits).into());
    }
    let c = compact(circuit)?;
    let mut counts = Counts::new(circuit.num_clbits)?;
    match &config.noise {
        Noise::Ideal => {
            let sampler = Sampler::new(&outcome_distribution(&evolve(&c, &[]), &c.sources));
            for shot in 0..config.shots {
                counts.add(sampler.sample(&mut rng_for(config.seed, 2 * shot)), 1);
            }
        }
        Noise::Calibrated(snapshot) => {
            let noise = NoiseTable::new(circuit, snapshot)?;
            // per shot: error pattern and readout flip mask from the noise stream
            let mut groups: BTreeMap<Vec<(u32, u32)>, Vec<(u64, u64)>> = BTreeMap::new();
            for shot in 0..config.shots {
                let mut rng = rng_for(config.seed, 2 * shot + 1);
                let pattern = noise.draw_pattern(&mut rng);
                let flips = noise.draw_flips(&mut rng);
                groups.entry(pattern).or_default().push((shot, flips));
            }
            let results: Vec<Vec<u64>> = groups
                .par_iter()
                .map(|(pattern, shots)| {
                    let sampler = Sampler::new(&outcome_distribution(&evolve(&c, pattern), &c.sources));
                    shots
                        .iter()
                        .map(|(shot, flips)| sampler.sample(&mut rng_for(config.seed, 2 * shot)) ^ flips)
                        .collect()
                })
                .collect();
            for outcome in results.into_iter().flatten() {
                counts.add(outcome, 1);
            }
        }
    }
    Ok(counts)
}

struct NoiseTable {
    /// `(gate index, error, operand count)` for gates with nonzero error.
    gate_errors: Vec<(u32, f64, u32)>,
    /// `(clbit, readout error)` for every written clbit.
    readout: Vec<(usize, f64)>,
}

impl NoiseTable {
    fn new(circuit: &Circuit, snapshot: &CalibrationSnapshot) -> Result<Self, SimError> {
        let mut gate_errors = Vec::new();
        for g in &circuit.gates {
            if !g.kind.is_unitary() {
                continue;
            }
            let e = snapshot
                .gate_error(g.kind.name(), &g.qubits)
                .ok_or_else(|| SimError::MissingCalibration(format!("no error entry for gate {} ({})", g.id, g.label())))?;
            if e > 0.0 {
                gate_errors.push((g.id as u32, e, g.qubits.len() as u32));
            }
        }
        let mut readout = Vec::new();
        for (clbit, src) in circuit.clbit_sources().into_iter().enumerate() {
            if let Some(q) = src {
                let e = snapshot
                    .readout_error(q)
                    .ok_or_else(|| SimError::MissingCalibration(format!("no readout error for qubit {q}")))?;
                readout.push((clbit, e));
            }
        }
        Ok(NoiseTable { gate_errors, readout })
    }

    fn draw_pattern(&self, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
        let mut pattern = Vec::new();
        for &(gate, e, arity) in &self.gate_errors {
            if rng.random::<f64>() < e {
                // uniform over the 4^k - 1 non-identity Paulis
                pattern.push((gate, rng.random_range(1..1u32 << (2 * arity))));
            }
        }
        pattern
    }

    fn draw_flips(&self, rng: &mut ChaCha8Rng) -> u64 {
        self.readout
            .iter()
            .filter(|(_, e)| rng.random::<f64>() < *e)
            .fold(0u64, |m, (c, _)| m | 1 << c)
    }
}
