//! Monte-Carlo hypothetical error adjustment: pushes measured counts
//! through per-bit flip channels derived from calibration and reports the
//! spread of the re-tallied counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ResultsError;
use crate::analysis::esp;
use crate::circuit::Circuit;
use crate::machine::CalibrationSnapshot;
use crate::sim::{to_bitstring, Counts};

pub const MIN_HEA_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaState {
    pub bitstring: String,
    pub value: u64,
    pub measured: u64,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The uniform share `shots / 2^width` falls outside `[ci_low, ci_high]`.
    pub differentiated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaReport {
    pub trials: usize,
    pub seed: u64,
    pub shots: u64,
    pub width: usize,
    /// Indexed by classical bit.
    pub flip_probabilities: Vec<f64>,
    pub uniform_center: f64,
    /// Every state seen in the measured counts or in any trial, by value.
    pub states: Vec<HeaState>,
}

/// Flip probability of each classical bit: one minus the measured qubit's
/// cumulative gate success times its readout success.
pub fn flip_probabilities(circuit: &Circuit, snapshot: &CalibrationSnapshot) -> Result<Vec<f64>, ResultsError> {
    let report = esp(circuit, snapshot).map_err(|e| ResultsError::MissingCalibration(e.to_string()))?;
    circuit
        .clbit_sources()
        .into_iter()
        .enumerate()
        .map(|(c, src)| {
            let q = src.ok_or_else(|| ResultsError::SizeMismatch(format!("classical bit {c} is never measured")))?;
            let readout = snapshot
                .readout_error(q)
                .ok_or_else(|| ResultsError::MissingCalibration(format!("no readout error for qubit {q}")))?;
            Ok((1.0 - report.qubit_final(q) * (1.0 - readout)).clamp(0.0, 1.0))
        })
        .collect()
}

/// Linear interpolation between order statistics at `q * (n - 1)`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn one_trial(counts: &Counts, flips: &[(usize, f64)], seed: u64, trial: usize) -> HashMap<u64, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut tally = HashMap::new();
    for (outcome, n) in counts.iter() {
        for _ in 0..n {
            let mut o = outcome;
            for &(bit, p) in flips {
                if rng.random::<f64>() < p {
                    o ^= 1 << bit;
                }
            }
            *tally.entry(o).or_insert(0) += 1;
        }
    }
    tally
}

/// Tally of one trial: every shot of `counts` with each bit `j` flipped
/// independently with probability `flip_probabilities[j]`. Trial `t` of a
/// report with seed `s` is `hea_trial(counts, p, s, t)`.
pub fn hea_trial(counts: &Counts, flip_probabilities: &[f64], seed: u64, trial: usize) -> Counts {
    let flips: Vec<(usize, f64)> = flip_probabilities
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, p)| p > 0.0)
        .collect();
    let mut out = Counts::new(counts.width()).expect("same width as the input");
    for (o, n) in one_trial(counts, &flips, seed, trial) {
        out.add(o, n);
    }
    out
}

pub fn hypothetical_error_adjustment(
    counts: &Counts,
    circuit: &Circuit,
    snapshot: &CalibrationSnapshot,
    trials: usize,
    seed: u64,
) -> Result<HeaReport, ResultsError> {
    if counts.width() != circuit.num_clbits {
        return Err(ResultsError::WidthMismatch {
            counts: counts.width(),
            circuit: circuit.num_clbits,
        });
    }
    if trials < MIN_HEA_TRIALS {
        return Err(ResultsError::TooFewTrials {
            got: trials,
            min: MIN_HEA_TRIALS,
        });
    }
    let probs = flip_probabilities(circuit, snapshot)?;
    let flips: Vec<(usize, f64)> = probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();

    let tallies: Vec<HashMap<u64, u64>> = (0..trials)
        .into_par_iter()
        .map(|t| one_trial(counts, &flips, seed, t))
        .collect();

    let mut states: BTreeSet<u64> = counts.iter().map(|(o, _)| o).collect();
    for t in &tallies {
        states.extend(t.keys().copied());
    }
    let mut per_state: BTreeMap<u64, Vec<f64>> = states.iter().map(|&s| (s, Vec::with_capacity(trials))).collect();
    for t in &tallies {
        for (s, series) in per_state.iter_mut() {
            series.push(t.get(s).copied().unwrap_or(0) as f64);
        }
    }

    let width = counts.width();
    let shots = counts.shots();
    let uniform_center = shots as f64 / 2f64.powi(width as i32);
    let states = per_state
        .into_iter()
        .map(|(value, mut series)| {
            let n = series.len() as f64;
            let mean = series.iter().sum::<f64>() / n;
            let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            series.sort_by(f64::total_cmp);
            // percentiles can straddle the mean on very skewed series
            let ci_low = percentile(&series, 0.025).min(mean);
            let ci_high = percentile(&series, 0.975).max(mean);
            HeaState {
                bitstring: to_bitstring(value, width),
                value,
                measured: counts.get(value),
                mean,
                sd: var.sqrt(),
                ci_low,
                ci_high,
                differentiated: uniform_center < ci_low || uniform_center > ci_high,
            }
        })
        .collect();
    Ok(HeaReport {
        trials,
        seed,
        shots,
        width,
        flip_probabilities: probs,
        uniform_center,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::testing::linear_snapshot;

    fn measure_all(n: usize) -> Circuit {
        let mut c = Circuit::new("m", n, n);
        for q in 0..n {
            c.measure(q, q);
        }
        c
    }

    fn snapshot(n: usize, readout: &[f64]) -> CalibrationSnapshot {
        let mut s = linear_snapshot(n.max(2), 35.0, 300.0, 0.0, 0.0);
        for (q, &r) in readout.iter().enumerate() {
            s.qubits[q].readout_error = r;
        }
        s
    }

    /// Exact expectation of the flip channel: sum over source states of
    /// count times the product of per-bit flip or keep probabilities.
    fn channel_expectation(counts: &Counts, p: &[f64]) -> Vec<f64> {
        let w = p.len();
        let mut out = vec![0.0; 1 << w];
        for (src, n) in counts.iter() {
            for (dst, slot) in out.iter_mut().enumerate() {
                let mut prob = 1.0;
                for (j, &pj) in p.iter().enumerate() {
                    let differs = ((src >> j) ^ (dst as u64 >> j)) & 1 == 1;
                    prob *= if differs { pj } else { 1.0 - pj };
                }
                *slot += n as f64 * prob;
            }
        }
        out
    }

    fn entropy(weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| {
                let f = w / total;
                -f * f.ln()
            })
            .sum()
    }

    #[test]
    fn zero_noise_is_identity() {
        let counts = Counts::from_bitstrings([("00", 30), ("11", 70)]).unwrap();
        let r = hypothetical_error_adjustment(&counts, &measure_all(2), &snapshot(2, &[0.0, 0.0]), 100, 1).unwrap();
        for s in &r.states {
            assert_eq!(s.mean, s.measured as f64);
            assert_eq!((s.ci_low, s.ci_high), (s.mean, s.mean));
            assert_eq!(s.sd, 0.0);
        }
    }

    #[test]
    fn single_bit_matches_expectation() {
        let counts = Counts::from_bitstrings([("0", 1000)]).unwrap();
        let r = hypothetical_error_adjustment(&counts, &measure_all(1), &snapshot(1, &[0.1]), 1000, 4).unwrap();
        let zero = r.states.iter().find(|s| s.value == 0).unwrap();
        let se = zero.sd / (r.trials as f64).sqrt();
        assert!((zero.mean - 900.0).abs() < 3.0 * se, "{} ± {}", zero.mean, se);
        assert!(zero.ci_low <= zero.mean && zero.mean <= zero.ci_high);
    }

    #[test]
    fn oracle_agreement_mass_and_entropy() {
        let cases: Vec<(Counts, Vec<f64>)> = vec![
            (Counts::from_bitstrings([("00", 300), ("01", 20), ("11", 180)]).unwrap(), vec![0.05, 0.2]),
            (
                Counts::from_bitstrings([("000", 400), ("101", 100), ("110", 12)]).unwrap(),
                vec![0.1, 0.02, 0.3],
            ),
            (Counts::from_bitstrings([("01", 250), ("10", 250), ("00", 250), ("11", 250)]).unwrap(), vec![0.15, 0.15]),
        ];
        for (counts, p) in cases {
            let w = p.len();
            let r = hypothetical_error_adjustment(&counts, &measure_all(w), &snapshot(w, &p), 1000, 9).unwrap();
            for (a, b) in r.flip_probabilities.iter().zip(&p) {
                assert!((a - b).abs() < 1e-12);
            }
            let expect = channel_expectation(&counts, &p);
            let mean_total: f64 = r.states.iter().map(|s| s.mean).sum();
            assert!((mean_total - counts.shots() as f64).abs() < 1e-9);
            for s in &r.states {
                let se = (s.sd / (r.trials as f64).sqrt()).max(1e-9);
                assert!((s.mean - expect[s.value as usize]).abs() <= 3.0 * se + 1e-9, "state {}", s.bitstring);
                assert!(s.ci_low <= s.mean && s.mean <= s.ci_high);
            }
            let measured: Vec<f64> = (0..1u64 << w).map(|o| counts.get(o) as f64).collect();
            assert!(entropy(&expect) >= entropy(&measured) - 1e-12);
        }
    }

    #[test]
    fn every_trial_conserves_mass() {
        let counts = Counts::from_bitstrings([("01", 37), ("10", 5)]).unwrap();
        let flips = vec![(0, 0.3), (1, 0.4)];
        for t in 0..50 {
            let tally = one_trial(&counts, &flips, 3, t);
            assert_eq!(tally.values().sum::<u64>(), 42);
        }
    }

    #[test]
    fn deterministic_and_guarded() {
        let counts = Counts::from_bitstrings([("01", 37), ("10", 5)]).unwrap();
        let snap = snapshot(2, &[0.05, 0.1]);
        let a = hypothetical_error_adjustment(&counts, &measure_all(2), &snap, 200, 5).unwrap();
        let b = hypothetical_error_adjustment(&counts, &measure_all(2), &snap, 200, 5).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            hypothetical_error_adjustment(&counts, &measure_all(2), &snap, 99, 5),
            Err(ResultsError::TooFewTrials { .. })
        ));
        assert!(matches!(
            hypothetical_error_adjustment(&counts, &measure_all(3), &snapshot(3, &[0.0; 3]), 100, 5),
            Err(ResultsError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn gate_errors_raise_flip_probability() {
        let mut snap = linear_snapshot(2, 35.0, 300.0, 0.01, 0.05);
        snap.qubits[0].readout_error = 0.02;
        snap.qubits[1].readout_error = 0.02;
        let mut c = Circuit::new("c", 2, 2);
        c.sx(0).cx(0, 1).measure(0, 0).measure(1, 1);
        let p = flip_probabilities(&c, &snap).unwrap();
        assert!((p[0] - (1.0 - 0.99 * 0.95 * 0.98)).abs() < 1e-12);
        assert!((p[1] - (1.0 - 0.95 * 0.98)).abs() < 1e-12);
    }
}
