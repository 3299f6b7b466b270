//! Problem-specific views of measured counts.

mod hea;

use std::collections::BTreeMap;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::problems::{pow_mod, ProblemSpec};
use crate::sim::{to_bitstring, Counts};

pub use hea::{flip_probabilities, hea_trial, hypothetical_error_adjustment, HeaReport, HeaState, MIN_HEA_TRIALS};

/// Widest register `to_integer_histogram` will materialize with zero rows.
pub const MAX_DENSE_WIDTH: usize = 20;
/// Widest row or column set of a contingency table.
pub const MAX_PIVOT_BITS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResultsError {
    #[error("width {width} exceeds the limit of {max} for this view")]
    TooWide { width: usize, max: usize },
    #[error("bit sets overlap at bit {0}")]
    Overlap(usize),
    #[error("bit {bit} is outside a {width}-bit register")]
    BitOutOfRange { bit: usize, width: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid Shor parameters: {0}")]
    InvalidShor(String),
    #[error("counts width {counts} does not match the circuit's {circuit} classical bits")]
    WidthMismatch { counts: usize, circuit: usize },
    #[error("missing calibration: {0}")]
    MissingCalibration(String),
    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { got: usize, min: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bitstring: String,
    pub value: u64,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerHistogram {
    pub width: usize,
    pub shots: u64,
    /// Sorted by value.
    pub rows: Vec<HistogramRow>,
}

impl IntegerHistogram {
    pub fn nonzero_values(&self) -> Vec<u64> {
        self.rows.iter().filter(|r| r.count > 0).map(|r| r.value).collect()
    }
}

pub fn to_integer_histogram(counts: &Counts, include_zero: bool) -> Result<IntegerHistogram, ResultsError> {
    let width = counts.width();
    let shots = counts.shots();
    let freq = |n: u64| if shots == 0 { 0.0 } else { n as f64 / shots as f64 };
    let row = |value: u64, count: u64| HistogramRow {
        bitstring: to_bitstring(value, width),
        value,
        count,
        frequency: freq(count),
    };
    let rows = if include_zero {
        if width > MAX_DENSE_WIDTH {
            return Err(ResultsError::TooWide {
                width,
                max: MAX_DENSE_WIDTH,
            });
        }
        (0..1u64 << width).map(|v| row(v, counts.get(v))).collect()
    } else {
        counts.iter().map(|(v, n)| row(v, n)).collect()
    };
    Ok(IntegerHistogram { width, shots, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCandidate {
    pub peak: u64,
    /// Convergent denominators of `peak / 2^width` not above the modulus.
    pub denominators: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub base: u64,
    pub modulus: u64,
    pub success: bool,
    pub period: Option<u64>,
    pub factors: Option<(u64, u64)>,
    pub candidates: Vec<PeriodCandidate>,
}

/// Denominators of the continued-fraction convergents of `num / den`, in
/// order, stopping above `limit`.
pub fn convergent_denominators(num: u64, den: u64, limit: u64) -> Vec<u64> {
    let (mut n, mut d) = (num as u128, den as u128);
    // k_{-2} = 1, k_{-1} = 0
    let (mut k2, mut k1) = (1u128, 0u128);
    let mut out = Vec::new();
    while d != 0 {
        let a = n / d;
        let k = a * k1 + k2;
        if k > limit as u128 {
            break;
        }
        out.push(k as u64);
        (k2, k1) = (k1, k);
        (n, d) = (d, n - a * d);
    }
    out
}

pub fn find_period_and_factors(hist: &IntegerHistogram, base: u64, modulus: u64) -> Result<PeriodResult, ResultsError> {
    ProblemSpec::shor(base, modulus)
        .validate()
        .map_err(|e| ResultsError::InvalidShor(e.0))?;
    if hist.width >= 64 {
        return Err(ResultsError::TooWide { width: hist.width, max: 63 });
    }
    let scale = 1u64 << hist.width;
    let mut candidates = Vec::new();
    let mut valid: Vec<u64> = Vec::new();
    for peak in hist.nonzero_values() {
        let denominators = if peak == 0 {
            Vec::new()
        } else {
            convergent_denominators(peak, scale, modulus)
        };
        for &r in &denominators {
            if r > 0 && pow_mod(base, r, modulus) == 1 {
                valid.push(r);
            }
        }
        candidates.push(PeriodCandidate { peak, denominators });
    }
    valid.sort_unstable();
    valid.dedup();
    let found = valid.into_iter().filter(|r| r % 2 == 0).find_map(|r| {
        let half = pow_mod(base, r / 2, modulus);
        if half == modulus - 1 {
            return None;
        }
        let f1 = (half + modulus - 1).gcd(&modulus);
        let f2 = (half + 1).gcd(&modulus);
        let (lo, hi) = (f1.min(f2), f1.max(f2));
        (lo > 1 && hi < modulus).then_some((r, (lo, hi)))
    });
    Ok(PeriodResult {
        base,
        modulus,
        success: found.is_some(),
        period: found.map(|f| f.0),
        factors: found.map(|f| f.1),
        candidates,
    })
}

fn check_sets(a: &[usize], b: &[usize], width: usize) -> Result<(), ResultsError> {
    let mut seen = vec![false; width];
    for &bit in a.iter().chain(b) {
        if bit >= width {
            return Err(ResultsError::BitOutOfRange { bit, width });
        }
        if seen[bit] {
            return Err(ResultsError::Overlap(bit));
        }
        seen[bit] = true;
    }
    Ok(())
}

/// Gathers `bits` of `outcome` into an integer; `bits[0]` becomes bit 0.
fn restrict(outcome: u64, bits: &[usize]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (((outcome >> b) & 1) << i))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    /// Input pattern, `inputs[0]` rightmost.
    pub input: String,
    pub total: u64,
    /// Observed output patterns, most frequent first.
    pub outputs: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTableView {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    /// Sorted by input value.
    pub rows: Vec<TruthRow>,
}

pub fn to_truth_table(counts: &Counts, inputs: &[usize], outputs: &[usize]) -> Result<TruthTableView, ResultsError> {
    check_sets(inputs, outputs, counts.width())?;
    let mut grouped: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
    for (outcome, n) in counts.iter() {
        *grouped
            .entry(restrict(outcome, inputs))
            .or_default()
            .entry(restrict(outcome, outputs))
            .or_default() += n;
    }
    let rows = grouped
        .into_iter()
        .map(|(input, outs)| {
            let mut outputs_seen: Vec<(String, u64)> =
                outs.into_iter().map(|(o, n)| (to_bitstring(o, outputs.len()), n)).collect();
            outputs_seen.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            TruthRow {
                input: to_bitstring(input, inputs.len()),
                total: outputs_seen.iter().map(|o| o.1).sum(),
                outputs: outputs_seen,
            }
        })
        .collect();
    Ok(TruthTableView {
        inputs: inputs.to_vec(),
        outputs: outputs.to_vec(),
        rows,
    })
}

/// Input to the image decoder.
#[derive(Debug, Clone, Copy)]
pub enum ImageSource<'a> {
    Counts(&'a Counts),
    /// Dense probabilities over `2^k` basis states.
    Probabilities(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub pixels: Vec<f64>,
    pub normalization: f64,
    /// Probability mass on indices past `width * height`.
    pub out_of_range_mass: f64,
    pub warning: bool,
}

pub fn to_image(source: ImageSource<'_>, width: usize, height: usize, normalization: f64) -> Result<DecodedImage, ResultsError> {
    let size = width * height;
    if size == 0 {
        return Err(ResultsError::SizeMismatch("image must have at least one pixel".into()));
    }
    if !normalization.is_finite() || normalization < 0.0 {
        return Err(ResultsError::SizeMismatch(format!("normalization {normalization} is not a non-negative number")));
    }
    let mut freq = vec![0.0; size];
    let mut out_of_range_mass = 0.0;
    let mut put = |i: u64, f: f64| match usize::try_from(i).ok().filter(|&i| i < size) {
        Some(i) => freq[i] += f,
        None => out_of_range_mass += f,
    };
    let states_bits = match source {
        ImageSource::Counts(c) => {
            let shots = c.shots().max(1) as f64;
            for (o, n) in c.iter() {
                put(o, n as f64 / shots);
            }
            c.width()
        }
        ImageSource::Probabilities(p) => {
            if !p.len().is_power_of_two() {
                return Err(ResultsError::SizeMismatch(format!("{} probabilities is not a power of two", p.len())));
            }
            for (i, &f) in p.iter().enumerate() {
                put(i as u64, f);
            }
            p.len().trailing_zeros() as usize
        }
    };
    if states_bits < 64 && (size as u128) > (1u128 << states_bits) {
        return Err(ResultsError::SizeMismatch(format!(
            "{width}x{height} image needs more than {states_bits} bits"
        )));
    }
    Ok(DecodedImage {
        width,
        height,
        pixels: freq.into_iter().map(|f| f * normalization).collect(),
        normalization,
        out_of_range_mass,
        warning: out_of_range_mass > 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_bits: Vec<usize>,
    pub col_bits: Vec<usize>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `cells[r][c]`.
    pub cells: Vec<Vec<u64>>,
    pub row_marginals: Vec<u64>,
    pub col_marginals: Vec<u64>,
    pub total: u64,
}

pub fn to_contingency(counts: &Counts, rows: &[usize], cols: &[usize]) -> Result<ContingencyTable, ResultsError> {
    check_sets(rows, cols, counts.width())?;
    for set in [rows, cols] {
        if set.len() > MAX_PIVOT_BITS {
            return Err(ResultsError::TooWide {
                width: set.len(),
                max: MAX_PIVOT_BITS,
            });
        }
    }
    let (nr, nc) = (1usize << rows.len(), 1usize << cols.len());
    let mut cells = vec![vec![0u64; nc]; nr];
    for (outcome, n) in counts.iter() {
        cells[restrict(outcome, rows) as usize][restrict(outcome, cols) as usize] += n;
    }
    let row_marginals: Vec<u64> = cells.iter().map(|r| r.iter().sum()).collect();
    let col_marginals: Vec<u64> = (0..nc).map(|c| cells.iter().map(|r| r[c]).sum()).collect();
    Ok(ContingencyTable {
        row_bits: rows.to_vec(),
        col_bits: cols.to_vec(),
        row_labels: (0..nr as u64).map(|r| to_bitstring(r, rows.len())).collect(),
        col_labels: (0..nc as u64).map(|c| to_bitstring(c, cols.len())).collect(),
        total: row_marginals.iter().sum(),
        cells,
        row_marginals,
        col_marginals,
    })
}
