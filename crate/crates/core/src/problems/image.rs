//! Amplitude encoding of a grayscale image: pixel `i` becomes basis state
//! `i` with probability `pixel_i / sum`. State preparation uses uniformly
//! controlled Ry rotations from the most-significant qubit down.

use super::{index_bits, ProblemError};
use crate::circuit::Circuit;

/// Per-level rotation angles. Level `k` targets qubit `n-1-k` and holds one
/// angle per assignment of the `k` higher qubits.
pub fn image_angles(probs: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut levels = Vec::with_capacity(n);
    for k in 0..n {
        let span = 1usize << (n - k);
        let half = span / 2;
        let alphas = (0..1usize << k)
            .map(|j| {
                let block = &probs[j * span..(j + 1) * span];
                // the higher qubits are the high index bits, so bit `n-1-k`
                // splits each block into a low and high half
                let p0: f64 = block[..half].iter().sum();
                let p1: f64 = block[half..].iter().sum();
                if p0 + p1 <= 0.0 {
                    0.0
                } else {
                    2.0 * p1.sqrt().atan2(p0.sqrt())
                }
            })
            .collect();
        levels.push(alphas);
    }
    levels
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Uniformly controlled Ry on `target` with `controls[b]` driving bit `b`
/// of the control index.
fn uniformly_controlled_ry(c: &mut Circuit, alphas: &[f64], controls: &[usize], target: usize) {
    let k = controls.len();
    let size = 1usize << k;
    if alphas.iter().all(|a| *a == 0.0) {
        return;
    }
    if k == 0 {
        c.ry(target, alphas[0]);
        return;
    }
    for i in 0..size {
        let theta: f64 = alphas
            .iter()
            .enumerate()
            .map(|(j, a)| if (j & gray(i)).count_ones().is_multiple_of(2) { *a } else { -*a })
            .sum::<f64>()
            / size as f64;
        c.ry(target, theta);
        let bit = if i + 1 == size { k - 1 } else { (i + 1).trailing_zeros() as usize };
        c.cx(controls[bit], target);
    }
}

/// Preparation circuit with all qubits measured, plus the normalization
/// (pixel sum) needed to decode.
pub fn image_circuit(width: usize, height: usize, pixels: &[f64]) -> (Circuit, f64) {
    let n = index_bits(width * height);
    let norm: f64 = pixels.iter().sum();
    let mut probs: Vec<f64> = pixels.iter().map(|p| p / norm).collect();
    probs.resize(1 << n, 0.0);
    let mut c = Circuit::new(format!("image_{width}x{height}"), n, n);
    for (k, alphas) in image_angles(&probs, n).iter().enumerate() {
        let target = n - 1 - k;
        let controls: Vec<usize> = (n - k..n).collect();
        uniformly_controlled_ry(&mut c, alphas, &controls, target);
    }
    for q in 0..n {
        c.measure(q, q);
    }
    (c, norm)
}

/// Reads a plain (P2) portable graymap into `(width, height, pixels)`.
pub fn parse_pgm(text: &str) -> Result<(usize, usize, Vec<f64>), ProblemError> {
    let mut words = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if words.next() != Some("P2") {
        return Err(ProblemError("expected a P2 graymap".into()));
    }
    let mut num = |what: &str| -> Result<usize, ProblemError> {
        words
            .next()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| ProblemError(format!("graymap: bad or missing {what}")))
    };
    let (w, h, _max) = (num("width")?, num("height")?, num("maxval")?);
    let size = w.checked_mul(h).filter(|s| *s <= 1 << 20).ok_or_else(|| ProblemError("graymap too large".into()))?;
    let pixels = (0..size).map(|_| num("pixel").map(|v| v as f64)).collect::<Result<_, _>>()?;
    Ok((w, h, pixels))
}
