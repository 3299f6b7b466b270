//! Order finding for `a^x mod N` with permutation-synthesized modular
//! multiplication. Layout: counting qubits `0..2n`, work qubits `2n..3n`.

use super::{append_qft, cancel_adjacent_x, index_bits};
use crate::circuit::Circuit;

/// `perm[y] = m*y mod N` for `y < N`; values `>= N` are fixed.
pub fn modmul_permutation(multiplier: u64, modulus: u64, bits: usize) -> Vec<usize> {
    (0..1usize << bits)
        .map(|y| {
            if (y as u64) < modulus {
                ((multiplier * y as u64) % modulus) as usize
            } else {
                y
            }
        })
        .collect()
}

pub(crate) fn pow_mod(base: u64, exp: u64, modulus: u64) -> u64 {
    let (mut acc, mut b, mut e) = (1u64, base % modulus, exp);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % modulus;
        }
        b = b * b % modulus;
        e >>= 1;
    }
    acc
}

/// Transpositions whose left-to-right application realizes `perm`.
fn transpositions(perm: &[usize]) -> Vec<(usize, usize)> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut y = perm[start];
        while y != start {
            seen[y] = true;
            cycle.push(y);
            y = perm[y];
        }
        // c0 -> c1 -> ... -> c_{L-1} -> c0
        for i in (0..cycle.len().saturating_sub(1)).rev() {
            out.push((cycle[i], cycle[i + 1]));
        }
    }
    out
}

/// Flips the single differing bit between basis states `g` and `g'` when the
/// control is set and every other work bit matches `g`.
fn adjacent_transposition(c: &mut Circuit, control: usize, work: &[usize], g: usize, bit: usize) {
    let zeros: Vec<usize> = (0..work.len()).filter(|&b| b != bit && g >> b & 1 == 0).map(|b| work[b]).collect();
    let mut controls = vec![control];
    controls.extend((0..work.len()).filter(|&b| b != bit).map(|b| work[b]));
    for &q in &zeros {
        c.x(q);
    }
    c.mcx(&controls, work[bit]);
    for &q in &zeros {
        c.x(q);
    }
}

/// Controlled swap of basis states `u` and `v` of the work register, as a
/// conjugated chain of single-bit transpositions along a Gray path.
fn controlled_transposition(c: &mut Circuit, control: usize, work: &[usize], u: usize, v: usize) {
    let mut path = vec![u];
    let mut cur = u;
    for b in 0..work.len() {
        if (u ^ v) >> b & 1 == 1 {
            cur ^= 1 << b;
            path.push(cur);
        }
    }
    let steps: Vec<(usize, usize)> = path
        .windows(2)
        .map(|w| (w[0], (w[0] ^ w[1]).trailing_zeros() as usize))
        .collect();
    for &(g, bit) in &steps {
        adjacent_transposition(c, control, work, g, bit);
    }
    for &(g, bit) in steps.iter().rev().skip(1) {
        adjacent_transposition(c, control, work, g, bit);
    }
}

pub fn shor_circuit(base: u64, modulus: u64) -> Circuit {
    let n = index_bits(modulus as usize);
    let t = 2 * n;
    let mut c = Circuit::new(format!("shor_{base}_{modulus}"), 3 * n, t);
    let counting: Vec<usize> = (0..t).collect();
    let work: Vec<usize> = (t..t + n).collect();
    for &q in &counting {
        c.h(q);
    }
    c.x(work[0]);
    for k in 0..t {
        let m = pow_mod(base, 1 << k, modulus);
        if m == 1 {
            continue;
        }
        let perm = modmul_permutation(m, modulus, n);
        for (u, v) in transpositions(&perm) {
            controlled_transposition(&mut c, counting[k], &work, u, v);
        }
    }
    cancel_adjacent_x(&mut c);
    append_qft(&mut c, &counting, true);
    for k in 0..t {
        c.measure(counting[k], k);
    }
    c
}
