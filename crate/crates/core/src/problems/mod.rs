//! Problem-oriented circuit builders. Callers describe a problem in domain
//! terms (an integer pair, a truth table, an image) and receive a verified
//! circuit plus named qubit and clbit roles.

mod image;
mod shor;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{verify, Circuit, GateKind};

pub use image::{image_angles, image_circuit, parse_pgm};
pub use shor::{modmul_permutation, shor_circuit};
pub(crate) use shor::pow_mod;

/// Widest problem the builders accept (matches the simulator cap).
pub const MAX_PROBLEM_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid problem: {0}")]
pub struct ProblemError(pub String);

fn invalid(msg: impl Into<String>) -> ProblemError {
    ProblemError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    Bell,
    Ghz {
        n: usize,
    },
    Qft {
        n: usize,
    },
    Shor {
        base: u64,
        modulus: u64,
    },
    /// Row `i` is the output bitstring for input `i` (input qubit 0 is the
    /// least-significant input bit; output 0 is the rightmost character).
    TruthTable {
        inputs: usize,
        outputs: usize,
        table: Vec<String>,
    },
    /// Non-negative intensities, row-major.
    Image {
        width: usize,
        height: usize,
        pixels: Vec<f64>,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub kind: ProblemKind,
    #[serde(default = "default_true")]
    pub auto_qubits: bool,
    /// Builder qubit `i` is placed on circuit qubit `manual_qubit_map[i]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_qubit_map: Option<Vec<usize>>,
}

impl From<ProblemKind> for ProblemSpec {
    fn from(kind: ProblemKind) -> Self {
        ProblemSpec {
            kind,
            auto_qubits: true,
            manual_qubit_map: None,
        }
    }
}

impl ProblemSpec {
    pub fn bell() -> Self {
        ProblemKind::Bell.into()
    }

    pub fn ghz(n: usize) -> Self {
        ProblemKind::Ghz { n }.into()
    }

    pub fn qft(n: usize) -> Self {
        ProblemKind::Qft { n }.into()
    }

    pub fn shor(base: u64, modulus: u64) -> Self {
        ProblemKind::Shor { base, modulus }.into()
    }

    pub fn truth_table(inputs: usize, outputs: usize, table: Vec<String>) -> Self {
        ProblemKind::TruthTable { inputs, outputs, table }.into()
    }

    pub fn image(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        ProblemKind::Image { width, height, pixels }.into()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        match &self.kind {
            ProblemKind::Bell => {}
            ProblemKind::Ghz { n } | ProblemKind::Qft { n } => {
                if *n == 0 || *n > MAX_PROBLEM_QUBITS {
                    return Err(invalid(format!("n must be in 1..={MAX_PROBLEM_QUBITS}, got {n}")));
                }
            }
            ProblemKind::Shor { base, modulus } => validate_shor(*base, *modulus)?,
            ProblemKind::TruthTable { inputs, outputs, table } => {
                if *inputs == 0 || *outputs == 0 {
                    return Err(invalid("truth table needs at least one input and one output"));
                }
                if inputs + outputs > MAX_PROBLEM_QUBITS {
                    return Err(invalid(format!("truth table needs more than {MAX_PROBLEM_QUBITS} qubits")));
                }
                if table.len() != 1 << inputs {
                    return Err(invalid(format!(
                        "truth table with {inputs} inputs needs {} rows, got {}",
                        1usize << inputs,
                        table.len()
                    )));
                }
                for (i, row) in table.iter().enumerate() {
                    if row.len() != *outputs || !row.chars().all(|c| c == '0' || c == '1') {
                        return Err(invalid(format!("row {i} must be {outputs} characters of 0/1, got {row:?}")));
                    }
                }
            }
            ProblemKind::Image { width, height, pixels } => {
                let size = width.checked_mul(*height).unwrap_or(usize::MAX);
                if size == 0 {
                    return Err(invalid("image must have at least one pixel"));
                }
                if size > 1 << MAX_PROBLEM_QUBITS {
                    return Err(invalid("image too large"));
                }
                if pixels.len() != size {
                    return Err(invalid(format!("{width}x{height} image needs {size} pixels, got {}", pixels.len())));
                }
                if pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(invalid("pixels must be finite and non-negative"));
                }
                if !pixels.iter().any(|p| *p > 0.0) {
                    return Err(invalid("at least one pixel must be positive"));
                }
            }
        }
        let (nq, _) = raw_resources(&self.kind);
        match (&self.manual_qubit_map, self.auto_qubits) {
            (Some(_), true) => return Err(invalid("manual_qubit_map given but auto_qubits is true")),
            (None, false) => return Err(invalid("auto_qubits is false but no manual_qubit_map given")),
            (Some(map), false) => {
                let mut seen = vec![false; nq];
                if map.len() != nq || !map.iter().all(|&q| q < nq && !std::mem::replace(&mut seen[q], true)) {
                    return Err(invalid(format!("manual_qubit_map must be a permutation of 0..{nq}")));
                }
            }
            (None, true) => {}
        }
        Ok(())
    }
}

fn validate_shor(base: u64, modulus: u64) -> Result<(), ProblemError> {
    if !(3..=15).contains(&modulus) {
        return Err(invalid(format!("modulus must be in 3..=15, got {modulus}")));
    }
    if base <= 1 || base >= modulus {
        return Err(invalid(format!("base must satisfy 1 < a < N, got a={base}, N={modulus}")));
    }
    if num_integer::gcd(base, modulus) != 1 {
        return Err(invalid(format!("gcd({base}, {modulus}) != 1")));
    }
    Ok(())
}

/// Bits needed to index `count` values, at least 1.
pub(crate) fn index_bits(count: usize) -> usize {
    let mut n = 0;
    while (1usize << n) < count {
        n += 1;
    }
    n.max(1)
}

fn raw_resources(kind: &ProblemKind) -> (usize, usize) {
    match kind {
        ProblemKind::Bell => (2, 2),
        ProblemKind::Ghz { n } => (*n, *n),
        ProblemKind::Qft { n } => (*n, 0),
        ProblemKind::Shor { modulus, .. } => {
            let n = index_bits(*modulus as usize);
            (3 * n, 2 * n)
        }
        ProblemKind::TruthTable { inputs, outputs, .. } => (inputs + outputs, *outputs),
        ProblemKind::Image { width, height, .. } => {
            let n = index_bits(width * height);
            (n, n)
        }
    }
}

/// `(num_qubits, num_clbits)` the built circuit will use.
pub fn required_resources(spec: &ProblemSpec) -> Result<(usize, usize), ProblemError> {
    spec.validate()?;
    Ok(raw_resources(&spec.kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildResult {
    pub circuit: Circuit,
    pub qubit_roles: BTreeMap<String, Vec<usize>>,
    pub clbit_roles: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
    pub problem: ProblemSpec,
}

fn roles(entries: &[(&str, std::ops::Range<usize>)]) -> BTreeMap<String, Vec<usize>> {
    entries
        .iter()
        .filter(|(_, r)| !r.is_empty())
        .map(|(name, r)| (name.to_string(), r.clone().collect()))
        .collect()
}

pub fn build(spec: &ProblemSpec) -> Result<BuildResult, ProblemError> {
    spec.validate()?;
    let (nq, nc) = raw_resources(&spec.kind);
    let mut normalization = None;
    let (circuit, qubit_roles, clbit_roles) = match &spec.kind {
        ProblemKind::Bell => {
            let mut c = Circuit::new("bell", 2, 2);
            c.h(0).cx(0, 1).measure(0, 0).measure(1, 1);
            (c, roles(&[("data", 0..2)]), roles(&[("data", 0..2)]))
        }
        ProblemKind::Ghz { n } => (ghz_circuit(*n), roles(&[("data", 0..*n)]), roles(&[("data", 0..*n)])),
        ProblemKind::Qft { n } => {
            let mut c = Circuit::new(format!("qft{n}"), *n, 0);
            append_qft(&mut c, &(0..*n).collect::<Vec<_>>(), false);
            (c, roles(&[("data", 0..*n)]), BTreeMap::new())
        }
        ProblemKind::Shor { base, modulus } => {
            let c = shor_circuit(*base, *modulus);
            let n = nq / 3;
            (
                c,
                roles(&[("counting", 0..2 * n), ("work", 2 * n..3 * n)]),
                roles(&[("counting", 0..2 * n)]),
            )
        }
        ProblemKind::TruthTable { inputs, outputs, table } => (
            truth_table_circuit(*inputs, *outputs, table),
            roles(&[("inputs", 0..*inputs), ("outputs", *inputs..inputs + outputs)]),
            roles(&[("outputs", 0..*outputs)]),
        ),
        ProblemKind::Image { width, height, pixels } => {
            let (c, norm) = image_circuit(*width, *height, pixels);
            normalization = Some(norm);
            (c, roles(&[("address", 0..nq)]), roles(&[("address", 0..nc)]))
        }
    };
    let mut result = BuildResult {
        circuit,
        qubit_roles,
        clbit_roles,
        normalization,
        problem: spec.clone(),
    };
    if let Some(map) = &spec.manual_qubit_map {
        relabel(&mut result, map);
    }
    debug_assert_eq!((result.circuit.num_qubits, result.circuit.num_clbits), (nq, nc));
    let report = verify(&result.circuit);
    if !report.ok {
        return Err(invalid(format!("builder produced an invalid circuit: {}", report.summary())));
    }
    Ok(result)
}

fn relabel(result: &mut BuildResult, map: &[usize]) {
    for g in &mut result.circuit.gates {
        for q in &mut g.qubits {
            *q = map[*q];
        }
    }
    for qs in result.qubit_roles.values_mut() {
        for q in qs.iter_mut() {
            *q = map[*q];
        }
    }
}

pub fn ghz_circuit(n: usize) -> Circuit {
    let mut c = Circuit::new(format!("ghz{n}"), n, n);
    c.h(0);
    for q in 1..n {
        c.cx(q - 1, q);
    }
    for q in 0..n {
        c.measure(q, q);
    }
    c
}

/// Appends the QFT (with final swaps) on `qubits`, where `qubits[0]` is the
/// least-significant bit. `inverse` appends the exact inverse sequence.
pub fn append_qft(c: &mut Circuit, qubits: &[usize], inverse: bool) {
    let n = qubits.len();
    let mut ops: Vec<(GateKind, Vec<usize>, f64)> = Vec::new();
    for j in (0..n).rev() {
        ops.push((GateKind::H, vec![qubits[j]], 0.0));
        for k in (0..j).rev() {
            let angle = std::f64::consts::PI / (1u64 << (j - k)) as f64;
            ops.push((GateKind::Cu1, vec![qubits[j], qubits[k]], angle));
        }
    }
    for i in 0..n / 2 {
        ops.push((GateKind::Swap, vec![qubits[i], qubits[n - 1 - i]], 0.0));
    }
    if inverse {
        ops.reverse();
    }
    for (kind, qs, angle) in ops {
        let params = if kind == GateKind::Cu1 {
            vec![if inverse { -angle } else { angle }]
        } else {
            vec![]
        };
        c.add_gate(kind, qs, vec![], params);
    }
}

/// Oracle: output qubit `inputs + o` is flipped for every input row whose
/// output bit `o` is 1. Only the outputs are measured.
pub fn truth_table_circuit(inputs: usize, outputs: usize, table: &[String]) -> Circuit {
    let mut c = Circuit::new("truth_table", inputs + outputs, outputs);
    let controls: Vec<usize> = (0..inputs).collect();
    for o in 0..outputs {
        for (row, bits) in table.iter().enumerate() {
            if bits.as_bytes()[outputs - 1 - o] != b'1' {
                continue;
            }
            let zeros: Vec<usize> = (0..inputs).filter(|b| row >> b & 1 == 0).collect();
            for &q in &zeros {
                c.x(q);
            }
            c.mcx(&controls, inputs + o);
            for &q in &zeros {
                c.x(q);
            }
        }
    }
    cancel_adjacent_x(&mut c);
    for o in 0..outputs {
        c.measure(inputs + o, o);
    }
    c
}

/// Removes pairs of `x` gates on the same qubit with nothing between them
/// on that qubit.
pub(crate) fn cancel_adjacent_x(c: &mut Circuit) {
    let mut keep: Vec<bool> = vec![true; c.gates.len()];
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); c.num_qubits];
    for (i, g) in c.gates.iter().enumerate() {
        if g.kind == GateKind::X {
            let q = g.qubits[0];
            if let Some(&top) = stacks[q].last() {
                if c.gates[top].kind == GateKind::X {
                    stacks[q].pop();
                    keep[top] = false;
                    keep[i] = false;
                    continue;
                }
            }
        }
        for &q in &g.qubits {
            stacks[q].push(i);
        }
    }
    let mut i = 0;
    c.gates.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    c.renumber();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{unitary_of, Matrix};
    use num_complex::Complex64;

    #[test]
    fn resources() {
        assert_eq!(required_resources(&ProblemSpec::bell()).unwrap(), (2, 2));
        assert_eq!(required_resources(&ProblemSpec::shor(7, 15)).unwrap(), (12, 8));
        assert_eq!(required_resources(&ProblemSpec::image(4, 4, vec![1.0; 16])).unwrap(), (4, 4));
        assert_eq!(required_resources(&ProblemSpec::ghz(5)).unwrap(), (5, 5));
        assert_eq!(required_resources(&ProblemSpec::qft(3)).unwrap(), (3, 0));
        let xor = ProblemSpec::truth_table(2, 1, vec!["0".into(), "1".into(), "1".into(), "0".into()]);
        assert_eq!(required_resources(&xor).unwrap(), (3, 1));
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            ProblemSpec::shor(5, 15),
            ProblemSpec::shor(1, 15),
            ProblemSpec::shor(7, 21),
            ProblemSpec::image(2, 2, vec![0.0; 4]),
            ProblemSpec::image(2, 2, vec![1.0; 3]),
            ProblemSpec::image(1, 1, vec![-1.0]),
            ProblemSpec::truth_table(2, 1, vec!["0".into(); 3]),
            ProblemSpec::truth_table(1, 1, vec!["0".into(), "2".into()]),
            ProblemSpec::ghz(0),
        ] {
            assert!(build(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn every_build_verifies_with_declared_resources() {
        for spec in [
            ProblemSpec::bell(),
            ProblemSpec::ghz(4),
            ProblemSpec::qft(4),
            ProblemSpec::shor(7, 15),
            ProblemSpec::shor(2, 5),
            ProblemSpec::truth_table(2, 2, vec!["00".into(), "01".into(), "11".into(), "10".into()]),
            ProblemSpec::image(3, 1, vec![1.0, 2.0, 3.0]),
        ] {
            let r = build(&spec).unwrap();
            assert!(verify(&r.circuit).ok);
            let res = required_resources(&spec).unwrap();
            assert_eq!((r.circuit.num_qubits, r.circuit.num_clbits), res);
            let mut used: Vec<usize> = r.qubit_roles.values().flatten().copied().collect();
            let total = used.len();
            used.sort();
            used.dedup();
            assert_eq!(used.len(), total, "roles overlap");
            for g in &r.circuit.gates {
                assert!(g.qubits.iter().all(|q| used.contains(q)));
            }
        }
    }

    #[test]
    fn qft_matches_dft_matrix() {
        for n in 1..=4 {
            let r = build(&ProblemSpec::qft(n)).unwrap();
            let u = unitary_of(&r.circuit).unwrap();
            let dim = 1usize << n;
            let mut dft = Matrix::zeros(dim);
            for y in 0..dim {
                for x in 0..dim {
                    let phase = 2.0 * std::f64::consts::PI * (x * y) as f64 / dim as f64;
                    dft.set(y, x, Complex64::from_polar(1.0 / (dim as f64).sqrt(), phase));
                }
            }
            assert!(u.max_abs_diff(&dft) < 1e-10, "n={n}");
            let mut inv = Circuit::new("iqft", n, 0);
            append_qft(&mut inv, &(0..n).collect::<Vec<_>>(), true);
            let prod = unitary_of(&inv).unwrap().mul(&u);
            assert!(prod.max_abs_diff(&Matrix::identity(dim)) < 1e-10);
        }
    }

    #[test]
    fn xor_oracle_is_the_truth_table_permutation() {
        let spec = ProblemSpec::truth_table(2, 1, vec!["0".into(), "1".into(), "1".into(), "0".into()]);
        let c = build(&spec).unwrap().circuit.without_directives();
        let u = unitary_of(&c).unwrap();
        for basis in 0..8usize {
            let (a, b, out) = (basis & 1, basis >> 1 & 1, basis >> 2 & 1);
            let expected = a | b << 1 | (out ^ (a ^ b)) << 2;
            for row in 0..8 {
                let want = if row == expected { 1.0 } else { 0.0 };
                assert!((u.get(row, basis) - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn truth_tables_brute_force() {
        // every 2-input, 2-output table
        for code in 0u32..256 {
            let table: Vec<String> = (0..4).map(|i| format!("{:02b}", code >> (2 * i) & 3)).collect();
            let spec = ProblemSpec::truth_table(2, 2, table.clone());
            let c = build(&spec).unwrap().circuit.without_directives();
            let u = unitary_of(&c).unwrap();
            for basis in 0..16usize {
                let input = basis & 3;
                let out = basis >> 2;
                let f = usize::from_str_radix(&table[input], 2).unwrap();
                let expected = input | (out ^ f) << 2;
                assert!((u.get(expected, basis).re - 1.0).abs() < 1e-12, "table {table:?}");
            }
        }
    }

    #[test]
    fn x_pairs_cancel() {
        let mut c = Circuit::new("x", 2, 0);
        c.x(0).x(0).x(1).cx(0, 1).x(1).x(1).x(0);
        cancel_adjacent_x(&mut c);
        let kinds: Vec<String> = c.gates.iter().map(|g| g.label()).collect();
        assert_eq!(kinds, vec!["x[1]", "cx[0,1]", "x[0]"]);
    }

    #[test]
    fn manual_map_relabels() {
        let mut spec = ProblemSpec::bell();
        spec.auto_qubits = false;
        spec.manual_qubit_map = Some(vec![1, 0]);
        let r = build(&spec).unwrap();
        assert_eq!(r.circuit.gates[1].qubits, vec![1, 0]);
        assert_eq!(r.qubit_roles["data"], vec![1, 0]);
        spec.manual_qubit_map = Some(vec![0, 0]);
        assert!(build(&spec).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = ProblemSpec::shor(7, 15);
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "shor", "base": 7, "modulus": 15, "auto_qubits": true}));
        let back: ProblemSpec = serde_json::from_value(serde_json::json!({"kind": "bell"})).unwrap();
        assert_eq!(back, ProblemSpec::bell());
    }
}
