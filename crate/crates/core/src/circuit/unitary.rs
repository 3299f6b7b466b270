use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::{Circuit, CircuitError, GateKind};

pub const MAX_UNITARY_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are not square.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            data.extend(row);
        }
        Matrix { dim, data }
    }

    /// Permutation matrix sending basis state `x` to `perm[x]`.
    pub fn from_permutation(perm: &[usize]) -> Self {
        let mut m = Matrix::zeros(perm.len());
        for (x, &y) in perm.iter().enumerate() {
            m.set(y, x, ONE);
        }
        m
    }

    /// Matrix relabelling qubits: bit `v` of the input index moves to bit
    /// `map[v]` of the output index.
    pub fn qubit_permutation(map: &[usize]) -> Self {
        let n = map.len();
        let perm: Vec<usize> = (0..1usize << n)
            .map(|x| {
                map.iter()
                    .enumerate()
                    .fold(0, |acc, (v, &p)| acc | (((x >> v) & 1) << p))
            })
            .collect();
        Matrix::from_permutation(&perm)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint().mul(self).max_abs_diff(&Matrix::identity(self.dim)) <= tol
    }

    /// Max-norm distance after removing the global phase, aligned on the
    /// largest-magnitude entry of `self`.
    pub fn phase_insensitive_diff(&self, other: &Matrix) -> f64 {
        let Some((idx, _)) = self
            .data
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        else {
            return 0.0;
        };
        let (a, b) = (self.data[idx], other.data[idx]);
        if b.norm() == 0.0 {
            return f64::INFINITY;
        }
        let phase = (b / a) / (b / a).norm();
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x * phase - y).norm())
            .fold(0.0, f64::max)
    }
}

/// Local matrix of a unitary gate. Operand `i` is bit `i` of the local index,
/// so for `cx` operand 0 is the control and operand 1 the target.
/// Returns `None` for measure and barrier.
pub fn gate_matrix(kind: GateKind, params: &[f64], arity: usize) -> Option<Matrix> {
    let c = Complex64::new;
    let i = Complex64::i();
    let theta = params.first().copied().unwrap_or(0.0);
    let h = FRAC_1_SQRT_2;
    let m = match kind {
        GateKind::H => Matrix::from_rows(vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]]),
        GateKind::X => Matrix::from_permutation(&[1, 0]),
        GateKind::Y => Matrix::from_rows(vec![vec![ZERO, -i], vec![i, ZERO]]),
        GateKind::Z => diag(&[ONE, c(-1.0, 0.0)]),
        GateKind::S => diag(&[ONE, i]),
        GateKind::Sdg => diag(&[ONE, -i]),
        GateKind::T => diag(&[ONE, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
        GateKind::Tdg => diag(&[ONE, Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)]),
        GateKind::Sx => Matrix::from_rows(vec![
            vec![c(0.5, 0.5), c(0.5, -0.5)],
            vec![c(0.5, -0.5), c(0.5, 0.5)],
        ]),
        GateKind::Rx => {
            let (s, co) = (theta / 2.0).sin_cos();
            Matrix::from_rows(vec![vec![c(co, 0.0), c(0.0, -s)], vec![c(0.0, -s), c(co, 0.0)]])
        }
        GateKind::Ry => {
            let (s, co) = (theta / 2.0).sin_cos();
            Matrix::from_rows(vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]])
        }
        GateKind::Rz => diag(&[
            Complex64::from_polar(1.0, -theta / 2.0),
            Complex64::from_polar(1.0, theta / 2.0),
        ]),
        GateKind::Cx => Matrix::from_permutation(&[0, 3, 2, 1]),
        GateKind::Cz => diag(&[ONE, ONE, ONE, c(-1.0, 0.0)]),
        GateKind::Cu1 => diag(&[ONE, ONE, ONE, Complex64::from_polar(1.0, theta)]),
        GateKind::Swap => Matrix::from_permutation(&[0, 2, 1, 3]),
        GateKind::Ccx | GateKind::Mcx => {
            let k = if kind == GateKind::Ccx { 3 } else { arity };
            if k < 2 {
                return None;
            }
            let dim = 1usize << k;
            let mut perm: Vec<usize> = (0..dim).collect();
            let controls = (1usize << (k - 1)) - 1;
            perm.swap(controls, controls | (1 << (k - 1)));
            Matrix::from_permutation(&perm)
        }
        GateKind::Measure | GateKind::Barrier => return None,
    };
    Some(m)
}

fn diag(entries: &[Complex64]) -> Matrix {
    let mut m = Matrix::zeros(entries.len());
    for (k, &e) in entries.iter().enumerate() {
        m.set(k, k, e);
    }
    m
}

/// Dense unitary of a circuit (measures and barriers skipped). Each gate is
/// embedded into the full space and left-multiplied onto the accumulated
/// matrix.
pub fn unitary_of(circuit: &Circuit) -> Result<Matrix, CircuitError> {
    let n = circuit.num_qubits;
    if n > MAX_UNITARY_QUBITS {
        return Err(CircuitError::TooManyQubits {
            qubits: n,
            max: MAX_UNITARY_QUBITS,
        });
    }
    let dim = 1usize << n;
    let mut acc = Matrix::identity(dim);
    for g in &circuit.gates {
        let Some(local) = gate_matrix(g.kind, &g.params, g.qubits.len()) else {
            continue;
        };
        acc = embed_and_apply(&local, &g.qubits, &acc);
    }
    Ok(acc)
}

/// Computes `G_full · acc` where `G_full` is `local` acting on `qubits`.
fn embed_and_apply(local: &Matrix, qubits: &[usize], acc: &Matrix) -> Matrix {
    let dim = acc.dim;
    let k = qubits.len();
    let ldim = 1usize << k;
    let mask: usize = qubits.iter().fold(0, |m, &q| m | (1 << q));
    let scatter = |l: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .fold(0, |acc, (b, &q)| acc | (((l >> b) & 1) << q))
    };
    let gather = |x: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .fold(0, |acc, (b, &q)| acc | (((x >> q) & 1) << b))
    };
    let mut out = Matrix::zeros(dim);
    for row in 0..dim {
        let li = gather(row);
        let rest = row & !mask;
        for lj in 0..ldim {
            let coeff = local.get(li, lj);
            if coeff == ZERO {
                continue;
            }
            let src = rest | scatter(lj);
            for col in 0..dim {
                out.data[row * dim + col] += coeff * acc.data[src * dim + col];
            }
        }
    }
    out
}
