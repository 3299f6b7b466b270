use num_complex::Complex64;

use crate::circuit::{gate_matrix, GateKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense state vector; qubit 0 is the least-significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct State {
    pub amps: Vec<Complex64>,
}

impl State {
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        State { amps }
    }

    /// Applies a unitary gate on (already remapped) `qubits`. Measures and
    /// barriers are no-ops.
    pub fn apply(&mut self, kind: GateKind, qubits: &[usize], params: &[f64]) {
        match kind {
            GateKind::Measure | GateKind::Barrier => {}
            GateKind::X => self.controlled_x(0, qubits[0]),
            GateKind::Cx | GateKind::Ccx | GateKind::Mcx => {
                let (target, controls) = qubits.split_last().expect("controlled gate without operands");
                let mask = controls.iter().fold(0usize, |m, &c| m | 1 << c);
                self.controlled_x(mask, *target);
            }
            GateKind::Swap => self.swap(qubits[0], qubits[1]),
            GateKind::Cz => self.controlled_phase(qubits[0], qubits[1], Complex64::new(-1.0, 0.0)),
            GateKind::Cu1 => self.controlled_phase(qubits[0], qubits[1], Complex64::from_polar(1.0, params[0])),
            GateKind::Z | GateKind::S | GateKind::Sdg | GateKind::T | GateKind::Tdg | GateKind::Rz => {
                let m = gate_matrix(kind, params, 1).expect("diagonal gate matrix");
                self.diagonal(qubits[0], m.get(0, 0), m.get(1, 1));
            }
            GateKind::H | GateKind::Y | GateKind::Sx | GateKind::Rx | GateKind::Ry => {
                let m = gate_matrix(kind, params, 1).expect("single-qubit gate matrix");
                self.single([[m.get(0, 0), m.get(0, 1)], [m.get(1, 0), m.get(1, 1)]], qubits[0]);
            }
        }
    }

    /// Pauli `code` on `q`: 1 = X, 2 = Y, 3 = Z.
    pub fn pauli(&mut self, q: usize, code: u8) {
        let i = Complex64::i();
        match code {
            1 => self.controlled_x(0, q),
            2 => self.single([[ZERO, -i], [i, ZERO]], q),
            3 => self.diagonal(q, Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)),
            _ => {}
        }
    }

    fn single(&mut self, m: [[Complex64; 2]; 2], q: usize) {
        let stride = 1usize << q;
        for base in (0..self.amps.len()).step_by(stride << 1) {
            for i in base..base + stride {
                let (a, b) = (self.amps[i], self.amps[i + stride]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i + stride] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn diagonal(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let bit = 1usize << q;
        let one = Complex64::new(1.0, 0.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            let d = if i & bit == 0 { d0 } else { d1 };
            if d != one {
                *a *= d;
            }
        }
    }

    fn controlled_x(&mut self, controls: usize, target: usize) {
        let bit = 1usize << target;
        for i in 0..self.amps.len() {
            if i & bit == 0 && i & controls == controls {
                self.amps.swap(i, i | bit);
            }
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ba != 0 && i & bb == 0 {
                self.amps.swap(i, i ^ ba ^ bb);
            }
        }
    }

    fn controlled_phase(&mut self, a: usize, b: usize, phase: Complex64) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp *= phase;
            }
        }
    }

    #[cfg(test)]
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}
