//! Dense statevector simulation of single-qubit rotations and CNOT.
//!
//! Qubit 0 is the most significant bit of the basis index, so on two qubits
//! the amplitude order is `|00>, |01>, |10>, |11>` with the left label
//! belonging to qubit 0.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Upper bound on register size; 2^24 amplitudes is 256 MiB.
pub const MAX_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// The computational basis state `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes. The vector is not renormalised.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len.trailing_zeros() as usize > MAX_QUBITS {
            return Err(Error::Structure(format!(
                "amplitude vector length {len} is not 2^n with 1 <= n <= {MAX_QUBITS}"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            Gate::Cnot { control, target } => {
                let cmask = bit_mask(self.n_qubits, control);
                let tmask = bit_mask(self.n_qubits, target);
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            _ => {
                let m = gate.matrix().expect("rotation gate has a matrix");
                let mask = bit_mask(self.n_qubits, gate.target());
                apply_single(&mut self.amplitudes, mask, &m);
            }
        }
        Ok(())
    }

    /// Expectation of the total magnetisation `sum_m Z_m`.
    pub fn expect_total_z(&self) -> f64 {
        let n = self.n_qubits as i64;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * (n - 2 * i.count_ones() as i64) as f64)
            .sum()
    }
}

/// Bit selecting `qubit` in a basis index of an `n`-qubit register.
#[inline]
pub(crate) fn bit_mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Applies a 2x2 matrix to every amplitude pair differing in `mask`.
pub(crate) fn apply_single(amps: &mut [Complex64], mask: usize, m: &[[Complex64; 2]; 2]) {
    for i in 0..amps.len() {
        if i & mask == 0 {
            let j = i | mask;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RotationAxis {
    X,
    Y,
    Z,
}

impl RotationAxis {
    /// The matrix of `exp(-i angle P / 2)` for the Pauli `P` of this axis.
    pub fn matrix(self, angle: f64) -> [[Complex64; 2]; 2] {
        let (s, c) = (0.5 * angle).sin_cos();
        let z = Complex64::new(0.0, 0.0);
        match self {
            RotationAxis::X => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            RotationAxis::Y => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            RotationAxis::Z => [[Complex64::new(c, -s), z], [z, Complex64::new(c, s)]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rotation {
        axis: RotationAxis,
        target: usize,
        angle: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn rx(target: usize, angle: f64) -> Self {
        Gate::Rotation {
            axis: RotationAxis::X,
            target,
            angle,
        }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Gate::Rotation {
            axis: RotationAxis::Y,
            target,
            angle,
        }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Gate::Rotation {
            axis: RotationAxis::Z,
            target,
            angle,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::Rotation { target, .. } | Gate::Cnot { target, .. } => target,
        }
    }

    /// 2x2 unitary of a rotation gate; `None` for CNOT.
    pub fn matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        match *self {
            Gate::Rotation { axis, angle, .. } => Some(axis.matrix(angle)),
            Gate::Cnot { .. } => None,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        match *self {
            Gate::Rotation { target, angle, .. } => {
                if target >= n_qubits {
                    return Err(Error::Structure(format!(
                        "rotation target {target} out of range for {n_qubits} qubits"
                    )));
                }
                if !angle.is_finite() {
                    return Err(Error::Numerical(format!("rotation angle {angle}")));
                }
            }
            Gate::Cnot { control, target } => {
                if control >= n_qubits || target >= n_qubits {
                    return Err(Error::Structure(format!(
                        "CNOT({control}, {target}) out of range for {n_qubits} qubits"
                    )));
                }
                if control == target {
                    return Err(Error::Structure(format!(
                        "CNOT control and target are both {control}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Appends a gate, checking its indices against the register.
    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    /// Runs the circuit on `|0...0>`.
    pub fn run(&self) -> Result<QuantumState> {
        let mut state = QuantumState::zero(self.n_qubits)?;
        for gate in &self.gates {
            state.apply(gate)?;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_state() {
        assert_eq!(QuantumState::zero(1).unwrap().amplitudes(), &[c(1.0), c(0.0)]);
        assert_eq!(
            QuantumState::zero(2).unwrap().amplitudes(),
            &[c(1.0), c(0.0), c(0.0), c(0.0)]
        );
        assert!(matches!(QuantumState::zero(25), Err(Error::Config(_))));
        assert!(matches!(QuantumState::zero(0), Err(Error::Config(_))));
    }

    #[test]
    fn ry_pi_flips() {
        let mut s = QuantumState::zero(1).unwrap();
        s.apply(&Gate::ry(0, PI)).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        // |10>: qubit 0 set, which is index 2 under MSB ordering.
        let mut amps = vec![c(0.0); 4];
        amps[0b10] = c(1.0);
        let mut s = QuantumState::from_amplitudes(amps).unwrap();
        s.apply(&Gate::cnot(0, 1)).unwrap();
        assert_eq!(s.amplitudes()[0b11], c(1.0));
        assert_eq!(s.amplitudes()[0b10], c(0.0));
    }

    #[test]
    fn rz_is_phase_only_on_zero() {
        let mut s = QuantumState::zero(1).unwrap();
        s.apply(&Gate::rz(0, 1.234)).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_gates_rejected() {
        let mut s = QuantumState::zero(2).unwrap();
        assert!(matches!(s.apply(&Gate::ry(2, 0.1)), Err(Error::Structure(_))));
        assert!(matches!(s.apply(&Gate::cnot(1, 1)), Err(Error::Structure(_))));
        assert!(matches!(s.apply(&Gate::cnot(0, 5)), Err(Error::Structure(_))));
        let mut circ = Circuit::new(2);
        assert!(circ.push(Gate::rx(3, 0.0)).is_err());
    }

    #[test]
    fn circuits() {
        let s = Circuit::new(3).run().unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0)));

        let mut circ = Circuit::new(2);
        circ.push(Gate::ry(0, PI / 2.0)).unwrap();
        circ.push(Gate::ry(1, PI / 2.0)).unwrap();
        let s = circ.run().unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }
        // Direct sum over the four equal-weight amplitudes: 2 + 0 + 0 - 2.
        assert_abs_diff_eq!(s.expect_total_z(), 0.0, epsilon = 1e-15);

        let mut circ = Circuit::new(2);
        circ.push(Gate::ry(0, PI)).unwrap();
        circ.push(Gate::cnot(0, 1)).unwrap();
        let s = circ.run().unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0b11].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn total_z_on_basis_states() {
        assert_eq!(QuantumState::zero(2).unwrap().expect_total_z(), 2.0);
        let mut amps = vec![c(0.0); 4];
        amps[0b01] = c(1.0);
        assert_eq!(
            QuantumState::from_amplitudes(amps).unwrap().expect_total_z(),
            0.0
        );
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        let rot = (0..3usize, 0..n, -10.0..10.0f64).prop_map(|(k, q, a)| match k {
            0 => Gate::rx(q, a),
            1 => Gate::ry(q, a),
            _ => Gate::rz(q, a),
        });
        let cx = (0..n, 1..n).prop_map(move |(c, d)| Gate::cnot(c, (c + d) % n));
        prop_oneof![3 => rot, 1 => cx]
    }

    fn arb_circuit() -> impl Strategy<Value = Circuit> {
        (2..=6usize).prop_flat_map(|n| {
            proptest::collection::vec(arb_gate(n), 0..200).prop_map(move |gates| {
                let mut c = Circuit::new(n);
                for g in gates {
                    c.push(g).unwrap();
                }
                c
            })
        })
    }

    proptest! {
        #[test]
        fn unitarity_and_bounds(circ in arb_circuit()) {
            let s = circ.run().unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            let n = circ.n_qubits() as f64;
            let e = s.expect_total_z();
            prop_assert!(e >= -n - 1e-12 && e <= n + 1e-12);
        }

        #[test]
        fn involutions(circ in arb_circuit(), theta in -10.0..10.0f64) {
            let s = circ.run().unwrap();
            let n = circ.n_qubits();
            let mut t = s.clone();
            t.apply(&Gate::cnot(0, n - 1)).unwrap();
            t.apply(&Gate::cnot(0, n - 1)).unwrap();
            for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            t.apply(&Gate::ry(1, theta)).unwrap();
            t.apply(&Gate::ry(1, -theta)).unwrap();
            for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn single_ry_total_z_is_cos(theta in -2.0 * PI..2.0 * PI) {
            let mut circ = Circuit::new(1);
            circ.push(Gate::ry(0, theta)).unwrap();
            let e = circ.run().unwrap().expect_total_z();
            prop_assert!((e - theta.cos()).abs() < 1e-12);
        }
    }
}
