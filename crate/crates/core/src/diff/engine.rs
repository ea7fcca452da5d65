//! Jet-valued statevector evaluation of the model program and its adjoint.
//!
//! Every amplitude is a complex Taylor jet in `(phi, lambda, t)`. Rotor
//! angles are plain numbers, so a rotor acts on each Taylor coefficient
//! independently; encoding angles are jets, so encoding gates multiply jets.
//! The backward pass walks the stored states in reverse and accumulates the
//! gradient of a scalar loss with respect to every trainable.

use num_complex::Complex64;

use super::jet::{JetSpace, TrigJet};
use crate::qnn::{preprocess, CollocationPoint, ModelConfig, ModelParams, Op, ParamLayout, Program, SphereMap, N_FEATURES};
use crate::qsim::{bit_mask, RotationAxis};

type Mat2 = [[Complex64; 2]; 2];

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `d/d angle exp(-i angle P / 2) = exp(-i (angle + pi) P / 2) / 2`.
fn rotation_derivative(axis: RotationAxis, angle: f64) -> Mat2 {
    let mut m = axis.matrix(angle + std::f64::consts::PI);
    for row in &mut m {
        for v in row {
            *v *= 0.5;
        }
    }
    m
}

#[derive(Clone, Debug)]
struct Rotor {
    u: Mat2,
    u_dag: Mat2,
    /// Derivatives of `u` with respect to its three angles.
    du: [Mat2; 3],
}

impl Rotor {
    fn new(a: f64, b: f64, c: f64) -> Self {
        use RotationAxis::{Y, Z};
        let (za, yb, zc) = (Z.matrix(a), Y.matrix(b), Z.matrix(c));
        let u = matmul(&zc, &matmul(&yb, &za));
        let du = [
            matmul(&zc, &matmul(&yb, &rotation_derivative(Z, a))),
            matmul(&zc, &matmul(&rotation_derivative(Y, b), &za)),
            matmul(&rotation_derivative(Z, c), &matmul(&yb, &za)),
        ];
        Self { u, u_dag: dagger(&u), du }
    }
}

/// A model with its parameter-dependent gate matrices precomputed.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    program: Program,
    rotors: Vec<Rotor>,
    gamma: Vec<f64>,
    input_affine: [[f64; 2]; N_FEATURES],
    output_affine: [f64; 2],
    sphere_map: SphereMap,
    layout: ParamLayout,
}

/// Intermediates of one forward evaluation.
pub(crate) struct Tape<'s> {
    space: &'s JetSpace,
    dim: usize,
    /// State before op `k` lives at `states[k * stride..(k + 1) * stride]`;
    /// the final state is the last block.
    states: Vec<Complex64>,
    raw: [Vec<f64>; N_FEATURES],
    scaled: [Vec<f64>; N_FEATURES],
    /// One entry per encoding op, in program order.
    trig: Vec<TrigJet>,
    /// `<sum Z>` jet.
    pub expectation: Vec<f64>,
    /// Output jet after the affine map.
    pub psi: Vec<f64>,
}

impl Prepared {
    pub fn new(config: &ModelConfig, params: &ModelParams) -> Self {
        let program = config.program();
        let rotors = params
            .theta
            .chunks_exact(3)
            .map(|t| Rotor::new(t[0], t[1], t[2]))
            .collect();
        Self {
            program,
            rotors,
            gamma: params.gamma.clone(),
            input_affine: params.input_affine,
            output_affine: params.output_affine,
            sphere_map: config.sphere_map,
            layout: ParamLayout::new(config),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout.len
    }

    /// Raw feature jets `(t, x, y, z)` around `point`.
    fn feature_jets(&self, space: &JetSpace, point: &CollocationPoint) -> [Vec<f64>; N_FEATURES] {
        if space.len() == 1 {
            return preprocess(point, self.sphere_map).map(|f| vec![f]);
        }
        let phi = TrigJet::new(space, &space.variable(0, point.phi));
        let lam = TrigJet::new(space, &space.variable(1, point.lambda));
        let prod = |a: &[f64], b: &[f64]| space.mul(a, b);
        let (x, y, z) = match self.sphere_map {
            SphereMap::AsPrinted => (prod(&phi.sin, &lam.cos), prod(&phi.sin, &lam.sin), phi.cos.clone()),
            SphereMap::Colatitude => (prod(&phi.cos, &lam.cos), prod(&phi.cos, &lam.sin), phi.sin.clone()),
        };
        [space.variable(2, point.t), x, y, z]
    }

    pub fn forward<'s>(&self, space: &'s JetSpace, point: &CollocationPoint) -> Tape<'s> {
        let nc = space.len();
        let n = self.program.n_qubits;
        let dim = 1usize << n;
        let stride = dim * nc;
        let n_ops = self.program.ops.len();

        let raw = self.feature_jets(space, point);
        let scaled: [Vec<f64>; N_FEATURES] = std::array::from_fn(|f| {
            let [a, b] = self.input_affine[f];
            let mut v: Vec<f64> = raw[f].iter().map(|r| a * r).collect();
            v[0] += b;
            v
        });

        let mut states = vec![Complex64::new(0.0, 0.0); (n_ops + 1) * stride];
        states[0] = Complex64::new(1.0, 0.0);
        let mut trig = Vec::with_capacity(N_FEATURES * n);

        for (k, op) in self.program.ops.iter().enumerate() {
            let (before, after) = states.split_at_mut((k + 1) * stride);
            let src = &before[k * stride..];
            let dst = &mut after[..stride];
            match *op {
                Op::Rotor { qubit, theta } => {
                    dst.copy_from_slice(src);
                    apply_const(dst, nc, bit_mask(n, qubit), &self.rotors[theta / 3].u);
                }
                Op::Cnot { control, target } => {
                    dst.copy_from_slice(src);
                    apply_cnot(dst, nc, bit_mask(n, control), bit_mask(n, target));
                }
                Op::Encode { qubit, feature, gamma } => {
                    let g = 0.5 * self.gamma[gamma];
                    let half: Vec<f64> = scaled[feature].iter().map(|s| g * s).collect();
                    let tj = TrigJet::new(space, &half);
                    dst.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    apply_jet_ry(space, src, dst, bit_mask(n, qubit), &tj.cos, &tj.sin);
                    trig.push(tj);
                }
            }
        }

        let final_state = &states[n_ops * stride..];
        let mut expectation = space.zeros();
        let mut sq = space.zeros();
        for i in 0..dim {
            let weight = (n as i64 - 2 * i.count_ones() as i64) as f64;
            if weight == 0.0 {
                continue;
            }
            let amp = &final_state[i * nc..(i + 1) * nc];
            sq.iter_mut().for_each(|v| *v = 0.0);
            for &(p, q, r) in space.products() {
                let (a, b) = (amp[p as usize], amp[q as usize]);
                sq[r as usize] += a.re * b.re + a.im * b.im;
            }
            for (e, s) in expectation.iter_mut().zip(&sq) {
                *e += weight * s;
            }
        }
        let [scale, shift] = self.output_affine;
        let mut psi: Vec<f64> = expectation.iter().map(|e| scale * e).collect();
        psi[0] += shift;

        Tape {
            space,
            dim,
            states,
            raw,
            scaled,
            trig,
            expectation,
            psi,
        }
    }

    /// Accumulates `d loss / d params` into `grad`, given `psi_bar`, the
    /// cotangent of the output jet coefficients.
    pub fn backward(&self, tape: &Tape<'_>, psi_bar: &[f64], grad: &mut [f64]) {
        let space = tape.space;
        let nc = space.len();
        let n = self.program.n_qubits;
        let dim = tape.dim;
        let stride = dim * nc;
        let n_ops = self.program.ops.len();
        let lay = &self.layout;

        let [scale, _] = self.output_affine;
        grad[lay.output_affine] += dot(psi_bar, &tape.expectation);
        grad[lay.output_affine + 1] += psi_bar[0];
        let e_bar: Vec<f64> = psi_bar.iter().map(|p| scale * p).collect();

        // d <sum Z> / d amplitude.
        let final_state = &tape.states[n_ops * stride..];
        let mut bar = vec![Complex64::new(0.0, 0.0); stride];
        for i in 0..dim {
            let weight = (n as i64 - 2 * i.count_ones() as i64) as f64;
            if weight == 0.0 {
                continue;
            }
            let amp = &final_state[i * nc..(i + 1) * nc];
            let out = &mut bar[i * nc..(i + 1) * nc];
            for &(p, q, r) in space.products() {
                out[q as usize] += 2.0 * weight * e_bar[r as usize] * amp[p as usize];
            }
        }

        let mut scaled_bar: [Vec<f64>; N_FEATURES] = std::array::from_fn(|_| space.zeros());
        let mut next = vec![Complex64::new(0.0, 0.0); stride];
        let mut enc = tape.trig.len();

        for k in (0..n_ops).rev() {
            let src = &tape.states[k * stride..(k + 1) * stride];
            match self.program.ops[k] {
                Op::Rotor { qubit, theta } => {
                    let rotor = &self.rotors[theta / 3];
                    let mask = bit_mask(n, qubit);
                    // m[a][b] = sum conj(bar_out[a]) * in[b] over pairs and coefficients.
                    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
                    for i in (0..dim).filter(|i| i & mask == 0) {
                        let j = i | mask;
                        for c in 0..nc {
                            let (i0, i1) = (src[i * nc + c], src[j * nc + c]);
                            let (b0, b1) = (bar[i * nc + c].conj(), bar[j * nc + c].conj());
                            m[0][0] += b0 * i0;
                            m[0][1] += b0 * i1;
                            m[1][0] += b1 * i0;
                            m[1][1] += b1 * i1;
                        }
                    }
                    for (a, du) in rotor.du.iter().enumerate() {
                        let mut g = 0.0;
                        for r in 0..2 {
                            for s in 0..2 {
                                g += (du[r][s] * m[r][s]).re;
                            }
                        }
                        grad[theta + a] += g;
                    }
                    apply_const(&mut bar, nc, mask, &rotor.u_dag);
                }
                Op::Cnot { control, target } => {
                    apply_cnot(&mut bar, nc, bit_mask(n, control), bit_mask(n, target));
                }
                Op::Encode { qubit, feature, gamma } => {
                    enc -= 1;
                    let tj = &tape.trig[enc];
                    let mask = bit_mask(n, qubit);
                    next.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    let mut cos_bar = space.zeros();
                    let mut sin_bar = space.zeros();
                    for i in (0..dim).filter(|i| i & mask == 0) {
                        let j = i | mask;
                        let (u, v) = (&src[i * nc..(i + 1) * nc], &src[j * nc..(j + 1) * nc]);
                        let (ub, vb) = (&bar[i * nc..(i + 1) * nc], &bar[j * nc..(j + 1) * nc]);
                        for &(p, q, r) in space.products() {
                            let (p, q, r) = (p as usize, q as usize, r as usize);
                            let (cp, sp) = (tj.cos[p], tj.sin[p]);
                            next[i * nc + q] += cp * ub[r] + sp * vb[r];
                            next[j * nc + q] += -sp * ub[r] + cp * vb[r];
                            let (ubr, vbr) = (ub[r], vb[r]);
                            cos_bar[p] += re_dot(ubr, u[q]) + re_dot(vbr, v[q]);
                            sin_bar[p] += -re_dot(ubr, v[q]) + re_dot(vbr, u[q]);
                        }
                    }
                    std::mem::swap(&mut bar, &mut next);
                    // angle = gamma * scaled; the gate uses half of it.
                    let mut half_bar = space.zeros();
                    tj.adjoint_acc(space, &cos_bar, &sin_bar, &mut half_bar);
                    let g = self.gamma[gamma];
                    grad[lay.gamma + gamma] += 0.5 * dot(&half_bar, &tape.scaled[feature]);
                    for (sb, hb) in scaled_bar[feature].iter_mut().zip(&half_bar) {
                        *sb += 0.5 * g * hb;
                    }
                }
            }
        }

        for f in 0..N_FEATURES {
            grad[lay.input_affine + 2 * f] += dot(&scaled_bar[f], &tape.raw[f]);
            grad[lay.input_affine + 2 * f + 1] += scaled_bar[f][0];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Re(conj(a) * b)`.
#[inline]
fn re_dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

fn apply_const(amps: &mut [Complex64], nc: usize, mask: usize, m: &Mat2) {
    let dim = amps.len() / nc;
    for i in (0..dim).filter(|i| i & mask == 0) {
        let j = i | mask;
        for c in 0..nc {
            let (a0, a1) = (amps[i * nc + c], amps[j * nc + c]);
            amps[i * nc + c] = m[0][0] * a0 + m[0][1] * a1;
            amps[j * nc + c] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

fn apply_cnot(amps: &mut [Complex64], nc: usize, cmask: usize, tmask: usize) {
    let dim = amps.len() / nc;
    for i in 0..dim {
        if i & cmask != 0 && i & tmask == 0 {
            let j = i | tmask;
            for c in 0..nc {
                amps.swap(i * nc + c, j * nc + c);
            }
        }
    }
}

/// `dst = RY(angle) src` with `cos`, `sin` the jets of half the angle.
/// `dst` must be zeroed.
fn apply_jet_ry(space: &JetSpace, src: &[Complex64], dst: &mut [Complex64], mask: usize, cos: &[f64], sin: &[f64]) {
    let nc = space.len();
    let dim = src.len() / nc;
    for i in (0..dim).filter(|i| i & mask == 0) {
        let j = i | mask;
        for &(p, q, r) in space.products() {
            let (p, q, r) = (p as usize, q as usize, r as usize);
            let (u, v) = (src[i * nc + q], src[j * nc + q]);
            dst[i * nc + r] += cos[p] * u - sin[p] * v;
            dst[j * nc + r] += sin[p] * u + cos[p] * v;
        }
    }
}
