//! Truncated multivariate Taylor polynomials in the raw coordinates
//! `(phi, lambda, t)`.
//!
//! A [`JetSpace`] is a downward-closed set of monomials. Multiplication keeps
//! only products that land back inside the set; because the complement of a
//! downward-closed set is a monomial ideal this is exact ring arithmetic, so
//! every coefficient that survives is the true Taylor coefficient.
//!
//! Jets are stored as plain coefficient slices laid out in the order of
//! [`JetSpace::monomials`]. Coefficient `k` of monomial `(a, b, c)` relates to
//! the partial derivative by `d^(a+b+c) f = a! b! c! * coeff[k]`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Derivative orders in `(phi, lambda, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub phi: u8,
    pub lambda: u8,
    pub t: u8,
}

/// Highest total derivative order the engine supports.
pub const MAX_ORDER: u8 = 3;

impl MultiIndex {
    pub const VALUE: MultiIndex = MultiIndex::new(0, 0, 0);

    pub const fn new(phi: u8, lambda: u8, t: u8) -> Self {
        Self { phi, lambda, t }
    }

    pub fn order(self) -> u8 {
        self.phi + self.lambda + self.t
    }

    fn as_array(self) -> [u8; 3] {
        [self.phi, self.lambda, self.t]
    }

    /// `a! b! c!`, the factor between a Taylor coefficient and the partial.
    pub fn factorial_weight(self) -> f64 {
        self.as_array().iter().map(|&k| factorial(k)).product()
    }

    fn le(self, other: MultiIndex) -> bool {
        self.phi <= other.phi && self.lambda <= other.lambda && self.t <= other.t
    }
}

fn factorial(k: u8) -> f64 {
    (1..=k as u32).map(f64::from).product()
}

/// The fourteen partials entering the streamline form of the vorticity
/// equation, in the order the residual consumes them.
pub const BVE_PARTIALS: [MultiIndex; 14] = [
    MultiIndex::new(0, 1, 0), // psi_lambda
    MultiIndex::new(1, 0, 0), // psi_phi
    MultiIndex::new(2, 0, 0),
    MultiIndex::new(0, 2, 0),
    MultiIndex::new(1, 1, 0),
    MultiIndex::new(1, 0, 1),
    MultiIndex::new(3, 0, 0),
    MultiIndex::new(0, 3, 0),
    MultiIndex::new(2, 0, 1),
    MultiIndex::new(0, 2, 1),
    MultiIndex::new(1, 2, 0),
    MultiIndex::new(2, 1, 0),
    MultiIndex::new(0, 0, 1),
    MultiIndex::new(0, 1, 1),
];

/// Partials needed for the vorticity `zeta = laplacian(psi)`.
pub const VORTICITY_PARTIALS: [MultiIndex; 3] = [
    MultiIndex::new(1, 0, 0),
    MultiIndex::new(2, 0, 0),
    MultiIndex::new(0, 2, 0),
];

const ABSENT: u8 = u8::MAX;

#[derive(Debug)]
pub struct JetSpace {
    monomials: Vec<MultiIndex>,
    lookup: [[[u8; 4]; 4]; 4],
    /// `(i, j, k)` with `e_i * e_j = e_k`.
    products: Vec<(u8, u8, u8)>,
    max_degree: u8,
}

impl JetSpace {
    /// Smallest downward-closed space containing `requested` and the value.
    /// Returns `None` if any index exceeds [`MAX_ORDER`].
    pub fn closure(requested: &[MultiIndex]) -> Option<Self> {
        if requested.iter().any(|m| m.order() > MAX_ORDER) {
            return None;
        }
        let mut monomials = Vec::new();
        for degree in 0..=MAX_ORDER {
            for phi in (0..=degree).rev() {
                for lambda in (0..=degree - phi).rev() {
                    let m = MultiIndex::new(phi, lambda, degree - phi - lambda);
                    if m == MultiIndex::VALUE || requested.iter().any(|r| m.le(*r)) {
                        monomials.push(m);
                    }
                }
            }
        }
        let mut lookup = [[[ABSENT; 4]; 4]; 4];
        for (k, m) in monomials.iter().enumerate() {
            lookup[m.phi as usize][m.lambda as usize][m.t as usize] = k as u8;
        }
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                let s = [a.phi + b.phi, a.lambda + b.lambda, a.t + b.t];
                if s.iter().all(|&d| d <= MAX_ORDER) {
                    let k = lookup[s[0] as usize][s[1] as usize][s[2] as usize];
                    if k != ABSENT {
                        products.push((i as u8, j as u8, k));
                    }
                }
            }
        }
        let max_degree = monomials.iter().map(|m| m.order()).max().unwrap_or(0);
        Some(Self {
            monomials,
            lookup,
            products,
            max_degree,
        })
    }

    /// Values only.
    pub fn value() -> &'static JetSpace {
        static S: OnceLock<JetSpace> = OnceLock::new();
        S.get_or_init(|| JetSpace::closure(&[]).unwrap())
    }

    /// Enough for the vorticity (second order in the surface coordinates).
    pub fn vorticity() -> &'static JetSpace {
        static S: OnceLock<JetSpace> = OnceLock::new();
        S.get_or_init(|| JetSpace::closure(&VORTICITY_PARTIALS).unwrap())
    }

    /// Enough for the vorticity-equation residual.
    pub fn residual() -> &'static JetSpace {
        static S: OnceLock<JetSpace> = OnceLock::new();
        S.get_or_init(|| JetSpace::closure(&BVE_PARTIALS).unwrap())
    }

    /// Every monomial up to total degree three.
    pub fn full() -> &'static JetSpace {
        static S: OnceLock<JetSpace> = OnceLock::new();
        S.get_or_init(|| {
            let top: Vec<MultiIndex> = (0..=MAX_ORDER)
                .flat_map(|a| (0..=MAX_ORDER - a).map(move |b| MultiIndex::new(a, b, MAX_ORDER - a - b)))
                .collect();
            JetSpace::closure(&top).unwrap()
        })
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index(&self, m: MultiIndex) -> Option<usize> {
        if m.order() > MAX_ORDER {
            return None;
        }
        match self.lookup[m.phi as usize][m.lambda as usize][m.t as usize] {
            ABSENT => None,
            k => Some(k as usize),
        }
    }

    pub fn contains(&self, m: MultiIndex) -> bool {
        self.index(m).is_some()
    }

    pub fn max_degree(&self) -> u8 {
        self.max_degree
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }

    pub fn constant(&self, c: f64) -> Vec<f64> {
        let mut v = self.zeros();
        v[0] = c;
        v
    }

    /// The jet of the coordinate `axis` (0 = phi, 1 = lambda, 2 = t) around `x0`.
    pub fn variable(&self, axis: usize, x0: f64) -> Vec<f64> {
        let mut v = self.constant(x0);
        let mut m = [0u8; 3];
        m[axis] = 1;
        if let Some(k) = self.index(MultiIndex::new(m[0], m[1], m[2])) {
            v[k] = 1.0;
        }
        v
    }

    /// `out += u * v`.
    #[inline]
    pub fn mul_acc(&self, out: &mut [f64], u: &[f64], v: &[f64]) {
        for &(i, j, k) in &self.products {
            out[k as usize] += u[i as usize] * v[j as usize];
        }
    }

    pub fn mul(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.zeros();
        self.mul_acc(&mut out, u, v);
        out
    }

    /// Transpose of `v -> u * v` applied to `out_bar`, accumulated into
    /// `v_bar`: `v_bar[j] += sum_i out_bar[i + j] * u[i]`.
    #[inline]
    pub fn mul_adjoint_acc(&self, v_bar: &mut [f64], out_bar: &[f64], u: &[f64]) {
        for &(i, j, k) in &self.products {
            v_bar[j as usize] += out_bar[k as usize] * u[i as usize];
        }
    }

    pub(crate) fn products(&self) -> &[(u8, u8, u8)] {
        &self.products
    }

    /// Coefficient of `m` scaled to the partial derivative.
    pub fn partial(&self, jet: &[f64], m: MultiIndex) -> Option<f64> {
        self.index(m).map(|k| jet[k] * m.factorial_weight())
    }
}

/// `cos` and `sin` of a jet, with the intermediates needed to pull
/// cotangents back onto the argument.
///
/// With `a = a0 + d`, `d` nilpotent, `cos a = cos a0 E(d) - sin a0 O(d)` and
/// `sin a = sin a0 E(d) + cos a0 O(d)` where `E`, `O` are the even and odd
/// parts of the truncated exponential series of `i d`.
#[derive(Clone, Debug)]
pub struct TrigJet {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    c0: f64,
    s0: f64,
    /// `powers[k]` is `d^(k+1)`.
    powers: Vec<Vec<f64>>,
    even: Vec<f64>,
    odd: Vec<f64>,
}

impl TrigJet {
    pub fn new(space: &JetSpace, arg: &[f64]) -> Self {
        let (s0, c0) = arg[0].sin_cos();
        let mut d = arg.to_vec();
        d[0] = 0.0;
        let mut even = space.constant(1.0);
        let mut odd = space.zeros();
        let mut powers: Vec<Vec<f64>> = Vec::with_capacity(space.max_degree() as usize);
        let mut inv_fact = 1.0;
        for k in 1..=space.max_degree() as usize {
            let p = if k == 1 {
                d.clone()
            } else {
                space.mul(&powers[k - 2], &d)
            };
            inv_fact /= k as f64;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let target = if k % 2 == 0 { &mut even } else { &mut odd };
            for (t, pi) in target.iter_mut().zip(&p) {
                *t += sign * inv_fact * pi;
            }
            powers.push(p);
        }
        let cos = even.iter().zip(&odd).map(|(e, o)| c0 * e - s0 * o).collect();
        let sin = even.iter().zip(&odd).map(|(e, o)| s0 * e + c0 * o).collect();
        Self {
            cos,
            sin,
            c0,
            s0,
            powers,
            even,
            odd,
        }
    }

    /// Accumulates into `arg_bar` the pullback of cotangents on `cos` and `sin`.
    pub fn adjoint_acc(&self, space: &JetSpace, cos_bar: &[f64], sin_bar: &[f64], arg_bar: &mut [f64]) {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let c0_bar = dot(cos_bar, &self.even) + dot(sin_bar, &self.odd);
        let s0_bar = -dot(cos_bar, &self.odd) + dot(sin_bar, &self.even);
        arg_bar[0] += -self.s0 * c0_bar + self.c0 * s0_bar;

        let n = space.len();
        let even_bar: Vec<f64> = (0..n).map(|i| self.c0 * cos_bar[i] + self.s0 * sin_bar[i]).collect();
        let odd_bar: Vec<f64> = (0..n).map(|i| -self.s0 * cos_bar[i] + self.c0 * sin_bar[i]).collect();

        let kmax = self.powers.len();
        let mut p_bar: Vec<Vec<f64>> = Vec::with_capacity(kmax);
        let mut inv_fact = 1.0;
        for k in 1..=kmax {
            inv_fact /= k as f64;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let src = if k % 2 == 0 { &even_bar } else { &odd_bar };
            p_bar.push(src.iter().map(|s| sign * inv_fact * s).collect());
        }
        let mut d_bar = space.zeros();
        // powers[k] = powers[k-1] * d
        for k in (1..kmax).rev() {
            let (lo, hi) = p_bar.split_at_mut(k);
            space.mul_adjoint_acc(&mut lo[k - 1], &hi[0], &self.powers[0]);
            space.mul_adjoint_acc(&mut d_bar, &hi[0], &self.powers[k - 1]);
        }
        if let Some(p1) = p_bar.first() {
            for (d, p) in d_bar.iter_mut().zip(p1) {
                *d += p;
            }
        }
        for (a, d) in arg_bar.iter_mut().zip(&d_bar).skip(1) {
            *a += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn space_sizes() {
        assert_eq!(JetSpace::value().len(), 1);
        assert_eq!(JetSpace::vorticity().len(), 5);
        assert_eq!(JetSpace::residual().len(), 15);
        assert_eq!(JetSpace::full().len(), 20);
        for m in BVE_PARTIALS {
            assert!(JetSpace::residual().contains(m));
        }
        assert!(!JetSpace::residual().contains(MultiIndex::new(1, 1, 1)));
        assert!(JetSpace::closure(&[MultiIndex::new(4, 0, 0)]).is_none());
    }

    #[test]
    fn products_are_exact_taylor() {
        // (1 + x + y)^2 truncated at degree 3 in one variable set.
        let s = JetSpace::full();
        let x = s.variable(0, 0.5);
        let y = s.variable(1, 2.0);
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let sq = s.mul(&sum, &sum);
        // f = (x + y)^2 at (0.5, 2): f = 6.25, f_x = 5, f_xx = 2, f_xy = 2.
        assert_abs_diff_eq!(sq[0], 6.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&sq, MultiIndex::new(1, 0, 0)).unwrap(), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&sq, MultiIndex::new(2, 0, 0)).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&sq, MultiIndex::new(1, 1, 0)).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&sq, MultiIndex::new(3, 0, 0)).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trig_derivatives() {
        let s = JetSpace::full();
        let x0 = 0.7;
        let t = TrigJet::new(s, &s.variable(0, x0));
        let d = |k: u8| MultiIndex::new(k, 0, 0);
        assert_abs_diff_eq!(s.partial(&t.sin, d(0)).unwrap(), x0.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&t.sin, d(1)).unwrap(), x0.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&t.sin, d(2)).unwrap(), -x0.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&t.sin, d(3)).unwrap(), -x0.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial(&t.cos, d(3)).unwrap(), x0.sin(), epsilon = 1e-15);
        // Pythagoras holds in the truncated ring.
        let one: Vec<f64> = s
            .mul(&t.cos, &t.cos)
            .iter()
            .zip(s.mul(&t.sin, &t.sin))
            .map(|(a, b)| a + b)
            .collect();
        assert_abs_diff_eq!(one[0], 1.0, epsilon = 1e-15);
        for c in &one[1..] {
            assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn trig_adjoint_matches_directional_fd() {
        // Check <bar, d trig(arg)[dir]> == <pullback(bar), dir> on a random-ish jet.
        let s = JetSpace::full();
        let n = s.len();
        let arg: Vec<f64> = (0..n).map(|i| 0.3 + 0.17 * (i as f64).sin()).collect();
        let dir: Vec<f64> = (0..n).map(|i| 0.11 * (1.3 * i as f64).cos()).collect();
        let cb: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).sin()).collect();
        let sb: Vec<f64> = (0..n).map(|i| (0.4 * i as f64 + 1.0).cos()).collect();
        let f = |a: &[f64]| {
            let t = TrigJet::new(s, a);
            t.cos.iter().zip(&cb).map(|(x, y)| x * y).sum::<f64>()
                + t.sin.iter().zip(&sb).map(|(x, y)| x * y).sum::<f64>()
        };
        let h = 1e-6;
        let plus: Vec<f64> = arg.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        let minus: Vec<f64> = arg.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        let mut bar = s.zeros();
        TrigJet::new(s, &arg).adjoint_acc(s, &cb, &sb, &mut bar);
        let ad: f64 = bar.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(fd, ad, epsilon = 1e-8);
    }
}
