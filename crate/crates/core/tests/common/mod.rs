//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use qbve::diff::{DerivativeJet, MultiIndex, BVE_PARTIALS};
use qbve::qnn::{CollocationPoint, ModelConfig, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `P_l^m(sin phi)` written as trig polynomials in `phi`:
/// `(k, a, b)` stands for `a sin(k phi) + b cos(k phi)`.
pub fn trig_legendre(m: u32, l: u32) -> Vec<(f64, f64, f64)> {
    match (m, l) {
        (1, 1) => vec![(1.0, 0.0, -1.0)],
        (1, 2) => vec![(2.0, -1.5, 0.0)],
        (2, 2) => vec![(0.0, 0.0, 1.5), (2.0, 0.0, 1.5)],
        (2, 3) => vec![(1.0, 3.75, 0.0), (3.0, 3.75, 0.0)],
        (0, 1) => vec![(1.0, 1.0, 0.0)],
        _ => panic!("no closed form for ({m}, {l})"),
    }
}

/// Phase speed `-2 Omega m / (l (l + 1))`, typed out per mode.
pub fn sigma(m: u32, l: u32, omega: f64) -> f64 {
    omega
        * match (m, l) {
            (1, 1) => -1.0,
            (1, 2) => -1.0 / 3.0,
            (2, 2) => -2.0 / 3.0,
            (2, 3) => -1.0 / 3.0,
            (0, _) => 0.0,
            _ => panic!(),
        }
}

/// `d^a/dphi^a d^b/dlambda^b d^c/dt^c` of
/// `P_l^m(sin phi) cos(m lambda - sigma t)`.
pub fn mode_partial(m: u32, l: u32, omega: f64, p: &CollocationPoint, d: MultiIndex) -> f64 {
    let s = sigma(m, l, omega);
    let mut phi_part = 0.0;
    for (k, a, b) in trig_legendre(m, l) {
        let shift = d.phi as f64 * FRAC_PI_2;
        let scale = k.powi(d.phi as i32);
        phi_part += scale * (a * (k * p.phi + shift).sin() + b * (k * p.phi + shift).cos());
    }
    let arg = m as f64 * p.lambda - s * p.t + (d.lambda + d.t) as f64 * FRAC_PI_2;
    let lt = (m as f64).powi(d.lambda as i32) * (-s).powi(d.t as i32) * arg.cos();
    phi_part * lt
}

/// The 14 residual partials of a sum of modes, in the residual order.
pub fn mode_partials(modes: &[(u32, u32)], omega: f64, p: &CollocationPoint) -> [f64; 14] {
    std::array::from_fn(|k| modes.iter().map(|&(m, l)| mode_partial(m, l, omega, p, BVE_PARTIALS[k])).sum())
}

pub fn mode_jet(modes: &[(u32, u32)], omega: f64, p: &CollocationPoint) -> DerivativeJet {
    let d = mode_partials(modes, omega, p);
    let partials: BTreeMap<MultiIndex, f64> = BVE_PARTIALS.iter().copied().zip(d).collect();
    DerivativeJet {
        point: *p,
        value: modes.iter().map(|&(m, l)| mode_partial(m, l, omega, p, MultiIndex::VALUE)).sum(),
        partials,
    }
}

/// A model with every trainable perturbed away from its default.
pub fn random_model(n: usize, l: usize, seed: u64) -> (ModelConfig, ModelParams) {
    let config = ModelConfig::new(n, l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(&config, &mut rng);
    for g in &mut params.gamma {
        *g = rng.gen_range(0.5..1.5);
    }
    for a in &mut params.input_affine {
        *a = [rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)];
    }
    params.output_affine = [rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0)];
    (config, params)
}

pub fn random_interior_point<R: Rng>(rng: &mut R, max_lat_deg: f64) -> CollocationPoint {
    let c = max_lat_deg.to_radians();
    CollocationPoint::new(
        rng.gen_range(-c..c),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..3.0),
    )
}

/// `|a - b| <= max(abs, rel * |b|)`.
pub fn close(a: f64, b: f64, abs: f64, rel: f64) -> bool {
    (a - b).abs() <= abs.max(rel * b.abs())
}
