mod common;

use common::{mode_jet, mode_partial, mode_partials, random_interior_point};
use proptest::prelude::*;
use qbve::bve::{analytic_psi, residual, vorticity_from_jet, BveResidual, ModeSpec, PhysicsConstants};
use qbve::diff::MultiIndex;
use qbve::qnn::CollocationPoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(u32, u32); 4] = [(1, 1), (1, 2), (2, 2), (2, 3)];

#[test]
fn analytic_modes_solve_the_equation() {
    let unit = PhysicsConstants::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (m, l) in MODES {
        for _ in 0..100 {
            let p = random_interior_point(&mut rng, 80.0);
            let f = residual(&mode_jet(&[(m, l)], 1.0, &p), &unit).unwrap();
            assert!(f.abs() < 1e-9, "mode ({m}, {l}) at {p:?}: {f}");
        }
    }
}

#[test]
fn closed_forms_agree_with_analytic_psi() {
    let unit = PhysicsConstants::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (m, l) in MODES {
        for _ in 0..20 {
            let p = random_interior_point(&mut rng, 89.0);
            let a = analytic_psi(ModeSpec::new(m, l).unwrap(), &unit, &p).unwrap();
            assert!((a - mode_partial(m, l, 1.0, &p, MultiIndex::VALUE)).abs() < 1e-13);
        }
    }
}

#[test]
fn vorticity_eigenvalues() {
    let r = PhysicsConstants::new(1.0, 1.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (m, l) in MODES.into_iter().chain([(0, 1)]) {
        for _ in 0..50 {
            let p = random_interior_point(&mut rng, 85.0);
            let jet = mode_jet(&[(m, l)], 0.0, &p);
            let z = vorticity_from_jet(&jet, &r).unwrap();
            let want = -((l * (l + 1)) as f64) * jet.value / (1.7 * 1.7);
            assert!((z - want).abs() <= 1e-9 * want.abs().max(1e-3), "({m},{l}): {z} vs {want}");
        }
    }
}

/// `zeta_t + (2 Omega / r^2) psi_lambda + J(psi, zeta)` with every factor
/// from closed forms; `zeta` uses the Laplacian eigenvalue of each mode.
fn vorticity_form(modes: &[(u32, u32)], omega: f64, r: f64, p: &CollocationPoint) -> f64 {
    let d = |a, b, c| -> f64 { modes.iter().map(|&(m, l)| mode_partial(m, l, omega, p, MultiIndex::new(a, b, c))).sum() };
    let z = |a, b, c| -> f64 {
        modes
            .iter()
            .map(|&(m, l)| -((l * (l + 1)) as f64) / (r * r) * mode_partial(m, l, omega, p, MultiIndex::new(a, b, c)))
            .sum()
    };
    let jac = (d(0, 1, 0) * z(1, 0, 0) - d(1, 0, 0) * z(0, 1, 0)) / (r * r * p.phi.cos());
    z(0, 0, 1) + 2.0 * omega / (r * r) * d(0, 1, 0) + jac
}

#[test]
fn strict_scaling_is_the_vorticity_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let modes = [(1, 1), (2, 3)];
    for (omega, r) in [(1.0, 1.0), (0.7, 2.3)] {
        let consts = PhysicsConstants::new(omega, r).unwrap();
        let strict = BveResidual {
            consts,
            strict_r_scaling: true,
        };
        for _ in 0..30 {
            let p = random_interior_point(&mut rng, 80.0);
            let d = mode_partials(&modes, omega, &p);
            let want = vorticity_form(&modes, omega, r, &p);
            let got = strict.evaluate_partials(p.phi, &d).unwrap();
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
            if r == 1.0 {
                let plain = BveResidual::new(consts).evaluate_partials(p.phi, &d).unwrap();
                assert!((plain - want).abs() < 1e-10 * want.abs().max(1.0));
            }
        }
    }
}

proptest! {
    #[test]
    fn residual_is_linear_in_the_time_partials(phi in -1.3f64..1.3, k in -3.0f64..3.0, seed in 0u64..1000) {
        let r = BveResidual::new(PhysicsConstants::unit());
        let mut d: [f64; 14] = std::array::from_fn(|i| ((i as u64 + seed) as f64).sin());
        let base = r.evaluate_partials(phi, &d).unwrap();
        // phi-t, phi-phi-t, lambda-lambda-t
        for i in [5, 8, 9] {
            d[i] += k;
        }
        let shifted = r.evaluate_partials(phi, &d).unwrap();
        let sec2 = 1.0 / phi.cos().powi(2);
        prop_assert!((shifted - base - k * (1.0 - phi.tan() + sec2)).abs() < 1e-9 * (1.0 + base.abs()));
    }
}
