use num_complex::Complex64;
use proptest::prelude::*;
use qbve::bve::{analytic_psi, dispersion, ModeSpec, PhysicsConstants};
use qbve::data::{gen_artificial_initial, zeta_of_initial, ARTIFICIAL_MODES};
use qbve::error::Error;
use qbve::qnn::CollocationPoint;
use qbve::sem::{
    coeff_index, evolve, n_coeffs, truncate, Grid, SemConfig, SpectralState, Stepper, Transform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> PhysicsConstants {
    PhysicsConstants::unit()
}

fn random_coeffs(l: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![Complex64::new(0.0, 0.0); n_coeffs(l)];
    for m in 0..=l {
        for n in m..=l {
            let im = if m == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
            c[coeff_index(l, m, n)] = Complex64::new(rng.gen_range(-1.0..1.0), im) / (1.0 + n as f64);
        }
    }
    c
}

fn mode_state(l: usize, tr: &Transform, mode: ModeSpec) -> SpectralState {
    let g = tr.grid();
    let k = mode.laplacian_factor();
    let mut z = Vec::new();
    for &la in &g.latitudes {
        for &lo in &g.longitudes {
            z.push(-k * analytic_psi(mode, &unit(), &CollocationPoint::new(la, lo, 0.0)).unwrap());
        }
    }
    SpectralState {
        truncation: l,
        coeffs: tr.analyze(&z).unwrap(),
        consts: unit(),
        time: 0.0,
    }
}

#[test]
fn round_trip_of_band_limited_fields() {
    let l = 21;
    let tr = Transform::new(Grid::for_truncation(l), l).unwrap();
    let c = random_coeffs(l, 5);
    let (v, imag) = tr.synthesize_with_residue(&c);
    assert!(imag < 1e-12, "imaginary residue {imag}");
    let back = tr.analyze(&v).unwrap();
    let err = back.iter().zip(&c).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    let again = tr.synthesize(&back);
    let err = again.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10);
}

#[test]
fn single_mode_regression() {
    let l = 21;
    let tr = Transform::new(Grid::for_truncation(l), l).unwrap();
    let mode = ModeSpec::new(1, 2).unwrap();
    let cfg = SemConfig {
        truncation: l,
        ..SemConfig::new(0.001, 1.0, 1.0, unit())
    };
    let s0 = mode_state(l, &tr, mode);
    let c0 = s0.coeff(1, 2);
    let mut st = Stepper::new(tr.clone(), &cfg, s0).unwrap();
    for _ in 0..1000 {
        st.step().unwrap();
    }
    let s = st.state();
    assert!((s.time - 1.0).abs() < 1e-12);
    let psi = tr.synthesize(&qbve::sem::invert_laplacian(l, &s.coeffs, &unit()));
    let g = tr.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &la) in g.latitudes.iter().enumerate() {
        for (k, &lo) in g.longitudes.iter().enumerate() {
            let a = analytic_psi(mode, &unit(), &CollocationPoint::new(la, lo, 1.0)).unwrap();
            num += (psi[j * g.n_lon() + k] - a).powi(2);
            den += a * a;
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel <= 5e-3, "relative L2 error {rel}");
    let sigma = dispersion(mode, &unit()).unwrap();
    let measured = -(s.coeff(1, 2) / c0).arg();
    assert!((measured - sigma).abs() <= 5e-3 * sigma.abs(), "sigma {measured} vs {sigma}");
}

#[test]
fn zero_state_stays_zero() {
    let l = 10;
    let tr = Transform::new(Grid::for_truncation(l), l).unwrap();
    let cfg = SemConfig {
        truncation: l,
        ..SemConfig::new(0.01, 1.0, 0.1, unit())
    };
    let mut st = Stepper::new(tr, &cfg, SpectralState::zero(l, unit())).unwrap();
    for _ in 0..5 {
        st.step().unwrap();
    }
    assert!(st.state().coeffs.iter().all(|c| c.norm() == 0.0));
}

#[test]
fn large_time_step_is_unstable() {
    let l = 20;
    let cfg = SemConfig {
        truncation: l,
        ..SemConfig::new(0.5, 100.0, 0.5, unit())
    };
    let tr = cfg.transform().unwrap();
    let psi = gen_artificial_initial(32, 64).unwrap();
    let zeta = zeta_of_initial(&psi, &ARTIFICIAL_MODES, &unit()).unwrap();
    let coeffs = qbve::sem::analyze_field(&tr, &zeta, 0).unwrap();
    let s0 = SpectralState {
        truncation: l,
        coeffs,
        consts: unit(),
        time: 0.0,
    };
    let mut st = Stepper::new(tr, &cfg, s0).unwrap();
    let mut failure = None;
    for _ in 0..200 {
        if let Err(e) = st.step() {
            failure = Some(e);
            break;
        }
    }
    match failure {
        Some(Error::Instability { step, .. }) => assert!(step <= 200),
        other => panic!("expected an instability, got {other:?}"),
    }
}

#[test]
fn leapfrog_core_conserves_mean_and_enstrophy() {
    let l = 15;
    let cfg = SemConfig {
        truncation: l,
        robert_coeff: 0.0,
        ..SemConfig::new(0.001, 1.0, 0.1, unit())
    };
    let tr = cfg.transform().unwrap();
    let mut c = random_coeffs(l, 9);
    for m in 0..=l {
        for n in m..=l {
            if n > 6 {
                c[coeff_index(l, m, n)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let s0 = SpectralState {
        truncation: l,
        coeffs: c,
        consts: unit(),
        time: 0.0,
    };
    let (mean0, ens0) = (s0.coeff(0, 0), s0.enstrophy());
    let mut st = Stepper::new(tr, &cfg, s0).unwrap();
    for _ in 0..100 {
        st.step().unwrap();
    }
    assert!((st.state().coeff(0, 0) - mean0).norm() < 1e-12);
    let drift = (st.state().enstrophy() - ens0).abs() / ens0;
    assert!(drift < 1e-3, "enstrophy drift {drift}");
}

#[test]
fn phase_speed_over_one_period() {
    let l = 10;
    let tr = Transform::new(Grid::for_truncation(l), l).unwrap();
    let mode = ModeSpec::new(1, 1).unwrap();
    let cfg = SemConfig {
        truncation: l,
        ..SemConfig::new(0.01, 10.0, 0.01, unit())
    };
    let s0 = mode_state(l, &tr, mode);
    let c0 = s0.coeff(1, 1);
    let mut st = Stepper::new(tr, &cfg, s0).unwrap();
    // sigma = -1, so one period is 2 pi; track the unwrapped phase.
    let steps = (2.0 * std::f64::consts::PI / 0.01).round() as usize;
    let mut phase = 0.0;
    let mut last = c0;
    for _ in 0..steps {
        st.step().unwrap();
        let c = st.state().coeff(1, 1);
        phase += (c / last).arg();
        last = c;
    }
    let measured = -phase / st.state().time;
    assert!((measured + 1.0).abs() < 5e-3, "{measured}");
}

#[test]
fn evolve_snapshot_counts() {
    let psi = gen_artificial_initial(20, 40).unwrap();
    let zeta = zeta_of_initial(&psi, &ARTIFICIAL_MODES, &unit()).unwrap();
    let cfg = SemConfig {
        truncation: 10,
        ..SemConfig::new(0.01, 0.3, 0.1, unit())
    };
    let e = evolve(&zeta, &cfg).unwrap();
    assert_eq!(e.zeta.n_times(), 4);
    assert_eq!(e.psi.times, vec![0.0, 0.1, 0.2, 0.3]);
    assert_eq!((e.psi.n_lat(), e.psi.n_lon()), (20, 40));
    let zero = SemConfig {
        total_time: 0.0,
        ..cfg.clone()
    };
    assert_eq!(evolve(&zeta, &zero).unwrap().psi.n_times(), 1);
    assert!(evolve(&psi, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn truncation_is_idempotent(seed in 0u64..1000, to in 1usize..12) {
        let c = random_coeffs(12, seed);
        let once = truncate(12, &c, to);
        prop_assert_eq!(truncate(to, &once, to), once.clone());
        let back = truncate(to, &once, 12);
        prop_assert_eq!(truncate(12, &back, to), once);
    }

    #[test]
    fn analysis_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
        let l = 8;
        let tr = Transform::new(Grid::for_truncation(l), l).unwrap();
        let c1 = random_coeffs(l, seed);
        let c2 = random_coeffs(l, seed + 1);
        let v1 = tr.synthesize(&c1);
        let v2 = tr.synthesize(&c2);
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| a * x + y).collect();
        let out = tr.analyze(&mix).unwrap();
        for k in 0..out.len() {
            prop_assert!((out[k] - (c1[k] * a + c2[k])).norm() < 1e-10);
        }
    }
}
