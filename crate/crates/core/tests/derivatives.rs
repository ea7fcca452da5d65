mod common;

use common::{close, random_interior_point, random_model};
use proptest::prelude::*;
use qbve::bve::{BveResidual, PhysicsConstants};
use qbve::diff::{
    default_fd_step, fd_oracle, fd_partial, feature_jet, param_gradient, JetSpace, Model, MultiIndex, PointLoss,
    BVE_PARTIALS,
};
use qbve::qnn::{forward, CollocationPoint, ModelConfig, ModelParams};
use qbve::qsim::{Circuit, Gate};
use qbve::train::{ResidualLoss, ValueLoss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn residual_loss(points: Vec<CollocationPoint>) -> ResidualLoss {
    ResidualLoss {
        points,
        weight: 1.0,
        residual: BveResidual::new(PhysicsConstants::unit()),
    }
}

/// Central differences of `loss(params)` in every trainable coordinate.
fn fd_param_gradient(config: &ModelConfig, params: &ModelParams, terms: &[&dyn PointLoss], h: f64) -> Vec<f64> {
    let base = params.to_vec();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += h;
            minus[k] -= h;
            let f = |v: &[f64]| param_gradient(config, &ModelParams::from_vec(config, v).unwrap(), terms).unwrap().0;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn single_ry_closed_form() {
    let gamma = 1.0;
    let f = |x: f64| {
        let mut c = Circuit::new(1);
        c.push(Gate::ry(0, gamma * x)).unwrap();
        c.run().unwrap().expect_total_z()
    };
    assert!((f(0.7) - 0.7f64.cos()).abs() < 1e-15);
    let p = CollocationPoint::new(0.0, 0.7, 0.0);
    let d = fd_partial(|q| f(q.lambda), &p, MultiIndex::new(0, 1, 0), default_fd_step(1));
    assert!((d + gamma * 0.7f64.sin()).abs() < 1e-8);
}

#[test]
fn constant_model_fd_is_zero() {
    let (c, mut p) = random_model(2, 1, 3);
    p.output_affine = [0.0, 1.25];
    let v = fd_oracle(&c, &p, &CollocationPoint::new(0.2, 1.0, 0.5), MultiIndex::new(1, 0, 0), 1e-4).unwrap();
    assert!(v.abs() < 1e-10, "{v}");
}

#[test]
fn residual_partials_match_finite_differences() {
    for seed in 0..20 {
        let (c, p) = random_model(4, 2, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = if seed == 0 { CollocationPoint::new(0.4, 2.0, 1.0) } else { random_interior_point(&mut rng, 80.0) };
        let jet = feature_jet(&c, &p, &pt, &BVE_PARTIALS).unwrap();
        let model = Model::new(&c, &p).unwrap();
        for m in BVE_PARTIALS {
            let exact = jet.get(m).unwrap();
            let fd = fd_partial(|q| model.value(q), &pt, m, default_fd_step(m.order()));
            assert!(close(exact, fd, 1e-5, 1e-4), "seed {seed} {m:?}: jet {exact} fd {fd}");
        }
    }
}

#[test]
fn mse_gradient_matches_finite_differences() {
    let (c, p) = random_model(3, 2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points: Vec<CollocationPoint> = (0..10).map(|_| random_interior_point(&mut rng, 80.0)).collect();
    let targets: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let loss = ValueLoss {
        points,
        targets,
        weight: 1.0,
    };
    let (_, g) = param_gradient(&c, &p, &[&loss]).unwrap();
    let fd = fd_param_gradient(&c, &p, &[&loss], 1e-6);
    for (k, (a, b)) in g.iter().zip(&fd).enumerate() {
        assert!(close(*a, *b, 1e-6, 1e-4), "param {k}: {a} vs {b}");
    }
}

#[test]
fn residual_gradient_matches_finite_differences_small_model() {
    let (c, p) = random_model(2, 1, 11);
    let loss = residual_loss(vec![CollocationPoint::new(0.3, 1.2, 0.8)]);
    let (_, g) = param_gradient(&c, &p, &[&loss]).unwrap();
    let fd = fd_param_gradient(&c, &p, &[&loss], 1e-6);
    for (k, (a, b)) in g.iter().zip(&fd).enumerate() {
        assert!(close(*a, *b, 1e-5, 1e-3), "param {k}: {a} vs {b}");
    }
}

#[test]
fn residual_gradient_matches_finite_differences_across_seeds() {
    for seed in 0..20 {
        let (c, p) = random_model(4, 2, 500 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loss = residual_loss(vec![random_interior_point(&mut rng, 80.0)]);
        let (_, g) = param_gradient(&c, &p, &[&loss]).unwrap();
        let fd = fd_param_gradient(&c, &p, &[&loss], 1e-6);
        for (k, (a, b)) in g.iter().zip(&fd).enumerate() {
            assert!(close(*a, *b, 1e-5, 1e-3), "seed {seed} param {k}: {a} vs {b}");
        }
    }
}

struct Square(CollocationPoint);

impl PointLoss for Square {
    fn space(&self) -> &'static JetSpace {
        JetSpace::value()
    }
    fn len(&self) -> usize {
        1
    }
    fn point(&self, _: usize) -> CollocationPoint {
        self.0
    }
    fn eval(&self, _: usize, _: &JetSpace, c: &[f64]) -> qbve::Result<(f64, Vec<f64>)> {
        Ok((c[0] * c[0], vec![2.0 * c[0]]))
    }
}

#[test]
fn identity_model_shift_gradient() {
    let c = ModelConfig::new(3, 2);
    let p = ModelParams::zeros(&c);
    let (v, g) = param_gradient(&c, &p, &[&Square(CollocationPoint::new(0.1, 0.2, 0.3))]).unwrap();
    assert_eq!(v, 9.0);
    assert_eq!(*g.last().unwrap(), 6.0);
}

#[test]
fn unordered_reduction_agrees() {
    let (c, p) = random_model(3, 1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let loss = residual_loss((0..40).map(|_| random_interior_point(&mut rng, 80.0)).collect());
    let model = Model::new(&c, &p).unwrap();
    let a = model.evaluate(&[&loss], qbve::diff::Reduction::Ordered).unwrap();
    let b = model.evaluate(&[&loss], qbve::diff::Reduction::Unordered).unwrap();
    assert!(close(a.total, b.total, 0.0, 1e-12));
    for (x, y) in a.gradient.iter().zip(&b.gradient) {
        assert!(close(*x, *y, 1e-12, 1e-10));
    }
    let again = model.evaluate(&[&loss], qbve::diff::Reduction::Ordered).unwrap();
    assert_eq!(a, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn mixed_partials_do_not_depend_on_the_jet_space(seed in 0u64..10_000, phi in -1.3f64..1.3, lam in 0.0f64..6.3, t in 0.0f64..3.0) {
        let (c, p) = random_model(2, 1, seed);
        let pt = CollocationPoint::new(phi, lam, t);
        let model = Model::new(&c, &p).unwrap();
        let full = model.jet(JetSpace::full(), &pt);
        for m in [MultiIndex::new(1, 1, 0), MultiIndex::new(1, 2, 0), MultiIndex::new(2, 1, 0), MultiIndex::new(1, 1, 1), MultiIndex::new(0, 2, 1)] {
            let own = feature_jet(&c, &p, &pt, &[m]).unwrap().get(m).unwrap();
            let f = full.get(m).unwrap();
            prop_assert!(close(own, f, 1e-12, 1e-9), "{:?}: {} vs {}", m, own, f);
        }
    }

    #[test]
    fn derivatives_are_linear_in_the_model(seed in 0u64..10_000, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
        let (ca, pa) = random_model(2, 1, seed);
        let (cb, pb) = random_model(2, 1, seed + 1);
        let pt = CollocationPoint::new(0.3, 1.0, 0.5);
        let a = Model::new(&ca, &pa).unwrap();
        let b = Model::new(&cb, &pb).unwrap();
        let ja = a.jet(JetSpace::residual(), &pt);
        let jb = b.jet(JetSpace::residual(), &pt);
        for m in BVE_PARTIALS {
            let combined = fd_partial(|q| c1 * a.value(q) + c2 * b.value(q), &pt, m, default_fd_step(m.order()));
            let want = c1 * ja.get(m).unwrap() + c2 * jb.get(m).unwrap();
            prop_assert!(close(combined, want, 1e-5, 1e-4));
        }
    }

    #[test]
    fn jet_value_is_the_forward_pass(seed in 0u64..10_000, phi in -1.5f64..1.5, lam in -7.0f64..7.0, t in -1.0f64..4.0) {
        let (c, p) = random_model(3, 2, seed);
        let pt = CollocationPoint::new(phi, lam, t);
        let m = Model::new(&c, &p).unwrap();
        prop_assert!((m.value(&pt) - forward(&c, &p, &pt).unwrap()).abs() < 1e-12);
    }
}
