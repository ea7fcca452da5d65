//! Exact derivatives of the model.
//!
//! Feature derivatives (up to total order three in `phi`, `lambda`, `t`) come
//! from propagating Taylor jets through the pre-processing and every gate.
//! Parameter gradients of any loss built from those jets come from one
//! reverse sweep over the same jet-valued computation, so a loss containing
//! third-order partials is differentiated exactly.
//!
//! [`fd_partial`] is a finite-difference oracle for tests; nothing in the
//! training path calls it.

mod engine;
pub mod jet;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use jet::{JetSpace, MultiIndex, TrigJet, BVE_PARTIALS, MAX_ORDER, VORTICITY_PARTIALS};

use crate::error::{Error, Result};
use crate::qnn::{CollocationPoint, ModelConfig, ModelParams};
use engine::Prepared;

/// Model value and selected partials at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeJet {
    pub point: CollocationPoint,
    pub value: f64,
    pub partials: BTreeMap<MultiIndex, f64>,
}

impl DerivativeJet {
    pub fn get(&self, m: MultiIndex) -> Result<f64> {
        if m == MultiIndex::VALUE {
            return Ok(self.value);
        }
        self.partials
            .get(&m)
            .copied()
            .ok_or_else(|| Error::Contract(format!("jet lacks partial {m:?}")))
    }

    /// Builds a jet from raw Taylor coefficients.
    pub fn from_coefficients(space: &JetSpace, point: CollocationPoint, coeffs: &[f64]) -> Self {
        let partials = space
            .monomials()
            .iter()
            .skip(1)
            .map(|&m| (m, space.partial(coeffs, m).unwrap()))
            .collect();
        Self {
            point,
            value: coeffs[0],
            partials,
        }
    }
}

/// A model with its gate matrices cached, for evaluating many points.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ModelParams,
    prepared: Prepared,
}

impl Model {
    pub fn new(config: &ModelConfig, params: &ModelParams) -> Result<Self> {
        config.validate()?;
        params.check(config)?;
        Ok(Self {
            config: config.clone(),
            params: params.clone(),
            prepared: Prepared::new(config, params),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn value(&self, point: &CollocationPoint) -> f64 {
        self.prepared.forward(JetSpace::value(), point).psi[0]
    }

    /// Taylor coefficients of the output in `space`.
    pub fn coefficients(&self, space: &JetSpace, point: &CollocationPoint) -> Vec<f64> {
        self.prepared.forward(space, point).psi
    }

    pub fn jet(&self, space: &JetSpace, point: &CollocationPoint) -> DerivativeJet {
        DerivativeJet::from_coefficients(space, *point, &self.coefficients(space, point))
    }

    /// Loss and gradient for a weighted sum of per-point objectives, with
    /// ordered reduction.
    pub fn loss_and_gradient(&self, terms: &[&dyn PointLoss]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(terms, Reduction::Ordered)?;
        Ok((e.total, e.gradient))
    }

    /// Per-term values, weighted total and gradient of the total.
    pub fn evaluate(&self, terms: &[&dyn PointLoss], reduction: Reduction) -> Result<LossEval> {
        let n_params = self.prepared.n_params();
        let mut out = LossEval {
            terms: Vec::with_capacity(terms.len()),
            total: 0.0,
            gradient: vec![0.0; n_params],
        };
        for term in terms {
            let space = term.space();
            let weight = term.weight();
            let one = |i: usize| -> Result<(f64, Vec<f64>)> {
                let point = term.point(i);
                let tape = self.prepared.forward(space, &point);
                let (value, mut bar) = term.eval(i, space, &tape.psi)?;
                if !value.is_finite() || bar.iter().any(|b| !b.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite loss contribution {value} at {point:?}"
                    )));
                }
                let mut g = vec![0.0; n_params];
                if weight != 0.0 {
                    bar.iter_mut().for_each(|b| *b *= weight);
                    self.prepared.backward(&tape, &bar, &mut g);
                    if let Some(k) = g.iter().position(|x| !x.is_finite()) {
                        return Err(Error::Numerical(format!(
                            "non-finite gradient entry {k} at {point:?}"
                        )));
                    }
                }
                Ok((value, g))
            };
            let (value, g) = match reduction {
                Reduction::Ordered => {
                    let parts: Vec<Result<(f64, Vec<f64>)>> = (0..term.len()).into_par_iter().map(one).collect();
                    let mut value = 0.0;
                    let mut grad = vec![0.0; n_params];
                    for part in parts {
                        let (v, g) = part?;
                        value += v;
                        add_into(&mut grad, &g);
                    }
                    (value, grad)
                }
                Reduction::Unordered => (0..term.len())
                    .into_par_iter()
                    .map(one)
                    .try_reduce(
                        || (0.0, vec![0.0; n_params]),
                        |(va, mut ga), (vb, gb)| {
                            add_into(&mut ga, &gb);
                            Ok((va + vb, ga))
                        },
                    )?,
            };
            out.terms.push(value);
            out.total += weight * value;
            add_into(&mut out.gradient, &g);
        }
        Ok(out)
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// How per-point gradients are summed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Fixed summation order; results do not depend on thread count.
    #[default]
    Ordered,
    /// Tree reduction in whatever order the thread pool produces.
    Unordered,
}

/// Result of [`Model::evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    /// Unweighted value of each term.
    pub terms: Vec<f64>,
    /// `sum weight_k * terms[k]`.
    pub total: f64,
    pub gradient: Vec<f64>,
}

/// A loss that is a sum of per-point terms, each a smooth function of the
/// model's Taylor coefficients at that point.
pub trait PointLoss: Sync {
    fn space(&self) -> &'static JetSpace;
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> CollocationPoint;
    /// Value of term `i` and its gradient with respect to the coefficients.
    fn eval(&self, i: usize, space: &JetSpace, coeffs: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Multiplier on this term in the total.
    fn weight(&self) -> f64 {
        1.0
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Value and the requested partials at `point`.
pub fn feature_jet(
    config: &ModelConfig,
    params: &ModelParams,
    point: &CollocationPoint,
    requested: &[MultiIndex],
) -> Result<DerivativeJet> {
    let space = JetSpace::closure(requested).ok_or_else(|| {
        Error::Contract(format!("derivative order above {MAX_ORDER} requested: {requested:?}"))
    })?;
    let model = Model::new(config, params)?;
    let full = model.jet(&space, point);
    let partials = requested
        .iter()
        .filter(|m| **m != MultiIndex::VALUE)
        .map(|&m| (m, full.partials[&m]))
        .collect();
    Ok(DerivativeJet {
        partials,
        ..full
    })
}

/// Weighted total and its gradient with respect to the flattened trainables
/// (see [`ModelParams::to_vec`]).
pub fn param_gradient(config: &ModelConfig, params: &ModelParams, terms: &[&dyn PointLoss]) -> Result<(f64, Vec<f64>)> {
    Model::new(config, params)?.loss_and_gradient(terms)
}

/// Step size used by [`fd_partial`] for a derivative of the given total order.
pub fn default_fd_step(order: u8) -> f64 {
    match order {
        0 | 1 => 1e-4,
        2 => 1e-3,
        _ => 5e-3,
    }
}

/// Fourth-order accurate central-difference weights and offsets for a
/// derivative of order `k`.
fn stencil(k: u8) -> &'static [(i32, f64)] {
    const D1: [(i32, f64); 4] = [(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)];
    const D2: [(i32, f64); 5] = [(-2, -1.0 / 12.0), (-1, 4.0 / 3.0), (0, -2.5), (1, 4.0 / 3.0), (2, -1.0 / 12.0)];
    const D3: [(i32, f64); 6] = [
        (-3, 0.125),
        (-2, -1.0),
        (-1, 1.625),
        (1, -1.625),
        (2, 1.0),
        (3, -0.125),
    ];
    match k {
        0 => &[(0, 1.0)],
        1 => &D1,
        2 => &D2,
        3 => &D3,
        _ => panic!("no stencil for order {k}"),
    }
}

/// Central finite-difference estimate of the mixed partial `m` of `f` at
/// `point`, built as a tensor product of one-dimensional stencils.
pub fn fd_partial<F>(f: F, point: &CollocationPoint, m: MultiIndex, step: f64) -> f64
where
    F: Fn(&CollocationPoint) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut acc = 0.0;
    for &(i, wi) in stencil(m.phi) {
        for &(j, wj) in stencil(m.lambda) {
            for &(k, wk) in stencil(m.t) {
                let p = CollocationPoint::new(
                    point.phi + i as f64 * step,
                    point.lambda + j as f64 * step,
                    point.t + k as f64 * step,
                );
                acc += wi * wj * wk * f(&p);
            }
        }
    }
    acc / step.powi(m.order() as i32)
}

/// [`fd_partial`] applied to the model's forward pass.
pub fn fd_oracle(config: &ModelConfig, params: &ModelParams, point: &CollocationPoint, m: MultiIndex, step: f64) -> Result<f64> {
    let model = Model::new(config, params)?;
    Ok(fd_partial(|p| model.value(p), point, m, step))
}
