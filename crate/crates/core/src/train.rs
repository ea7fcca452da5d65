//! Losses, collocation sampling, Adam, and the two training loops.
//!
//! * QCL fits the stream function to gridded data: `L = MSE(psi~, psi)`.
//! * DQC combines four terms, `L = a1 L1 + a2 L2 + a3 L3 + a4 L4`: the
//!   stream function and the vorticity at `t = 0`, the stream function on
//!   the equator rows at later times, and the squared equation residual at
//!   random points of the continuous domain.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bve::{vorticity_from_partials, vorticity_gradient, BveResidual, PhysicsConstants};
use crate::data::{Field, Quantity};
use crate::diff::{JetSpace, LossEval, Model, MultiIndex, PointLoss, Reduction, BVE_PARTIALS};
use crate::error::{Error, Result};
use crate::qnn::{Checkpoint, CollocationPoint, ModelConfig, ModelParams, DEFAULT_POLE_CUTOFF_DEG};

pub const DEFAULT_ALPHA4: f64 = 0.1;
pub const DQC_BATCHES: [usize; 4] = [350, 300, 25, 350];
pub const DEFAULT_T_MAX: f64 = 3.0;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Qcl,
    Dqc,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Qcl => "qcl",
            TrainMode::Dqc => "dqc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: [f64; 4],
}

impl LossWeights {
    pub fn new(alpha: [f64; 4]) -> Result<Self> {
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0, got {alpha:?}")));
        }
        Ok(Self { alpha })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub model: ModelConfig,
    pub iterations: usize,
    pub learning_rate: f64,
    /// One entry for QCL, four for DQC.
    pub batch_sizes: Vec<usize>,
    pub rng_seed: u64,
    pub pole_cutoff_deg: f64,
    /// Iterations between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    pub alpha4: f64,
    /// Replaces the data-derived weights when set.
    pub weights: Option<[f64; 4]>,
    pub consts: PhysicsConstants,
    /// Upper end of the residual sampling interval in time.
    pub t_max: f64,
    pub strict_r_scaling: bool,
    /// Sum per-point gradients in a fixed order.
    pub deterministic: bool,
}

impl TrainConfig {
    pub fn dqc(model: ModelConfig) -> Self {
        Self {
            mode: TrainMode::Dqc,
            model,
            iterations: 30_000,
            learning_rate: 1e-2,
            batch_sizes: DQC_BATCHES.to_vec(),
            rng_seed: 0,
            pole_cutoff_deg: DEFAULT_POLE_CUTOFF_DEG,
            checkpoint_interval: 1000,
            alpha4: DEFAULT_ALPHA4,
            weights: None,
            consts: PhysicsConstants::unit(),
            t_max: DEFAULT_T_MAX,
            strict_r_scaling: false,
            deterministic: true,
        }
    }

    pub fn qcl(model: ModelConfig, batch: usize) -> Self {
        Self {
            mode: TrainMode::Qcl,
            iterations: 5000,
            batch_sizes: vec![batch],
            ..Self::dqc(model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        let want = match self.mode {
            TrainMode::Qcl => 1,
            TrainMode::Dqc => 4,
        };
        if self.batch_sizes.len() != want || self.batch_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "{} training needs {want} positive batch size(s), got {:?}",
                self.mode, self.batch_sizes
            )));
        }
        if !(self.pole_cutoff_deg > 0.0 && self.pole_cutoff_deg < 90.0) {
            return Err(Error::Config(format!("pole cutoff {} outside (0, 90)", self.pole_cutoff_deg)));
        }
        if !(self.alpha4 >= 0.0 && self.alpha4.is_finite()) {
            return Err(Error::Config("alpha4 must be finite and >= 0".into()));
        }
        if let Some(w) = self.weights {
            LossWeights::new(w)?;
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config("t_max must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn reduction(&self) -> Reduction {
        if self.deterministic {
            Reduction::Ordered
        } else {
            Reduction::Unordered
        }
    }
}

/// Mean-square error of the model value against targets.
#[derive(Clone, Debug)]
pub struct ValueLoss {
    pub points: Vec<CollocationPoint>,
    pub targets: Vec<f64>,
    pub weight: f64,
}

impl PointLoss for ValueLoss {
    fn space(&self) -> &'static JetSpace {
        JetSpace::value()
    }
    fn len(&self) -> usize {
        self.points.len()
    }
    fn point(&self, i: usize) -> CollocationPoint {
        self.points[i]
    }
    fn eval(&self, i: usize, _: &JetSpace, coeffs: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.points.len() as f64;
        let d = coeffs[0] - self.targets[i];
        Ok((d * d / n, vec![2.0 * d / n]))
    }
    fn weight(&self) -> f64 {
        self.weight
    }
}

/// Mean-square error of the model's vorticity against targets.
#[derive(Clone, Debug)]
pub struct VorticityLoss {
    pub points: Vec<CollocationPoint>,
    pub targets: Vec<f64>,
    pub weight: f64,
    pub consts: PhysicsConstants,
}

const VORT: [MultiIndex; 3] = [MultiIndex::new(1, 0, 0), MultiIndex::new(2, 0, 0), MultiIndex::new(0, 2, 0)];

impl PointLoss for VorticityLoss {
    fn space(&self) -> &'static JetSpace {
        JetSpace::vorticity()
    }
    fn len(&self) -> usize {
        self.points.len()
    }
    fn point(&self, i: usize) -> CollocationPoint {
        self.points[i]
    }
    fn eval(&self, i: usize, space: &JetSpace, coeffs: &[f64]) -> Result<(f64, Vec<f64>)> {
        let phi = self.points[i].phi;
        let d: Vec<f64> = VORT.iter().map(|&m| space.partial(coeffs, m).unwrap()).collect();
        let zeta = vorticity_from_partials(phi, d[0], d[1], d[2], &self.consts)?;
        let g = vorticity_gradient(phi, &self.consts)?;
        let n = self.points.len() as f64;
        let e = zeta - self.targets[i];
        let mut bar = vec![0.0; space.len()];
        for (k, &m) in VORT.iter().enumerate() {
            bar[space.index(m).unwrap()] += 2.0 * e / n * g[k] * m.factorial_weight();
        }
        Ok((e * e / n, bar))
    }
    fn weight(&self) -> f64 {
        self.weight
    }
}

/// Mean of the squared equation residual.
#[derive(Clone, Debug)]
pub struct ResidualLoss {
    pub points: Vec<CollocationPoint>,
    pub weight: f64,
    pub residual: BveResidual,
}

impl PointLoss for ResidualLoss {
    fn space(&self) -> &'static JetSpace {
        JetSpace::residual()
    }
    fn len(&self) -> usize {
        self.points.len()
    }
    fn point(&self, i: usize) -> CollocationPoint {
        self.points[i]
    }
    fn eval(&self, i: usize, space: &JetSpace, coeffs: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d: [f64; 14] = std::array::from_fn(|k| space.partial(coeffs, BVE_PARTIALS[k]).unwrap());
        let (f, g) = self.residual.evaluate_with_gradient(self.points[i].phi, &d)?;
        let n = self.points.len() as f64;
        let mut bar = vec![0.0; space.len()];
        for (k, &m) in BVE_PARTIALS.iter().enumerate() {
            bar[space.index(m).unwrap()] += 2.0 * f / n * g[k] * m.factorial_weight();
        }
        Ok((f * f / n, bar))
    }
    fn weight(&self) -> f64 {
        self.weight
    }
}

/// Mean-square error of `forward` against the targets of `batch`.
pub fn qcl_loss(config: &ModelConfig, params: &ModelParams, batch: &[(CollocationPoint, f64)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let model = Model::new(config, params)?;
    let s: f64 = batch.iter().map(|(p, y)| (model.value(p) - y).powi(2)).sum();
    Ok(s / batch.len() as f64)
}

/// Points for each DQC term; the first three carry targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DqcBatches {
    pub psi0: Vec<(CollocationPoint, f64)>,
    pub zeta0: Vec<(CollocationPoint, f64)>,
    pub equator: Vec<(CollocationPoint, f64)>,
    pub residual: Vec<CollocationPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqcLoss {
    pub total: f64,
    pub components: [f64; 4],
}

fn split(b: &[(CollocationPoint, f64)]) -> (Vec<CollocationPoint>, Vec<f64>) {
    b.iter().copied().unzip()
}

fn dqc_terms(batches: &DqcBatches, weights: &LossWeights, residual: BveResidual) -> (ValueLoss, VorticityLoss, ValueLoss, ResidualLoss) {
    let (p1, y1) = split(&batches.psi0);
    let (p2, y2) = split(&batches.zeta0);
    let (p3, y3) = split(&batches.equator);
    (
        ValueLoss {
            points: p1,
            targets: y1,
            weight: weights.alpha[0],
        },
        VorticityLoss {
            points: p2,
            targets: y2,
            weight: weights.alpha[1],
            consts: residual.consts,
        },
        ValueLoss {
            points: p3,
            targets: y3,
            weight: weights.alpha[2],
        },
        ResidualLoss {
            points: batches.residual.clone(),
            weight: weights.alpha[3],
            residual,
        },
    )
}

/// DQC loss value and gradient with respect to the flattened trainables.
pub fn dqc_loss_and_gradient(
    model: &Model,
    batches: &DqcBatches,
    weights: &LossWeights,
    residual: BveResidual,
    reduction: Reduction,
) -> Result<(DqcLoss, Vec<f64>)> {
    for (name, len) in [
        ("psi0", batches.psi0.len()),
        ("zeta0", batches.zeta0.len()),
        ("equator", batches.equator.len()),
        ("residual", batches.residual.len()),
    ] {
        if len == 0 {
            return Err(Error::Contract(format!("empty {name} batch")));
        }
    }
    let (a, b, c, d) = dqc_terms(batches, weights, residual);
    let LossEval { terms, total, gradient } = model.evaluate(&[&a, &b, &c, &d], reduction)?;
    Ok((
        DqcLoss {
            total,
            components: [terms[0], terms[1], terms[2], terms[3]],
        },
        gradient,
    ))
}

/// DQC loss value.
pub fn dqc_loss(
    config: &ModelConfig,
    params: &ModelParams,
    batches: &DqcBatches,
    weights: &LossWeights,
    consts: &PhysicsConstants,
) -> Result<DqcLoss> {
    let model = Model::new(config, params)?;
    Ok(dqc_loss_and_gradient(&model, batches, weights, BveResidual::new(*consts), Reduction::Ordered)?.0)
}

/// Reference data for training.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    /// Stream function at `t = 0` and later times.
    pub psi: Field,
    /// Vorticity; only the `t = 0` slice is used.
    pub zeta: Field,
}

fn mean_square(v: &[f64], what: &str) -> Result<f64> {
    let ms = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    if !(ms > 0.0 && ms.is_finite()) {
        return Err(Error::DegenerateReference(format!("mean square of {what} is {ms}")));
    }
    Ok(ms)
}

/// Term identifiers for [`Sampler::sample`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerm {
    Psi0,
    Zeta0,
    Equator,
    Residual,
    Qcl,
}

/// The candidate points of every loss term, built once from the reference.
#[derive(Clone, Debug)]
pub struct Sampler {
    psi0: Vec<(CollocationPoint, f64)>,
    zeta0: Vec<(CollocationPoint, f64)>,
    equator: Vec<(CollocationPoint, f64)>,
    all_psi: Vec<(CollocationPoint, f64)>,
    pole_cutoff_deg: f64,
    t_max: f64,
}

fn slice_points(f: &Field, t: usize, rows: &[usize]) -> Vec<(CollocationPoint, f64)> {
    let mut out = Vec::with_capacity(rows.len() * f.n_lon());
    for &i in rows {
        for j in 0..f.n_lon() {
            out.push((f.point(t, i, j), f.get(t, i, j)));
        }
    }
    out
}

/// Rows whose latitude is closest to zero (two for a grid symmetric about
/// the equator without a zero row).
pub fn equator_rows(f: &Field) -> Vec<usize> {
    let lats = f.lats_rad();
    let min = lats.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
    (0..lats.len()).filter(|&i| lats[i].abs() <= min + 1e-9).collect()
}

impl Sampler {
    pub fn new(reference: &Reference, pole_cutoff_deg: f64, t_max: f64) -> Result<Self> {
        let Reference { psi, zeta } = reference;
        if psi.quantity != Quantity::Psi || zeta.quantity != Quantity::Zeta {
            return Err(Error::Contract("reference needs a psi field and a zeta field".into()));
        }
        let tp = psi
            .time_index(0.0, 1e-12)
            .ok_or_else(|| Error::Contract("reference psi lacks a t = 0 slice".into()))?;
        let tz = zeta
            .time_index(0.0, 1e-12)
            .ok_or_else(|| Error::Contract("reference zeta lacks a t = 0 slice".into()))?;
        let rows: Vec<usize> = (0..psi.n_lat()).collect();
        let zrows: Vec<usize> = (0..zeta.n_lat()).collect();
        let eq = equator_rows(psi);
        let mut equator = Vec::new();
        for t in 0..psi.n_times() {
            if psi.times[t] > 1e-12 && psi.times[t] <= t_max + 1e-9 {
                equator.extend(slice_points(psi, t, &eq));
            }
        }
        let mut all_psi = Vec::with_capacity(psi.values.len());
        for t in 0..psi.n_times() {
            all_psi.extend(slice_points(psi, t, &rows));
        }
        Ok(Self {
            psi0: slice_points(psi, tp, &rows),
            zeta0: slice_points(zeta, tz, &zrows),
            equator,
            all_psi,
            pole_cutoff_deg,
            t_max,
        })
    }

    pub fn pool(&self, term: LossTerm) -> &[(CollocationPoint, f64)] {
        match term {
            LossTerm::Psi0 => &self.psi0,
            LossTerm::Zeta0 => &self.zeta0,
            LossTerm::Equator => &self.equator,
            LossTerm::Qcl => &self.all_psi,
            LossTerm::Residual => &[],
        }
    }

    /// `1 / mean(data^2)` for the three data terms, `alpha4` for the residual.
    pub fn auto_weights(&self, alpha4: f64) -> Result<LossWeights> {
        let w = |pool: &[(CollocationPoint, f64)], what: &str| -> Result<f64> {
            let v: Vec<f64> = pool.iter().map(|p| p.1).collect();
            if v.is_empty() {
                return Err(Error::DegenerateReference(format!("no {what} data")));
            }
            Ok(1.0 / mean_square(&v, what)?)
        };
        LossWeights::new([
            w(&self.psi0, "psi at t = 0")?,
            w(&self.zeta0, "zeta at t = 0")?,
            w(&self.equator, "equator psi")?,
            alpha4,
        ])
    }

    /// `n` data points of `term` drawn without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, term: LossTerm, n: usize, rng: &mut R) -> Result<Vec<(CollocationPoint, f64)>> {
        let pool = self.pool(term);
        if n > pool.len() {
            return Err(Error::Contract(format!(
                "batch of {n} exceeds the {} available points for {term:?}",
                pool.len()
            )));
        }
        Ok(index::sample(rng, pool.len(), n).into_iter().map(|k| pool[k]).collect())
    }

    /// `n` uniform points with `|phi| < cutoff`, `lambda in [0, 2 pi)`,
    /// `t in [0, t_max]`.
    pub fn sample_residual<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<CollocationPoint> {
        let c = self.pole_cutoff_deg.to_radians();
        (0..n)
            .map(|_| {
                CollocationPoint::new(
                    rng.gen_range(-c..c),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                    rng.gen_range(0.0..=self.t_max),
                )
            })
            .collect()
    }

    pub fn sample_dqc<R: Rng + ?Sized>(&self, sizes: &[usize], rng: &mut R) -> Result<DqcBatches> {
        Ok(DqcBatches {
            psi0: self.sample(LossTerm::Psi0, sizes[0], rng)?,
            zeta0: self.sample(LossTerm::Zeta0, sizes[1], rng)?,
            equator: self.sample(LossTerm::Equator, sizes[2], rng)?,
            residual: self.sample_residual(sizes[3], rng),
        })
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != self.m.len() || params.len() != self.m.len() {
            return Err(Error::Structure(format!(
                "optimizer sized for {} parameters, got {} params and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient at parameter {k}")));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Loss before the update of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub total: f64,
    /// DQC components `L1..L4`.
    pub components: Option<[f64; 4]>,
    pub lr: f64,
}

impl fmt::Display for HistoryRow {
    /// `iter total L1 L2 L3 L4 lr` for DQC, `iter total` for QCL.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:e}", self.iter, self.total)?;
        if let Some(c) = self.components {
            write!(f, " {:e} {:e} {:e} {:e} {:e}", c[0], c[1], c[2], c[3], self.lr)?;
        }
        Ok(())
    }
}

/// Receives progress from [`train`].
pub trait TrainObserver {
    fn iteration(&mut self, _row: &HistoryRow) -> Result<()> {
        Ok(())
    }
    fn checkpoint(&mut self, _ck: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<HistoryRow>,
    pub weights: Option<LossWeights>,
}

/// Runs the configured loop. On a numerical failure the observer receives a
/// checkpoint of the last finite parameters before the error is returned.
pub fn train(config: &TrainConfig, reference: &Reference, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    config.validate()?;
    let mut model_config = config.model.clone();
    model_config.rng_seed = config.rng_seed;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let params = ModelParams::init(&model_config, &mut rng);
    let sampler = Sampler::new(reference, config.pole_cutoff_deg, config.t_max)?;
    let weights = match config.mode {
        TrainMode::Qcl => None,
        TrainMode::Dqc => Some(match config.weights {
            Some(w) => LossWeights::new(w)?,
            None => sampler.auto_weights(config.alpha4)?,
        }),
    };
    let residual = BveResidual {
        consts: config.consts,
        strict_r_scaling: config.strict_r_scaling,
    };
    let mut flat = params.to_vec();
    let mut adam = Adam::new(flat.len());
    let mut history = Vec::with_capacity(config.iterations);
    let mut current = params;

    for it in 1..=config.iterations {
        let model = Model::new(&model_config, &current)?;
        let mut step = || -> Result<(HistoryRow, Vec<f64>)> {
            match config.mode {
                TrainMode::Qcl => {
                    let batch = sampler.sample(LossTerm::Qcl, config.batch_sizes[0], &mut rng)?;
                    let (points, targets) = split(&batch);
                    let loss = ValueLoss {
                        points,
                        targets,
                        weight: 1.0,
                    };
                    let e = model.evaluate(&[&loss], config.reduction())?;
                    let row = HistoryRow {
                        iter: it,
                        total: e.total,
                        components: None,
                        lr: config.learning_rate,
                    };
                    Ok((row, e.gradient))
                }
                TrainMode::Dqc => {
                    let batches = sampler.sample_dqc(&config.batch_sizes, &mut rng)?;
                    let (loss, grad) =
                        dqc_loss_and_gradient(&model, &batches, weights.as_ref().unwrap(), residual, config.reduction())?;
                    let row = HistoryRow {
                        iter: it,
                        total: loss.total,
                        components: Some(loss.components),
                        lr: config.learning_rate,
                    };
                    Ok((row, grad))
                }
            }
        };
        let result = step().and_then(|(row, grad)| {
            if !row.total.is_finite() {
                return Err(Error::Numerical(format!("loss is {} at iteration {it}", row.total)));
            }
            adam.step(&mut flat, &grad, config.learning_rate)?;
            Ok(row)
        });
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                observer.checkpoint(&Checkpoint::new(model_config.clone(), current, (it - 1) as u64))?;
                return Err(e);
            }
        };
        observer.iteration(&row)?;
        history.push(row);
        current = ModelParams::from_vec(&model_config, &flat)?;
        if config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0 && it != config.iterations {
            observer.checkpoint(&Checkpoint::new(model_config.clone(), current.clone(), it as u64))?;
        }
    }
    let checkpoint = Checkpoint::new(model_config, current, config.iterations as u64);
    observer.checkpoint(&checkpoint)?;
    Ok(TrainOutcome {
        checkpoint,
        history,
        weights,
    })
}

/// Model stream function (and vorticity, if asked) on a lat-lon grid given
/// in `angle_unit` coordinates.
pub fn predict_fields(
    checkpoint: &Checkpoint,
    template: &Field,
    times: &[f64],
    consts: &PhysicsConstants,
    with_zeta: bool,
) -> Result<(Field, Option<Field>)> {
    let model = Model::new(&checkpoint.config, &checkpoint.params)?;
    let lats = template.lats_rad();
    let lons = template.lons_rad();
    let mut points = Vec::with_capacity(times.len() * lats.len() * lons.len());
    for &t in times {
        for &la in &lats {
            for &lo in &lons {
                points.push(CollocationPoint::new(la, lo, t));
            }
        }
    }
    use rayon::prelude::*;
    let (psi, zeta): (Vec<f64>, Vec<f64>) = if with_zeta {
        let pairs: Result<Vec<(f64, f64)>> = points
            .par_iter()
            .map(|p| {
                let jet = model.jet(JetSpace::vorticity(), p);
                Ok((jet.value, crate::bve::vorticity_from_jet(&jet, consts)?))
            })
            .collect();
        pairs?.into_iter().unzip()
    } else {
        (points.par_iter().map(|p| model.value(p)).collect(), Vec::new())
    };
    let make = |quantity, values| {
        Field::new(
            quantity,
            template.units.clone(),
            template.angle_unit,
            times.to_vec(),
            template.lats.clone(),
            template.lons.clone(),
            values,
        )
    };
    let psi = make(Quantity::Psi, psi)?;
    let zeta = if with_zeta { Some(make(Quantity::Zeta, zeta)?) } else { None };
    Ok((psi, zeta))
}
