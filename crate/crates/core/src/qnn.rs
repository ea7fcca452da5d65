//! The quantum model: spherical pre-processing, a serial trainable-frequency
//! feature map with ansatz blocks between the encoded features, a
//! hardware-efficient ansatz, and total-magnetisation readout wrapped in
//! learnable affine maps on both ends.
//!
//! Circuit layout for `N` qubits and `l` ansatz layers:
//!
//! ```text
//! |0..0> -> enc(t) -> block -> enc(x) -> block -> enc(y) -> block -> enc(z) -> l x layer -> <sum Z>
//! ```
//!
//! `enc(r)` applies `RY(gamma[r][m] * (a_r * r + b_r))` on every qubit `m`.
//! Each block and layer is `RZ RY RZ` on every qubit followed by a CNOT chain
//! `0 -> 1 -> ... -> N-1`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Circuit, Gate, QuantumState, MAX_QUBITS};

/// Number of encoded features `(t, x, y, z)`.
pub const N_FEATURES: usize = 4;
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["t", "x", "y", "z"];

/// Default latitude cutoff keeping collocation points off the poles.
pub const DEFAULT_POLE_CUTOFF_DEG: f64 = 88.0;

/// How latitude/longitude are lifted onto three Cartesian features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereMap {
    /// `x = sin(phi) cos(lambda)`, `y = sin(phi) sin(lambda)`, `z = cos(phi)`
    /// with `phi` the latitude. The equator collapses to a single point and
    /// `(phi, lambda)` is identified with `(-phi, lambda + pi)`.
    AsPrinted,
    /// `x = cos(phi) cos(lambda)`, `y = cos(phi) sin(lambda)`, `z = sin(phi)`:
    /// the same formula with `phi` read as colatitude. Injective away from
    /// the poles.
    #[default]
    Colatitude,
}

impl SphereMap {
    /// `(x, y, z)` from `sin`/`cos` of latitude and longitude.
    #[inline]
    pub fn apply(self, sin_phi: f64, cos_phi: f64, sin_lam: f64, cos_lam: f64) -> [f64; 3] {
        match self {
            SphereMap::AsPrinted => [sin_phi * cos_lam, sin_phi * sin_lam, cos_phi],
            SphereMap::Colatitude => [cos_phi * cos_lam, cos_phi * sin_lam, sin_phi],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Entangler {
    /// CNOT `m -> m+1` for `m = 0..N-1`.
    #[default]
    Chain,
    /// The chain closed by `N-1 -> 0`.
    Ring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_qubits: usize,
    /// Ansatz layers after the feature map.
    pub ansatz_layers: usize,
    /// Ansatz blocks inside the feature map, spread evenly over the gaps
    /// between consecutive features.
    pub fm_interleave_layers: usize,
    pub sphere_map: SphereMap,
    pub entangler: Entangler,
    pub rng_seed: u64,
}

impl ModelConfig {
    pub fn new(n_qubits: usize, ansatz_layers: usize) -> Self {
        Self {
            n_qubits,
            ansatz_layers,
            fm_interleave_layers: N_FEATURES - 1,
            sphere_map: SphereMap::default(),
            entangler: Entangler::default(),
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        if self.ansatz_layers == 0 {
            return Err(Error::Config("ansatz_layers must be positive".into()));
        }
        if self.fm_interleave_layers == 0 || self.fm_interleave_layers % (N_FEATURES - 1) != 0 {
            return Err(Error::Config(format!(
                "fm_interleave_layers must be a positive multiple of {}, got {}",
                N_FEATURES - 1,
                self.fm_interleave_layers
            )));
        }
        Ok(())
    }

    pub fn theta_len(&self) -> usize {
        3 * self.n_qubits * (self.ansatz_layers + self.fm_interleave_layers)
    }

    pub fn gamma_len(&self) -> usize {
        N_FEATURES * self.n_qubits
    }

    /// Rotation angles plus encoding frequencies; `N (3l + 13)` for the
    /// default feature map.
    pub fn circuit_param_count(&self) -> usize {
        self.theta_len() + self.gamma_len()
    }

    /// Everything the optimiser sees, including the affine scalers.
    pub fn trainable_count(&self) -> usize {
        self.circuit_param_count() + 2 * N_FEATURES + 2
    }

    pub(crate) fn program(&self) -> Program {
        Program::new(self)
    }
}

/// All trainables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Ansatz angles in circuit order, three per qubit per block.
    pub theta: Vec<f64>,
    /// Encoding frequencies, feature-major: `gamma[r * N + m]`.
    pub gamma: Vec<f64>,
    /// `(scale, shift)` per feature `(t, x, y, z)`.
    pub input_affine: [[f64; 2]; N_FEATURES],
    /// `(scale, shift)` mapping the raw expectation to the stream function.
    pub output_affine: [f64; 2],
}

impl ModelParams {
    /// Initialisation: `theta ~ U[0, 2 pi)`, unit frequencies, identity
    /// affine maps.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let theta = (0..config.theta_len()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        Self {
            theta,
            gamma: vec![1.0; config.gamma_len()],
            input_affine: [[1.0, 0.0]; N_FEATURES],
            output_affine: [1.0, 0.0],
        }
    }

    /// All angles and frequencies zero, identity affine maps. The circuit is
    /// then the identity and the model returns `N` everywhere.
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            theta: vec![0.0; config.theta_len()],
            gamma: vec![0.0; config.gamma_len()],
            input_affine: [[1.0, 0.0]; N_FEATURES],
            output_affine: [1.0, 0.0],
        }
    }

    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        if self.theta.len() != config.theta_len() || self.gamma.len() != config.gamma_len() {
            return Err(Error::Config(format!(
                "parameter sizes (theta {}, gamma {}) do not match config (theta {}, gamma {})",
                self.theta.len(),
                self.gamma.len(),
                config.theta_len(),
                config.gamma_len()
            )));
        }
        Ok(())
    }

    /// Flattens in declaration order: theta, gamma, input affine, output affine.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.theta.len() + self.gamma.len() + 2 * N_FEATURES + 2);
        v.extend_from_slice(&self.theta);
        v.extend_from_slice(&self.gamma);
        for a in &self.input_affine {
            v.extend_from_slice(a);
        }
        v.extend_from_slice(&self.output_affine);
        v
    }

    pub fn from_vec(config: &ModelConfig, v: &[f64]) -> Result<Self> {
        if v.len() != config.trainable_count() {
            return Err(Error::Config(format!(
                "expected {} trainables, got {}",
                config.trainable_count(),
                v.len()
            )));
        }
        let (theta, rest) = v.split_at(config.theta_len());
        let (gamma, rest) = rest.split_at(config.gamma_len());
        let mut input_affine = [[0.0; 2]; N_FEATURES];
        for (r, a) in input_affine.iter_mut().enumerate() {
            *a = [rest[2 * r], rest[2 * r + 1]];
        }
        let k = 2 * N_FEATURES;
        Ok(Self {
            theta: theta.to_vec(),
            gamma: gamma.to_vec(),
            input_affine,
            output_affine: [rest[k], rest[k + 1]],
        })
    }
}

/// Offsets of each parameter group in the flattened trainable vector.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ParamLayout {
    pub gamma: usize,
    pub input_affine: usize,
    pub output_affine: usize,
    pub len: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig) -> Self {
        let gamma = config.theta_len();
        let input_affine = gamma + config.gamma_len();
        let output_affine = input_affine + 2 * N_FEATURES;
        Self {
            gamma,
            input_affine,
            output_affine,
            len: output_affine + 2,
        }
    }
}

/// A point on the sphere at some time. Angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollocationPoint {
    /// Latitude.
    pub phi: f64,
    /// Longitude.
    pub lambda: f64,
    pub t: f64,
}

impl CollocationPoint {
    pub fn new(phi: f64, lambda: f64, t: f64) -> Self {
        Self { phi, lambda, t }
    }

    /// Same point with the latitude clamped to `|phi| <= cutoff_deg`.
    pub fn clamped(self, cutoff_deg: f64) -> Self {
        let c = cutoff_deg.to_radians();
        Self {
            phi: self.phi.clamp(-c, c),
            ..self
        }
    }

    pub fn is_interior(&self, cutoff_deg: f64) -> bool {
        self.phi.abs() <= cutoff_deg.to_radians() + 1e-12
    }
}

/// Raw features `(t, x, y, z)` before the input affine map.
pub fn preprocess(point: &CollocationPoint, map: SphereMap) -> [f64; N_FEATURES] {
    let (sp, cp) = point.phi.sin_cos();
    let (sl, cl) = point.lambda.sin_cos();
    let [x, y, z] = map.apply(sp, cp, sl, cl);
    [point.t, x, y, z]
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Op {
    /// `RY(gamma[gamma] * feature)` on `qubit`.
    Encode {
        qubit: usize,
        feature: usize,
        gamma: usize,
    },
    /// `RZ(theta[i]) RY(theta[i+1]) RZ(theta[i+2])`, applied in that order.
    Rotor { qubit: usize, theta: usize },
    Cnot { control: usize, target: usize },
}

/// The model circuit as a parameter-indexed op list.
#[derive(Clone, Debug)]
pub(crate) struct Program {
    pub n_qubits: usize,
    pub ops: Vec<Op>,
}

impl Program {
    fn new(config: &ModelConfig) -> Self {
        let n = config.n_qubits;
        let per_gap = config.fm_interleave_layers / (N_FEATURES - 1);
        let mut ops = Vec::new();
        let mut theta = 0;
        let mut block = |ops: &mut Vec<Op>| {
            for q in 0..n {
                ops.push(Op::Rotor { qubit: q, theta });
                theta += 3;
            }
            for q in 0..n.saturating_sub(1) {
                ops.push(Op::Cnot {
                    control: q,
                    target: q + 1,
                });
            }
            if config.entangler == Entangler::Ring && n > 1 {
                ops.push(Op::Cnot {
                    control: n - 1,
                    target: 0,
                });
            }
        };
        for feature in 0..N_FEATURES {
            for q in 0..n {
                ops.push(Op::Encode {
                    qubit: q,
                    feature,
                    gamma: feature * n + q,
                });
            }
            if feature + 1 < N_FEATURES {
                for _ in 0..per_gap {
                    block(&mut ops);
                }
            }
        }
        for _ in 0..config.ansatz_layers {
            block(&mut ops);
        }
        Self { n_qubits: n, ops }
    }
}

/// The concrete gate sequence for one input. `features` are the raw
/// `(t, x, y, z)`; the input affine map is applied here.
pub fn build_circuit(config: &ModelConfig, params: &ModelParams, features: &[f64; N_FEATURES]) -> Result<Circuit> {
    config.validate()?;
    params.check(config)?;
    let scaled: Vec<f64> = features
        .iter()
        .zip(&params.input_affine)
        .map(|(r, [a, b])| a * r + b)
        .collect();
    let mut circ = Circuit::new(config.n_qubits);
    for op in config.program().ops {
        match op {
            Op::Encode { qubit, feature, gamma } => {
                circ.push(Gate::ry(qubit, params.gamma[gamma] * scaled[feature]))?;
            }
            Op::Rotor { qubit, theta } => {
                circ.push(Gate::rz(qubit, params.theta[theta]))?;
                circ.push(Gate::ry(qubit, params.theta[theta + 1]))?;
                circ.push(Gate::rz(qubit, params.theta[theta + 2]))?;
            }
            Op::Cnot { control, target } => {
                circ.push(Gate::cnot(control, target))?;
            }
        }
    }
    Ok(circ)
}

/// Raw circuit output `<sum Z>` before the output affine map.
pub fn raw_expectation(config: &ModelConfig, params: &ModelParams, point: &CollocationPoint) -> Result<f64> {
    let features = preprocess(point, config.sphere_map);
    let state: QuantumState = build_circuit(config, params, &features)?.run()?;
    Ok(state.expect_total_z())
}

/// Model stream function at `point`.
pub fn forward(config: &ModelConfig, params: &ModelParams, point: &CollocationPoint) -> Result<f64> {
    let [scale, shift] = params.output_affine;
    Ok(scale * raw_expectation(config, params, point)? + shift)
}

pub const CHECKPOINT_FORMAT: &str = "qbve-checkpoint/1";

/// Model state on disk. JSON numbers are written in shortest round-trip
/// form, so reloading is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub params: ModelParams,
    pub rng_seed: u64,
    pub step: u64,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: ModelParams, step: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            rng_seed: config.rng_seed,
            config,
            params,
            step,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unknown checkpoint format {:?}", ck.format)));
        }
        ck.config.validate()?;
        ck.params.check(&ck.config)?;
        Ok(ck)
    }

    /// Writes via a temporary sibling and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
