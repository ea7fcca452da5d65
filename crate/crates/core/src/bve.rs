//! The barotropic vorticity equation in streamline form, the vorticity of a
//! stream function, and the rotating single-mode (Rossby–Haurwitz) solution.

use serde::{Deserialize, Serialize};

use crate::diff::{DerivativeJet, MultiIndex, BVE_PARTIALS};
use crate::error::{Error, Result};
use crate::qnn::CollocationPoint;

/// Below this `|cos(phi)|` the metric terms are treated as singular.
pub const MIN_COS_PHI: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// Rotation rate, radians per time unit.
    pub omega: f64,
    pub radius: f64,
}

impl PhysicsConstants {
    pub const EARTH_OMEGA: f64 = 7.292e-5;
    pub const EARTH_RADIUS: f64 = 6.371e6;

    pub fn new(omega: f64, radius: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite() && radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "omega and radius must be positive, got {omega}, {radius}"
            )));
        }
        Ok(Self { omega, radius })
    }

    /// Unit sphere rotating once per `2 pi` time units.
    pub fn unit() -> Self {
        Self {
            omega: 1.0,
            radius: 1.0,
        }
    }

    /// Earth in SI units.
    pub fn earth() -> Self {
        Self {
            omega: Self::EARTH_OMEGA,
            radius: Self::EARTH_RADIUS,
        }
    }
}

/// A spherical harmonic mode: order `m`, degree `l >= m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpec {
    pub m: u32,
    pub l: u32,
}

impl ModeSpec {
    pub fn new(m: u32, l: u32) -> Result<Self> {
        if l < m {
            return Err(Error::Config(format!("mode needs l >= m, got m={m}, l={l}")));
        }
        Ok(Self { m, l })
    }

    /// Eigenvalue factor `l (l + 1)` of `-r^2 laplacian`.
    pub fn laplacian_factor(&self) -> f64 {
        (self.l * (self.l + 1)) as f64
    }
}

/// Associated Legendre function `P_l^m(x)` with the Condon–Shortley phase,
/// unnormalised (Ferrers convention), by upward recurrence in `l`.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^(m/2)
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let p = (x * (2 * ll - 1) as f64 * pm1 - (ll + m - 1) as f64 * pm2) / (ll - m) as f64;
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

/// Phase rate `sigma = -2 Omega m / (l (l + 1))` of a single rotating mode.
pub fn dispersion(mode: ModeSpec, consts: &PhysicsConstants) -> Result<f64> {
    if mode.l == 0 {
        return Err(Error::Contract("dispersion undefined for l = 0".into()));
    }
    Ok(-2.0 * consts.omega * mode.m as f64 / mode.laplacian_factor())
}

/// `psi = P_l^m(sin phi) (cos m lambda cos sigma t + sin m lambda sin sigma t)`,
/// an exact solution of the equation.
pub fn analytic_psi(mode: ModeSpec, consts: &PhysicsConstants, point: &CollocationPoint) -> Result<f64> {
    let sigma = if mode.l == 0 { 0.0 } else { dispersion(mode, consts)? };
    let m = mode.m as f64;
    let p = assoc_legendre(mode.l, mode.m, point.phi.sin());
    let (sl, cl) = (m * point.lambda).sin_cos();
    let (st, ct) = (sigma * point.t).sin_cos();
    Ok(p * (cl * ct + sl * st))
}

fn metric(phi: f64) -> Result<(f64, f64, f64)> {
    let c = phi.cos();
    if c.abs() < MIN_COS_PHI || !c.is_finite() {
        return Err(Error::Singularity { phi, cos_phi: c });
    }
    Ok((c, phi.tan(), 1.0 / (c * c)))
}

/// Residual of the streamline-form equation.
///
/// The default form has no `1/r^2` on the three time-derivative terms or on
/// the Coriolis term, exactly the form used for training on the unit sphere.
/// With `strict_r_scaling` the whole expression is the vorticity form
/// `zeta_t + (2 Omega / r^2) psi_lambda + J(psi, zeta)`, which differs only
/// when `r != 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BveResidual {
    pub consts: PhysicsConstants,
    pub strict_r_scaling: bool,
}

impl BveResidual {
    pub fn new(consts: PhysicsConstants) -> Self {
        Self {
            consts,
            strict_r_scaling: false,
        }
    }

    /// `F` from partials ordered as [`BVE_PARTIALS`].
    pub fn evaluate_partials(&self, phi: f64, d: &[f64; 14]) -> Result<f64> {
        Ok(self.evaluate_with_gradient(phi, d)?.0)
    }

    /// `F` and `dF / d partial` for each entry of [`BVE_PARTIALS`].
    pub fn evaluate_with_gradient(&self, phi: f64, d: &[f64; 14]) -> Result<(f64, [f64; 14])> {
        let (cos, tan, sec2) = metric(phi)?;
        let r2 = self.consts.radius * self.consts.radius;
        let two_omega = 2.0 * self.consts.omega;
        let (kt, kc, pj) = if self.strict_r_scaling {
            (1.0 / r2, two_omega / r2, 1.0 / (r2 * r2 * cos))
        } else {
            (1.0, two_omega, 1.0 / (r2 * cos))
        };
        let time = -tan * d[5] + d[8] + sec2 * d[9];
        // r^2 d zeta / d phi and r^2 d zeta / d lambda
        let a = -sec2 * d[1] - tan * d[2] + d[6] + 2.0 * tan * sec2 * d[3] + sec2 * d[10];
        let b = -tan * d[4] + d[11] + sec2 * d[7];
        let f = kt * time + kc * d[0] + pj * (d[0] * a - d[1] * b);

        let mut g = [0.0; 14];
        g[0] = kc + pj * a;
        g[1] = -pj * d[0] * sec2 - pj * b;
        g[2] = -pj * d[0] * tan;
        g[3] = pj * d[0] * 2.0 * tan * sec2;
        g[4] = pj * d[1] * tan;
        g[5] = -kt * tan;
        g[6] = pj * d[0];
        g[7] = -pj * d[1] * sec2;
        g[8] = kt;
        g[9] = kt * sec2;
        g[10] = pj * d[0] * sec2;
        g[11] = -pj * d[1];
        Ok((f, g))
    }

    pub fn evaluate(&self, jet: &DerivativeJet) -> Result<f64> {
        let mut d = [0.0; 14];
        for (slot, m) in d.iter_mut().zip(BVE_PARTIALS.iter()).take(12) {
            *slot = jet.get(*m)?;
        }
        self.evaluate_partials(jet.point.phi, &d)
    }
}

/// Residual with the default (unit-sphere) scaling.
pub fn residual(jet: &DerivativeJet, consts: &PhysicsConstants) -> Result<f64> {
    BveResidual::new(*consts).evaluate(jet)
}

/// `zeta = laplacian(psi)` from `psi_phi`, `psi_phiphi`, `psi_lambdalambda`.
pub fn vorticity_from_partials(phi: f64, psi_phi: f64, psi_phiphi: f64, psi_ll: f64, consts: &PhysicsConstants) -> Result<f64> {
    let (_, tan, sec2) = metric(phi)?;
    let r2 = consts.radius * consts.radius;
    Ok((-tan * psi_phi + psi_phiphi + sec2 * psi_ll) / r2)
}

/// `d zeta / d (psi_phi, psi_phiphi, psi_lambdalambda)`.
pub fn vorticity_gradient(phi: f64, consts: &PhysicsConstants) -> Result<[f64; 3]> {
    let (_, tan, sec2) = metric(phi)?;
    let r2 = consts.radius * consts.radius;
    Ok([-tan / r2, 1.0 / r2, sec2 / r2])
}

pub fn vorticity_from_jet(jet: &DerivativeJet, consts: &PhysicsConstants) -> Result<f64> {
    vorticity_from_partials(
        jet.point.phi,
        jet.get(MultiIndex::new(1, 0, 0))?,
        jet.get(MultiIndex::new(2, 0, 0))?,
        jet.get(MultiIndex::new(0, 2, 0))?,
        consts,
    )
}
