//! Spectral reference solver for the barotropic vorticity equation.
//!
//! Vorticity is held as spherical-harmonic coefficients `zeta_n^m`,
//! `0 <= m <= n <= L`, with orthonormal harmonics
//! `Y_n^m = Pbar_n^m(sin phi) e^{i m lambda} / sqrt(2 pi)` where
//! `int_{-1}^{1} Pbar^2 = 1`. A real field is
//!
//! ```text
//! f = sum_n c_n^0 Y_n^0 + 2 Re sum_{m>0} sum_n c_n^m Y_n^m
//! ```
//!
//! The tendency `-(2 Omega / r^2) psi_lambda - J(psi, zeta)` is evaluated
//! by the transform method on a Gaussian grid and stepped with leapfrog and
//! a Robert–Asselin filter.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bve::PhysicsConstants;
use crate::data::{Field, Quantity};
use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION: usize = 42;
pub const DEFAULT_ROBERT: f64 = 0.02;

/// Number of coefficients with `0 <= m <= n <= l`.
pub fn n_coeffs(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

/// Position of `(m, n)` in a coefficient vector of truncation `l`.
pub fn coeff_index(l: usize, m: usize, n: usize) -> usize {
    debug_assert!(m <= n && n <= l);
    m * (l + 1) - m * (m.saturating_sub(1)) / 2 + (n - m)
}

fn eps(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    ((n * n - m * m) / (4.0 * n * n - 1.0)).sqrt()
}

/// `Pbar_n^m(mu)` for `0 <= m <= n <= nmax`, indexed by
/// [`coeff_index`]`(nmax, m, n)`, with the Condon–Shortley phase.
pub fn legendre_table(nmax: usize, mu: f64) -> Vec<f64> {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    let mut out = vec![0.0; n_coeffs(nmax)];
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..=nmax {
        if m > 0 {
            pmm *= -(((2 * m + 1) as f64) / ((2 * m) as f64)).sqrt() * s;
        }
        out[coeff_index(nmax, m, m)] = pmm;
        if m == nmax {
            break;
        }
        let mut p2 = pmm;
        let mut p1 = mu * pmm / eps(m, m + 1);
        out[coeff_index(nmax, m, m + 1)] = p1;
        for n in m + 2..=nmax {
            let p = (mu * p1 - eps(m, n - 1) * p2) / eps(m, n);
            out[coeff_index(nmax, m, n)] = p;
            p2 = p1;
            p1 = p;
        }
    }
    out
}

/// Gauss–Legendre nodes (descending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 1..=n {
        let mut z = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x.push(z);
        w.push(2.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

/// Gaussian latitudes (north to south) and equally spaced longitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Radians.
    pub latitudes: Vec<f64>,
    /// Radians, `2 pi j / n_lon`.
    pub longitudes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    pub fn gaussian(n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < 2 || n_lon < 3 {
            return Err(Error::Config(format!("grid {n_lat}x{n_lon} too small")));
        }
        let (mu, weights) = gauss_legendre(n_lat);
        Ok(Self {
            latitudes: mu.iter().map(|m| m.asin()).collect(),
            longitudes: (0..n_lon).map(|j| 2.0 * PI * j as f64 / n_lon as f64).collect(),
            weights,
        })
    }

    /// The usual quadratic-alias-free grid for truncation `l`: an even
    /// `n_lon >= 3l + 1` and `n_lat = n_lon / 2`.
    pub fn for_truncation(l: usize) -> Self {
        let n_lon = (3 * l + 2).next_multiple_of(2);
        Self::gaussian(n_lon / 2, n_lon).expect("valid grid")
    }

    pub fn n_lat(&self) -> usize {
        self.latitudes.len()
    }

    pub fn n_lon(&self) -> usize {
        self.longitudes.len()
    }
}

/// Spectral vorticity at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub truncation: usize,
    pub coeffs: Vec<Complex64>,
    pub consts: PhysicsConstants,
    pub time: f64,
}

impl SpectralState {
    pub fn zero(truncation: usize, consts: PhysicsConstants) -> Self {
        Self {
            truncation,
            coeffs: vec![Complex64::new(0.0, 0.0); n_coeffs(truncation)],
            consts,
            time: 0.0,
        }
    }

    pub fn coeff(&self, m: usize, n: usize) -> Complex64 {
        self.coeffs[coeff_index(self.truncation, m, n)]
    }

    /// `sum |zeta_n^m|^2` with the `m > 0` terms doubled, i.e. the integral
    /// of `zeta^2` over the unit sphere.
    pub fn enstrophy(&self) -> f64 {
        weighted_norm(self.truncation, &self.coeffs)
    }
}

fn weighted_norm(l: usize, c: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for m in 0..=l {
        let w = if m == 0 { 1.0 } else { 2.0 };
        for n in m..=l {
            acc += w * c[coeff_index(l, m, n)].norm_sqr();
        }
    }
    acc
}

/// `psi_n^m = -r^2 zeta_n^m / (n (n + 1))`, `psi_0^0 = 0`.
pub fn invert_laplacian(l: usize, zeta: &[Complex64], consts: &PhysicsConstants) -> Vec<Complex64> {
    let r2 = consts.radius * consts.radius;
    let mut out = vec![Complex64::new(0.0, 0.0); zeta.len()];
    for m in 0..=l {
        for n in m.max(1)..=l {
            let k = coeff_index(l, m, n);
            out[k] = -zeta[k] * r2 / (n * (n + 1)) as f64;
        }
    }
    out
}

/// `zeta_n^m = -n (n + 1) psi_n^m / r^2`.
pub fn laplacian(l: usize, psi: &[Complex64], consts: &PhysicsConstants) -> Vec<Complex64> {
    let r2 = consts.radius * consts.radius;
    let mut out = psi.to_vec();
    for m in 0..=l {
        for n in m..=l {
            out[coeff_index(l, m, n)] *= -((n * (n + 1)) as f64) / r2;
        }
    }
    out
}

/// Drops coefficients with `n > to`.
pub fn truncate(from: usize, coeffs: &[Complex64], to: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n_coeffs(to)];
    for m in 0..=to.min(from) {
        for n in m..=to.min(from) {
            out[coeff_index(to, m, n)] = coeffs[coeff_index(from, m, n)];
        }
    }
    out
}

/// Grid transforms for one truncation.
#[derive(Clone)]
pub struct Transform {
    grid: Grid,
    l: usize,
    /// `[lat][coeff]` values of `Pbar`.
    p: Vec<f64>,
    /// `[lat][coeff]` values of `(1 - mu^2) dPbar/dmu`.
    h: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform")
            .field("truncation", &self.l)
            .field("n_lat", &self.grid.n_lat())
            .field("n_lon", &self.grid.n_lon())
            .finish()
    }
}

impl Transform {
    pub fn new(grid: Grid, truncation: usize) -> Result<Self> {
        let l = truncation;
        if l == 0 {
            return Err(Error::Config("truncation must be at least 1".into()));
        }
        if grid.n_lon() < 2 * l + 1 {
            return Err(Error::Config(format!(
                "{} longitudes cannot resolve truncation {l}; need at least {}",
                grid.n_lon(),
                2 * l + 1
            )));
        }
        if grid.n_lat() < l + 1 {
            return Err(Error::Config(format!(
                "{} Gaussian latitudes cannot resolve truncation {l}; need at least {}",
                grid.n_lat(),
                l + 1
            )));
        }
        let nc = n_coeffs(l);
        let mut p = Vec::with_capacity(grid.n_lat() * nc);
        let mut h = Vec::with_capacity(grid.n_lat() * nc);
        for &lat in &grid.latitudes {
            let ext = legendre_table(l + 1, lat.sin());
            for m in 0..=l {
                for n in m..=l {
                    p.push(ext[coeff_index(l + 1, m, n)]);
                    let up = -(n as f64) * eps(m, n + 1) * ext[coeff_index(l + 1, m, n + 1)];
                    let down = if n > m {
                        (n + 1) as f64 * eps(m, n) * ext[coeff_index(l + 1, m, n - 1)]
                    } else {
                        0.0
                    };
                    h.push(up + down);
                }
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n_lon());
        let inv = planner.plan_fft_inverse(grid.n_lon());
        Ok(Self {
            grid,
            l,
            p,
            h,
            fwd,
            inv,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn truncation(&self) -> usize {
        self.l
    }

    /// Coefficients of a real grid field (`n_lat x n_lon`, north to south).
    pub fn analyze(&self, values: &[f64]) -> Result<Vec<Complex64>> {
        let (nlat, nlon) = (self.grid.n_lat(), self.grid.n_lon());
        if values.len() != nlat * nlon {
            return Err(Error::Structure(format!(
                "{} values for a {nlat}x{nlon} grid",
                values.len()
            )));
        }
        let nc = n_coeffs(self.l);
        let scale = (2.0 * PI).sqrt() / nlon as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); nc];
        let mut row = vec![Complex64::new(0.0, 0.0); nlon];
        for j in 0..nlat {
            for (r, v) in row.iter_mut().zip(&values[j * nlon..(j + 1) * nlon]) {
                *r = Complex64::new(*v, 0.0);
            }
            self.fwd.process(&mut row);
            let w = self.grid.weights[j] * scale;
            let pj = &self.p[j * nc..(j + 1) * nc];
            for m in 0..=self.l {
                let fm = row[m] * w;
                let base = coeff_index(self.l, m, m);
                for k in 0..=self.l - m {
                    out[base + k] += fm * pj[base + k];
                }
            }
        }
        Ok(out)
    }

    fn synth_with(&self, table: &[f64], coeffs: &[Complex64], dlambda: bool) -> (Vec<f64>, f64) {
        let (nlat, nlon) = (self.grid.n_lat(), self.grid.n_lon());
        let nc = n_coeffs(self.l);
        let inv_sqrt = 1.0 / (2.0 * PI).sqrt();
        let mut out = Vec::with_capacity(nlat * nlon);
        let mut row = vec![Complex64::new(0.0, 0.0); nlon];
        let mut imag: f64 = 0.0;
        for j in 0..nlat {
            row.iter_mut().for_each(|r| *r = Complex64::new(0.0, 0.0));
            let tj = &table[j * nc..(j + 1) * nc];
            for m in 0..=self.l {
                let base = coeff_index(self.l, m, m);
                let mut g = Complex64::new(0.0, 0.0);
                for k in 0..=self.l - m {
                    g += coeffs[base + k] * tj[base + k];
                }
                g *= inv_sqrt;
                if dlambda {
                    g *= Complex64::new(0.0, m as f64);
                }
                if m == 0 {
                    row[0] = g;
                } else {
                    row[m] = g;
                    row[nlon - m] = g.conj();
                }
            }
            self.inv.process(&mut row);
            for r in &row {
                imag = imag.max(r.im.abs());
                out.push(r.re);
            }
        }
        (out, imag)
    }

    /// Grid values of the field with coefficients `coeffs`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.synth_with(&self.p, coeffs, false).0
    }

    /// [`synthesize`](Self::synthesize) plus the largest imaginary part met
    /// before it was discarded.
    pub fn synthesize_with_residue(&self, coeffs: &[Complex64]) -> (Vec<f64>, f64) {
        self.synth_with(&self.p, coeffs, false)
    }

    pub fn synthesize_dlambda(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.synth_with(&self.p, coeffs, true).0
    }

    /// `cos(phi) d/dphi` of the field on the grid.
    pub fn synthesize_cos_dphi(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.synth_with(&self.h, coeffs, false).0
    }

    pub fn synthesize_dphi(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let nlon = self.grid.n_lon();
        let mut v = self.synthesize_cos_dphi(coeffs);
        for (j, row) in v.chunks_mut(nlon).enumerate() {
            let c = self.grid.latitudes[j].cos();
            row.iter_mut().for_each(|x| *x /= c);
        }
        v
    }

    /// `d zeta / dt` for vorticity coefficients `zeta`.
    pub fn tendency(&self, zeta: &[Complex64], consts: &PhysicsConstants) -> Result<Vec<Complex64>> {
        let l = self.l;
        let psi = invert_laplacian(l, zeta, consts);
        let psi_l = self.synthesize_dlambda(&psi);
        let psi_h = self.synthesize_cos_dphi(&psi);
        let zeta_l = self.synthesize_dlambda(zeta);
        let zeta_h = self.synthesize_cos_dphi(zeta);
        let nlon = self.grid.n_lon();
        let r2 = consts.radius * consts.radius;
        let mut jac = Vec::with_capacity(psi_l.len());
        for (j, lat) in self.grid.latitudes.iter().enumerate() {
            let c2 = lat.cos().powi(2);
            for k in j * nlon..(j + 1) * nlon {
                jac.push((psi_l[k] * zeta_h[k] - psi_h[k] * zeta_l[k]) / (r2 * c2));
            }
        }
        let mut out = self.analyze(&jac)?;
        let k = 2.0 * consts.omega / r2;
        for m in 0..=l {
            for n in m..=l {
                let i = coeff_index(l, m, n);
                out[i] = -out[i] - Complex64::new(0.0, k * m as f64) * psi[i];
            }
        }
        Ok(out)
    }

    /// Evaluates a field at arbitrary latitudes and longitudes (radians).
    pub fn evaluate_at(&self, coeffs: &[Complex64], lats: &[f64], lons: &[f64]) -> Vec<f64> {
        evaluate_at(self.l, coeffs, lats, lons)
    }
}

/// Evaluates a truncation-`l` field at arbitrary latitudes and longitudes
/// (radians) by direct summation.
pub fn evaluate_at(l: usize, coeffs: &[Complex64], lats: &[f64], lons: &[f64]) -> Vec<f64> {
    let inv_sqrt = 1.0 / (2.0 * PI).sqrt();
    let mut out = Vec::with_capacity(lats.len() * lons.len());
    let mut g = vec![Complex64::new(0.0, 0.0); l + 1];
    for &lat in lats {
        let p = legendre_table(l, lat.sin());
        for (m, gm) in g.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in m..=l {
                let k = coeff_index(l, m, n);
                acc += coeffs[k] * p[k];
            }
            *gm = acc * inv_sqrt;
        }
        for &lon in lons {
            let mut v = g[0].re;
            for (m, gm) in g.iter().enumerate().skip(1) {
                v += 2.0 * (gm * Complex64::from_polar(1.0, m as f64 * lon)).re;
            }
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemConfig {
    pub truncation: usize,
    pub dt: f64,
    pub robert_coeff: f64,
    pub total_time: f64,
    pub snapshot_interval: f64,
    pub consts: PhysicsConstants,
    /// Gaussian grid `(n_lat, n_lon)`; `None` picks [`Grid::for_truncation`].
    pub grid: Option<(usize, usize)>,
}

impl SemConfig {
    pub fn new(dt: f64, total_time: f64, snapshot_interval: f64, consts: PhysicsConstants) -> Self {
        Self {
            truncation: DEFAULT_TRUNCATION,
            dt,
            robert_coeff: DEFAULT_ROBERT,
            total_time,
            snapshot_interval,
            consts,
            grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..1.0).contains(&self.robert_coeff) {
            return Err(Error::Config(format!("robert coefficient {} outside [0, 1)", self.robert_coeff)));
        }
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(Error::Config(format!("total time must be >= 0, got {}", self.total_time)));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval.is_finite()) {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        self.steps_per_snapshot()?;
        Ok(())
    }

    pub fn steps_per_snapshot(&self) -> Result<usize> {
        let s = (self.snapshot_interval / self.dt).round();
        if s < 1.0 || (s * self.dt - self.snapshot_interval).abs() > 1e-9 * self.snapshot_interval {
            return Err(Error::Config(format!(
                "snapshot interval {} is not a whole number of steps of {}",
                self.snapshot_interval, self.dt
            )));
        }
        Ok(s as usize)
    }

    /// Snapshot count including `t = 0`.
    pub fn n_snapshots(&self) -> usize {
        (self.total_time / self.snapshot_interval + 1e-9).floor() as usize + 1
    }

    pub fn transform(&self) -> Result<Transform> {
        let grid = match self.grid {
            Some((nlat, nlon)) => Grid::gaussian(nlat, nlon)?,
            None => Grid::for_truncation(self.truncation),
        };
        Transform::new(grid, self.truncation)
    }
}

/// Leapfrog integrator with a forward-Euler start and Robert–Asselin filter.
#[derive(Clone, Debug)]
pub struct Stepper {
    transform: Transform,
    dt: f64,
    robert: f64,
    prev: Option<Vec<Complex64>>,
    state: SpectralState,
    steps: usize,
}

impl Stepper {
    pub fn new(transform: Transform, config: &SemConfig, initial: SpectralState) -> Result<Self> {
        config.validate()?;
        if initial.truncation != transform.truncation() {
            return Err(Error::Structure("state and transform truncations differ".into()));
        }
        Ok(Self {
            transform,
            dt: config.dt,
            robert: config.robert_coeff,
            prev: None,
            state: initial,
            steps: 0,
        })
    }

    pub fn state(&self) -> &SpectralState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn step(&mut self) -> Result<()> {
        let consts = self.state.consts;
        let tend = self.transform.tendency(&self.state.coeffs, &consts)?;
        let curr = &self.state.coeffs;
        let next: Vec<Complex64> = match &self.prev {
            None => curr.iter().zip(&tend).map(|(c, d)| c + d * self.dt).collect(),
            Some(prev) => prev.iter().zip(&tend).map(|(p, d)| p + d * (2.0 * self.dt)).collect(),
        };
        let step = self.steps + 1;
        let time = self.state.time + self.dt;
        if next.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Instability {
                step,
                time,
                reason: "non-finite spectral coefficient".into(),
            });
        }
        let filtered: Vec<Complex64> = match &self.prev {
            None => curr.clone(),
            Some(prev) => curr
                .iter()
                .zip(&next)
                .zip(prev)
                .map(|((c, n), p)| c + (n - c * 2.0 + p) * self.robert)
                .collect(),
        };
        self.prev = Some(filtered);
        self.state.coeffs = next;
        self.state.time = step as f64 * self.dt;
        self.steps = step;
        Ok(())
    }
}

fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 {
        return (0, 0, 0.0);
    }
    let asc = axis[1] > axis[0];
    let pos = |v: f64| if asc { v } else { -v };
    let xv = pos(x);
    if xv <= pos(axis[0]) {
        return (0, 0, 0.0);
    }
    if xv >= pos(axis[n - 1]) {
        return (n - 1, n - 1, 0.0);
    }
    let k = axis.partition_point(|&a| pos(a) <= xv) - 1;
    let w = (xv - pos(axis[k])) / (pos(axis[k + 1]) - pos(axis[k]));
    (k, k + 1, w)
}

fn periodic_bracket(lons: &[f64], x: f64) -> (usize, usize, f64) {
    let n = lons.len();
    let two_pi = 2.0 * PI;
    let rel = |v: f64| (v - lons[0]).rem_euclid(two_pi);
    let xr = rel(x);
    let k = lons.partition_point(|&a| rel(a) <= xr).saturating_sub(1);
    let (lo, hi) = (rel(lons[k]), if k + 1 < n { rel(lons[k + 1]) } else { two_pi });
    let w = if hi > lo { (xr - lo) / (hi - lo) } else { 0.0 };
    (k, (k + 1) % n, w)
}

/// Bilinear interpolation of one slice of `field` onto a target grid
/// (radians). Longitudes wrap; latitudes beyond the data are held at the
/// outermost row.
pub fn bilinear_resample(field: &Field, t: usize, lats: &[f64], lons: &[f64]) -> Vec<f64> {
    let src_lat = field.lats_rad();
    let src_lon = field.lons_rad();
    let s = field.slice(t);
    let nlon = field.n_lon();
    let mut out = Vec::with_capacity(lats.len() * lons.len());
    for &la in lats {
        let (i0, i1, wi) = bracket(&src_lat, la);
        for &lo in lons {
            let (j0, j1, wj) = periodic_bracket(&src_lon, lo);
            let a = s[i0 * nlon + j0] * (1.0 - wj) + s[i0 * nlon + j1] * wj;
            let b = s[i1 * nlon + j0] * (1.0 - wj) + s[i1 * nlon + j1] * wj;
            out.push(a * (1.0 - wi) + b * wi);
        }
    }
    out
}

/// One row of the run diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub step: usize,
    pub time: f64,
    /// `zeta_0^0`.
    pub mean_vorticity: f64,
    pub enstrophy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub zeta: Field,
    pub psi: Field,
    pub diagnostics: Vec<Diagnostic>,
}

/// Spectral coefficients of slice `t` of a lat-lon field, via bilinear
/// interpolation onto the transform grid.
pub fn analyze_field(transform: &Transform, field: &Field, t: usize) -> Result<Vec<Complex64>> {
    let g = transform.grid();
    transform.analyze(&bilinear_resample(field, t, &g.latitudes, &g.longitudes))
}

/// `k * interval`, rounded to nine decimals so that e.g. `10 * 0.3` is `3`.
pub fn snapshot_time(k: usize, interval: f64) -> f64 {
    (k as f64 * interval * 1e9).round() / 1e9
}

/// Evolves the first slice of `initial_zeta` and returns `zeta` and `psi`
/// snapshots on the input grid.
pub fn evolve(initial_zeta: &Field, config: &SemConfig) -> Result<Evolution> {
    evolve_with(initial_zeta, config, |_, _, _| Ok(()))
}

/// [`evolve`], calling `on_snapshot(index, zeta_slice, psi_slice)` as each
/// snapshot is produced. Snapshots delivered before an error stay valid.
pub fn evolve_with<F>(initial_zeta: &Field, config: &SemConfig, mut on_snapshot: F) -> Result<Evolution>
where
    F: FnMut(usize, &[f64], &[f64]) -> Result<()>,
{
    config.validate()?;
    if initial_zeta.quantity != Quantity::Zeta {
        return Err(Error::Contract("evolve needs a vorticity field".into()));
    }
    let transform = config.transform()?;
    let l = transform.truncation();
    let coeffs = analyze_field(&transform, initial_zeta, 0)?;
    let initial = SpectralState {
        truncation: l,
        coeffs,
        consts: config.consts,
        time: 0.0,
    };
    let lats = initial_zeta.lats_rad();
    let lons = initial_zeta.lons_rad();
    let per = config.steps_per_snapshot()?;
    let count = config.n_snapshots();
    let mut stepper = Stepper::new(transform, config, initial)?;
    let mut zeta_vals = Vec::with_capacity(count * lats.len() * lons.len());
    let mut psi_vals = Vec::with_capacity(zeta_vals.capacity());
    let mut diagnostics = Vec::new();
    for k in 0..count {
        if k > 0 {
            for _ in 0..per {
                stepper.step()?;
            }
        }
        let st = stepper.state();
        let z = evaluate_at(l, &st.coeffs, &lats, &lons);
        let p = evaluate_at(l, &invert_laplacian(l, &st.coeffs, &config.consts), &lats, &lons);
        on_snapshot(k, &z, &p)?;
        zeta_vals.extend(z);
        psi_vals.extend(p);
        diagnostics.push(Diagnostic {
            step: stepper.steps(),
            time: st.time,
            mean_vorticity: st.coeff(0, 0).re,
            enstrophy: st.enstrophy(),
        });
    }
    let times: Vec<f64> = (0..count).map(|k| snapshot_time(k, config.snapshot_interval)).collect();
    let make = |quantity, values| {
        Field::new(
            quantity,
            initial_zeta.units.clone(),
            initial_zeta.angle_unit,
            times.clone(),
            initial_zeta.lats.clone(),
            initial_zeta.lons.clone(),
            values,
        )
    };
    Ok(Evolution {
        zeta: make(Quantity::Zeta, zeta_vals)?,
        psi: make(Quantity::Psi, psi_vals)?,
        diagnostics,
    })
}
