//! Gridded fields: the artificial two-mode initial state, block-mean
//! downsampling, and a plain-text file format.
//!
//! A field file looks like
//!
//! ```text
//! quantity psi
//! units nondimensional
//! angles degrees
//! times: 0 0.3
//! lats: -45 45
//! lons: 0 120 240
//! t 0
//! 0.1 0.2 0.3
//! 0.4 0.5 0.6
//! t 1
//! ...
//! ```
//!
//! Numbers are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bve::{analytic_psi, ModeSpec, PhysicsConstants};
use crate::error::{Error, Result};
use crate::qnn::CollocationPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Psi,
    Zeta,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Psi => "psi",
            Quantity::Zeta => "zeta",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "psi" => Some(Quantity::Psi),
            "zeta" => Some(Quantity::Zeta),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Degrees,
    Radians,
}

impl AngleUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            AngleUnit::Degrees => "degrees",
            AngleUnit::Radians => "radians",
        }
    }

    pub fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_radians(),
            AngleUnit::Radians => v,
        }
    }
}

/// Values on a `time x lat x lon` grid, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub quantity: Quantity,
    pub units: String,
    pub angle_unit: AngleUnit,
    pub times: Vec<f64>,
    pub lats: Vec<f64>,
    pub lons: Vec<f64>,
    pub values: Vec<f64>,
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
        && (v.windows(2).all(|w| w[0] < w[1]) || v.windows(2).all(|w| w[0] > w[1]))
}

impl Field {
    pub fn new(
        quantity: Quantity,
        units: impl Into<String>,
        angle_unit: AngleUnit,
        times: Vec<f64>,
        lats: Vec<f64>,
        lons: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let f = Self {
            quantity,
            units: units.into(),
            angle_unit,
            times,
            lats,
            lons,
            values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.lats.is_empty() || self.lons.is_empty() {
            return Err(Error::Structure("field has an empty axis".into()));
        }
        for (name, axis) in [("times", &self.times), ("lats", &self.lats), ("lons", &self.lons)] {
            if !strictly_monotone(axis) {
                return Err(Error::Structure(format!("{name} are not strictly monotone")));
            }
        }
        let want = self.times.len() * self.lats.len() * self.lons.len();
        if self.values.len() != want {
            return Err(Error::Structure(format!(
                "{} values for a {}x{}x{} grid",
                self.values.len(),
                self.times.len(),
                self.lats.len(),
                self.lons.len()
            )));
        }
        if self.units.chars().any(|c| c == '\n') {
            return Err(Error::Structure("units must be a single line".into()));
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_lat(&self) -> usize {
        self.lats.len()
    }

    pub fn n_lon(&self) -> usize {
        self.lons.len()
    }

    pub fn slice_len(&self) -> usize {
        self.n_lat() * self.n_lon()
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.slice_len();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[(t * self.n_lat() + i) * self.n_lon() + j]
    }

    pub fn lats_rad(&self) -> Vec<f64> {
        self.lats.iter().map(|&v| self.angle_unit.to_radians(v)).collect()
    }

    pub fn lons_rad(&self) -> Vec<f64> {
        self.lons.iter().map(|&v| self.angle_unit.to_radians(v)).collect()
    }

    /// The point at grid cell `(t, i, j)` in radians.
    pub fn point(&self, t: usize, i: usize, j: usize) -> CollocationPoint {
        CollocationPoint::new(
            self.angle_unit.to_radians(self.lats[i]),
            self.angle_unit.to_radians(self.lons[j]),
            self.times[t],
        )
    }

    /// Index of the time equal to `t` within `tol`.
    pub fn time_index(&self, t: f64, tol: f64) -> Option<usize> {
        self.times.iter().position(|&x| (x - t).abs() <= tol)
    }

    /// A new field holding the listed time slices.
    pub fn select_times(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.slice_len());
        for &k in idx {
            if k >= self.n_times() {
                return Err(Error::Structure(format!("time index {k} out of range")));
            }
            values.extend_from_slice(self.slice(k));
        }
        Field::new(
            self.quantity,
            self.units.clone(),
            self.angle_unit,
            idx.iter().map(|&k| self.times[k]).collect(),
            self.lats.clone(),
            self.lons.clone(),
            values,
        )
    }

    /// Keeps latitude rows `start..end`.
    pub fn select_lats(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_lat() {
            return Err(Error::Structure(format!("latitude range {start}..{end} invalid")));
        }
        let nlon = self.n_lon();
        let mut values = Vec::with_capacity(self.n_times() * (end - start) * nlon);
        for t in 0..self.n_times() {
            let s = self.slice(t);
            values.extend_from_slice(&s[start * nlon..end * nlon]);
        }
        Field::new(
            self.quantity,
            self.units.clone(),
            self.angle_unit,
            self.times.clone(),
            self.lats[start..end].to_vec(),
            self.lons.clone(),
            values,
        )
    }

    /// True when both fields share times, lats and lons exactly.
    pub fn same_grid(&self, other: &Field) -> bool {
        self.times == other.times
            && self.lats == other.lats
            && self.lons == other.lons
            && self.angle_unit == other.angle_unit
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: Some(path.to_path_buf()),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        fn row(out: &mut String, v: &[f64]) {
            for (k, x) in v.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{x:?}");
            }
            out.push('\n');
        }
        let mut out = String::new();
        let _ = writeln!(out, "quantity {}", self.quantity.as_str());
        let _ = writeln!(out, "units {}", self.units);
        let _ = writeln!(out, "angles {}", self.angle_unit.as_str());
        out.push_str("times: ");
        row(&mut out, &self.times);
        out.push_str("lats: ");
        row(&mut out, &self.lats);
        out.push_str("lons: ");
        row(&mut out, &self.lons);
        let nlon = self.n_lon();
        for t in 0..self.n_times() {
            let _ = writeln!(out, "t {t}");
            for r in self.slice(t).chunks(nlon) {
                row(&mut out, r);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim_end()));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .by_ref()
                .find(|(_, l)| !l.trim().is_empty())
                .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
        };
        fn floats(line: usize, s: &str) -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|_| Error::parse(line, format!("not a number: {w:?}"))))
                .collect()
        }
        let header = |line: usize, s: &str, key: &str| -> Result<String> {
            let (k, rest) = s.split_once(' ').unwrap_or((s, ""));
            if k != key {
                return Err(Error::parse(line, format!("expected `{key}` line, found {s:?}")));
            }
            Ok(rest.trim().to_string())
        };

        let (ln, s) = next("quantity")?;
        let q = header(ln, s, "quantity")?;
        let quantity = Quantity::parse(&q).ok_or_else(|| Error::parse(ln, format!("unknown quantity {q:?}")))?;
        let (ln, s) = next("units")?;
        let units = header(ln, s, "units")?;
        let (ln, s) = next("angles")?;
        let a = header(ln, s, "angles")?;
        let angle_unit = match a.as_str() {
            "degrees" => AngleUnit::Degrees,
            "radians" => AngleUnit::Radians,
            _ => return Err(Error::parse(ln, format!("unknown angle unit {a:?}"))),
        };
        let mut axes = Vec::new();
        for key in ["times:", "lats:", "lons:"] {
            let (ln, s) = next(key)?;
            let v = floats(ln, &header(ln, s, key)?)?;
            if !strictly_monotone(&v) || v.is_empty() {
                return Err(Error::parse(ln, format!("`{key}` must be a nonempty strictly monotone list")));
            }
            axes.push(v);
        }
        let lons = axes.pop().unwrap();
        let lats = axes.pop().unwrap();
        let times = axes.pop().unwrap();
        let mut values = Vec::with_capacity(times.len() * lats.len() * lons.len());
        for t in 0..times.len() {
            let (ln, s) = next(&format!("`t {t}`"))?;
            if s.split_whitespace().collect::<Vec<_>>() != ["t", &t.to_string()] {
                return Err(Error::parse(ln, format!("expected `t {t}`, found {s:?}")));
            }
            for _ in 0..lats.len() {
                let (ln, s) = next("a row of values")?;
                let r = floats(ln, s)?;
                if r.len() != lons.len() {
                    return Err(Error::parse(ln, format!("row has {} values, expected {}", r.len(), lons.len())));
                }
                values.extend(r);
            }
        }
        if let Ok((ln, s)) = next("") {
            return Err(Error::parse(ln, format!("trailing content {s:?}")));
        }
        Field::new(quantity, units, angle_unit, times, lats, lons, values)
    }
}

/// Latitude centres of an equiangular grid with half-cell offsets from the
/// poles, ascending, in degrees.
pub fn equiangular_lats(n_lat: usize) -> Vec<f64> {
    let d = 180.0 / n_lat as f64;
    (0..n_lat).map(|i| -90.0 + (i as f64 + 0.5) * d).collect()
}

/// Longitudes `0, 360/n, ...` in degrees.
pub fn equiangular_lons(n_lon: usize) -> Vec<f64> {
    let d = 360.0 / n_lon as f64;
    (0..n_lon).map(|j| j as f64 * d).collect()
}

/// The modes summed by [`gen_artificial_initial`].
pub const ARTIFICIAL_MODES: [ModeSpec; 2] = [ModeSpec { m: 1, l: 1 }, ModeSpec { m: 1, l: 2 }];

pub const DEFAULT_ARTIFICIAL_SHAPE: (usize, usize) = (100, 200);

/// `psi = sum P_l^m(sin phi) cos(m lambda)` over `modes` on an equiangular grid.
pub fn gen_modes(n_lat: usize, n_lon: usize, modes: &[ModeSpec]) -> Result<Field> {
    if n_lat < 4 || n_lon < 4 {
        return Err(Error::Config(format!("grid {n_lat}x{n_lon} too small, need at least 4x4")));
    }
    let lats = equiangular_lats(n_lat);
    let lons = equiangular_lons(n_lon);
    let unit = PhysicsConstants::unit();
    let mut values = Vec::with_capacity(n_lat * n_lon);
    for &la in &lats {
        for &lo in &lons {
            let p = CollocationPoint::new(la.to_radians(), lo.to_radians(), 0.0);
            let mut v = 0.0;
            for &m in modes {
                v += analytic_psi(m, &unit, &p)?;
            }
            values.push(v);
        }
    }
    Field::new(Quantity::Psi, "nondimensional", AngleUnit::Degrees, vec![0.0], lats, lons, values)
}

/// The two-mode `(m, l) = (1, 1) + (1, 2)` initial stream function.
pub fn gen_artificial_initial(n_lat: usize, n_lon: usize) -> Result<Field> {
    gen_modes(n_lat, n_lon, &ARTIFICIAL_MODES)
}

/// Vorticity of a stream function made of the given modes at `t = 0`, using
/// `laplacian Y_l^m = -l (l + 1) Y_l^m / r^2` per mode.
///
/// The mode content is recomputed from the grid and checked against `psi`.
pub fn zeta_of_initial(psi: &Field, modes: &[ModeSpec], consts: &PhysicsConstants) -> Result<Field> {
    if psi.quantity != Quantity::Psi {
        return Err(Error::Contract("zeta_of_initial needs a psi field".into()));
    }
    let t0 = psi
        .time_index(0.0, 0.0)
        .ok_or_else(|| Error::Contract("field has no t = 0 slice".into()))?;
    let lats = psi.lats_rad();
    let lons = psi.lons_rad();
    let unit = PhysicsConstants::unit();
    let r2 = consts.radius * consts.radius;
    let scale = psi.slice(t0).iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let mut values = Vec::with_capacity(psi.slice_len());
    for (i, &la) in lats.iter().enumerate() {
        for (j, &lo) in lons.iter().enumerate() {
            let p = CollocationPoint::new(la, lo, 0.0);
            let (mut sum, mut z) = (0.0, 0.0);
            for &m in modes {
                let v = analytic_psi(m, &unit, &p)?;
                sum += v;
                z -= m.laplacian_factor() * v / r2;
            }
            let have = psi.get(t0, i, j);
            if (sum - have).abs() > 1e-12 * scale {
                return Err(Error::Contract(format!(
                    "psi at ({i}, {j}) is {have}, not the sum of the given modes ({sum})"
                )));
            }
            values.push(z);
        }
    }
    Field::new(
        Quantity::Zeta,
        psi.units.clone(),
        psi.angle_unit,
        vec![0.0],
        psi.lats.clone(),
        psi.lons.clone(),
        values,
    )
}

fn block_means(coords: &[f64], factor: usize) -> Vec<f64> {
    coords
        .chunks(factor)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Replaces `factor x factor` blocks by their mean. Blocks cut by the grid
/// edge average the cells that exist. Output coordinates are the means of
/// the member coordinates.
pub fn block_reduce_mean(field: &Field, factor: usize) -> Result<Field> {
    block_reduce_mean_axes(field, factor, factor)
}

/// [`block_reduce_mean`] with separate latitude and longitude factors.
pub fn block_reduce_mean_axes(field: &Field, f_lat: usize, f_lon: usize) -> Result<Field> {
    if f_lat == 0 || f_lon == 0 {
        return Err(Error::Config("block factor must be at least 1".into()));
    }
    let (nlat, nlon) = (field.n_lat(), field.n_lon());
    let (olat, olon) = (nlat.div_ceil(f_lat), nlon.div_ceil(f_lon));
    let mut values = Vec::with_capacity(field.n_times() * olat * olon);
    for t in 0..field.n_times() {
        let s = field.slice(t);
        for bi in 0..olat {
            let rows = bi * f_lat..((bi + 1) * f_lat).min(nlat);
            for bj in 0..olon {
                let cols = bj * f_lon..((bj + 1) * f_lon).min(nlon);
                let mut acc = 0.0;
                for i in rows.clone() {
                    for j in cols.clone() {
                        acc += s[i * nlon + j];
                    }
                }
                values.push(acc / (rows.len() * cols.len()) as f64);
            }
        }
    }
    Field::new(
        field.quantity,
        field.units.clone(),
        field.angle_unit,
        field.times.clone(),
        block_means(&field.lats, f_lat),
        block_means(&field.lons, f_lon),
        values,
    )
}

/// Block-mean reduction to exactly `n_lat x n_lon`.
///
/// Each axis uses factor `n / target`. When that does not tile the axis
/// exactly the surplus rows (or columns) are dropped, split between the two
/// ends with the extra one at the end. For the 100 x 200 artificial grid and
/// a 14 x 25 target this drops the outermost latitude row at each pole and
/// averages 7 x 8 blocks.
pub fn reduce_to_shape(field: &Field, n_lat: usize, n_lon: usize) -> Result<Field> {
    let plan = |n: usize, target: usize, axis: &str| -> Result<(usize, usize, usize)> {
        if target == 0 || target > n {
            return Err(Error::Config(format!("cannot reduce {axis} axis of {n} to {target}")));
        }
        let f = n / target;
        let surplus = n - f * target;
        Ok((f, surplus / 2, n - (surplus - surplus / 2)))
    };
    let (f_lat, lat0, lat1) = plan(field.n_lat(), n_lat, "latitude")?;
    let (f_lon, lon0, lon1) = plan(field.n_lon(), n_lon, "longitude")?;
    let mut trimmed = field.select_lats(lat0, lat1)?;
    if lon0 != 0 || lon1 != field.n_lon() {
        let nl = field.n_lon();
        let mut values = Vec::new();
        for row in trimmed.values.chunks(nl) {
            values.extend_from_slice(&row[lon0..lon1]);
        }
        trimmed.values = values;
        trimmed.lons = trimmed.lons[lon0..lon1].to_vec();
    }
    block_reduce_mean_axes(&trimmed, f_lat, f_lon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_field(nlat: usize, nlon: usize) -> Field {
        Field::new(
            Quantity::Psi,
            "u",
            AngleUnit::Degrees,
            vec![0.0],
            (0..nlat).map(|i| i as f64).collect(),
            (0..nlon).map(|j| j as f64).collect(),
            (1..=nlat * nlon).map(|v| v as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn worked_block_mean() {
        let r = block_reduce_mean(&seq_field(4, 4), 2).unwrap();
        assert_eq!(r.values, vec![3.5, 5.5, 11.5, 13.5]);
        assert_eq!(r.lats, vec![0.5, 2.5]);
    }

    #[test]
    fn partial_blocks_average_present_cells() {
        let r = block_reduce_mean(&seq_field(3, 3), 2).unwrap();
        // blocks: [1 2 4 5], [3 6], [7 8], [9]
        assert_eq!(r.values, vec![3.0, 4.5, 7.5, 9.0]);
        assert!(matches!(block_reduce_mean(&seq_field(3, 3), 0), Err(Error::Config(_))));
    }

    #[test]
    fn reduce_to_artificial_shape() {
        let f = gen_artificial_initial(100, 200).unwrap();
        let r = reduce_to_shape(&f, 14, 25).unwrap();
        assert_eq!((r.n_lat(), r.n_lon()), (14, 25));
        assert!(r.lats.iter().all(|l| l.abs() < 82.0));
        let eq: Vec<f64> = r.lats.iter().copied().filter(|l| l.abs() < 7.0).collect();
        assert_eq!(eq.len(), 2);
    }

    #[test]
    fn artificial_field_properties() {
        let f = gen_artificial_initial(100, 200).unwrap();
        assert_eq!((f.n_lat(), f.n_lon()), (100, 200));
        for i in 0..100 {
            let mean: f64 = (0..200).map(|j| f.get(0, i, j)).sum::<f64>() / 200.0;
            assert!(mean.abs() < 1e-12);
        }
        assert_eq!(f.get(0, 0, 50), gen_artificial_initial(100, 200).unwrap().get(0, 0, 50));
        assert!(f.values.iter().any(|&v| v > 0.1) && f.values.iter().any(|&v| v < -0.1));
        let odd = gen_artificial_initial(5, 4).unwrap();
        assert!(odd.get(0, 2, 1).abs() < 1e-15, "phi = 0, lambda = 90");
        assert!(matches!(gen_artificial_initial(2, 10), Err(Error::Config(_))));
    }

    #[test]
    fn single_mode_vorticity() {
        let r = PhysicsConstants::new(1.0, 2.0).unwrap();
        for (mode, k) in [(ModeSpec::new(1, 1).unwrap(), -2.0), (ModeSpec::new(1, 2).unwrap(), -6.0)] {
            let psi = gen_modes(10, 12, &[mode]).unwrap();
            let z = zeta_of_initial(&psi, &[mode], &r).unwrap();
            for (a, b) in z.values.iter().zip(&psi.values) {
                assert!((a - k * b / 4.0).abs() < 1e-14);
            }
        }
        let psi = gen_modes(10, 12, &[ModeSpec::new(1, 1).unwrap()]).unwrap();
        assert!(zeta_of_initial(&psi, &ARTIFICIAL_MODES, &r).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let mut f = seq_field(3, 4);
        f.values[5] = 0.1 + 0.2;
        f.values[6] = -1.234_567_890_123_456_7e-300;
        let back = Field::from_text(&f.to_text()).unwrap();
        assert_eq!(back, f);

        let text = f.to_text();
        let no_lats: String = text.lines().filter(|l| !l.starts_with("lats:")).map(|l| format!("{l}\n")).collect();
        match Field::from_text(&no_lats) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let header_only: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(Field::from_text(&header_only), Err(Error::Parse { .. })));
        let ragged = text.replacen("\n1.0 2.0 3.0 4.0\n", "\n1.0 2.0 3.0\n", 1);
        match Field::from_text(&ragged) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let bad_order = text.replace("lats: 0.0 1.0 2.0", "lats: 0.0 2.0 1.0");
        assert!(matches!(Field::from_text(&bad_order), Err(Error::Parse { line: 5, .. })));
    }
}
