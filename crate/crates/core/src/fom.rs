//! Figures of merit: relative error against the reference median, and the
//! per-grid-point Pearson correlation over time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Field;
use crate::error::{Error, Result};

/// Median of a slice; NaN-free input assumed.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MreReport {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
}

/// Per time slice, `e = |pred - ref| / median(|ref|)` and its spatial mean
/// and median.
pub fn mre(pred: &Field, reference: &Field) -> Result<MreReport> {
    check_grids(pred, reference)?;
    let mut mean = Vec::with_capacity(reference.n_times());
    let mut med = Vec::with_capacity(reference.n_times());
    for t in 0..reference.n_times() {
        let r = reference.slice(t);
        let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
        let denom = median(&abs);
        if !(denom > 0.0) {
            return Err(Error::DegenerateReference(format!(
                "median |reference| is {denom} at t = {}",
                reference.times[t]
            )));
        }
        let e: Vec<f64> = pred.slice(t).iter().zip(r).map(|(p, r)| (p - r).abs() / denom).collect();
        mean.push(e.iter().sum::<f64>() / e.len() as f64);
        med.push(median(&e));
    }
    Ok(MreReport {
        times: reference.times.clone(),
        mean,
        median: med,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpmccReport {
    /// `[lat][lon]`, NaN where the point was excluded.
    pub per_point: Vec<f64>,
    pub n_lat: usize,
    pub n_lon: usize,
    pub median: f64,
    /// Points with zero variance in either series.
    pub excluded: usize,
}

/// Pearson correlation over time at every grid point.
pub fn ppmcc(pred: &Field, reference: &Field) -> Result<PpmccReport> {
    check_grids(pred, reference)?;
    let nt = reference.n_times();
    if nt < 2 {
        return Err(Error::Contract("correlation needs at least two times".into()));
    }
    let n = reference.slice_len();
    let mut per_point = vec![f64::NAN; n];
    let mut kept = Vec::with_capacity(n);
    for (k, out) in per_point.iter_mut().enumerate() {
        let a: Vec<f64> = (0..nt).map(|t| pred.slice(t)[k]).collect();
        let b: Vec<f64> = (0..nt).map(|t| reference.slice(t)[k]).collect();
        let ma = a.iter().sum::<f64>() / nt as f64;
        let mb = b.iter().sum::<f64>() / nt as f64;
        let (mut cab, mut caa, mut cbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(&b) {
            cab += (x - ma) * (y - mb);
            caa += (x - ma) * (x - ma);
            cbb += (y - mb) * (y - mb);
        }
        if caa > 0.0 && cbb > 0.0 {
            let r = (cab / (caa.sqrt() * cbb.sqrt())).clamp(-1.0, 1.0);
            *out = r;
            kept.push(r);
        }
    }
    if kept.is_empty() {
        return Err(Error::DegenerateReference("every grid point has zero variance in time".into()));
    }
    Ok(PpmccReport {
        per_point,
        n_lat: reference.n_lat(),
        n_lon: reference.n_lon(),
        median: median(&kept),
        excluded: n - kept.len(),
    })
}

fn check_grids(pred: &Field, reference: &Field) -> Result<()> {
    if !pred.same_grid(reference) {
        return Err(Error::Structure("prediction and reference grids differ".into()));
    }
    Ok(())
}

/// Both figures of merit for one quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FomReport {
    pub quantity: String,
    pub mre: MreReport,
    /// `None` when the fields have a single time.
    pub ppmcc: Option<PpmccReport>,
}

impl FomReport {
    pub fn compute(pred: &Field, reference: &Field) -> Result<Self> {
        Ok(Self {
            quantity: reference.quantity.as_str().to_string(),
            mre: mre(pred, reference)?,
            ppmcc: if reference.n_times() >= 2 {
                Some(ppmcc(pred, reference)?)
            } else {
                None
            },
        })
    }

    /// One row per time, then a summary row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} time mre_mean mre_median", self.quantity);
        for ((t, a), b) in self.mre.times.iter().zip(&self.mre.mean).zip(&self.mre.median) {
            let _ = writeln!(s, "{t} {a:.6e} {b:.6e}");
        }
        match &self.ppmcc {
            Some(p) => {
                let _ = writeln!(s, "ppmcc_median {:.6} excluded {}", p.median, p.excluded);
            }
            None => s.push_str("ppmcc_median nan excluded 0\n"),
        }
        s
    }

    /// Named scalar metrics for gates, e.g. `psi_mre_median_t3`,
    /// `zeta_ppmcc_median`, `psi_mre_median_max`.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let q = &self.quantity;
        let mut out = Vec::new();
        for (i, t) in self.mre.times.iter().enumerate() {
            out.push((format!("{q}_mre_median_t{t}"), self.mre.median[i]));
            out.push((format!("{q}_mre_mean_t{t}"), self.mre.mean[i]));
        }
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push((format!("{q}_mre_median_max"), max(&self.mre.median)));
        out.push((format!("{q}_mre_mean_max"), max(&self.mre.mean)));
        if let Some(p) = &self.ppmcc {
            out.push((format!("{q}_ppmcc_median"), p.median));
        }
        out
    }
}
