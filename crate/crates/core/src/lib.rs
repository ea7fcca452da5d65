//! Differentiable quantum circuits for the barotropic vorticity equation.
//!
//! The crate has three layers:
//!
//! * a quantum model ([`qsim`], [`qnn`]) and an exact derivative engine for
//!   it ([`diff`]);
//! * the physics ([`bve`]) and a spherical-harmonic reference solver
//!   ([`sem`]) with the data sets built from it ([`data`]);
//! * training ([`train`]) and figures of merit ([`fom`]).
//!
//! The guide under `book/` walks through each layer; its code snippets are
//! compiled and run as doc-tests of this crate.

pub mod bve;
pub mod data;
pub mod diff;
pub mod error;
pub mod fom;
pub mod qnn;
pub mod qsim;
pub mod sem;
pub mod train;

pub use error::{Error, Result};

use std::io::Write;
use std::path::Path;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    pub mod circuits {}
    #[doc = include_str!("../../../book/src/derivatives.md")]
    pub mod derivatives {}
    #[doc = include_str!("../../../book/src/physics.md")]
    pub mod physics {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    pub mod spectral {}
    #[doc = include_str!("../../../book/src/fields.md")]
    pub mod fields {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
