//! Time-harmonic water-wave propagation over variable bathymetry with the
//! mild-slope equation, discretized by spectral elements in a bounded inner
//! region coupled to spectral boundary elements for the open outer region.

pub mod bench;
pub mod bsem;
pub mod couple;
pub mod error;
pub mod greens;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod sem;
pub mod specbasis;
pub mod waves;

pub use error::{Error, Result};
