//! Reflexive orthodisk solver for the DH_{m,n} family of embedded minimal
//! surfaces: Schwarz-Christoffel maps, extremal lengths, a height function
//! and its minimization, obstruction certificates, monodromy probes and
//! Weierstrass mesh export.

pub mod cli;
pub mod config;
pub mod error;
pub mod height;
pub mod lsq;
pub mod monodromy;
pub mod nonexist;
pub mod polygon;
pub mod scmap;
pub mod solver;
pub mod weier;

pub use error::{Error, Result};
