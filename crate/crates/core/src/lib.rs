//! Finite-volume solver for nonlinear nonlocal Fokker–Planck equations under
//! strong confinement, with the diagnostics and scenarios built around it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod confinement;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod initdata;
pub mod nonlinearity;
pub mod output;
pub mod quadrature;
pub mod scenarios;
pub mod solver;

pub use error::{ConfigError, Error, Result};
