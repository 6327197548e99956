//! Collective spin-1/2 ensembles in the symmetric subspace, a two-setting
//! permutation-invariant Bell inequality built from one- and two-body
//! correlators, and the estimation pipeline that certifies its violation
//! from noisy atom-counting data.
//!
//! Modules are layered bottom-up: [`spin`] holds states and unitaries,
//! [`witness`] and [`lhv`] evaluate the inequality on quantum states and
//! on classical strategies, [`emulator`] generates and corrects synthetic
//! shot data, and [`stats`] turns samples into estimates and confidence
//! statements.

pub mod error;
pub mod spin;
pub mod witness;
pub mod lhv;
pub mod stats;
pub mod emulator;
pub mod pipeline;

pub use error::{Error, Result};
