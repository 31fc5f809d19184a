//! Axisymmetric equilibria of self-gravitating, rotating, non-isentropic
//! polytropic fluids.
//!
//! The crate provides
//! - sampled fields on a meridian-plane grid with parity-aware finite
//!   differences ([`field`]),
//! - the equation of state, the enthalpy-like variable `w` and rotation laws
//!   ([`eos`]),
//! - the Newtonian potential by ring-kernel summation ([`gravity`]),
//! - a sub/supersolution monotone iteration for `gamma > 2` ([`monotone`]),
//! - constrained energy minimisation for `4/3 < gamma < 2` ([`variational`]),
//! - reconstruction of pressure and rotation from a density ([`inverse`]),
//! - Lane–Emden reference profiles ([`radial`]).
//!
//! Units use `G = 1`. Data-parallel loops use rayon when the `parallel`
//! feature is on (the default); results are bit-identical for any worker
//! count.

pub mod eos;
pub mod error;
pub mod field;
pub mod gravity;
pub mod inverse;
pub mod linalg;
pub mod monotone;
pub mod par;
pub mod radial;
pub mod variational;

pub use error::{Error, Result};
