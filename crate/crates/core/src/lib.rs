//! Joint measurement of fermionic Majorana observables.
//!
//! Parent POVMs are built from orthogonal matrices whose `2k x 2k` minors
//! cover every degree-`2k` Majorana monomial. The modules follow the pipeline:
//! monomial algebra, Gaussian unitaries, matching-based ensembles, parent
//! POVMs, sampling and estimation, plus robustness bounds and baselines.

pub mod archive;
pub mod baselines;
pub mod error;
pub mod gaussian;
pub mod majorana;
pub mod matching;
pub mod povm;
pub mod robustness;
pub mod sampler;
pub mod subsets;

pub use error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
