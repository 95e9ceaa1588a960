//! Metastable viscous shock layers for `u_t + f(u)_x = eps u_xx` on a
//! bounded interval with Dirichlet data.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod flux;
pub mod grid;
pub mod harness;
pub mod hyperbolic;
pub mod manifold;
pub mod numerics;
pub mod pde;
pub mod reduced;
pub mod spectral;

pub use error::{Error, Result};
