//! Small numerical kernels used by the physics modules.

pub mod fit;
pub mod interp;
pub mod quad;
pub mod roots;
pub mod tridiag;
