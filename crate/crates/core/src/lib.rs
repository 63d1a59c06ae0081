//! Formal and numerical tools for Fuchsian real hypersurfaces in C^2 and
//! their associated second-order ODEs.

pub mod bb;
pub mod cauchy;
pub mod cli;
pub mod error;
pub mod hypersurface;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod scalar;
pub mod serial;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use jet::{vars, Jet, Vars};
pub use scalar::{Coeff, GaussRat, C64};
