pub mod cmt_solver;
pub mod coupling;
pub mod error;
pub mod exact_reference;
pub mod interior_expansion;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod radial_modes;
pub mod roots;
pub mod specfun;
pub mod waveguide;

pub use error::{Error, Result};
