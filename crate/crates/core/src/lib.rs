//! Periodic orbits of the Chirikov standard map and three estimates of the
//! breakup threshold of the golden-mean invariant curve.

pub mod criteria;
pub mod error;
pub mod map;
pub mod orbit;
pub mod scan;
pub mod stability;

pub use error::{Error, Result};
pub use map::{PhasePoint, StandardMap, Stochasticity};
pub use orbit::{Convergent, Family, PeriodicOrbit, SymmetryLine};
