pub mod besov;
pub mod error;
pub mod estimation;
pub mod grid;
pub mod hyperbolic;
pub mod increments;
pub mod io;
pub mod meyer;
pub mod model;
pub mod quad;
pub mod rng;
pub mod synthesis;
