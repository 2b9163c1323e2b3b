pub mod error;
pub mod ode;
pub mod profile;
pub mod spectral;
pub mod fields;
pub mod sector;
pub mod dynamics;
pub mod io;

pub use error::{Result, VortexError};
