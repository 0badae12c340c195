//! Proper rational maps between balls in the Siegel model: exact jets,
//! partial and full normal forms, geometric rank, adapted frames along the
//! image, and the CR second fundamental form.

pub mod aut;
pub mod error;
pub mod expr;
pub mod hermitian;
pub mod jet;
pub mod lift;
pub mod map;
pub mod normalize;
pub mod sampling;
pub mod scalar;
pub mod sff;

pub use error::{Error, Result};
