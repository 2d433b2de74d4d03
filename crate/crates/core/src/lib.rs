//! Saber-style lattice encryption over power-of-two rings, with a simulated
//! in-memory crossbar multiplier and its cost model.

pub mod backend;
pub mod cost;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod pack;
pub mod pke;
pub mod polymult;
pub mod ring;
pub mod sac;
pub mod sampling;
pub mod schedule;
pub mod xbar;
pub mod xof;

pub use error::{Error, Result};
