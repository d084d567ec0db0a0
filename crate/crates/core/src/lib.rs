pub mod collab;
pub mod error;
pub mod features;
pub mod geom;
pub mod localizer;
pub mod partmodel;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};
