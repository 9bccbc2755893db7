pub mod analysis;
pub mod clustering;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod medium;
pub mod numerics;
pub mod sensors;
pub mod sim;

pub use error::{Error, Result};
