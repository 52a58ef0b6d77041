pub mod barriers;
pub mod certify;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod fields;
pub mod linalg;
pub mod operators;
mod monotone;
pub mod regularity;
pub mod scheme;

pub use error::{Error, Result};
