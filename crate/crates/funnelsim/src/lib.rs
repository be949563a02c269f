pub mod controllers;
pub mod dae;
pub mod error;
pub mod funnel;
pub mod jet;
pub mod lti;
pub mod operators;
pub mod plants;
pub mod scenarios;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
