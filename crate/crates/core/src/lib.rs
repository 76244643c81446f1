pub mod controller;
pub mod error;
pub mod funnel;
pub mod lmi;
pub mod matrix;
pub mod optimize;
pub mod parallel;
pub mod plant;
pub mod polynomial;
pub mod scenario;
pub mod selftest;
pub mod sim;

pub use error::{Error, Result};
