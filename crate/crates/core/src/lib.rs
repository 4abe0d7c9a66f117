pub mod base_dist;
pub mod config;
pub mod error;
pub mod geometry;
pub mod gp_prior;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod par;
pub mod quadrature;
pub mod quantile_model;
pub mod sampler;
pub mod simgen;
pub mod workload;

pub use error::{Error, Result};
