//! Selective-classification evaluation end to end: accuracy-coverage curves,
//! the perfect-ordering oracle bound, and a finite-sample decomposition of
//! the selective-classification gap into Bayes, approximation, ranking, and
//! statistical components, together with synthetic data generators whose
//! Bayes posterior is known analytically, so every term can be estimated and
//! every bound checked numerically.

pub mod calibration;
pub mod curves;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod losspred;
pub mod models;
pub mod scoring;
pub mod synthdata;

mod io_util;

pub use error::{Error, Result};
