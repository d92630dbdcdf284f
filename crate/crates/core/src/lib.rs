pub mod dataset;
pub mod error;
pub mod quadrature;
pub mod sim;
pub mod step;
pub mod estimators;
pub mod discrepancy;
pub mod metrics;
pub mod decision;
pub mod io;
pub mod config;
pub mod pipeline;
pub mod cli;
