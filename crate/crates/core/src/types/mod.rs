//! Shared data model: datasets, structure specifications, model state,
//! configuration, and feature scaling.

pub mod config;
pub mod dataset;
pub mod model;
pub mod scaling;
pub mod structure;
