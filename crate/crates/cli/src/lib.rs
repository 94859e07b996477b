pub mod config;
pub mod experiment;
