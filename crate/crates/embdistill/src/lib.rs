//! File formats, corpus loading, threaded grid search and the `embdistill`
//! command line on top of `embdistill-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod corpus;
mod error;
pub mod fsio;
pub mod native;
pub mod parallel;
pub mod results;
pub mod word2vec;

pub use error::{Error, Result, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE};
