//! File formats, synthetic data, LSH encoding, benchmarking and cost-model
//! reports around the `mih-core` search engine. The `mih` binary exposes
//! these as subcommands.

pub mod bench;
pub mod curves;
mod error;
pub mod gen;
pub mod io;
pub mod lsh;

pub use error::{Error, Result};
