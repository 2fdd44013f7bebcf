//! Files, formats and the experiment harness around [`sdgcn_core`].
//!
//! * [`corpus`] reads SemEval-2014 Task 4 XML, [`glove`] reads GloVe text
//!   embeddings and [`datasets`] finds and caches the standard splits.
//! * [`checkpoint`] and [`cache`] are the binary containers for parameters
//!   and parsed instances.
//! * [`config`] is the `key = value` run configuration.
//! * [`run`], [`ablation`] and [`experiments`] drive training.
//! * [`export`] writes attention weights, statistics, epoch logs and result
//!   records as tab-separated `key=value` lines.

pub mod ablation;
pub mod cache;
pub mod checkpoint;
pub mod config;
mod container;
pub mod corpus;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod export;
pub mod glove;
pub mod run;

pub use config::RunConfig;
pub use error::{Error, Result};
