//! Aspect-level sentiment classification with sentiment-dependency graphs.
//!
//! The model encodes a sentence and each of its aspect terms with two
//! bidirectional LSTMs, builds an aspect-specific context vector per aspect
//! through bilinear context→aspect and aspect→context attention (with a
//! distance-based position weighting), and then lets the aspects of one
//! sentence exchange information through a small graph convolutional network
//! before a softmax classifier assigns each aspect a polarity.
//!
//! This crate is `no_std` (it needs `alloc`). Everything that touches files,
//! the command line or on-disk formats lives in the companion `sdgcn` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attention;
pub mod autodiff;
pub mod data;
pub mod encoder;
pub mod error;
pub mod gcn;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod train;

pub use autodiff::{Graph, Var};
pub use data::{AspectSpan, Polarity, SentenceInstance, Vocabulary};
pub use error::{Error, Result};
pub use model::{ModelConfig, Sdgcn};
pub use params::{ParamId, ParamStore};
pub use rng::RngStream;
pub use tensor::Tensor;
