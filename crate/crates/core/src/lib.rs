//! Neural machine translation workbench for exploiting monolingual
//! target-side data: dummy-source multi-task training and back-translation.

pub mod backtranslation;
pub mod cli;
pub mod corpus;
pub mod decoding;
pub mod eval;
pub mod error;
pub mod io;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod subword;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
