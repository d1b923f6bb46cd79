pub mod dataset;
pub mod error;
pub mod label;
pub mod media;
pub mod seed;

pub use error::{Error, Result};
pub use label::Label;
pub mod acoustic;
pub mod lexical;
pub mod visual;
pub mod classifiers;
pub mod fusion;
pub mod harness;
