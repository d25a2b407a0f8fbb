pub mod codecode;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod error;
pub mod features;
pub mod linear;
pub mod mapping;
pub mod neural;
pub mod projection;
pub mod pipeline;
pub mod synth;
mod model_io;

pub use error::{Error, Result};
