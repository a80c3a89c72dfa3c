pub mod dataset_io;
pub mod error;
pub mod eval_harness;
pub mod fid;
pub mod hole_gen;
pub mod packing;
pub mod pipeline;
pub mod prompt_proposals;
pub mod repo_model;
pub mod retrieval;
pub mod util;

pub use error::{Error, Result};
