pub mod alloc;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod fmap;
pub mod matrix;
pub mod mesh;
pub mod nn;
pub mod optim;
pub mod softmap;
pub mod spectral;
pub mod zoomout;

pub use error::{Error, Result};
