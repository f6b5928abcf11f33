//! Tensor power iteration for symmetric tensors in decomposition form,
//! robustness certificates for their eigenvectors, equiangular frames,
//! complete eigenpair enumeration in two dimensions, and basin rasters.

pub mod basins;
pub mod eigen2d;
pub mod error;
pub mod experiments;
pub mod frames;
pub mod linalg;
pub mod power;
pub mod rng;
pub mod robustness;
pub mod tensor;

pub use error::{Error, Result};
pub use frames::Frame;
pub use tensor::{Contraction, DenseTensor, SymTensor};
