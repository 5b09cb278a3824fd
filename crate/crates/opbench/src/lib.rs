//! Operator-learning benchmark suite.
//!
//! Implements four neural-operator architectures (PCA-Net, DeepONet, PARA-Net,
//! FNO) over discretized function spaces, the PDE data generators they are
//! trained on (advection, Navier-Stokes, Helmholtz), and a benchmark harness
//! that measures parameter counts, evaluation FLOPs, and train/test errors
//! across data-volume and network-size sweeps.

pub mod complexity;
pub mod config;
pub mod field;
pub mod grf;
pub mod harness;
pub mod models;
pub mod nn;
pub mod opbl;
pub mod pca;
pub mod seed;
pub mod solvers;
pub mod spectral;
pub mod verify;

mod error;

pub use error::{Error, Result};
