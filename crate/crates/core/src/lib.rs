//! Function-valued random feature models for learning solution operators of
//! parametric PDEs.
//!
//! The crate covers data generation (viscous Burgers, Darcy flow), the random
//! feature maps, training by regularized normal equations, and the
//! evaluation protocols (test error, semigroup composition, resolution
//! transfer, feature-count sweeps).

// Negated comparisons deliberately reject NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod burgers;
pub mod cli;
pub mod darcy;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod features;
pub mod grf;
pub mod grid;
pub mod io;
pub mod rfm;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{inner_product_l2, relative_l2_error, restrict, Grid, Grid1D, Grid2D, GridFunction};
