//! Physics-informed neural network training with a mean/standard-deviation
//! composite loss.

pub mod autodiff;
pub mod jet;
pub mod jetnet;
pub mod loss;
pub mod net;
pub mod optim;
pub mod problems;
pub mod real;
pub mod trainer;

pub use autodiff::{AutodiffError, Scalar, Tape};
pub use jet::{Jet, Layout};
pub use net::{Checkpoint, DenseNetwork};
pub use real::Real;
