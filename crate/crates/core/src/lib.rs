//! Convex-dual penalty/risk pairs `(α, ρ)` on finite spaces, the tensorized
//! functional `ρ_n` by backward recursion, and the Monte Carlo harness for
//! polynomial-rate deviation bounds.

// `!(a > b)` checks are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha;
pub mod cramer;
pub mod dp;
pub mod error;
pub mod ext;
pub mod loss;
pub mod mc;
pub mod optim;
pub mod quad;
pub mod rho;
pub mod space;
pub mod transport;

pub use alpha::AlphaSpec;
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use loss::LossFn;
pub use space::{Dist, FiniteSpace, Kernel, ProductDist, RealFieldN};

/// Engine version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
