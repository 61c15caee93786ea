//! Numerical machinery for quantitative affine approximation of Lipschitz maps
//! into uniformly convex spaces.
//!
//! Everything here is pure `f64` arithmetic over finite grids, written for
//! `no_std` targets with an allocator. File formats, the command-line front
//! end and parallel sweeps live in the companion `affapprox` crate.
//!
//! The pieces, bottom-up:
//!
//! * [`space`]: `ℓ_q^d` and mixed `ℓ_2^n(ℓ_q^m)` norms, the four-point
//!   uniform convexity parameters `(p, K)`, Lipschitz estimates on grids.
//! * [`energy`]: the dyadic energy `E_j` of a sampled curve, the
//!   uniform-convexity gain bound and midpoint certificates.
//! * [`walsh`]: cubes, multiscale axis deviation, Walsh (multilinear)
//!   coefficients and the affine map extracted from them.
//! * [`hfunc`]: the face-averaged two-scale line energy and its
//!   self-similarity recursion.
//! * [`affinefit`]: sup-norm affine fitting with midpoint lower certificates,
//!   and the empirical approximability radius.
//! * [`counterexample`]: the dyadic sawtooth curve and its localized and
//!   product extensions, with non-approximability certificates.
//! * [`bounds`] and [`net`]: log-domain bound formulas and `δ`-nets.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod affinefit;
pub mod bounds;
pub mod corpus;
pub mod counterexample;
pub mod energy;
mod error;
mod fmath;
pub mod hfunc;
pub mod net;
pub mod sampler;
pub mod space;
pub mod walsh;

pub use affinefit::{AffineMap, ApproximabilityReport, FitOptions, FitResult, SampleSet};
pub use bounds::LogScalar;
pub use energy::{EnergyReport, GridFunction1D};
pub use error::{Error, Result};
pub use sampler::Sampler;
pub use space::{NormKind, NormedSpace, UcParams};
pub use walsh::{GridFunctionCube, WalshCoefficients};

/// Additive slack used by inequality checks unless a caller supplies one.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
