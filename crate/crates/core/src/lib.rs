//! Exact laws of the base-`b` sum-of-digits variation `s(n + r) - s(n)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`digits`]: expansions, digit sums, carries and block decompositions;
//! * [`exactdist`]: exact rational atoms and variance of the law of the
//!   variation, with certified tail bounds;
//! * [`odometer`]: lazily sampled b-adic integers and carry tracing;
//! * [`mixing`]: the block-wise process and its mixing diagnostics;
//! * [`cltdiag`]: distances between the normalized law and the standard normal;
//! * [`oracle`]: brute-force counting ground truth;
//! * [`cache`]: the on-disk JSON format for computed distributions.

pub mod cache;
pub mod cltdiag;
pub mod digits;
pub mod error;
pub mod exactdist;
pub mod mixing;
pub mod odometer;
pub mod oracle;

pub use error::{Error, Result};
pub use num_bigint::{BigInt, BigUint};
pub use num_rational::BigRational as Rational;
