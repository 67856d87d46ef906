//! Simulation and verification toolkit for balanced generalized Pólya urns.
//!
//! An urn over `q` colours evolves by drawing a ball with probability
//! proportional to colour activity and adding a (possibly random)
//! replacement vector. For *balanced* urns the added activity per draw is a
//! constant `b`, the total activity `w_n = w_0 + n b` is deterministic, and
//! the mean dynamics are carried by the matrix products
//! `F_{i,j} = prod_{i <= k < j} (I + A / w_k)` of the intensity matrix `A`.
//!
//! The crate computes this machinery exactly and verifies it numerically:
//!
//! * [`urn`] — urn specifications, balance and tenability checks, the
//!   intensity matrix;
//! * [`spectral`] — eigenvalue clustering, Jordan indices, spectral
//!   projections, and the small / critical / large classification by
//!   `Re lambda_2 / lambda_1` against 1/2;
//! * [`exact`] — exact-arithmetic cross-check of the spectral path for
//!   integer matrices;
//! * [`products`] — products `F_{i,j}`, exact means `E X_n = F_{0,n} X0`,
//!   and product-norm growth verification;
//! * [`sim`] — seeded, reproducible path simulation with martingale
//!   increment recording and pathwise identity checks;
//! * [`analysis`] — an exact-enumeration oracle, Monte Carlo central
//!   moments with bootstrap errors, growth-exponent fits, covariance
//!   normalization checks, and the martingale square-function inequality;
//! * [`corpus`] — the built-in example urns (also shipped as JSON under
//!   `specs/`);
//! * [`io`] — the JSON spec-file format;
//! * [`cli`] — the `urnkit` command-line frontend.
//!
//! The runnable examples under `examples/` demonstrate each capability; the
//! acceptance suite in `tests/acceptance.rs` pins the numerical contracts.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod exact;
pub mod io;
pub mod products;
pub mod sim;
pub mod spectral;
pub mod urn;

pub use error::{Result, UrnError};
pub use urn::{BalanceCertificate, BalancedUrn, IntensityMatrix, Tenability, UrnSpec};
