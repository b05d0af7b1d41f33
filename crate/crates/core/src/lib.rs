//! Fair division of platform utility among privacy-conscious users.
//!
//! A platform collects data from `N` users, each of whom picks a privacy
//! level from a finite ordered set (the zero level means "share nothing").
//! The platform derives a coalition utility `U(rho)` from the shared data
//! and pays users back. This crate computes the two axiomatic fair
//! allocations of that utility (with the platform as a coalition member,
//! or among users only with a payment fraction `alpha`), evaluates two
//! concrete utility models (a two-user differentially-private mean
//! estimation game and an N-user federated mean estimation game), finds
//! the Nash equilibria users reach under fair payments, and solves the
//! platform's problem of choosing `alpha`.
//!
//! The crate is organised around the module boundaries of the problem:
//!
//! * [`space`] - privacy level sets and per-user level vectors.
//! * [`utility`] - coalition utility evaluators with optional symmetry
//!   groups used to accelerate exact computations.
//! * [`valuation`] - the fair allocations, exact and group-accelerated.
//! * [`dp_example`] - closed forms for the two-user epsilon-DP
//!   linear-Laplace mean estimation example.
//! * [`fed`] - the three-level federated mean estimation utility.
//! * [`equilibrium`] - best responses, pure-strategy equilibrium search,
//!   and the symmetric / two-player mixed-strategy analysis.
//! * [`mechanism`] - the platform's choice of the payment fraction.

pub mod dp_example;
pub mod equilibrium;
mod error;
pub mod fed;
pub mod mechanism;
pub mod space;
pub mod utility;
pub mod valuation;

pub use error::{Error, Result};
pub use space::{PrivacySpace, PrivacyVector};
pub use utility::CoalitionUtility;
pub use valuation::Allocation;
