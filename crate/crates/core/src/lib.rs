//! Reconstruction of epidemic incidence from death series, heterogeneous SEIR
//! dynamics and final sizes, and life-table based expected and excess deaths.
//!
//! The crate is organised as four modules plus helpers:
//!
//! * [`smoothcore`]: penalized spline bases, Newton fitting and smoothing
//!   parameter selection by Laplace approximate marginal likelihood.
//! * [`deconv`]: infection-to-death delay distributions, incidence
//!   reconstruction by deconvolution, and forward-simulation checks.
//! * [`seir`]: SEIR dynamics with person-to-person variability, final size
//!   equation, R(t) from incidence, and a two-compartment lockdown model.
//! * [`demog`]: iterated weekly life-table demography, seasonal cycles and
//!   baseline/excess death calculations.
//!
//! Loops over independent replicates run on rayon when the `parallel` feature
//! (on by default) is enabled; see [`par`].

pub mod deconv;
pub mod demog;
mod error;
pub mod par;
pub mod seir;
pub mod smoothcore;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
