//! Reconstruction of fatal incidence from daily deaths by deconvolution.
//!
//! Expected deaths on day `i` are `Σ_{d=1}^{D_i} exp{f(t_i − d)} π(d)`, where
//! `f` is a penalized cubic spline for log incidence and `π` a discretized
//! lognormal infection-to-death distribution. The maximum lag `D_i` starts
//! small and grows a day per day to a limit, so `f` is not estimated over a
//! long stretch where incidence is essentially zero. An optional cyclic
//! day-of-week term multiplies the mean.

mod duration;
mod model;
mod reconstruct;
mod series;
mod simulate;

pub use duration::{DurationDist, ISARIC_MEANLOG, ISARIC_SDLOG};
pub use model::Family;
pub use reconstruct::{
    default_basis_dim, reconstruct_incidence, DeconvOptions, IncidenceReconstruction,
    MIN_SERIES_DAYS,
};
pub use series::DeathSeries;
pub use simulate::{
    forward_simulate_check, scale_match, simulate_deaths, Envelope, SimulationSetup,
};
