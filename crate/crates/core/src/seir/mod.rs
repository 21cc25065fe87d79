//! SEIR dynamics with person-to-person variability in susceptibility or
//! connectivity.
//!
//! If the variable `α` scaling an individual's infection rate has moment
//! generating function `M` in the initial susceptible population, the total
//! susceptible fraction is `S_t = M(−q_t)` and the infinite-dimensional model
//! reduces to three ODEs. For gamma distributed `α` with shape `k` this is
//! `dS/dt = −R₀γS^λI` with immunity coefficient `λ = 1 + 1/k`
//! (susceptibility) or `1 + 2/k` (connectivity). `α` is scaled to mean one so
//! that `R₀` keeps its usual meaning.

mod final_size;
mod general;
mod lockdown;
mod mgf;
mod rt;

pub use final_size::final_size;
pub use general::{solve_seir_general, HeterogeneityMode};
pub use lockdown::{two_compartment_lockdown, CompartmentPath, LockdownOptions, LockdownResult};
pub use mgf::{FnMgf, GammaMgf, Mgf, Mixture, PointMass};
pub use rt::{r_from_incidence, RTrajectory};

use crate::error::{Error, Result};

/// Distribution of person-to-person variability, by gamma shape `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Heterogeneity {
    None,
    Susceptibility(f64),
    Connectivity(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeirConfig {
    pub r0: f64,
    /// Rate of leaving the exposed class (1 / mean latent period), per day.
    pub delta: f64,
    /// Recovery rate (1 / mean infectious period), per day.
    pub gamma: f64,
    /// Exponent on S in the reduced model.
    pub lambda: f64,
}

impl SeirConfig {
    pub fn new(r0: f64, delta: f64, gamma: f64, heterogeneity: Heterogeneity) -> Result<Self> {
        let lambda = match heterogeneity {
            Heterogeneity::None => 1.0,
            Heterogeneity::Susceptibility(k) | Heterogeneity::Connectivity(k)
                if !(k > 0.0 && k.is_finite()) =>
            {
                return Err(Error::Parameter(format!(
                    "gamma shape must be positive, got {k}"
                )))
            }
            Heterogeneity::Susceptibility(k) => 1.0 + 1.0 / k,
            Heterogeneity::Connectivity(k) => 1.0 + 2.0 / k,
        };
        Self::with_lambda(r0, delta, gamma, lambda)
    }

    /// Configuration with the immunity coefficient given directly.
    pub fn with_lambda(r0: f64, delta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let cfg = SeirConfig {
            r0,
            delta,
            gamma,
            lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("R0", self.r0),
            ("delta", self.delta),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "immunity coefficient must be at least 1, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Solution on the integration grid, as fractions of the initial population.
#[derive(Clone, Debug, Default)]
pub struct SeirTrajectory {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub i: Vec<f64>,
    /// Cumulative removed.
    pub r: Vec<f64>,
    /// New infections per day, −dS/dt.
    pub incidence: Vec<f64>,
    /// Effective reproduction number, incidence / (γ I).
    pub r_eff: Vec<f64>,
    /// `q_t` with `S_t = M(−q_t)`, for the general solver.
    pub q: Option<Vec<f64>>,
}

impl SeirTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Final attack fraction, 1 − S at the end of the run.
    pub fn attack_fraction(&self) -> f64 {
        1.0 - self.s.last().copied().unwrap_or(1.0)
    }

    /// Indices of whole days on the grid.
    pub fn daily_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut next = 0.0;
        for (k, &t) in self.t.iter().enumerate() {
            if t >= next - 1e-9 {
                out.push(k);
                next += 1.0;
            }
        }
        out
    }

    /// Susceptible fraction within the group with variability value `alpha`,
    /// `exp(−α q_t)`; available from the general solver.
    pub fn group_susceptible(&self, alpha: f64) -> Option<Vec<f64>> {
        self.q
            .as_ref()
            .map(|q| q.iter().map(|q| (-alpha * q).exp()).collect())
    }
}

pub(crate) fn rk4_step<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> Result<[f64; N]> {
    let add = |a: &[f64; N], b: &[f64; N], h: f64| -> [f64; N] {
        std::array::from_fn(|k| a[k] + h * b[k])
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &add(y, &k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &add(y, &k2, 0.5 * dt))?;
    let k4 = f(t + dt, &add(y, &k3, dt))?;
    Ok(std::array::from_fn(|k| {
        y[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
    }))
}

pub(crate) fn check_run(initial_infected: f64, horizon: f64, dt: f64) -> Result<usize> {
    if !(initial_infected > 0.0 && initial_infected < 1.0) {
        return Err(Error::Parameter(format!(
            "initial infected fraction must lie in (0, 1), got {initial_infected}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!(
            "need positive step and horizon, got dt {dt}, horizon {horizon}"
        )));
    }
    Ok((horizon / dt).round() as usize)
}

/// Integrate the reduced model `dS/dt = −R₀γS^λI`, `dE/dt = −dS/dt − δE`,
/// `dI/dt = δE − γI` by fixed-step RK4 from `S = 1 − i₀`, `E = 0`, `I = i₀`.
pub fn solve_seir(
    cfg: &SeirConfig,
    initial_infected: f64,
    horizon: f64,
    dt: f64,
) -> Result<SeirTrajectory> {
    solve_seir_varying(cfg, |_| 1.0, initial_infected, horizon, dt)
}

/// As [`solve_seir`] with `R₀` multiplied by `scale(t)`.
pub fn solve_seir_varying(
    cfg: &SeirConfig,
    scale: impl Fn(f64) -> f64,
    initial_infected: f64,
    horizon: f64,
    dt: f64,
) -> Result<SeirTrajectory> {
    cfg.validate()?;
    let steps = check_run(initial_infected, horizon, dt)?;
    let force = |t: f64, s: f64, i: f64| cfg.r0 * scale(t) * cfg.gamma * s.powf(cfg.lambda) * i;
    let mut rhs = |t: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let inf = force(t, y[0].max(0.0), y[2]);
        Ok([
            -inf,
            inf - cfg.delta * y[1],
            cfg.delta * y[1] - cfg.gamma * y[2],
            cfg.gamma * y[2],
        ])
    };
    let mut traj = SeirTrajectory::default();
    let mut y = [1.0 - initial_infected, 0.0, initial_infected, 0.0];
    let mut t = 0.0;
    for k in 0..=steps {
        let inc = force(t, y[0], y[2]);
        traj.t.push(t);
        traj.s.push(y[0]);
        traj.e.push(y[1]);
        traj.i.push(y[2]);
        traj.r.push(y[3]);
        traj.incidence.push(inc);
        traj.r_eff.push(cfg.r0 * scale(t) * y[0].powf(cfg.lambda));
        if k == steps {
            break;
        }
        y = rk4_step(&mut rhs, t, &y, dt)?;
        t = (k + 1) as f64 * dt;
        if y.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::StepSize { dt, t });
        }
    }
    Ok(traj)
}
