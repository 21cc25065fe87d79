//! Two coupled SEIR compartments: people who lock down and key workers who
//! keep going out. Aggregate R first follows the locked compartment, where
//! most infections are, then recovers as infections shift to key workers.

use super::{check_run, rk4_step, SeirConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LockdownOptions {
    /// Day on which lockdown starts.
    pub onset: f64,
    /// Time constant (days) of the exponential approach of locked-compartment
    /// transmission to its lockdown value; zero switches instantly.
    pub ramp_days: f64,
    /// Fraction of contacts made at random across the whole population; the
    /// rest stay within the compartment.
    pub mixing: f64,
    pub initial_infected: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for LockdownOptions {
    fn default() -> Self {
        LockdownOptions {
            onset: 30.0,
            ramp_days: 7.0,
            mixing: 0.3,
            initial_infected: 1e-4,
            horizon: 200.0,
            dt: 0.05,
        }
    }
}

/// One compartment's path, as fractions of the whole population.
#[derive(Clone, Debug, Default)]
pub struct CompartmentPath {
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub incidence: Vec<f64>,
    /// New infections in the compartment per infectious member per mean
    /// infectious period, `incidence / (γ I)`.
    pub r_eff: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct LockdownResult {
    pub t: Vec<f64>,
    pub locked: CompartmentPath,
    pub key: CompartmentPath,
    /// Infection-weighted average of the compartment R values.
    pub aggregate_r: Vec<f64>,
}

/// Simulate lockdown with a key-worker share `key_share` of the population.
/// Before onset everyone transmits at the key configuration's `R₀`; from
/// onset the locked compartment moves to its own `R₀`. Both compartments
/// must share γ. Each compartment applies its own immunity coefficient to its
/// susceptible fraction.
pub fn two_compartment_lockdown(
    locked: &SeirConfig,
    key: &SeirConfig,
    key_share: f64,
    opts: &LockdownOptions,
) -> Result<LockdownResult> {
    locked.validate()?;
    key.validate()?;
    if !(key_share > 0.0 && key_share < 1.0) {
        return Err(Error::Parameter(format!(
            "key-worker share must lie in (0, 1), got {key_share}"
        )));
    }
    if locked.gamma != key.gamma {
        return Err(Error::Parameter(
            "compartments must share the recovery rate gamma".into(),
        ));
    }
    if !(0.0..=1.0).contains(&opts.mixing) || !(opts.ramp_days >= 0.0) {
        return Err(Error::Parameter(
            "mixing must lie in [0, 1] and the ramp be nonnegative".into(),
        ));
    }
    let steps = check_run(opts.initial_infected, opts.horizon, opts.dt)?;
    let sizes = [1.0 - key_share, key_share];
    let cfgs = [locked, key];
    let gamma = key.gamma;
    let transmission = |t: f64| -> [f64; 2] {
        let locked_r0 = if t < opts.onset {
            key.r0
        } else if opts.ramp_days == 0.0 {
            locked.r0
        } else {
            locked.r0 + (key.r0 - locked.r0) * (-(t - opts.onset) / opts.ramp_days).exp()
        };
        [locked_r0, key.r0]
    };
    // state: [s, e, i, r] for locked then key
    let new_infections = |t: f64, y: &[f64; 8]| -> [f64; 2] {
        let b = transmission(t);
        let total_i = y[2] + y[6];
        std::array::from_fn(|h| {
            let s = y[4 * h].max(0.0);
            let within = y[4 * h + 2] / sizes[h];
            let contact = (1.0 - opts.mixing) * within + opts.mixing * total_i;
            b[h] * gamma * sizes[h] * (s / sizes[h]).powf(cfgs[h].lambda) * contact
        })
    };
    let mut rhs = |t: f64, y: &[f64; 8]| -> Result<[f64; 8]> {
        let inf = new_infections(t, y);
        let mut d = [0.0; 8];
        for h in 0..2 {
            let (e, i) = (y[4 * h + 1], y[4 * h + 2]);
            d[4 * h] = -inf[h];
            d[4 * h + 1] = inf[h] - cfgs[h].delta * e;
            d[4 * h + 2] = cfgs[h].delta * e - gamma * i;
            d[4 * h + 3] = gamma * i;
        }
        Ok(d)
    };
    let i0 = opts.initial_infected;
    let mut y = [0.0; 8];
    for h in 0..2 {
        y[4 * h] = sizes[h] * (1.0 - i0);
        y[4 * h + 2] = sizes[h] * i0;
    }
    let mut out = LockdownResult::default();
    let mut t = 0.0;
    for k in 0..=steps {
        let inf = new_infections(t, &y);
        out.t.push(t);
        for (h, path) in [&mut out.locked, &mut out.key].into_iter().enumerate() {
            path.s.push(y[4 * h]);
            path.e.push(y[4 * h + 1]);
            path.i.push(y[4 * h + 2]);
            path.r.push(y[4 * h + 3]);
            path.incidence.push(inf[h]);
            path.r_eff.push(inf[h] / (gamma * y[4 * h + 2]));
        }
        out.aggregate_r
            .push((inf[0] + inf[1]) / (gamma * (y[2] + y[6])));
        if k == steps {
            break;
        }
        y = rk4_step(&mut rhs, t, &y, opts.dt)?;
        t = (k + 1) as f64 * opts.dt;
        if y.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::StepSize { dt: opts.dt, t });
        }
    }
    Ok(out)
}
