use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use super::duration::DurationDist;
use super::reconstruct::{quantile_sorted, IncidenceReconstruction};
use crate::error::{Error, Result};
use crate::par::{map_indexed, stream_rng, Execution};

/// Inputs for simulating deaths from an incidence curve.
#[derive(Clone, Debug)]
pub struct SimulationSetup<'a> {
    /// Expected infections per grid day.
    pub incidence: &'a [f64],
    /// Grid day `j` corresponds to death day `j − grid_offset`.
    pub grid_offset: usize,
    pub n_days: usize,
    /// Delays longer than this are dropped, as in the fitted model.
    pub max_lag: usize,
    /// Day-of-week multiplier per death day.
    pub multipliers: Option<&'a [f64]>,
    /// Negative binomial θ for infection counts; Poisson when `None`.
    pub dispersion: Option<f64>,
}

fn count<R: Rng + ?Sized>(mean: f64, dispersion: Option<f64>, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let rate = match dispersion {
        Some(theta) => Gamma::new(theta, mean / theta)
            .expect("valid gamma")
            .sample(rng),
        None => mean,
    };
    if rate > 0.0 {
        Poisson::new(rate).expect("valid rate").sample(rng) as u64
    } else {
        0
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

/// Simulated daily deaths, one vector per replicate. Infections are drawn
/// per grid day, each given a delay from `duration`, and deaths on weighted
/// days are thinned by `c_i / max c`.
pub fn simulate_deaths(
    setup: &SimulationSetup,
    duration: &DurationDist,
    n_rep: usize,
    seed: u64,
    exec: Execution,
) -> Vec<Vec<u64>> {
    let c_max = setup
        .multipliers
        .map_or(1.0, |m| m.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let lags = setup.max_lag.min(duration.max_delay());
    map_indexed(n_rep, exec, |rep| {
        let mut rng = stream_rng(seed, rep as u64);
        let mut deaths = vec![0u64; setup.n_days];
        for (j, &a) in setup.incidence.iter().enumerate() {
            let infections = count(a * c_max, setup.dispersion, &mut rng);
            // Sequential binomial split of the infections over delays.
            let mut remaining = infections;
            let mut mass_left = 1.0;
            for d in 1..=lags {
                if remaining == 0 {
                    break;
                }
                let p = duration.prob(d);
                let k = binomial(remaining, (p / mass_left).min(1.0), &mut rng);
                remaining -= k;
                mass_left -= p;
                let day = j as i64 + d as i64 - setup.grid_offset as i64;
                if k > 0 && day >= 0 && (day as usize) < setup.n_days {
                    deaths[day as usize] += k;
                }
            }
        }
        if let Some(mult) = setup.multipliers {
            for (y, c) in deaths.iter_mut().zip(mult) {
                *y = binomial(*y, c / c_max, &mut rng);
            }
        }
        deaths
    })
}

/// Per-day envelope of simulated deaths compared with the observations.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub observed: Vec<f64>,
    /// Days whose observation lies outside `[lo, hi]`.
    pub outside: Vec<bool>,
}

impl Envelope {
    pub fn from_replicates(replicates: &[Vec<u64>], observed: &[u64]) -> Self {
        let n = observed.len();
        let mut env = Envelope {
            min: Vec::with_capacity(n),
            max: Vec::with_capacity(n),
            lo: Vec::with_capacity(n),
            hi: Vec::with_capacity(n),
            observed: observed.iter().map(|&v| v as f64).collect(),
            outside: Vec::with_capacity(n),
        };
        let mut day = vec![0.0; replicates.len()];
        for i in 0..n {
            for (v, r) in day.iter_mut().zip(replicates) {
                *v = r[i] as f64;
            }
            day.sort_by(|a, b| a.total_cmp(b));
            let (lo, hi) = (quantile_sorted(&day, 0.025), quantile_sorted(&day, 0.975));
            env.min.push(day[0]);
            env.max.push(day[day.len() - 1]);
            env.lo.push(lo);
            env.hi.push(hi);
            let y = env.observed[i];
            env.outside.push(y < lo || y > hi);
        }
        env
    }

    pub fn fraction_outside(&self) -> f64 {
        self.outside.iter().filter(|&&o| o).count() as f64 / self.outside.len().max(1) as f64
    }
}

/// Simulate deaths from a reconstruction using `duration` (which may differ
/// from the distribution used in the fit) and compare with the observed
/// series.
pub fn forward_simulate_check(
    rec: &IncidenceReconstruction,
    duration: &DurationDist,
    n_rep: usize,
    seed: u64,
    exec: Execution,
) -> Result<Envelope> {
    if n_rep < 100 {
        return Err(Error::Parameter(format!(
            "{n_rep} replicates requested; at least 100 are needed"
        )));
    }
    let setup = SimulationSetup {
        incidence: &rec.incidence_mean,
        grid_offset: rec.grid_offset,
        n_days: rec.observed.len(),
        max_lag: rec.d_limit,
        multipliers: rec.weekly_cycle.map(|_| rec.death_multipliers.as_slice()),
        dispersion: rec.dispersion,
    };
    let reps = simulate_deaths(&setup, duration, n_rep, seed, exec);
    Ok(Envelope::from_replicates(&reps, &rec.observed))
}

/// Ratio of the mean of `b` to the mean of `a` over `window` days centred on
/// index `center`.
pub fn scale_match(a: &[f64], b: &[f64], center: usize, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::Parameter(
            "window must contain at least one day".into(),
        ));
    }
    let start = center.checked_sub(window / 2).ok_or_else(|| {
        Error::Input(format!(
            "window of {window} days around {center} starts before the series"
        ))
    })?;
    let end = start + window;
    if end > a.len() || end > b.len() {
        return Err(Error::Input(format!(
            "window ending at {end} exceeds a series"
        )));
    }
    let mean_a: f64 = a[start..end].iter().sum::<f64>() / window as f64;
    let mean_b: f64 = b[start..end].iter().sum::<f64>() / window as f64;
    if mean_a == 0.0 {
        return Err(Error::Input(
            "reference series has zero mean over the window".into(),
        ));
    }
    Ok(mean_b / mean_a)
}
