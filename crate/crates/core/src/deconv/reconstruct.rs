use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::duration::DurationDist;
use super::model::{DeconvLikelihood, Family};
use super::series::{offset_date, DeathSeries};
use crate::error::{Error, Result};
use crate::par::{map_indexed, stream_rng, Execution};
use crate::smoothcore::linalg::solve_repaired;
use crate::smoothcore::{
    fit_fixed, fit_penalized, BasisKind, FitOptions, PenalizedFit, PenaltyBlock, SmoothTerm,
    SplineBasis,
};

/// Shortest series accepted for reconstruction.
pub const MIN_SERIES_DAYS: usize = 60;

#[derive(Clone, Debug)]
pub struct DeconvOptions {
    pub family: Family,
    pub weekly_cycle: bool,
    /// Incidence basis dimension; default one per eight days, within 6..=60.
    pub basis_dim: Option<usize>,
    /// Maximum delay for the first death day; grows by a day per day.
    pub d_start: usize,
    pub d_limit: usize,
    /// Skip smoothing parameter selection and use these values.
    pub fixed_lambdas: Option<Vec<f64>>,
    /// Posterior draws used for the credible bands.
    pub n_draws: usize,
    pub seed: u64,
    pub execution: Execution,
    pub fit: FitOptions,
}

impl Default for DeconvOptions {
    fn default() -> Self {
        DeconvOptions {
            family: Family::Poisson,
            weekly_cycle: false,
            basis_dim: None,
            d_start: 20,
            d_limit: 80,
            fixed_lambdas: None,
            n_draws: 1000,
            seed: 1,
            execution: Execution::default(),
            fit: FitOptions::default(),
        }
    }
}

pub fn default_basis_dim(n_days: usize) -> usize {
    n_days.div_ceil(8).clamp(6, 60)
}

/// Reconstructed fatal incidence on a day grid starting `grid_offset` days
/// before the first death day.
#[derive(Clone, Debug)]
pub struct IncidenceReconstruction {
    pub grid_start: NaiveDate,
    pub grid_offset: usize,
    pub log_f_mean: Vec<f64>,
    pub log_f_lo: Vec<f64>,
    pub log_f_hi: Vec<f64>,
    pub incidence_mean: Vec<f64>,
    pub incidence_lo: Vec<f64>,
    pub incidence_hi: Vec<f64>,
    pub observed: Vec<u64>,
    pub fitted_deaths: Vec<f64>,
    /// Day-of-week multiplier, Monday first, averaging one.
    pub weekly_cycle: Option<[f64; 7]>,
    /// Multiplier applied to each death day (all ones without a weekly cycle).
    pub death_multipliers: Vec<f64>,
    /// Negative binomial θ (variance μ + μ²/θ).
    pub dispersion: Option<f64>,
    pub family: Family,
    pub basis_dim: usize,
    pub d_start: usize,
    pub d_limit: usize,
    pub fit: PenalizedFit,
}

impl IncidenceReconstruction {
    pub fn grid_len(&self) -> usize {
        self.log_f_mean.len()
    }

    pub fn grid_date(&self, j: usize) -> NaiveDate {
        offset_date(self.grid_start, j as i64)
    }

    pub fn death_start(&self) -> NaiveDate {
        offset_date(self.grid_start, self.grid_offset as i64)
    }

    /// Grid index of the largest reconstructed incidence.
    pub fn peak_index(&self) -> usize {
        argmax(&self.incidence_mean)
    }

    pub fn peak_date(&self) -> NaiveDate {
        self.grid_date(self.peak_index())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
}

fn weekday_index(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}

/// Linear interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Starting coefficients: least-squares fit of the spline to log deaths moved
/// back by the mean delay.
fn initial_incidence_coefficients(
    y: &[f64],
    x_inc: &DMatrix<f64>,
    offset: usize,
    lag: usize,
) -> DVector<f64> {
    let n = y.len();
    let m = x_inc.nrows();
    let target = DVector::from_fn(m, |j, _| {
        let centre = (j + lag).saturating_sub(offset).min(n - 1) as i64;
        let (sum, count) = (centre - 3..=centre + 3)
            .filter(|&i| i >= 0 && (i as usize) < n)
            .fold((0.0, 0.0), |(s, c), i| (s + y[i as usize], c + 1.0));
        (sum / count).max(0.2).ln()
    });
    let k = x_inc.ncols();
    let gram = x_inc.transpose() * x_inc + DMatrix::identity(k, k) * 1e-6;
    solve_repaired(&gram, &(x_inc.transpose() * target), 1e-12).0
}

/// Fit the deconvolution model to a death series.
pub fn reconstruct_incidence(
    series: &DeathSeries,
    duration: &DurationDist,
    opts: &DeconvOptions,
) -> Result<IncidenceReconstruction> {
    let n = series.len();
    if n < MIN_SERIES_DAYS {
        return Err(Error::Input(format!(
            "death series has {n} days; at least {MIN_SERIES_DAYS} are needed"
        )));
    }
    if series.total() == 0 {
        return Err(Error::Input("death series is all zero".into()));
    }
    if opts.d_start == 0 || opts.d_limit < opts.d_start {
        return Err(Error::Parameter(format!(
            "delay schedule needs 0 < d_start <= d_limit, got {} and {}",
            opts.d_start, opts.d_limit
        )));
    }
    let offset = opts.d_start;
    let m = n + offset;
    let k = opts.basis_dim.unwrap_or_else(|| default_basis_dim(n));
    let grid: Vec<f64> = (0..m).map(|j| j as f64).collect();
    let inc_basis = SplineBasis::new(BasisKind::Cubic, (0.0, (m - 1) as f64), k)?;
    let x_inc = inc_basis.design_matrix(&grid);
    let mut penalties = vec![PenaltyBlock::new(0, inc_basis.second_derivative_penalty())];

    let weekdays: Vec<usize> = (0..n).map(|i| weekday_index(series.date(i))).collect();
    let week_term = if opts.weekly_cycle {
        let basis = SplineBasis::new(BasisKind::CyclicCubic, (0.0, 7.0), 7)?;
        let days: Vec<f64> = (0..7).map(|d| d as f64).collect();
        Some(SmoothTerm::centered(basis, &days))
    } else {
        None
    };
    let x_week = week_term.as_ref().map(|term| {
        let per_day = term.design_matrix(&(0..7).map(|d| d as f64).collect::<Vec<_>>());
        DMatrix::from_fn(n, term.dim(), |i, c| per_day[(weekdays[i], c)])
    });
    let kw = week_term.as_ref().map_or(0, |t| t.dim());
    if let Some(term) = &week_term {
        penalties.push(PenaltyBlock::new(k, term.penalty()));
    }

    let y: Vec<f64> = series.deaths.iter().map(|&v| v as f64).collect();
    let lik = DeconvLikelihood {
        lags: DeconvLikelihood::lag_matrix(
            |d| duration.prob(d),
            n,
            offset,
            opts.d_start,
            opts.d_limit,
        ),
        y: y.clone(),
        x_inc: x_inc.clone(),
        x_week,
        family: opts.family,
        expected_information: true,
    };
    let p = lik_dim(k, kw, opts.family);
    let mut beta0 = DVector::zeros(p);
    beta0
        .rows_mut(0, k)
        .copy_from(&initial_incidence_coefficients(
            &y,
            &x_inc,
            offset,
            duration.mean().round() as usize,
        ));
    if opts.family == Family::NegBin {
        beta0[p - 1] = 10f64.ln();
    }

    let fit = match &opts.fixed_lambdas {
        Some(l) => fit_fixed(&lik, &penalties, l, &beta0, &opts.fit)?,
        None => {
            let fit = fit_penalized(
                &lik,
                &penalties,
                &vec![1.0; penalties.len()],
                &beta0,
                &opts.fit,
            )?;
            if !fit.converged {
                return Err(Error::NonConvergence {
                    iterations: fit.iterations,
                    gradient_norm: f64::NAN,
                    last_iterate: fit.beta_hat.iter().cloned().collect(),
                });
            }
            fit
        }
    };

    let beta = &fit.beta_hat;
    let (_, mult, mu) = lik.components(beta);
    // Rescale so the day-of-week multiplier averages one; the incidence
    // absorbs the constant and fitted deaths are unchanged.
    let (weekly_cycle, shift) = match (&week_term, kw) {
        (Some(term), kw) if kw > 0 => {
            let per_day = term.design_matrix(&(0..7).map(|d| d as f64).collect::<Vec<_>>())
                * beta.rows(k, kw);
            let raw: Vec<f64> = per_day.iter().map(|g| g.exp()).collect();
            let mean = raw.iter().sum::<f64>() / 7.0;
            let mut cycle = [0.0; 7];
            for (c, r) in cycle.iter_mut().zip(&raw) {
                *c = r / mean;
            }
            (Some(cycle), mean.ln())
        }
        _ => (None, 0.0),
    };
    let death_multipliers: Vec<f64> = mult.iter().map(|c| c * (-shift).exp()).collect();

    let log_f_mean: Vec<f64> = (&x_inc * beta.rows(0, k))
        .iter()
        .map(|f| f + shift)
        .collect();
    let (log_f_lo, log_f_hi) = credible_band(&x_inc, &fit, k, opts)?;
    let log_f_lo: Vec<f64> = log_f_lo.iter().map(|v| v + shift).collect();
    let log_f_hi: Vec<f64> = log_f_hi.iter().map(|v| v + shift).collect();

    Ok(IncidenceReconstruction {
        grid_start: offset_date(series.start, -(offset as i64)),
        grid_offset: offset,
        incidence_mean: log_f_mean.iter().map(|v| v.exp()).collect(),
        incidence_lo: log_f_lo.iter().map(|v| v.exp()).collect(),
        incidence_hi: log_f_hi.iter().map(|v| v.exp()).collect(),
        log_f_mean,
        log_f_lo,
        log_f_hi,
        observed: series.deaths.clone(),
        fitted_deaths: mu.iter().cloned().collect(),
        weekly_cycle,
        death_multipliers,
        dispersion: (opts.family == Family::NegBin).then(|| beta[p - 1].exp()),
        family: opts.family,
        basis_dim: k,
        d_start: opts.d_start,
        d_limit: opts.d_limit,
        fit,
    })
}

fn lik_dim(k: usize, kw: usize, family: Family) -> usize {
    k + kw + usize::from(family == Family::NegBin)
}

/// Pointwise 2.5% and 97.5% quantiles of `f` under the Gaussian posterior of
/// the incidence coefficients, from `opts.n_draws` draws.
fn credible_band(
    x_inc: &DMatrix<f64>,
    fit: &PenalizedFit,
    k: usize,
    opts: &DeconvOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = x_inc.nrows();
    if opts.n_draws < 2 {
        return Err(Error::Parameter(
            "at least two posterior draws are needed".into(),
        ));
    }
    let v = fit.v_beta.view((0, 0), (k, k)).into_owned();
    let root = covariance_root(&v);
    let mean = fit.beta_hat.rows(0, k).into_owned();
    let draws: Vec<DVector<f64>> = map_indexed(opts.n_draws, opts.execution, |s| {
        let mut rng = stream_rng(opts.seed, s as u64);
        let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        x_inc * (&mean + &root * z)
    });
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    let mut column = vec![0.0; draws.len()];
    for j in 0..m {
        for (c, d) in column.iter_mut().zip(&draws) {
            *c = d[j];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        lo.push(quantile_sorted(&column, 0.025));
        hi.push(quantile_sorted(&column, 0.975));
    }
    Ok((lo, hi))
}

/// A matrix `R` with `R Rᵀ = V`: Cholesky when possible, otherwise the
/// symmetric square root with negative eigenvalues dropped.
fn covariance_root(v: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (v + v.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return ch.l();
    }
    let eig = sym.symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for (mut col, &l) in root.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= l.max(0.0).sqrt();
    }
    root
}
