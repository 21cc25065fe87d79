//! Seasonal mortality cycle from weekly deaths: an additive model with a
//! cyclic week-of-year smooth and a centred trend smooth, fitted under a
//! scaled-t (or Gaussian) error distribution.

use nalgebra::{DMatrix, DVector};

use super::{WeeklySeries, WEEKS_PER_YEAR};
use crate::error::{Error, Result};
use crate::smoothcore::{
    build_basis, fit_penalized, BasisKind, FitOptions, GaussianLinear, LikelihoodEval,
    LogLikelihood, PenaltyBlock, SmoothTerm,
};
use crate::special::{digamma, ln_gamma, trigamma};

/// Smallest degrees of freedom of the t distribution; keeps the variance finite.
const NU_FLOOR: f64 = 2.01;
/// Weak normal prior on `τ = ln(ν − 2.01)`. Near-Gaussian data leave `ν`
/// unidentified (the likelihood keeps rising as `ν → ∞`); the prior keeps the
/// fit finite while barely moving `ν` when the data show heavy tails.
const SHAPE_PRIOR_MEAN: f64 = 2.079_441_541_679_836; // ln 8
const SHAPE_PRIOR_SD: f64 = 3.0;

/// Week-of-year share of annual mortality, `d_w` for `w = 1..=52`, summing to one.
#[derive(Clone, Debug)]
pub struct SeasonalCycle {
    d: Vec<f64>,
    /// Present when the cycle was estimated from data.
    pub fit: Option<SeasonalFitInfo>,
}

#[derive(Clone, Debug)]
pub struct SeasonalFitInfo {
    /// Fitted cyclic term `f̂₁(w)` for `w = 1..=52` (deaths per week).
    pub weekly_level: Vec<f64>,
    /// Fitted centred trend `f̂₂` at each data week.
    pub trend: Vec<f64>,
    pub sigma: f64,
    /// Degrees of freedom of the t errors; `None` for Gaussian errors.
    pub nu: Option<f64>,
    pub lambdas: Vec<f64>,
    pub edf: f64,
}

impl SeasonalCycle {
    /// Normalize 52 positive weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.len() != WEEKS_PER_YEAR {
            return Err(Error::Input(format!(
                "need 52 weekly weights, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Input(format!(
                "weight for week {} is not positive",
                w + 1
            )));
        }
        let total: f64 = weights.iter().sum();
        Ok(SeasonalCycle {
            d: weights.iter().map(|w| w / total).collect(),
            fit: None,
        })
    }

    /// No seasonality: `d_w = 1/52`.
    pub fn flat() -> Self {
        SeasonalCycle {
            d: vec![1.0 / WEEKS_PER_YEAR as f64; WEEKS_PER_YEAR],
            fit: None,
        }
    }

    /// `d_w` for week `w` in `1..=52`.
    pub fn multiplier(&self, week: usize) -> f64 {
        self.d[week - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorModel {
    /// Scaled t with estimated degrees of freedom `ν = 2.01 + e^τ`; robust
    /// to outlying weeks.
    #[default]
    StudentT,
    Gaussian,
}

#[derive(Clone, Debug)]
pub struct SeasonalFitOptions {
    pub error_model: ErrorModel,
    /// Basis dimension of the cyclic week-of-year term.
    pub cycle_dim: usize,
    /// Basis dimension of the trend; default `years + 3`.
    pub trend_dim: Option<usize>,
    pub fit: FitOptions,
}

impl Default for SeasonalFitOptions {
    fn default() -> Self {
        SeasonalFitOptions {
            error_model: ErrorModel::StudentT,
            cycle_dim: 20,
            trend_dim: None,
            fit: FitOptions {
                extrapolate: true,
                ..FitOptions::default()
            },
        }
    }
}

/// Location-scale likelihood for `y = Xβ + σε`. Coefficients are `β`, then
/// `ρ = ln σ`, then (t errors only) `τ` with `ν = 2.01 + e^τ`.
pub(crate) struct ScaledErrors {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub model: ErrorModel,
}

/// Per-observation derivatives with respect to the mean, `ρ` and `ν`.
struct Terms {
    value: f64,
    mu: f64,
    mu2: f64,
    rho: f64,
    rho2: f64,
    mu_rho: f64,
    nu: f64,
    nu2: f64,
    mu_nu: f64,
    rho_nu: f64,
}

fn t_terms(r: f64, sigma: f64, nu: f64) -> Terms {
    let s2 = sigma * sigma;
    let a = nu * s2 + r * r;
    let log1pz = (r * r / (nu * s2)).ln_1p();
    let value = ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - sigma.ln()
        - 0.5 * (nu + 1.0) * log1pz;
    let g = (nu + 1.0) * r * r / (2.0 * nu * a);
    Terms {
        value,
        mu: (nu + 1.0) * r / a,
        mu2: -(nu + 1.0) * (nu * s2 - r * r) / (a * a),
        rho: -1.0 + (nu + 1.0) * r * r / a,
        rho2: -2.0 * nu * (nu + 1.0) * s2 * r * r / (a * a),
        mu_rho: -2.0 * nu * (nu + 1.0) * s2 * r / (a * a),
        nu: 0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu - 0.5 * log1pz + g,
        nu2: 0.25 * trigamma(0.5 * (nu + 1.0)) - 0.25 * trigamma(0.5 * nu)
            + 0.5 / (nu * nu)
            + r * r / (2.0 * nu * a)
            + g * (1.0 / (nu + 1.0) - 1.0 / nu - s2 / a),
        mu_nu: r * (r * r - s2) / (a * a),
        rho_nu: r * r * (r * r - s2) / (a * a),
    }
}

fn gaussian_terms(r: f64, sigma: f64) -> Terms {
    let s2 = sigma * sigma;
    Terms {
        value: -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * r * r / s2,
        mu: r / s2,
        mu2: -1.0 / s2,
        rho: -1.0 + r * r / s2,
        rho2: -2.0 * r * r / s2,
        mu_rho: -2.0 * r / s2,
        nu: 0.0,
        nu2: 0.0,
        mu_nu: 0.0,
        rho_nu: 0.0,
    }
}

impl ScaledErrors {
    fn p_beta(&self) -> usize {
        self.x.ncols()
    }

    /// Log prior on the shape coefficient with its first two derivatives.
    fn shape_prior(&self, beta: &DVector<f64>) -> (f64, f64, f64) {
        if self.model != ErrorModel::StudentT {
            return (0.0, 0.0, 0.0);
        }
        let z = (beta[self.p_beta() + 1] - SHAPE_PRIOR_MEAN) / SHAPE_PRIOR_SD;
        (
            -0.5 * z * z,
            -z / SHAPE_PRIOR_SD,
            -1.0 / (SHAPE_PRIOR_SD * SHAPE_PRIOR_SD),
        )
    }

    fn terms(&self, beta: &DVector<f64>) -> (Vec<Terms>, Option<f64>) {
        let p = self.p_beta();
        let sigma = beta[p].exp();
        let nu = (self.model == ErrorModel::StudentT).then(|| NU_FLOOR + beta[p + 1].exp());
        let mu = &self.x * beta.rows(0, p);
        let terms = self
            .y
            .iter()
            .zip(mu.iter())
            .map(|(&y, &m)| match nu {
                Some(nu) => t_terms(y - m, sigma, nu),
                None => gaussian_terms(y - m, sigma),
            })
            .collect();
        (terms, nu)
    }

    fn evaluate_with(&self, beta: &DVector<f64>, expected: bool) -> LikelihoodEval {
        let p = self.p_beta();
        let n_extra = if self.model == ErrorModel::StudentT {
            2
        } else {
            1
        };
        let dim = p + n_extra;
        let (terms, nu) = self.terms(beta);
        let sigma2 = (2.0 * beta[p]).exp();
        let mut gradient = DVector::zeros(dim);
        let mut hessian = DMatrix::zeros(dim, dim);
        let col =
            |f: &dyn Fn(&Terms) -> f64| DVector::from_iterator(terms.len(), terms.iter().map(f));
        gradient
            .rows_mut(0, p)
            .copy_from(&(self.x.transpose() * col(&|t| t.mu)));
        gradient[p] = terms.iter().map(|t| t.rho).sum();
        let w = if expected {
            // Fisher information of the location-scale t; location is
            // orthogonal to scale and shape
            let info = match nu {
                Some(nu) => (nu + 1.0) / ((nu + 3.0) * sigma2),
                None => 1.0 / sigma2,
            };
            DVector::from_element(terms.len(), -info)
        } else {
            col(&|t| t.mu2)
        };
        let mut xw = self.x.clone();
        for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        hessian
            .view_mut((0, 0), (p, p))
            .copy_from(&(self.x.transpose() * xw));
        let n = terms.len() as f64;
        hessian[(p, p)] = if expected {
            match nu {
                Some(nu) => -n * 2.0 * nu / (nu + 3.0),
                None => -2.0 * n,
            }
        } else {
            terms.iter().map(|t| t.rho2).sum()
        };
        if !expected {
            let cross = self.x.transpose() * col(&|t| t.mu_rho);
            for c in 0..p {
                hessian[(c, p)] = cross[c];
                hessian[(p, c)] = cross[c];
            }
        }
        if let Some(nu) = nu {
            // chain rule for ν = floor + e^τ
            let e = nu - NU_FLOOR;
            let q = p + 1;
            let nu_grad: f64 = terms.iter().map(|t| t.nu).sum();
            gradient[q] = e * nu_grad;
            if expected {
                let info_nu = 0.25 * (trigamma(0.5 * nu) - trigamma(0.5 * (nu + 1.0)))
                    - (nu + 5.0) / (2.0 * nu * (nu + 1.0) * (nu + 3.0));
                hessian[(q, q)] = -n * e * e * info_nu;
                let rn = n * e * 2.0 / ((nu + 1.0) * (nu + 3.0));
                hessian[(p, q)] = rn;
                hessian[(q, p)] = rn;
            } else {
                hessian[(q, q)] = e * e * terms.iter().map(|t| t.nu2).sum::<f64>() + e * nu_grad;
                let rn = e * terms.iter().map(|t| t.rho_nu).sum::<f64>();
                hessian[(p, q)] = rn;
                hessian[(q, p)] = rn;
                let cross = self.x.transpose() * col(&|t| t.mu_nu) * e;
                for c in 0..p {
                    hessian[(c, q)] = cross[c];
                    hessian[(q, c)] = cross[c];
                }
            }
        }
        let (prior, prior_grad, prior_hess) = self.shape_prior(beta);
        if nu.is_some() {
            gradient[p + 1] += prior_grad;
            hessian[(p + 1, p + 1)] += prior_hess;
        }
        LikelihoodEval {
            value: terms.iter().map(|t| t.value).sum::<f64>() + prior,
            gradient,
            hessian,
        }
    }
}

impl LogLikelihood for ScaledErrors {
    fn n_coefficients(&self) -> usize {
        self.p_beta()
            + if self.model == ErrorModel::StudentT {
                2
            } else {
                1
            }
    }

    fn evaluate(&self, beta: &DVector<f64>) -> LikelihoodEval {
        self.evaluate_with(beta, false)
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        self.terms(beta).0.iter().map(|t| t.value).sum::<f64>() + self.shape_prior(beta).0
    }

    fn information(&self, beta: &DVector<f64>, _eval: &LikelihoodEval) -> DMatrix<f64> {
        // Outlying weeks make the observed t information indefinite.
        -self.evaluate_with(beta, true).hessian
    }
}

/// Estimate `d_w` from at least two years of weekly deaths by fitting
/// `y_i = f₁(w_i) + f₂(t_i) + σ ε_i` with `f₁` cyclic in the ISO week of the
/// year (week 53 counted as 52) and `f₂` a centred trend in weeks since the
/// start; then `d_w = f̂₁(w) / Σ f̂₁`.
pub fn fit_seasonal_cycle(
    deaths: &WeeklySeries,
    opts: &SeasonalFitOptions,
) -> Result<SeasonalCycle> {
    let n = deaths.len();
    if n < 2 * WEEKS_PER_YEAR {
        return Err(Error::Input(format!(
            "seasonal fit needs at least two years of weekly data, got {n} weeks"
        )));
    }
    if let Some(k) = deaths.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "weekly deaths at week {} are not finite",
            k + 1
        )));
    }
    let week_pos: Vec<f64> = (0..n)
        .map(|k| deaths.week_of_year(k) as f64 - 1.0)
        .collect();
    let t: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let cyclic = SmoothTerm::unconstrained(build_basis(
        BasisKind::CyclicCubic,
        (0.0, WEEKS_PER_YEAR as f64),
        opts.cycle_dim,
    )?);
    let trend_dim = opts.trend_dim.unwrap_or((n / WEEKS_PER_YEAR + 3).max(4));
    let trend = SmoothTerm::centered(
        build_basis(BasisKind::Cubic, (0.0, (n - 1) as f64), trend_dim)?,
        &t,
    );
    let x1 = cyclic.design_matrix(&week_pos);
    let x2 = trend.design_matrix(&t);
    let (k1, k2) = (x1.ncols(), x2.ncols());
    let mut x = DMatrix::zeros(n, k1 + k2);
    x.columns_mut(0, k1).copy_from(&x1);
    x.columns_mut(k1, k2).copy_from(&x2);
    let penalties = vec![
        PenaltyBlock::new(0, cyclic.penalty()),
        PenaltyBlock::new(k1, trend.penalty()),
    ];
    // Deviations from the mean keep the coefficients on the scale of the
    // seasonal swing, away from cancellation in βᵀSβ; the mean joins f₁.
    let mean = deaths.total() / n as f64;
    let y = DVector::from_iterator(n, deaths.values.iter().map(|v| v - mean));

    // Gaussian fit with a rough scale for starting values.
    let sd = (y.norm_squared() / (n as f64 - 1.0))
        .sqrt()
        .max(1e-8 * mean.abs().max(1.0));
    let gauss = GaussianLinear {
        x: x.clone(),
        y: y.clone(),
        sigma: sd,
    };
    let start = DVector::zeros(k1 + k2);
    let pilot = fit_penalized(&gauss, &penalties, &[1.0, 1.0], &start, &opts.fit)?;
    let resid = &y - &x * &pilot.beta_hat;
    let sigma0 = (resid.norm_squared() / n as f64).sqrt().max(1e-8 * sd);
    let rescale = (sd / sigma0).powi(2);
    let lambdas0: Vec<f64> = pilot.lambdas.iter().map(|l| l * rescale).collect();

    let lik = ScaledErrors {
        x: x.clone(),
        y,
        model: opts.error_model,
    };
    let mut beta0 = DVector::zeros(lik.n_coefficients());
    beta0.rows_mut(0, k1 + k2).copy_from(&pilot.beta_hat);
    beta0[k1 + k2] = sigma0.ln();
    if opts.error_model == ErrorModel::StudentT {
        beta0[k1 + k2 + 1] = (10.0 - NU_FLOOR).ln();
    }
    let fit = fit_penalized(&lik, &penalties, &lambdas0, &beta0, &opts.fit)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            iterations: fit.iterations,
            gradient_norm: f64::NAN,
            last_iterate: fit.beta_hat.iter().cloned().collect(),
        });
    }
    let beta = &fit.beta_hat;
    let weeks: Vec<f64> = (0..WEEKS_PER_YEAR).map(|w| w as f64).collect();
    let level = (cyclic.design_matrix(&weeks) * beta.rows(0, k1)).add_scalar(mean);
    if let Some(w) = level.iter().position(|v| *v <= 0.0) {
        return Err(Error::numerical(format!(
            "fitted weekly level is not positive in week {} ({})",
            w + 1,
            level[w]
        )));
    }
    let total = level.sum();
    let info = SeasonalFitInfo {
        weekly_level: level.iter().cloned().collect(),
        trend: (x2 * beta.rows(k1, k2)).iter().cloned().collect(),
        sigma: beta[k1 + k2].exp(),
        nu: (opts.error_model == ErrorModel::StudentT).then(|| NU_FLOOR + beta[k1 + k2 + 1].exp()),
        lambdas: fit.lambdas.clone(),
        edf: fit.edf,
    };
    Ok(SeasonalCycle {
        d: level.iter().map(|v| v / total).collect(),
        fit: Some(info),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(model: ErrorModel) {
        let n = 9;
        let x = DMatrix::from_fn(
            n,
            2,
            |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.7).sin() },
        );
        let y = DVector::from_fn(n, |i, _| {
            3.0 + (i as f64 * 1.3).cos() * if i == 4 { 6.0 } else { 1.0 }
        });
        let lik = ScaledErrors { x, y, model };
        let p = lik.n_coefficients();
        let beta = DVector::from_fn(p, |i, _| [2.5, 0.4, 0.2, 1.1][i]);
        let eval = lik.evaluate(&beta);
        let h = 1e-5;
        for c in 0..p {
            let mut bp = beta.clone();
            bp[c] += h;
            let mut bm = beta.clone();
            bm[c] -= h;
            let fd = (lik.value(&bp) - lik.value(&bm)) / (2.0 * h);
            assert!(
                (fd - eval.gradient[c]).abs() < 1e-6 * (1.0 + fd.abs()),
                "gradient {c}: {fd} vs {}",
                eval.gradient[c]
            );
            let fd_h = (lik.evaluate(&bp).gradient - lik.evaluate(&bm).gradient) / (2.0 * h);
            for r in 0..p {
                let e = eval.hessian[(r, c)];
                assert!(
                    (fd_h[r] - e).abs() < 1e-5 * (1.0 + e.abs()),
                    "hessian ({r},{c}): {} vs {e}",
                    fd_h[r]
                );
            }
        }
    }

    #[test]
    fn t_derivatives_match_finite_differences() {
        check(ErrorModel::StudentT);
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        check(ErrorModel::Gaussian);
    }

    #[test]
    fn t_density_integrates_to_one() {
        let (sigma, nu) = (1.7, 3.5);
        let h = 0.01;
        let total: f64 = (-200_000..200_000)
            .map(|k| t_terms(k as f64 * h, sigma, nu).value.exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-3);
    }
}
