//! Likelihood of daily deaths given log incidence on a day grid.
//!
//! Death day `i` (0-based) has mean `μ_i = c_i Σ_{d=1}^{D_i} π(d) exp f(t_i − d)`
//! with `c_i` an optional day-of-week multiplier. Incidence day `j` on the grid
//! corresponds to death day `j − offset`, so the grid starts `offset` days
//! before the first death.

use nalgebra::{DMatrix, DVector};

use crate::smoothcore::{LikelihoodEval, LogLikelihood};
use crate::special::{digamma, ln_gamma, trigamma};

/// Error distribution of daily deaths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Family {
    #[default]
    Poisson,
    /// Negative binomial with variance `μ + μ²/θ`; `ln θ` is estimated as an
    /// extra unpenalized coefficient.
    NegBin,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegBin => "negbin",
        }
    }
}

/// Per-observation log likelihood terms.
struct Terms {
    value: f64,
    /// ∂l/∂μ
    d_mu: f64,
    /// ∂²l/∂μ²
    d_mu2: f64,
    /// ∂l/∂ρ, ∂²l/∂ρ², ∂²l/∂μ∂ρ with ρ = ln θ (negative binomial only).
    d_rho: f64,
    d_rho2: f64,
    d_mu_rho: f64,
}

fn poisson_terms(y: f64, mu: f64) -> Terms {
    let log_term = if y > 0.0 { y * mu.ln() } else { 0.0 };
    Terms {
        value: log_term - mu - ln_gamma(y + 1.0),
        d_mu: y / mu - 1.0,
        d_mu2: -y / (mu * mu),
        d_rho: 0.0,
        d_rho2: 0.0,
        d_mu_rho: 0.0,
    }
}

/// Largest integer count for which `ln Γ(y + θ) − ln Γ(θ)` and its
/// derivatives are summed term by term; the sums stay accurate for huge θ,
/// where differences of log-gamma values lose every digit.
const MAX_EXACT_COUNT: f64 = 5000.0;

fn negbin_terms(y: f64, mu: f64, rho: f64) -> Terms {
    let theta = rho.exp();
    let mt = mu + theta;
    // ln Γ(y + θ) − ln Γ(θ) − y ln(μ + θ), and the digamma and trigamma
    // differences at y + θ and θ.
    let (core, dg, tg) = if y.fract() == 0.0 && y <= MAX_EXACT_COUNT {
        (0..y as usize).fold((0.0, 0.0, 0.0), |(c, d, t), j| {
            let tj = theta + j as f64;
            (
                c + ((j as f64 - mu) / mt).ln_1p(),
                d + 1.0 / tj,
                t - 1.0 / (tj * tj),
            )
        })
    } else {
        (
            ln_gamma(y + theta) - ln_gamma(theta) - y * mt.ln(),
            digamma(y + theta) - digamma(theta),
            trigamma(y + theta) - trigamma(theta),
        )
    };
    let log_mu = if y > 0.0 { y * mu.ln() } else { 0.0 };
    let shrink = (mu / theta).ln_1p();
    let value = core + log_mu - ln_gamma(y + 1.0) - theta * shrink;
    let d_theta = dg - shrink + (mu - y) / mt;
    // 1/θ − 2/(μ+θ) + (y+θ)/(μ+θ)² without the cancellation
    let d_theta2 = tg + (mu * mu + theta * y) / (theta * mt * mt);
    Terms {
        value,
        d_mu: y / mu - (y + theta) / mt,
        d_mu2: -y / (mu * mu) + (y + theta) / (mt * mt),
        d_rho: theta * d_theta,
        d_rho2: theta * theta * d_theta2 + theta * d_theta,
        d_mu_rho: theta * (y - mu) / (mt * mt),
    }
}

/// Soft upper bound on `ln θ`. Without overdispersion the likelihood keeps
/// rising as θ → ∞; past this point the negative binomial is Poisson for any
/// realistic count, so a unit quadratic barrier holds θ there.
pub(crate) const MAX_LOG_DISPERSION: f64 = 15.0;

/// Barrier value, slope and curvature at `ln θ = rho`.
fn dispersion_barrier(rho: f64) -> (f64, f64, f64) {
    let excess = rho - MAX_LOG_DISPERSION;
    if excess > 0.0 {
        (-0.5 * excess * excess, -excess, -1.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// The deconvolution likelihood. Coefficients are ordered as incidence
/// spline, then weekly-cycle spline (if any), then `ln θ` (negative binomial).
pub(crate) struct DeconvLikelihood {
    pub y: Vec<f64>,
    /// Grid days × incidence basis.
    pub x_inc: DMatrix<f64>,
    /// Death days × weekly basis.
    pub x_week: Option<DMatrix<f64>>,
    /// Death days × grid days delay weights.
    pub lags: DMatrix<f64>,
    pub family: Family,
    /// Use the expected rather than the observed information for the
    /// posterior precision. The observed version carries second-derivative
    /// terms of μ that can make it indefinite, which destabilizes smoothing
    /// parameter selection; Newton steps always use the observed Hessian.
    pub expected_information: bool,
}

impl DeconvLikelihood {
    /// Delay weight matrix with `D_i = min(d_start + i, d_limit)`.
    pub fn lag_matrix(
        pmf: impl Fn(usize) -> f64,
        n_days: usize,
        offset: usize,
        d_start: usize,
        d_limit: usize,
    ) -> DMatrix<f64> {
        let m = n_days + offset;
        let mut lags = DMatrix::zeros(n_days, m);
        for i in 0..n_days {
            let max_lag = (d_start + i).min(d_limit);
            for d in 1..=max_lag {
                let j = i + offset;
                if j >= d {
                    lags[(i, j - d)] = pmf(d);
                }
            }
        }
        lags
    }

    fn k_inc(&self) -> usize {
        self.x_inc.ncols()
    }

    fn k_week(&self) -> usize {
        self.x_week.as_ref().map_or(0, |x| x.ncols())
    }

    fn rho(&self, beta: &DVector<f64>) -> Option<f64> {
        match self.family {
            Family::Poisson => None,
            Family::NegBin => Some(beta[beta.len() - 1]),
        }
    }

    /// Incidence on the grid, per-day multipliers and death means.
    pub fn components(&self, beta: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let k = self.k_inc();
        let inc = (&self.x_inc * beta.rows(0, k)).map(f64::exp);
        let conv = &self.lags * &inc;
        let mult = match &self.x_week {
            Some(xw) => (xw * beta.rows(k, xw.ncols())).map(f64::exp),
            None => DVector::from_element(self.y.len(), 1.0),
        };
        let mu = conv.component_mul(&mult);
        (inc, mult, mu)
    }

    fn terms(&self, y: f64, mu: f64, rho: Option<f64>) -> Terms {
        match rho {
            None => poisson_terms(y, mu),
            Some(r) => negbin_terms(y, mu, r),
        }
    }
}

impl LogLikelihood for DeconvLikelihood {
    fn n_coefficients(&self) -> usize {
        self.k_inc() + self.k_week() + usize::from(self.family == Family::NegBin)
    }

    fn evaluate(&self, beta: &DVector<f64>) -> LikelihoodEval {
        self.evaluate_with(beta, false)
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        let rho = self.rho(beta);
        let (_, _, mu) = self.components(beta);
        self.y
            .iter()
            .zip(mu.iter())
            .map(|(&y, &m)| self.terms(y, m, rho).value)
            .sum::<f64>()
            + rho.map_or(0.0, |r| dispersion_barrier(r).0)
    }

    fn information(&self, beta: &DVector<f64>, eval: &LikelihoodEval) -> DMatrix<f64> {
        if self.expected_information {
            -self.evaluate_with(beta, true).hessian
        } else {
            -&eval.hessian
        }
    }
}

impl DeconvLikelihood {
    /// Value, gradient and Hessian; with `expected` the Hessian is replaced by
    /// minus the expected information.
    fn evaluate_with(&self, beta: &DVector<f64>, expected: bool) -> LikelihoodEval {
        let p = self.n_coefficients();
        let (k, kw) = (self.k_inc(), self.k_week());
        let n = self.y.len();
        let rho = self.rho(beta);
        let (inc, mult, mu) = self.components(beta);

        let terms: Vec<Terms> = (0..n).map(|i| self.terms(self.y[i], mu[i], rho)).collect();
        let mut value: f64 = terms.iter().map(|t| t.value).sum();
        let r = DVector::from_iterator(n, terms.iter().map(|t| t.d_mu));
        let h = if expected {
            DVector::from_iterator(
                n,
                mu.iter().map(|&m| match rho {
                    None => -1.0 / m,
                    Some(r) => -1.0 / (m + m * m / r.exp()),
                }),
            )
        } else {
            DVector::from_iterator(n, terms.iter().map(|t| t.d_mu2))
        };

        // Jacobian of μ with respect to the spline coefficients.
        let mut weighted = self.lags.clone();
        for (mut row, c) in weighted.row_iter_mut().zip(mult.iter()) {
            row *= *c;
        }
        for (mut col, a) in weighted.column_iter_mut().zip(inc.iter()) {
            col *= *a;
        }
        let ks = k + kw;
        let mut jac = DMatrix::zeros(n, ks);
        jac.columns_mut(0, k).copy_from(&(&weighted * &self.x_inc));
        if let Some(xw) = &self.x_week {
            let mut block = xw.clone();
            for (mut row, m) in block.row_iter_mut().zip(mu.iter()) {
                row *= *m;
            }
            jac.columns_mut(k, kw).copy_from(&block);
        }

        let mut gradient = DVector::zeros(p);
        gradient.rows_mut(0, ks).copy_from(&(jac.transpose() * &r));

        let mut jh = jac.clone();
        for (mut row, hi) in jh.row_iter_mut().zip(h.iter()) {
            row *= *hi;
        }
        let mut hessian = DMatrix::zeros(p, p);
        let mut smooth_block = jac.transpose() * &jh;

        // Second derivatives of μ weighted by ∂l/∂μ (zero in expectation).
        // Incidence block:
        // Σ_j ω_j x_j x_jᵀ with ω = a ∘ (Lᵀ (r ∘ c)).
        if !expected {
            let rc = r.component_mul(&mult);
            let omega = (self.lags.transpose() * rc).component_mul(&inc);
            let mut xo = self.x_inc.clone();
            for (mut row, o) in xo.row_iter_mut().zip(omega.iter()) {
                row *= *o;
            }
            let mut ff = smooth_block.view_mut((0, 0), (k, k));
            ff += self.x_inc.transpose() * xo;
            if let Some(xw) = &self.x_week {
                let mut xr = xw.clone();
                for (mut row, (ri, mi)) in xr.row_iter_mut().zip(r.iter().zip(mu.iter())) {
                    row *= ri * mi;
                }
                let mut ww = smooth_block.view_mut((k, k), (kw, kw));
                ww += xw.transpose() * xr;
                let mut jr = jac.columns(0, k).into_owned();
                for (mut row, ri) in jr.row_iter_mut().zip(r.iter()) {
                    row *= *ri;
                }
                let fw = jr.transpose() * xw;
                let mut upper = smooth_block.view_mut((0, k), (k, kw));
                upper += &fw;
                let mut lower = smooth_block.view_mut((k, 0), (kw, k));
                lower += fw.transpose();
            }
        }
        hessian.view_mut((0, 0), (ks, ks)).copy_from(&smooth_block);

        if let Some(rho) = rho {
            let last = p - 1;
            let (b_value, b_slope, b_curv) = dispersion_barrier(rho);
            value += b_value;
            gradient[last] = terms.iter().map(|t| t.d_rho).sum::<f64>() + b_slope;
            hessian[(last, last)] = terms.iter().map(|t| t.d_rho2).sum::<f64>() + b_curv;
            // mean and dispersion are orthogonal in expectation
            if !expected {
                let cross =
                    jac.transpose() * DVector::from_iterator(n, terms.iter().map(|t| t.d_mu_rho));
                for c in 0..ks {
                    hessian[(c, last)] = cross[c];
                    hessian[(last, c)] = cross[c];
                }
            }
        }
        LikelihoodEval {
            value,
            gradient,
            hessian,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(family: Family, weekly: bool) -> DeconvLikelihood {
        let n = 12;
        let offset = 3;
        let m = n + offset;
        let k = 4;
        let x_inc = DMatrix::from_fn(m, k, |j, c| {
            ((j as f64 / m as f64) * (c as f64 + 1.0)).sin() * 0.5 + 0.1 * c as f64
        });
        let x_week = weekly.then(|| {
            DMatrix::from_fn(n, 2, |i, c| ((i % 7) as f64 * (c as f64 + 1.0)).cos() * 0.3)
        });
        let pmf = |d: usize| [0.0, 0.2, 0.5, 0.3][d.min(3)];
        DeconvLikelihood {
            y: (0..n).map(|i| ((i * 7) % 5) as f64).collect(),
            x_inc,
            x_week,
            lags: DeconvLikelihood::lag_matrix(pmf, n, offset, 2, 3),
            family,
            expected_information: false,
        }
    }

    fn check_derivatives(lik: &DeconvLikelihood) {
        let p = lik.n_coefficients();
        let beta = DVector::from_fn(p, |i, _| 0.3 - 0.1 * i as f64);
        let eval = lik.evaluate(&beta);
        let h = 1e-5;
        for c in 0..p {
            let mut bp = beta.clone();
            bp[c] += h;
            let mut bm = beta.clone();
            bm[c] -= h;
            let fd_grad = (lik.value(&bp) - lik.value(&bm)) / (2.0 * h);
            assert!(
                (fd_grad - eval.gradient[c]).abs() < 1e-6 * (1.0 + fd_grad.abs()),
                "gradient {c}"
            );
            let fd_hess = (lik.evaluate(&bp).gradient - lik.evaluate(&bm).gradient) / (2.0 * h);
            for r in 0..p {
                let e = eval.hessian[(r, c)];
                assert!(
                    (fd_hess[r] - e).abs() < 1e-5 * (1.0 + e.abs()),
                    "hessian ({r},{c}) {e} vs {}",
                    fd_hess[r]
                );
            }
        }
    }

    #[test]
    fn poisson_derivatives_match_finite_differences() {
        check_derivatives(&small_model(Family::Poisson, false));
        check_derivatives(&small_model(Family::Poisson, true));
    }

    #[test]
    fn negbin_derivatives_match_finite_differences() {
        check_derivatives(&small_model(Family::NegBin, false));
        check_derivatives(&small_model(Family::NegBin, true));
    }

    #[test]
    fn summed_negbin_terms_match_log_gamma_form() {
        for (y, mu, rho) in [
            (0.0, 3.0, 0.5),
            (7.0, 4.2, 1.3),
            (40.0, 35.0, -0.7),
            (120.0, 90.0, 3.0),
        ] {
            let t = negbin_terms(y, mu, rho);
            let theta: f64 = rho.exp();
            let mt = mu + theta;
            let value = ln_gamma(y + theta) - ln_gamma(theta) - ln_gamma(y + 1.0)
                + theta * (theta / mt).ln()
                + if y > 0.0 { y * (mu / mt).ln() } else { 0.0 };
            let d_theta = digamma(y + theta) - digamma(theta) + (theta / mt).ln() + (mu - y) / mt;
            assert!(
                (t.value - value).abs() < 1e-9 * (1.0 + value.abs()),
                "value at y = {y}"
            );
            assert!((t.d_rho - theta * d_theta).abs() < 1e-8, "slope at y = {y}");
        }
    }

    #[test]
    fn negbin_tends_to_poisson_for_huge_dispersion() {
        for y in [0.0, 3.0, 250.0] {
            let nb = negbin_terms(y, 180.0, 20.0);
            let po = poisson_terms(y, 180.0);
            assert!((nb.value - po.value).abs() < 1e-3, "y = {y}");
            assert!(nb.d_rho.abs() < 1e-3);
        }
    }

    #[test]
    fn dispersion_barrier_derivatives_match_finite_differences() {
        let lik = small_model(Family::NegBin, false);
        let p = lik.n_coefficients();
        let mut beta = DVector::from_fn(p, |i, _| 0.3 - 0.1 * i as f64);
        beta[p - 1] = MAX_LOG_DISPERSION + 2.0;
        let eval = lik.evaluate(&beta);
        let h = 1e-4;
        let at = |d: f64| {
            let mut b = beta.clone();
            b[p - 1] += d;
            lik.evaluate(&b)
        };
        let fd_grad = (at(h).value - at(-h).value) / (2.0 * h);
        let fd_hess = (at(h).gradient[p - 1] - at(-h).gradient[p - 1]) / (2.0 * h);
        assert!((fd_grad - eval.gradient[p - 1]).abs() < 1e-6);
        assert!((fd_hess - eval.hessian[(p - 1, p - 1)]).abs() < 1e-6);
        assert!((eval.gradient[p - 1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn expected_information_averages_the_observed() {
        // E[y] = μ makes the observed Hessian average to the expected one
        for family in [Family::Poisson, Family::NegBin] {
            let mut lik = small_model(family, true);
            let p = lik.n_coefficients();
            let beta = DVector::from_fn(p, |i, _| 0.3 - 0.1 * i as f64);
            lik.y = lik.components(&beta).2.iter().cloned().collect();
            let observed = lik.evaluate(&beta).hessian;
            let expected = -lik.evaluate_with(&beta, true).hessian;
            let observed = -observed;
            let ks = p - usize::from(family == Family::NegBin);
            for r in 0..ks {
                for c in 0..ks {
                    assert!(
                        (observed[(r, c)] - expected[(r, c)]).abs()
                            < 1e-10 * (1.0 + expected[(r, c)].abs())
                    );
                }
            }
        }
    }

    #[test]
    fn lag_schedule_grows_to_limit() {
        let lags = DeconvLikelihood::lag_matrix(|_| 1.0, 10, 2, 2, 4);
        let counts: Vec<usize> = lags
            .row_iter()
            .map(|r| r.iter().filter(|&&v| v > 0.0).count())
            .collect();
        assert_eq!(counts, vec![2, 3, 4, 4, 4, 4, 4, 4, 4, 4]);
    }
}
