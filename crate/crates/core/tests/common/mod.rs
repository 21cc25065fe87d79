//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Exact log marginal likelihood of `y ~ N(Xβ, σ²I)` under the improper prior
/// `β ~ N(0, (λS)⁻)`, computed in covariance form.
///
/// β is split into penalty range-space coordinates (proper Gaussian prior with
/// precision `λD`) and null-space coordinates (flat prior). The range-space
/// part is integrated into the covariance `Σ = σ²I + X_r (λD)⁻¹ X_rᵀ`; the
/// null-space part is then integrated analytically (the REML step).
pub fn gaussian_log_marginal_covariance_form(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: f64,
    s: &DMatrix<f64>,
    lambda: f64,
    rank: usize,
) -> f64 {
    let n = y.len();
    let p = x.ncols();
    let eig = s.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let range: Vec<usize> = order[..rank].to_vec();
    let null: Vec<usize> = order[rank..].to_vec();

    let mut sigma_mat = DMatrix::identity(n, n) * (sigma * sigma);
    for &j in &range {
        let u = x * eig.eigenvectors.column(j);
        sigma_mat += (&u * u.transpose()) / (lambda * eig.eigenvalues[j]);
    }
    let chol = sigma_mat.clone().cholesky().expect("covariance must be PD");
    let log_det_sigma = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let two_pi = 2.0 * std::f64::consts::PI;

    if null.is_empty() {
        let q = y.dot(&chol.solve(y));
        return -0.5 * n as f64 * two_pi.ln() - 0.5 * log_det_sigma - 0.5 * q;
    }
    let mut xn = DMatrix::zeros(n, null.len());
    for (c, &j) in null.iter().enumerate() {
        xn.set_column(c, &(x * eig.eigenvectors.column(j)));
    }
    let si_xn = chol.solve(&xn);
    let m = xn.transpose() * &si_xn;
    let mchol = m
        .clone()
        .cholesky()
        .expect("null space must be identifiable");
    let log_det_m = 2.0 * mchol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let alpha = mchol.solve(&(si_xn.transpose() * y));
    let r = y - &xn * alpha;
    let q = r.dot(&chol.solve(&r));
    -0.5 * (n - null.len()) as f64 * two_pi.ln() - 0.5 * log_det_sigma - 0.5 * log_det_m - 0.5 * q
}

/// `n` points evenly spaced in log λ over [lo, hi] (natural log).
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Index of the grid maximum of `f`.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// Fixed-point iteration for x = 1 − exp(−R₀ x), started at 1.
pub fn classical_final_size(r0: f64) -> f64 {
    let mut x = 1.0;
    for _ in 0..10_000 {
        let next = 1.0 - (-r0 * x).exp();
        if (next - x).abs() < 1e-16 {
            return next;
        }
        x = next;
    }
    x
}

/// Direct convolution of incidence with a delay pmf: deaths on day i are
/// Σ_d incidence[i + offset − d] π(d), for lags up to `max_lag(i)`.
pub fn convolve(
    incidence: &[f64],
    offset: usize,
    pmf: &[f64],
    n_days: usize,
    max_lag: impl Fn(usize) -> usize,
) -> Vec<f64> {
    (0..n_days)
        .map(|i| {
            let mut total = 0.0;
            for d in 1..=max_lag(i).min(pmf.len()) {
                let j = i + offset;
                if j >= d {
                    total += incidence[j - d] * pmf[d - 1];
                }
            }
            total
        })
        .collect()
}
