//! Penalized likelihood maximization and smoothing parameter selection.
//!
//! The objective is `l(β) − ½ βᵀS_λβ` with `S_λ = Σ_j λ_j S_j`. Coefficients
//! are found by safeguarded Newton iteration, the posterior covariance is
//! `V_β = (−∇²l + S_λ)⁻¹`, and smoothing parameters are chosen by alternating
//! Newton fits with the generalized Fellner–Schall update of the Laplace
//! approximate marginal likelihood.

use nalgebra::{DMatrix, DVector};

use super::basis::{symmetrize, Penalty};
use super::linalg::{condition_number, pinv_symmetric, solve_repaired, trace_of_product};
use crate::error::{Error, Result};

/// Log likelihood value with first and second derivatives.
#[derive(Clone, Debug)]
pub struct LikelihoodEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

pub trait LogLikelihood: Sync {
    fn n_coefficients(&self) -> usize;

    fn evaluate(&self, beta: &DVector<f64>) -> LikelihoodEval;

    /// Value only; used during step halving. Override when cheaper than a full
    /// evaluation.
    fn value(&self, beta: &DVector<f64>) -> f64 {
        self.evaluate(beta).value
    }

    /// Information matrix entering the posterior precision at the optimum
    /// (and hence covariance, smoothing parameter updates and marginal
    /// likelihood). Defaults to the negative Hessian; models may substitute
    /// the expected information.
    fn information(&self, _beta: &DVector<f64>, eval: &LikelihoodEval) -> DMatrix<f64> {
        -&eval.hessian
    }
}

/// A penalty acting on the coefficients `offset .. offset + penalty.dim()`.
#[derive(Clone, Debug)]
pub struct PenaltyBlock {
    pub offset: usize,
    pub penalty: Penalty,
}

impl PenaltyBlock {
    pub fn new(offset: usize, penalty: Penalty) -> Self {
        PenaltyBlock { offset, penalty }
    }

    fn end(&self) -> usize {
        self.offset + self.penalty.dim()
    }

    pub fn embedded(&self, p: usize) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(p, p);
        let d = self.penalty.dim();
        s.view_mut((self.offset, self.offset), (d, d))
            .copy_from(&self.penalty.matrix);
        s
    }

    /// βᵀS_jβ restricted to this block.
    pub fn quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        let b = beta.rows(self.offset, self.penalty.dim());
        b.dot(&(&self.penalty.matrix * b))
    }

    /// Rounding level of [`quadratic_form`](Self::quadratic_form):
    /// `64 ε |β|ᵀ|S_j||β|`. Unpenalized components of β cancel in βᵀS_jβ
    /// only to this accuracy.
    fn quadratic_form_noise(&self, beta: &DVector<f64>) -> f64 {
        let b = beta.rows(self.offset, self.penalty.dim()).abs();
        64.0 * f64::EPSILON * b.dot(&(self.penalty.matrix.abs() * &b))
    }

    /// tr(M S_j) for a full p×p matrix M.
    fn trace_with(&self, m: &DMatrix<f64>) -> f64 {
        let d = self.penalty.dim();
        let sub = m.view((self.offset, self.offset), (d, d)).into_owned();
        trace_of_product(&sub, &self.penalty.matrix)
    }
}

fn blocks_disjoint(penalties: &[PenaltyBlock]) -> bool {
    let mut spans: Vec<(usize, usize)> = penalties.iter().map(|b| (b.offset, b.end())).collect();
    spans.sort_unstable();
    spans.windows(2).all(|w| w[0].1 <= w[1].0)
}

/// S_λ = Σ λ_j S_j embedded in a p×p matrix.
pub fn total_penalty(penalties: &[PenaltyBlock], lambdas: &[f64], p: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(p, p);
    for (block, &lambda) in penalties.iter().zip(lambdas) {
        let d = block.penalty.dim();
        let mut view = s.view_mut((block.offset, block.offset), (d, d));
        view += &block.penalty.matrix * lambda;
    }
    s
}

fn check_alignment(penalties: &[PenaltyBlock], lambdas: &[f64], p: usize) -> Result<()> {
    if penalties.len() != lambdas.len() {
        return Err(Error::Parameter(format!(
            "{} penalties but {} smoothing parameters",
            penalties.len(),
            lambdas.len()
        )));
    }
    if let Some(b) = penalties.iter().find(|b| b.end() > p) {
        return Err(Error::Parameter(format!(
            "penalty block ending at {} exceeds {p} coefficients",
            b.end()
        )));
    }
    if lambdas.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::Parameter(
            "smoothing parameters must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence when the gradient max-norm falls below this fraction of its
    /// initial value.
    pub grad_rel_tol: f64,
    /// Eigenvalue floor (relative to the largest) used when the negative
    /// Hessian is not positive definite.
    pub eigen_floor: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 200,
            grad_rel_tol: 1e-6,
            eigen_floor: 1e-8,
            max_halvings: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub beta: DVector<f64>,
    pub loglik: f64,
    pub objective: f64,
    /// Max-norm of the penalized gradient at `beta`.
    pub gradient_norm: f64,
    pub initial_gradient_norm: f64,
    pub iterations: usize,
    /// Penalized objective after each accepted step (first entry is the start).
    pub objective_trace: Vec<f64>,
    /// −∇²l(β̂) + S_λ.
    pub precision: DMatrix<f64>,
    /// True if any step needed the indefinite-Hessian repair.
    pub repaired: bool,
}

/// Maximize `l(β) − ½ βᵀS_λβ` from `beta0`.
pub fn penalized_newton<L: LogLikelihood + ?Sized>(
    lik: &L,
    penalties: &[PenaltyBlock],
    lambdas: &[f64],
    beta0: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    let p = lik.n_coefficients();
    if beta0.len() != p {
        return Err(Error::Parameter(format!(
            "starting vector has {} entries, likelihood expects {p}",
            beta0.len()
        )));
    }
    check_alignment(penalties, lambdas, p)?;
    let s = total_penalty(penalties, lambdas, p);
    let penalized = |value: f64, b: &DVector<f64>| value - 0.5 * b.dot(&(&s * b));

    let mut beta = beta0.clone();
    let mut eval = lik.evaluate(&beta);
    if !eval.value.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Input(
            "log likelihood is not finite at the starting coefficients".into(),
        ));
    }
    let mut obj = penalized(eval.value, &beta);
    let mut grad = &eval.gradient - &s * &beta;
    let g0 = grad.amax();
    let mut trace = vec![obj];
    let mut repaired_any = false;

    let finish = |beta: DVector<f64>,
                  eval: &LikelihoodEval,
                  obj,
                  grad: &DVector<f64>,
                  it,
                  trace,
                  repaired| {
        NewtonResult {
            loglik: eval.value,
            objective: obj,
            gradient_norm: grad.amax(),
            initial_gradient_norm: g0,
            iterations: it,
            objective_trace: trace,
            precision: symmetrize(&(&s + lik.information(&beta, eval))),
            beta,
            repaired,
        }
    };

    for iter in 0..opts.max_iter {
        let precision = &s - &eval.hessian;
        let (step, repaired) = solve_repaired(&precision, &grad, opts.eigen_floor);
        repaired_any |= repaired;
        let decrement = grad.dot(&step);
        // The relative-gradient test alone can stop one quadratic step short,
        // so also require the proposed step to be negligible.
        let step_rel = step.amax() / (1.0 + beta.amax());
        // With very large smoothing parameters S_λβ is a difference of huge
        // terms, so the gradient cannot be resolved below its rounding level.
        // The level is per coefficient: one heavily penalized block must not
        // mask an unresolved gradient elsewhere.
        let grad_floor = (s.abs() * beta.abs()) * (256.0 * f64::EPSILON);
        let below_floor = grad
            .iter()
            .zip(grad_floor.iter())
            .all(|(g, f)| g.abs() <= *f);
        if (step_rel <= 1e-8 && grad.amax() <= opts.grad_rel_tol * g0) || below_floor {
            return Ok(finish(beta, &eval, obj, &grad, iter, trace, repaired_any));
        }
        // Predicted gain below the rounding level of the objective (which
        // includes the penalty, a large cancelling quadratic form when λ is
        // big): a line search cannot discriminate, so take the full step only
        // if it does not lower the objective beyond that level and still
        // reduces the gradient.
        let abs_beta = beta.abs();
        let obj_noise =
            64.0 * f64::EPSILON * (1.0 + obj.abs() + abs_beta.dot(&(s.abs() * &abs_beta)));
        if decrement.abs() <= obj_noise {
            let cand = &beta + &step;
            let cand_eval = lik.evaluate(&cand);
            let cand_obj = penalized(cand_eval.value, &cand);
            let cand_grad = &cand_eval.gradient - &s * &cand;
            if !(cand_obj >= obj - obj_noise && cand_grad.amax() < grad.amax()) {
                return Ok(finish(beta, &eval, obj, &grad, iter, trace, repaired_any));
            }
            beta = cand;
            eval = cand_eval;
            obj = cand_obj;
            grad = cand_grad;
            trace.push(obj);
            continue;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_halvings {
            let cand = &beta + &step * alpha;
            let value = lik.value(&cand);
            if value.is_finite() {
                let cand_obj = penalized(value, &cand);
                if cand_obj >= obj {
                    accepted = Some((cand, cand_obj));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, cand_obj)) => {
                debug_assert!(cand_obj >= obj);
                beta = cand;
                eval = lik.evaluate(&beta);
                obj = penalized(eval.value, &beta);
                grad = &eval.gradient - &s * &beta;
                trace.push(obj);
            }
            None => {
                // No ascent possible: at a maximum up to rounding error.
                if decrement.abs() <= 1e-6 * (1.0 + obj.abs()) {
                    return Ok(finish(beta, &eval, obj, &grad, iter, trace, repaired_any));
                }
                return Err(Error::NonConvergence {
                    iterations: iter,
                    gradient_norm: grad.amax(),
                    last_iterate: beta.iter().cloned().collect(),
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        gradient_norm: grad.amax(),
        last_iterate: beta.iter().cloned().collect(),
    })
}

/// Bounds applied to every updated smoothing parameter.
pub const LAMBDA_MIN: f64 = 1e-8;
pub const LAMBDA_MAX: f64 = 1e12;
/// Penalized EDF below which a term counts as smoothed flat.
const FLAT_EDF: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct LambdaUpdate {
    pub lambdas: Vec<f64>,
    /// Set where the update hit the upper bound, e.g. because the fitted term
    /// lies in the penalty null space.
    pub at_upper_clamp: Vec<bool>,
    /// Effective degrees of freedom of each term's penalized part,
    /// `λ_j [tr(S_λ⁻S_j) − tr(V_β S_j)]`.
    pub penalized_edf: Vec<f64>,
}

/// tr(S_λ⁻ S_j) for each penalty.
fn generalized_inverse_traces(penalties: &[PenaltyBlock], lambdas: &[f64], p: usize) -> Vec<f64> {
    if blocks_disjoint(penalties) {
        return penalties
            .iter()
            .zip(lambdas)
            .map(|(b, &l)| b.penalty.rank as f64 / l)
            .collect();
    }
    let pinv = pinv_symmetric(&total_penalty(penalties, lambdas, p), 1e-10);
    penalties.iter().map(|b| b.trace_with(&pinv)).collect()
}

/// One Fellner–Schall step:
/// `λ_j ← λ_j · [tr(S_λ⁻S_j) − tr(V_β S_j)] / β̂ᵀS_jβ̂`, clamped to
/// `[LAMBDA_MIN, LAMBDA_MAX]`. The bracketed term is the term's penalized
/// EDF over `λ_j` and cannot be negative; a nonpositive value is rounding on a
/// term that is already smoothed flat, so `λ_j` goes to the upper clamp. The
/// same holds when `β̂ᵀS_jβ̂` is below its rounding level, and when the
/// penalized EDF is negligible and the update does not ask for a sharp
/// decrease.
pub fn update_lambdas(
    penalties: &[PenaltyBlock],
    lambdas: &[f64],
    beta_hat: &DVector<f64>,
    v_beta: &DMatrix<f64>,
) -> Result<LambdaUpdate> {
    let p = beta_hat.len();
    check_alignment(penalties, lambdas, p)?;
    let inv_traces = generalized_inverse_traces(penalties, lambdas, p);
    let mut out = Vec::with_capacity(lambdas.len());
    let mut flags = Vec::with_capacity(lambdas.len());
    let mut penalized_edf = Vec::with_capacity(lambdas.len());
    for ((block, &lambda), tr_inv) in penalties.iter().zip(lambdas).zip(inv_traces) {
        let numerator = tr_inv - block.trace_with(v_beta);
        penalized_edf.push(lambda * numerator);
        let denominator = block.quadratic_form(beta_hat);
        let flat = denominator <= block.quadratic_form_noise(beta_hat);
        let proposed = numerator / denominator * lambda;
        // A term with almost no penalized EDF left is at rounding level in
        // both traces; unless the update wants a sharp decrease (a real
        // signal escaping a large starting λ), send it to the clamp.
        let negligible = lambda * numerator < FLAT_EDF && proposed > 0.5 * lambda;
        let updated = if flat || numerator <= 0.0 || negligible {
            LAMBDA_MAX
        } else {
            proposed.clamp(LAMBDA_MIN, LAMBDA_MAX)
        };
        flags.push(updated >= LAMBDA_MAX);
        out.push(updated);
    }
    Ok(LambdaUpdate {
        lambdas: out,
        at_upper_clamp: flags,
        penalized_edf,
    })
}

/// log|S_λ|₊ and the rank of S_λ.
fn log_det_penalty(penalties: &[PenaltyBlock], lambdas: &[f64], p: usize) -> (f64, usize) {
    let top_log_eigen = |m: &DMatrix<f64>, r: usize| -> f64 {
        let mut ev: Vec<f64> = symmetrize(m)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev.iter().take(r).map(|v| v.ln()).sum()
    };
    if blocks_disjoint(penalties) {
        let mut total = 0.0;
        let mut rank = 0;
        for (b, &l) in penalties.iter().zip(lambdas) {
            let r = b.penalty.rank;
            total += r as f64 * l.ln() + top_log_eigen(&b.penalty.matrix, r);
            rank += r;
        }
        return (total, rank);
    }
    let mut unit = DMatrix::zeros(p, p);
    for b in penalties {
        let scale = b.penalty.matrix.amax().max(f64::MIN_POSITIVE);
        unit += b.embedded(p) / scale;
    }
    let rank = Penalty::new(unit).rank;
    (
        top_log_eigen(&total_penalty(penalties, lambdas, p), rank),
        rank,
    )
}

/// Laplace approximation to the log marginal likelihood,
/// `log{exp(l(β̂)) π(β̂) / π_G(β̂|y)}`, where the improper smoothing prior
/// normalizes only over the range space of S_λ.
///
/// `precision` is `I(β̂) + S_λ`, the inverse posterior covariance, with `I`
/// the likelihood's information (normally `−∇²l`).
pub fn laplace_log_marginal(
    loglik: f64,
    beta_hat: &DVector<f64>,
    penalties: &[PenaltyBlock],
    lambdas: &[f64],
    precision: &DMatrix<f64>,
) -> Result<f64> {
    let p = beta_hat.len();
    check_alignment(penalties, lambdas, p)?;
    let chol = symmetrize(precision)
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            message: "posterior precision matrix is not positive definite".into(),
            condition: Some(condition_number(precision)),
        })?;
    let log_det_precision = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let s = total_penalty(penalties, lambdas, p);
    let (log_det_s, rank) = log_det_penalty(penalties, lambdas, p);
    let null_dim = (p - rank) as f64;
    Ok(
        loglik - 0.5 * beta_hat.dot(&(&s * beta_hat)) + 0.5 * log_det_s - 0.5 * log_det_precision
            + 0.5 * null_dim * (2.0 * std::f64::consts::PI).ln(),
    )
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub newton: NewtonOptions,
    /// Stop when every smoothing parameter changes by less than this relative amount.
    pub lambda_rel_tol: f64,
    pub max_outer: usize,
    /// Lengthen small Fellner–Schall steps (in log λ) by repeated doubling
    /// while the Laplace marginal likelihood keeps improving. Helps when a
    /// smoothing parameter creeps towards a distant optimum.
    pub extrapolate: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            newton: NewtonOptions::default(),
            lambda_rel_tol: 1e-4,
            max_outer: 200,
            extrapolate: false,
        }
    }
}

/// Result of a penalized fit.
#[derive(Clone, Debug)]
pub struct PenalizedFit {
    pub beta_hat: DVector<f64>,
    pub v_beta: DMatrix<f64>,
    pub lambdas: Vec<f64>,
    pub lambda_at_upper_clamp: Vec<bool>,
    pub log_marginal: f64,
    pub loglik: f64,
    /// Effective degrees of freedom, tr(V_β (−∇²l)).
    pub edf: f64,
    pub converged: bool,
    /// Outer (smoothing parameter) iterations.
    pub iterations: usize,
    pub newton_iterations: usize,
}

impl PenalizedFit {
    /// Pointwise posterior standard deviations of `x β`.
    pub fn linear_predictor_sd(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let xv = x * &self.v_beta;
        DVector::from_iterator(
            x.nrows(),
            (0..x.nrows()).map(|i| xv.row(i).dot(&x.row(i)).max(0.0).sqrt()),
        )
    }
}

fn invert_precision(precision: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = precision.nrows();
    let chol = symmetrize(precision)
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            message: "posterior precision matrix is not positive definite".into(),
            condition: Some(condition_number(precision)),
        })?;
    Ok(symmetrize(&chol.solve(&DMatrix::identity(p, p))))
}

fn assemble(
    nr: &NewtonResult,
    penalties: &[PenaltyBlock],
    lambdas: &[f64],
    flags: Vec<bool>,
    converged: bool,
    iterations: usize,
    newton_iterations: usize,
) -> Result<PenalizedFit> {
    let p = nr.beta.len();
    let v_beta = invert_precision(&nr.precision)?;
    let s = total_penalty(penalties, lambdas, p);
    let edf = p as f64 - trace_of_product(&v_beta, &s);
    let log_marginal =
        laplace_log_marginal(nr.loglik, &nr.beta, penalties, lambdas, &nr.precision)?;
    Ok(PenalizedFit {
        beta_hat: nr.beta.clone(),
        v_beta,
        lambdas: lambdas.to_vec(),
        lambda_at_upper_clamp: flags,
        log_marginal,
        loglik: nr.loglik,
        edf,
        converged,
        iterations,
        newton_iterations,
    })
}

/// Fit with the smoothing parameters held fixed.
pub fn fit_fixed<L: LogLikelihood + ?Sized>(
    lik: &L,
    penalties: &[PenaltyBlock],
    lambdas: &[f64],
    beta0: &DVector<f64>,
    opts: &FitOptions,
) -> Result<PenalizedFit> {
    let nr = penalized_newton(lik, penalties, lambdas, beta0, &opts.newton)?;
    let flags = lambdas.iter().map(|&l| l >= LAMBDA_MAX).collect();
    assemble(&nr, penalties, lambdas, flags, true, 0, nr.iterations)
}

/// Try `λ · (proposal/λ)^m` for `m = 2, 4, 8, …` while the Laplace marginal
/// likelihood improves on the proposal. Updates `proposal` to the best point
/// and returns its Newton fit, or `None` if the plain step was kept. Only
/// creeping steps are lengthened: every log λ moves by less than one, in the
/// same direction as the previous step and by at least half as much. (Away
/// from the Gaussian case the update's fixed point is not exactly the
/// marginal likelihood optimum, and lengthening near it would oscillate.)
fn extrapolate_lambdas<L: LogLikelihood + ?Sized>(
    lik: &L,
    penalties: &[PenaltyBlock],
    lambdas: &[f64],
    proposal: &mut Vec<f64>,
    previous_step: &[f64],
    beta: &DVector<f64>,
    opts: &FitOptions,
) -> Option<NewtonResult> {
    let log_step: Vec<f64> = lambdas
        .iter()
        .zip(proposal.iter())
        .map(|(old, new)| (new / old).ln())
        .collect();
    let creeping = log_step.iter().zip(previous_step).all(|(d, prev)| {
        d.abs() < 1.0 && (*d == 0.0 || (d * prev > 0.0 && d.abs() >= 0.5 * prev.abs()))
    });
    if !creeping || log_step.iter().all(|d| *d == 0.0) {
        return None;
    }
    let score = |lam: &[f64], start: &DVector<f64>| -> Option<(NewtonResult, f64)> {
        let nr = penalized_newton(lik, penalties, lam, start, &opts.newton).ok()?;
        let laml = laplace_log_marginal(nr.loglik, &nr.beta, penalties, lam, &nr.precision).ok()?;
        Some((nr, laml))
    };
    let (mut best_nr, mut best) = score(proposal, beta)?;
    let mut factor = 2.0;
    for _ in 0..20 {
        let cand: Vec<f64> = lambdas
            .iter()
            .zip(&log_step)
            .map(|(l, d)| (l * (factor * d).exp()).clamp(LAMBDA_MIN, LAMBDA_MAX))
            .collect();
        if cand == *proposal {
            break;
        }
        match score(&cand, &best_nr.beta) {
            Some((nr, laml)) if laml > best => {
                best = laml;
                best_nr = nr;
                *proposal = cand;
                factor *= 2.0;
            }
            _ => break,
        }
    }
    Some(best_nr)
}

/// Alternate Newton fits with [`update_lambdas`] until the smoothing
/// parameters settle.
pub fn fit_penalized<L: LogLikelihood + ?Sized>(
    lik: &L,
    penalties: &[PenaltyBlock],
    lambdas0: &[f64],
    beta0: &DVector<f64>,
    opts: &FitOptions,
) -> Result<PenalizedFit> {
    if penalties.is_empty() {
        return fit_fixed(lik, penalties, lambdas0, beta0, opts);
    }
    let mut lambdas: Vec<f64> = lambdas0
        .iter()
        .map(|l| l.clamp(LAMBDA_MIN, LAMBDA_MAX))
        .collect();
    let mut beta = beta0.clone();
    let mut newton_total = 0;
    let mut last: Option<(NewtonResult, Vec<f64>, Vec<bool>)> = None;
    let mut pending: Option<NewtonResult> = None;
    let mut previous_step = vec![0.0; lambdas.len()];
    for outer in 1..=opts.max_outer {
        let nr = match pending.take() {
            Some(nr) => nr,
            None => penalized_newton(lik, penalties, &lambdas, &beta, &opts.newton)?,
        };
        newton_total += nr.iterations;
        let v = invert_precision(&nr.precision)?;
        let upd = update_lambdas(penalties, &lambdas, &nr.beta, &v)?;
        let change = lambdas
            .iter()
            .zip(&upd.lambdas)
            .map(|(old, new)| (new - old).abs() / old)
            .fold(0.0, f64::max);
        beta = nr.beta.clone();
        if change < opts.lambda_rel_tol {
            return assemble(
                &nr,
                penalties,
                &lambdas,
                upd.at_upper_clamp,
                true,
                outer,
                newton_total,
            );
        }
        let mut next = upd.lambdas;
        if opts.extrapolate {
            let step: Vec<f64> = lambdas
                .iter()
                .zip(&next)
                .map(|(o, n)| (n / o).ln())
                .collect();
            pending = extrapolate_lambdas(
                lik,
                penalties,
                &lambdas,
                &mut next,
                &previous_step,
                &beta,
                opts,
            );
            previous_step = step;
        }
        last = Some((nr, lambdas.clone(), upd.at_upper_clamp.clone()));
        lambdas = next;
    }
    let (nr, lam, flags) = last.expect("at least one outer iteration");
    assemble(
        &nr,
        penalties,
        &lam,
        flags,
        false,
        opts.max_outer,
        newton_total,
    )
}
