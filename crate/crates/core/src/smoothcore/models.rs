//! Ready-made likelihoods with a linear predictor `η = Xβ`.

use nalgebra::{DMatrix, DVector};

use super::fit::{LikelihoodEval, LogLikelihood};

/// Gaussian responses with known standard deviation.
#[derive(Clone, Debug)]
pub struct GaussianLinear {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma: f64,
}

impl LogLikelihood for GaussianLinear {
    fn n_coefficients(&self) -> usize {
        self.x.ncols()
    }

    fn evaluate(&self, beta: &DVector<f64>) -> LikelihoodEval {
        let s2 = self.sigma * self.sigma;
        let r = &self.y - &self.x * beta;
        LikelihoodEval {
            value: self.value(beta),
            gradient: self.x.transpose() * r / s2,
            hessian: -(self.x.transpose() * &self.x) / s2,
        }
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        let n = self.y.len() as f64;
        let r = &self.y - &self.x * beta;
        -0.5 * r.norm_squared() / (self.sigma * self.sigma)
            - n * (self.sigma.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Poisson counts with log link. The `ln y!` constant is omitted.
#[derive(Clone, Debug)]
pub struct PoissonLog {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl LogLikelihood for PoissonLog {
    fn n_coefficients(&self) -> usize {
        self.x.ncols()
    }

    fn evaluate(&self, beta: &DVector<f64>) -> LikelihoodEval {
        let eta = &self.x * beta;
        let mu = eta.map(f64::exp);
        let value = self.y.dot(&eta) - mu.sum();
        let gradient = self.x.transpose() * (&self.y - &mu);
        let mut xw = self.x.clone();
        for (mut row, m) in xw.row_iter_mut().zip(mu.iter()) {
            row *= *m;
        }
        LikelihoodEval {
            value,
            gradient,
            hessian: -(self.x.transpose() * xw),
        }
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        let eta = &self.x * beta;
        self.y.dot(&eta) - eta.map(f64::exp).sum()
    }
}

/// Adapter turning a closure into a [`LogLikelihood`].
pub struct FnLikelihood<F> {
    pub n: usize,
    pub f: F,
}

impl<F> LogLikelihood for FnLikelihood<F>
where
    F: Fn(&DVector<f64>) -> LikelihoodEval + Sync,
{
    fn n_coefficients(&self) -> usize {
        self.n
    }

    fn evaluate(&self, beta: &DVector<f64>) -> LikelihoodEval {
        (self.f)(beta)
    }
}
