//! Evenly spaced cubic B-spline bases, ordinary and cyclic, with their
//! integrated squared second derivative penalties.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Cubic,
    CyclicCubic,
}

impl BasisKind {
    pub fn min_dim(self) -> usize {
        match self {
            BasisKind::Cubic => 4,
            BasisKind::CyclicCubic => 3,
        }
    }
}

/// A cubic B-spline basis on `[lower, upper]`.
///
/// For [`BasisKind::Cubic`] the `dim` functions are translates of the uniform
/// cubic B-spline with knot spacing `(upper - lower) / (dim - 3)`; outside the
/// range every function is continued linearly from the nearest end. For
/// [`BasisKind::CyclicCubic`] the functions are wrapped with period
/// `upper - lower`, so values and all derivatives agree at the two ends.
#[derive(Clone, Debug)]
pub struct SplineBasis {
    kind: BasisKind,
    lower: f64,
    upper: f64,
    dim: usize,
    spacing: f64,
}

// Uniform cubic B-spline on [0, 4) and its first two derivatives.
fn bspline(u: f64) -> f64 {
    if !(0.0..4.0).contains(&u) {
        0.0
    } else if u < 1.0 {
        u * u * u / 6.0
    } else if u < 2.0 {
        (((-3.0 * u + 12.0) * u - 12.0) * u + 4.0) / 6.0
    } else if u < 3.0 {
        (((3.0 * u - 24.0) * u + 60.0) * u - 44.0) / 6.0
    } else {
        let v = 4.0 - u;
        v * v * v / 6.0
    }
}

fn bspline_d1(u: f64) -> f64 {
    if !(0.0..4.0).contains(&u) {
        0.0
    } else if u < 1.0 {
        0.5 * u * u
    } else if u < 2.0 {
        (-1.5 * u + 4.0) * u - 2.0
    } else if u < 3.0 {
        (1.5 * u - 8.0) * u + 10.0
    } else {
        let v = 4.0 - u;
        -0.5 * v * v
    }
}

fn bspline_d2(u: f64) -> f64 {
    if !(0.0..4.0).contains(&u) {
        0.0
    } else if u < 1.0 {
        u
    } else if u < 2.0 {
        4.0 - 3.0 * u
    } else if u < 3.0 {
        3.0 * u - 8.0
    } else {
        4.0 - u
    }
}

impl SplineBasis {
    /// Basis of dimension `dim` with evenly spaced knots over `range`.
    pub fn new(kind: BasisKind, range: (f64, f64), dim: usize) -> Result<Self> {
        let (lower, upper) = range;
        if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
            return Err(Error::Parameter(format!(
                "basis range must be a nonempty finite interval, got [{lower}, {upper}]"
            )));
        }
        if dim < kind.min_dim() {
            return Err(Error::Parameter(format!(
                "{kind:?} basis needs dimension at least {}, got {dim}",
                kind.min_dim()
            )));
        }
        let intervals = match kind {
            BasisKind::Cubic => dim - 3,
            BasisKind::CyclicCubic => dim,
        };
        Ok(SplineBasis {
            kind,
            lower,
            upper,
            dim,
            spacing: (upper - lower) / intervals as f64,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Interior knot positions (including both range ends).
    pub fn knots(&self) -> Vec<f64> {
        let n = match self.kind {
            BasisKind::Cubic => self.dim - 3,
            BasisKind::CyclicCubic => self.dim,
        };
        (0..=n)
            .map(|j| self.lower + j as f64 * self.spacing)
            .collect()
    }

    fn eval_with(&self, t: f64, out: &mut [f64], kernel: fn(f64) -> f64) {
        let h = self.spacing;
        match self.kind {
            BasisKind::Cubic => {
                for (k, o) in out.iter_mut().enumerate() {
                    let u = (t - self.lower) / h - k as f64 + 3.0;
                    *o = kernel(u);
                }
            }
            BasisKind::CyclicCubic => {
                let period = self.dim as f64;
                let pos = ((t - self.lower) / h).rem_euclid(period);
                for (k, o) in out.iter_mut().enumerate() {
                    let mut u = (pos - k as f64).rem_euclid(period);
                    let mut v = 0.0;
                    while u < 4.0 {
                        v += kernel(u);
                        u += period;
                    }
                    *o = v;
                }
            }
        }
    }

    /// Values of all basis functions at `t`.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        match self.kind {
            BasisKind::Cubic if t < self.lower || t > self.upper => {
                let end = if t < self.lower {
                    self.lower
                } else {
                    self.upper
                };
                let mut slope = vec![0.0; self.dim];
                self.eval_with(end, &mut row, bspline);
                self.eval_with(end, &mut slope, bspline_d1);
                for (r, s) in row.iter_mut().zip(&slope) {
                    *r += s / self.spacing * (t - end);
                }
            }
            _ => self.eval_with(t, &mut row, bspline),
        }
        row
    }

    /// First derivatives of all basis functions at `t`.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        let t = match self.kind {
            BasisKind::Cubic => t.clamp(self.lower, self.upper),
            BasisKind::CyclicCubic => t,
        };
        self.eval_with(t, &mut row, bspline_d1);
        row.iter_mut().for_each(|v| *v /= self.spacing);
        row
    }

    /// Second derivatives of all basis functions at `t` (zero outside the range
    /// of an ordinary cubic basis).
    pub fn second_derivative(&self, t: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        if self.kind == BasisKind::Cubic && (t < self.lower || t > self.upper) {
            return row;
        }
        self.eval_with(t, &mut row, bspline_d2);
        let h2 = self.spacing * self.spacing;
        row.iter_mut().for_each(|v| *v /= h2);
        row
    }

    /// Design matrix with one row per evaluation point.
    pub fn design_matrix(&self, ts: &[f64]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(ts.len(), self.dim);
        for (i, &t) in ts.iter().enumerate() {
            for (k, v) in self.evaluate(t).into_iter().enumerate() {
                x[(i, k)] = v;
            }
        }
        x
    }

    /// The penalty ∫ f″(t)² dt over the basis range, as a quadratic form in the
    /// coefficients. Second derivatives are piecewise linear, so two-point
    /// Gauss–Legendre quadrature per knot interval is exact.
    pub fn second_derivative_penalty(&self) -> Penalty {
        let intervals = match self.kind {
            BasisKind::Cubic => self.dim - 3,
            BasisKind::CyclicCubic => self.dim,
        };
        let h = self.spacing;
        let offset = 0.5 * h / 3f64.sqrt();
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for j in 0..intervals {
            let mid = self.lower + (j as f64 + 0.5) * h;
            for t in [mid - offset, mid + offset] {
                let d2 = DVector::from_vec(self.second_derivative(t));
                s += (&d2 * d2.transpose()) * (0.5 * h);
            }
        }
        let null_dim = match self.kind {
            BasisKind::Cubic => 2,
            BasisKind::CyclicCubic => 1,
        };
        Penalty::with_rank(s, self.dim - null_dim)
    }
}

/// A symmetric positive semi-definite penalty matrix with its rank.
#[derive(Clone, Debug)]
pub struct Penalty {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

impl Penalty {
    /// Wraps `matrix`, determining the rank from its eigenvalues (threshold
    /// 1e-10 of the largest).
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let sym = symmetrize(&matrix);
        let eig = sym.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let rank = eig.eigenvalues.iter().filter(|&&v| v > 1e-10 * max).count();
        Penalty { matrix: sym, rank }
    }

    pub fn with_rank(matrix: DMatrix<f64>, rank: usize) -> Self {
        Penalty {
            matrix: symmetrize(&matrix),
            rank,
        }
    }

    /// A ridge penalty on `dim` coefficients.
    pub fn identity(dim: usize) -> Self {
        Penalty {
            matrix: DMatrix::identity(dim, dim),
            rank: dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn null_dim(&self) -> usize {
        self.dim() - self.rank
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
