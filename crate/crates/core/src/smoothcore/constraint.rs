use nalgebra::{DMatrix, DVector};

use super::basis::{Penalty, SplineBasis};

/// Linear constraint `cᵀβ = 0` absorbed by reparametrization: β = Zγ with
/// the columns of `Z` an orthonormal basis of the complement of `c`.
#[derive(Clone, Debug)]
pub struct SumToZero {
    z: DMatrix<f64>,
}

impl SumToZero {
    /// Constraint that the sum of `x β` over the rows of `x` is zero.
    pub fn from_design(x: &DMatrix<f64>) -> Self {
        let c = DVector::from_iterator(x.ncols(), x.column_iter().map(|col| col.sum()));
        Self::from_vector(&c)
    }

    pub fn from_vector(c: &DVector<f64>) -> Self {
        let k = c.len();
        let norm = c.norm();
        let mut v = c.clone();
        v[0] += if c[0] >= 0.0 { norm } else { -norm };
        let vv = v.dot(&v);
        // Householder reflector; its last k-1 columns are orthogonal to c.
        let h = DMatrix::identity(k, k) - (&v * v.transpose()) * (2.0 / vv);
        SumToZero {
            z: h.columns(1, k - 1).into_owned(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn constrained_dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn apply_design(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.z
    }

    pub fn apply_penalty(&self, p: &Penalty) -> Penalty {
        Penalty::new(self.z.transpose() * &p.matrix * &self.z)
    }

    /// Map constrained coefficients back to the original basis.
    pub fn expand(&self, gamma: &DVector<f64>) -> DVector<f64> {
        &self.z * gamma
    }
}

/// A spline basis with an optional centering constraint. This is the unit that
/// models assemble into design matrices and penalty blocks.
#[derive(Clone, Debug)]
pub struct SmoothTerm {
    pub basis: SplineBasis,
    pub constraint: Option<SumToZero>,
}

impl SmoothTerm {
    pub fn unconstrained(basis: SplineBasis) -> Self {
        SmoothTerm {
            basis,
            constraint: None,
        }
    }

    /// Centre the term so that its values summed over `ts` are zero.
    pub fn centered(basis: SplineBasis, ts: &[f64]) -> Self {
        let x = basis.design_matrix(ts);
        SmoothTerm {
            constraint: Some(SumToZero::from_design(&x)),
            basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.constraint
            .as_ref()
            .map_or(self.basis.dim(), |c| c.constrained_dim())
    }

    pub fn design_matrix(&self, ts: &[f64]) -> DMatrix<f64> {
        let x = self.basis.design_matrix(ts);
        match &self.constraint {
            Some(c) => c.apply_design(&x),
            None => x,
        }
    }

    pub fn penalty(&self) -> Penalty {
        let p = self.basis.second_derivative_penalty();
        match &self.constraint {
            Some(c) => c.apply_penalty(&p),
            None => p,
        }
    }
}
