use crate::error::{Error, Result};

/// Moment generating function `M(s) = E[e^{sα}]` of the initial variability
/// distribution, with its first two derivatives, for `s ≤ 0`.
pub trait Mgf {
    fn m(&self, s: f64) -> f64;
    fn m1(&self, s: f64) -> f64;
    fn m2(&self, s: f64) -> f64;
}

/// Gamma distribution with shape `k` and mean one: `M(s) = (1 − s/k)^{−k}`.
#[derive(Clone, Copy, Debug)]
pub struct GammaMgf {
    pub k: f64,
}

impl GammaMgf {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Parameter(format!(
                "gamma shape must be positive, got {k}"
            )));
        }
        Ok(GammaMgf { k })
    }
}

impl Mgf for GammaMgf {
    fn m(&self, s: f64) -> f64 {
        (-self.k * (-s / self.k).ln_1p()).exp()
    }
    fn m1(&self, s: f64) -> f64 {
        (-(self.k + 1.0) * (-s / self.k).ln_1p()).exp()
    }
    fn m2(&self, s: f64) -> f64 {
        (1.0 + 1.0 / self.k) * (-(self.k + 2.0) * (-s / self.k).ln_1p()).exp()
    }
}

/// Every individual has the same value `alpha`.
#[derive(Clone, Copy, Debug)]
pub struct PointMass {
    pub alpha: f64,
}

impl Mgf for PointMass {
    fn m(&self, s: f64) -> f64 {
        (self.alpha * s).exp()
    }
    fn m1(&self, s: f64) -> f64 {
        self.alpha * (self.alpha * s).exp()
    }
    fn m2(&self, s: f64) -> f64 {
        self.alpha * self.alpha * (self.alpha * s).exp()
    }
}

/// Finite mixture of point masses, rescaled to mean one.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Mixture {
    pub fn new(alphas: &[f64], weights: &[f64]) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != weights.len() {
            return Err(Error::Parameter(
                "mixture needs matching nonempty values and weights".into(),
            ));
        }
        if alphas
            .iter()
            .chain(weights)
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Parameter(
                "mixture values and weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mean: f64 = alphas.iter().zip(&weights).map(|(a, w)| a * w).sum();
        if !(mean > 0.0) {
            return Err(Error::Parameter("mixture has zero mean".into()));
        }
        Ok(Mixture {
            alphas: alphas.iter().map(|a| a / mean).collect(),
            weights,
        })
    }

    fn moment(&self, s: f64, power: i32) -> f64 {
        self.alphas
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.powi(power) * (a * s).exp())
            .sum()
    }
}

impl Mgf for Mixture {
    fn m(&self, s: f64) -> f64 {
        self.moment(s, 0)
    }
    fn m1(&self, s: f64) -> f64 {
        self.moment(s, 1)
    }
    fn m2(&self, s: f64) -> f64 {
        self.moment(s, 2)
    }
}

/// Closure-backed MGF.
pub struct FnMgf<F, G, H> {
    pub m: F,
    pub m1: G,
    pub m2: H,
}

impl<F, G, H> Mgf for FnMgf<F, G, H>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    fn m(&self, s: f64) -> f64 {
        (self.m)(s)
    }
    fn m1(&self, s: f64) -> f64 {
        (self.m1)(s)
    }
    fn m2(&self, s: f64) -> f64 {
        (self.m2)(s)
    }
}

/// Solve `M(−q) = target` for `q ≥ 0` by Newton iteration safeguarded with
/// bisection, starting from `q0`.
pub(crate) fn invert<M: Mgf + ?Sized>(mgf: &M, target: f64, q0: f64) -> Option<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return None;
    }
    if target == 1.0 {
        return Some(0.0);
    }
    // M(−q) decreases in q; bracket the root.
    let g = |q: f64| mgf.m(-q) - target;
    let mut lo = 0.0;
    let mut hi = q0.max(1e-8);
    let mut expansions = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return None;
        }
    }
    let mut q = q0.clamp(lo, hi);
    for _ in 0..200 {
        let value = g(q);
        if value == 0.0 {
            return Some(q);
        }
        if value > 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let slope = -mgf.m1(-q);
        let newton = q - value / slope;
        q = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-15 * hi.max(1.0) || (value.abs() <= 1e-16 * target && slope != 0.0) {
            return Some(q);
        }
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_mgf_has_unit_mean() {
        let g = GammaMgf::new(2.5).unwrap();
        assert!((g.m(0.0) - 1.0).abs() < 1e-15);
        assert!((g.m1(0.0) - 1.0).abs() < 1e-15);
        assert!((g.m2(0.0) - (1.0 + 1.0 / 2.5)).abs() < 1e-15);
        let h = 1e-5;
        let s = -0.7;
        assert!(((g.m(s + h) - g.m(s - h)) / (2.0 * h) - g.m1(s)).abs() < 1e-8);
        assert!(((g.m1(s + h) - g.m1(s - h)) / (2.0 * h) - g.m2(s)).abs() < 1e-8);
    }

    #[test]
    fn mixture_is_normalized() {
        let m = Mixture::new(&[1.0, 5.0], &[3.0, 1.0]).unwrap();
        assert!((m.m(0.0) - 1.0).abs() < 1e-15);
        assert!((m.m1(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inversion_recovers_q() {
        let g = GammaMgf::new(0.5).unwrap();
        for &q in &[1e-9, 0.01, 0.5, 3.0, 40.0] {
            let s = g.m(-q);
            let back = invert(&g, s, 0.0).unwrap();
            assert!((back - q).abs() <= 1e-9 * q.max(1.0), "{q} -> {back}");
        }
        assert!(invert(&g, 0.0, 0.0).is_none());
    }
}
