use crate::error::{Error, Result};

/// Reproduction number implied by an incidence curve.
#[derive(Clone, Debug)]
pub struct RTrajectory {
    /// Days, matching the incidence samples.
    pub t: Vec<f64>,
    /// `inc(t) / (γ I(t))`; `None` where `I` is negligible.
    pub r: Vec<Option<f64>>,
    pub log_r: Vec<Option<f64>>,
    pub infectious: Vec<f64>,
    /// Days before this are affected by the start-up state.
    pub burn_in: f64,
}

impl RTrajectory {
    pub fn reliable(&self, k: usize) -> bool {
        self.t[k] >= self.burn_in && self.r[k].is_some()
    }
}

/// Drive `E′ = inc(t) − δE`, `I′ = δE − γI` with a daily incidence curve and
/// report `R = inc / (γI)`.
///
/// The exposed and infectious classes start at the equilibrium for the
/// initial incidence, so a constant curve gives `R = 1` throughout. Between
/// samples incidence is interpolated log-linearly (linearly if either end is
/// zero), which is exact for exponential growth.
pub fn r_from_incidence(
    incidence: &[f64],
    delta: f64,
    gamma: f64,
    substeps: usize,
) -> Result<RTrajectory> {
    if !(delta > 0.0 && gamma > 0.0 && delta.is_finite() && gamma.is_finite()) {
        return Err(Error::Parameter(format!(
            "rates must be positive, got delta {delta}, gamma {gamma}"
        )));
    }
    if incidence.len() < 2 {
        return Err(Error::Input(
            "incidence curve needs at least two days".into(),
        ));
    }
    if incidence.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Input(
            "incidence must be finite and nonnegative".into(),
        ));
    }
    let substeps = substeps.max(1);
    let h = 1.0 / substeps as f64;
    let interp = |k: usize, frac: f64| {
        let (a, b) = (incidence[k], incidence[(k + 1).min(incidence.len() - 1)]);
        if a > 0.0 && b > 0.0 {
            a * (b / a).powf(frac)
        } else {
            a + (b - a) * frac
        }
    };
    let mut e = incidence[0] / delta;
    let mut i = incidence[0] / gamma;
    let mut infectious = Vec::with_capacity(incidence.len());
    infectious.push(i);
    for k in 0..incidence.len() - 1 {
        for sub in 0..substeps {
            let f0 = sub as f64 * h;
            let rhs =
                |frac: f64, e: f64, i: f64| (interp(k, frac) - delta * e, delta * e - gamma * i);
            let (k1e, k1i) = rhs(f0, e, i);
            let (k2e, k2i) = rhs(f0 + 0.5 * h, e + 0.5 * h * k1e, i + 0.5 * h * k1i);
            let (k3e, k3i) = rhs(f0 + 0.5 * h, e + 0.5 * h * k2e, i + 0.5 * h * k2i);
            let (k4e, k4i) = rhs(f0 + h, e + h * k3e, i + h * k3i);
            e += h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
            i += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
        }
        infectious.push(i);
    }
    let peak = infectious.iter().cloned().fold(0.0, f64::max);
    let r: Vec<Option<f64>> = incidence
        .iter()
        .zip(&infectious)
        .map(|(&inc, &i)| (peak > 0.0 && i >= 1e-12 * peak).then(|| inc / (gamma * i)))
        .collect();
    Ok(RTrajectory {
        t: (0..incidence.len()).map(|k| k as f64).collect(),
        log_r: r
            .iter()
            .map(|v| v.and_then(|r| (r > 0.0).then(|| r.ln())))
            .collect(),
        r,
        infectious,
        burn_in: 3.0 / delta + 3.0 / gamma,
    })
}
