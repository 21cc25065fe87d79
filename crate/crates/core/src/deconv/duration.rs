use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_sf};

/// Lognormal parameters of the infection-to-death interval reported from the
/// ISARIC hospital cohort.
pub const ISARIC_MEANLOG: f64 = 3.151;
pub const ISARIC_SDLOG: f64 = 0.469;

/// Untruncated mass beyond the largest delay above which a distribution is
/// flagged.
const TRUNCATION_WARN: f64 = 0.1;

/// Discretized infection-to-death delay distribution on days `1..=max_delay`.
#[derive(Clone, Debug, PartialEq)]
pub struct DurationDist {
    pub meanlog: f64,
    pub sdlog: f64,
    /// `pmf[d - 1]` is the probability of a delay of `d` days.
    pmf: Vec<f64>,
    /// Lognormal mass beyond `max_delay + ½` before renormalization.
    pub tail_mass: f64,
    pub truncation_warning: bool,
}

impl DurationDist {
    /// Day `d` receives the lognormal mass of `(d − ½, d + ½]`; the result is
    /// renormalized over `1..=max_delay`. Zero delay has probability zero.
    pub fn discretize(meanlog: f64, sdlog: f64, max_delay: usize) -> Result<Self> {
        if !(sdlog > 0.0 && sdlog.is_finite()) || !meanlog.is_finite() {
            return Err(Error::Parameter(format!(
                "delay distribution needs finite meanlog and positive sdlog, got ({meanlog}, {sdlog})"
            )));
        }
        if max_delay < 30 {
            return Err(Error::Parameter(format!(
                "maximum delay {max_delay} is below 30 days"
            )));
        }
        // Upper-tail differences keep precision on the right of the median.
        let mass = |lo: f64, hi: f64| {
            let z_lo = if lo > 0.0 {
                (lo.ln() - meanlog) / sdlog
            } else {
                f64::NEG_INFINITY
            };
            let z_hi = (hi.ln() - meanlog) / sdlog;
            if z_lo > 0.0 {
                norm_sf(z_lo) - norm_sf(z_hi)
            } else {
                norm_cdf(z_hi) - norm_cdf(z_lo)
            }
        };
        let mut pmf: Vec<f64> = (1..=max_delay)
            .map(|d| mass(d as f64 - 0.5, d as f64 + 0.5).max(0.0))
            .collect();
        let total: f64 = pmf.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Parameter(format!(
                "no delay mass within 1..={max_delay} days for meanlog {meanlog}, sdlog {sdlog}"
            )));
        }
        pmf.iter_mut().for_each(|p| *p /= total);
        let tail_mass = norm_sf(((max_delay as f64 + 0.5).ln() - meanlog) / sdlog);
        Ok(DurationDist {
            meanlog,
            sdlog,
            pmf,
            tail_mass,
            truncation_warning: tail_mass > TRUNCATION_WARN,
        })
    }

    pub fn isaric(max_delay: usize) -> Result<Self> {
        Self::discretize(ISARIC_MEANLOG, ISARIC_SDLOG, max_delay)
    }

    pub fn max_delay(&self) -> usize {
        self.pmf.len()
    }

    /// Probability of a delay of `d` days (zero outside `1..=max_delay`).
    pub fn prob(&self, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            self.pmf.get(d - 1).copied().unwrap_or(0.0)
        }
    }

    /// Probabilities for delays `1..=max_delay`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    pub fn mode(&self) -> usize {
        let (i, _) = self
            .pmf
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                if p > best.1 {
                    (i, p)
                } else {
                    best
                }
            });
        i + 1
    }
}
