use crate::error::{Error, Result};

/// Annual instantaneous death rates `m_a` by completed year of age; the last
/// entry is the open terminal class.
#[derive(Clone, Debug, PartialEq)]
pub struct LifeTable {
    rates: Vec<f64>,
    /// Set when the terminal rate is below the preceding one, which usually
    /// means a data problem.
    pub terminal_warning: bool,
}

impl LifeTable {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::Input(
                "life table needs at least two age classes".into(),
            ));
        }
        if let Some(a) = rates.iter().position(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::Input(format!(
                "death rate at age {a} is negative or not finite"
            )));
        }
        let n = rates.len();
        Ok(LifeTable {
            terminal_warning: rates[n - 1] < rates[n - 2],
            rates,
        })
    }

    /// Rates reproducing observed deaths on a seasonal exposure:
    /// `m_a = −52 ln(1 − D_a / X_a)`, where `X_a` is the person-weeks of class
    /// `a` weighted by `52 d_w` (see [`DemographyRun::seasonal_exposure`]).
    /// With these rates the weekly iteration over the same population path
    /// reproduces `D_a` exactly.
    ///
    /// [`DemographyRun::seasonal_exposure`]: super::DemographyRun::seasonal_exposure
    pub fn from_exposure(deaths: &[f64], seasonal_exposure: &[f64]) -> Result<Self> {
        if deaths.len() != seasonal_exposure.len() {
            return Err(Error::Input(format!(
                "{} death counts for {} exposure classes",
                deaths.len(),
                seasonal_exposure.len()
            )));
        }
        let rates = deaths
            .iter()
            .zip(seasonal_exposure)
            .enumerate()
            .map(|(a, (&d, &x))| {
                if x <= 0.0 {
                    return Ok(0.0);
                }
                let q = d / x;
                if !(0.0..1.0).contains(&q) {
                    return Err(Error::Input(format!(
                        "age {a}: deaths {d} not below exposure {x}"
                    )));
                }
                Ok(-52.0 * (-q).ln_1p())
            })
            .collect::<Result<Vec<_>>>()?;
        LifeTable::new(rates)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, age: usize) -> f64 {
        self.rates[age]
    }

    /// Average proportion of the class dying in one week, `1 − exp(−m_a/52)`.
    pub fn weekly_risk(&self, age: usize) -> f64 {
        -(-self.rates[age] / 52.0).exp_m1()
    }
}

/// Change in expected annual deaths attributable to a changed age structure.
#[derive(Clone, Debug)]
pub struct AgeingDecomposition {
    /// Ages from the floor upward.
    pub ages: Vec<usize>,
    /// `m_a Δ_a`, with `Δ_a` the population change in class `a`.
    pub extra_deaths: Vec<f64>,
    /// Running sum of `extra_deaths` from the floor.
    pub cumulative: Vec<f64>,
}

impl AgeingDecomposition {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Extra expected deaths per year among ages `age_floor..` from the change
/// between two annual populations, under one life table.
pub fn ageing_decomposition(
    pop_year1: &[f64],
    pop_year2: &[f64],
    table: &LifeTable,
    age_floor: usize,
) -> Result<AgeingDecomposition> {
    if pop_year1.len() != pop_year2.len() || pop_year1.len() != table.len() {
        return Err(Error::Input(format!(
            "age classes differ: populations {} and {}, life table {}",
            pop_year1.len(),
            pop_year2.len(),
            table.len()
        )));
    }
    if age_floor >= table.len() {
        return Err(Error::Parameter(format!(
            "age floor {age_floor} beyond the oldest class"
        )));
    }
    let ages: Vec<usize> = (age_floor..table.len()).collect();
    let extra_deaths: Vec<f64> = ages
        .iter()
        .map(|&a| table.rate(a) * (pop_year2[a] - pop_year1[a]))
        .collect();
    let cumulative = extra_deaths
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    Ok(AgeingDecomposition {
        ages,
        extra_deaths,
        cumulative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekly_risk_formula() {
        let t = LifeTable::new(vec![0.52, 1.0]).unwrap();
        assert!((t.weekly_risk(0) - (1.0 - (-0.01f64).exp())).abs() < 1e-15);
        assert!((t.weekly_risk(0) - 0.009_950_166_250_831_946).abs() < 1e-15);
    }

    #[test]
    fn terminal_warning_and_validation() {
        assert!(LifeTable::new(vec![0.1, 0.05]).unwrap().terminal_warning);
        assert!(!LifeTable::new(vec![0.1, 0.5]).unwrap().terminal_warning);
        assert!(LifeTable::new(vec![0.1, -0.5]).is_err());
        assert!(LifeTable::new(vec![0.1]).is_err());
    }

    #[test]
    fn decomposition_is_linear() {
        let t = LifeTable::new(vec![0.01, 0.02, 0.05, 0.2]).unwrap();
        let p1 = [100.0, 100.0, 100.0, 50.0];
        let p2 = [90.0, 110.0, 130.0, 70.0];
        let d = ageing_decomposition(&p1, &p2, &t, 1).unwrap();
        assert_eq!(d.ages, vec![1, 2, 3]);
        assert!((d.total() - (0.02 * 10.0 + 0.05 * 30.0 + 0.2 * 20.0)).abs() < 1e-12);
        let p2b: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + 2.0 * (b - a)).collect();
        let d2 = ageing_decomposition(&p1, &p2b, &t, 1).unwrap();
        for (x, y) in d.cumulative.iter().zip(&d2.cumulative) {
            assert_eq!(2.0 * x, *y);
        }
        assert_eq!(ageing_decomposition(&p1, &p1, &t, 0).unwrap().total(), 0.0);
    }
}
