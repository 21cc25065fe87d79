use chrono::NaiveDate;

use super::WEEKS_PER_YEAR;
use crate::error::{Error, Result};

/// Population counts in age groups. Group `g` covers ages
/// `lower[g]..lower[g + 1]`; the last group is open-ended.
#[derive(Clone, Debug, PartialEq)]
pub struct AgeGroups {
    pub lower: Vec<usize>,
    pub counts: Vec<f64>,
}

impl AgeGroups {
    pub fn new(lower: Vec<usize>, counts: Vec<f64>) -> Result<Self> {
        if lower.len() != counts.len() || lower.len() < 2 {
            return Err(Error::Input(format!(
                "need at least two age groups with one count each, got {} bounds and {} counts",
                lower.len(),
                counts.len()
            )));
        }
        if lower[0] != 0 || lower.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input(
                "age groups must start at 0 and increase".into(),
            ));
        }
        if let Some(g) = counts.iter().position(|c| !c.is_finite()) {
            return Err(Error::Input(format!(
                "count for age group starting at {} is not finite",
                lower[g]
            )));
        }
        if let Some(g) = counts.iter().position(|c| *c < 0.0) {
            return Err(Error::Input(format!(
                "negative count for age group starting at {}: cumulative population decreases",
                lower[g]
            )));
        }
        Ok(AgeGroups { lower, counts })
    }

    /// One group per year of age, the last open-ended.
    pub fn yearly(counts: Vec<f64>) -> Result<Self> {
        AgeGroups::new((0..counts.len()).collect(), counts)
    }

    /// First age of the open-ended group.
    pub fn terminal_age(&self) -> usize {
        *self.lower.last().expect("validated non-empty")
    }
}

/// Population in one-week age cells: 52 cells per closed year of age, then a
/// single cell for the open terminal class.
#[derive(Clone, Debug, PartialEq)]
pub struct WeeklyAgePopulation {
    pub cells: Vec<f64>,
    /// Births added to the youngest cell each week.
    pub birth_rate: f64,
    pub as_of: NaiveDate,
}

impl WeeklyAgePopulation {
    /// Number of year classes including the terminal one.
    pub fn n_year_classes(&self) -> usize {
        (self.cells.len() - 1) / WEEKS_PER_YEAR + 1
    }

    /// Year class of a cell.
    pub fn year_class(&self, cell: usize) -> usize {
        (cell / WEEKS_PER_YEAR).min(self.n_year_classes() - 1)
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn year_class_totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_year_classes()];
        for (c, v) in self.cells.iter().enumerate() {
            out[self.year_class(c)] += v;
        }
        out
    }
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch–Carlson slopes).
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Pchip { x, y, d };
        }
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() || d0 == 0.0 {
                0.0
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Pchip { x, y, d }
    }

    fn eval(&self, t: f64) -> f64 {
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }
}

/// Split grouped annual population into one-week age cells by monotone
/// interpolation of the cumulative population against age and differencing at
/// weekly steps. Each group's cells are rescaled to reproduce its count
/// exactly. The birth rate is taken as the youngest cell.
pub fn split_to_weekly(groups: &AgeGroups, as_of: NaiveDate) -> Result<WeeklyAgePopulation> {
    let terminal = groups.terminal_age();
    let n_closed = groups.lower.len() - 1;
    let knots: Vec<f64> = groups.lower.iter().map(|&a| a as f64).collect();
    let mut cumulative = Vec::with_capacity(knots.len());
    let mut acc = 0.0;
    cumulative.push(acc);
    for c in &groups.counts[..n_closed] {
        acc += c;
        cumulative.push(acc);
    }
    let interp = Pchip::new(knots, cumulative);
    let n_cells = terminal * WEEKS_PER_YEAR;
    let at = |c: usize| interp.eval(c as f64 / WEEKS_PER_YEAR as f64);
    let mut cells: Vec<f64> = (0..n_cells).map(|c| (at(c + 1) - at(c)).max(0.0)).collect();
    for g in 0..n_closed {
        let range = groups.lower[g] * WEEKS_PER_YEAR..groups.lower[g + 1] * WEEKS_PER_YEAR;
        let sum: f64 = cells[range.clone()].iter().sum();
        let target = groups.counts[g];
        let cells_g = &mut cells[range.clone()];
        if sum > 0.0 {
            cells_g.iter_mut().for_each(|v| *v *= target / sum);
        } else {
            let even = target / cells_g.len() as f64;
            cells_g.iter_mut().for_each(|v| *v = even);
        }
    }
    cells.push(groups.counts[n_closed]);
    Ok(WeeklyAgePopulation {
        birth_rate: cells[0],
        cells,
        as_of,
    })
}
