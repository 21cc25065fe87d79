use std::cell::Cell;

use super::mgf::{invert, Mgf};
use super::{check_run, rk4_step, SeirConfig, SeirTrajectory};
use crate::error::{Error, Result};

/// Which individual trait varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeterogeneityMode {
    /// `dS/dt = −R₀γ M′(M⁻¹(S)) I / M′(0)`.
    Susceptibility,
    /// `dS/dt = −R₀γ M″(M⁻¹(S)) I / M″(0)`, using the approximation that the
    /// infectious period is short.
    Connectivity,
}

/// Integrate the MGF-reduced SEIR model. `M⁻¹` is evaluated by safeguarded
/// Newton iteration warm-started from the previous `q`. The immunity
/// coefficient of `cfg` is not used.
pub fn solve_seir_general<M: Mgf + ?Sized>(
    mgf: &M,
    mode: HeterogeneityMode,
    cfg: &SeirConfig,
    initial_infected: f64,
    horizon: f64,
    dt: f64,
) -> Result<SeirTrajectory> {
    cfg.validate()?;
    let steps = check_run(initial_infected, horizon, dt)?;
    let (deriv, norm): (fn(&M, f64) -> f64, f64) = match mode {
        HeterogeneityMode::Susceptibility => (|m: &M, s| m.m1(s), mgf.m1(0.0)),
        HeterogeneityMode::Connectivity => (|m: &M, s| m.m2(s), mgf.m2(0.0)),
    };
    if !(norm > 0.0 && norm.is_finite()) || (mgf.m(0.0) - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(
            "MGF must satisfy M(0) = 1 with positive derivatives at 0".into(),
        ));
    }
    let warm = Cell::new(0.0);
    let q_of = |t: f64, s: f64| -> Result<f64> {
        let q = invert(mgf, s, warm.get()).ok_or_else(|| Error::Numerical {
            message: format!(
                "MGF inversion failed at t = {t}: S = {s}, previous q = {}",
                warm.get()
            ),
            condition: None,
        })?;
        warm.set(q);
        Ok(q)
    };
    let force = |q: f64, i: f64| cfg.r0 * cfg.gamma * deriv(mgf, -q) / norm * i;
    let mut rhs = |t: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let q = q_of(t, y[0])?;
        let inf = force(q, y[2]);
        Ok([
            -inf,
            inf - cfg.delta * y[1],
            cfg.delta * y[1] - cfg.gamma * y[2],
            cfg.gamma * y[2],
        ])
    };
    let mut traj = SeirTrajectory {
        q: Some(Vec::with_capacity(steps + 1)),
        ..Default::default()
    };
    let mut y = [1.0 - initial_infected, 0.0, initial_infected, 0.0];
    let mut t = 0.0;
    for k in 0..=steps {
        let q = q_of(t, y[0])?;
        let inc = force(q, y[2]);
        traj.t.push(t);
        traj.s.push(y[0]);
        traj.e.push(y[1]);
        traj.i.push(y[2]);
        traj.r.push(y[3]);
        traj.incidence.push(inc);
        traj.r_eff.push(if y[2] > 0.0 {
            inc / (cfg.gamma * y[2])
        } else {
            f64::NAN
        });
        traj.q.as_mut().expect("allocated").push(q);
        if k == steps {
            break;
        }
        y = rk4_step(&mut rhs, t, &y, dt)?;
        t = (k + 1) as f64 * dt;
        if y.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::StepSize { dt, t });
        }
    }
    Ok(traj)
}
