use clap::{Args, ValueEnum};

use epirecon_core::seir::{
    final_size, solve_seir, two_compartment_lockdown, Heterogeneity, LockdownOptions, SeirConfig,
};

use super::num;
use crate::error::{CliError, CliResult};
use crate::io::Outputs;
use crate::svg::{render, Plot, Series};
use crate::table::{format_float, Table};
use crate::Common;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum HeterogeneityArg {
    None,
    Susceptibility,
    Connectivity,
}

#[derive(Args, Clone, Debug)]
pub struct SeirArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 2.5)]
    pub r0: f64,
    /// Immunity coefficient, the exponent on S (at least 1).
    #[arg(long, conflicts_with = "heterogeneity")]
    pub lambda: Option<f64>,
    /// Gamma-distributed variability; sets λ from `--shape`.
    #[arg(long, value_enum)]
    pub heterogeneity: Option<HeterogeneityArg>,
    /// Gamma shape of the variability distribution.
    #[arg(long, default_value_t = 1.0)]
    pub shape: f64,
    /// Rate of leaving the exposed class, per day.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    /// Recovery rate, per day.
    #[arg(long, default_value_t = 1.0 / 5.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub initial_infected: f64,
    /// Days simulated.
    #[arg(long, default_value_t = 300.0)]
    pub horizon: f64,
    /// Integration step in days.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Also write final sizes against λ for R0 = 2, 3, 4, 5.
    #[arg(long)]
    pub finalsize_grid: bool,
    /// Day lockdown starts; enables the two-compartment lockdown run.
    #[arg(long)]
    pub lockdown_day: Option<f64>,
    /// R0 of the locked-down compartment.
    #[arg(long, default_value_t = 0.5)]
    pub locked_r0: f64,
    /// Population share of key workers, who keep `--r0`.
    #[arg(long, default_value_t = 0.2)]
    pub key_share: f64,
    /// Share of contacts made across the whole population.
    #[arg(long, default_value_t = 0.2)]
    pub mixing: f64,
    /// Time constant of the move to lockdown transmission, in days.
    #[arg(long, default_value_t = 7.0)]
    pub ramp_days: f64,
}

#[derive(Args, Clone, Debug)]
pub struct FinalsizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated R0 values.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0, 5.0])]
    pub r0: Vec<f64>,
    /// Comma-separated immunity coefficients (default: 51 points on [1, 3]).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
}

/// λ from 1 to 3 in steps of 0.04.
fn lambda_grid() -> Vec<f64> {
    (0..=50).map(|k| 1.0 + k as f64 / 25.0).collect()
}

fn finalsize_table(r0s: &[f64], lambdas: &[f64]) -> CliResult<Table> {
    let mut t = Table::new(&["lambda", "r0", "final_size"]);
    for &r0 in r0s {
        for &lambda in lambdas {
            t.push(vec![num(lambda), num(r0), num(final_size(r0, lambda)?)]);
        }
    }
    Ok(t)
}

fn finalsize_figure(out: &mut Outputs, r0s: &[f64], lambdas: &[f64]) -> CliResult<()> {
    let mut t = finalsize_table(r0s, lambdas)?;
    // text copy of R0 for grouping the plotted curves
    t.header.push("curve".into());
    for row in &mut t.rows {
        let r0 = row[1].as_f64().expect("numeric R0");
        row.push(format!("R0 = {}", format_float(r0)).as_str().into());
    }
    let mut plot = Plot::new(
        "Final size",
        "lambda",
        "immunity coefficient λ",
        "fraction infected",
    );
    for &r0 in r0s {
        let label = format!("R0 = {}", format_float(r0));
        plot = plot.series(Series::line("final_size", &label).filtered("curve", &label));
    }
    out.figure("finalsize", &t, render(&t, &plot));
    Ok(())
}

fn config(args: &SeirArgs) -> CliResult<SeirConfig> {
    let cfg = match (args.lambda, args.heterogeneity) {
        (Some(lambda), _) => SeirConfig::with_lambda(args.r0, args.delta, args.gamma, lambda)?,
        (None, h) => {
            let h = match h.unwrap_or(HeterogeneityArg::None) {
                HeterogeneityArg::None => Heterogeneity::None,
                HeterogeneityArg::Susceptibility => Heterogeneity::Susceptibility(args.shape),
                HeterogeneityArg::Connectivity => Heterogeneity::Connectivity(args.shape),
            };
            SeirConfig::new(args.r0, args.delta, args.gamma, h)?
        }
    };
    if args.dt > 0.1 {
        return Err(CliError::input(format!("--dt {} exceeds 0.1 day", args.dt)));
    }
    Ok(cfg)
}

pub fn run(args: &SeirArgs) -> CliResult<Outputs> {
    args.common.reject_input("seir")?;
    let cfg = config(args)?;
    let lockdown_cfgs = match args.lockdown_day {
        Some(_) => Some(SeirConfig::with_lambda(
            args.locked_r0,
            cfg.delta,
            cfg.gamma,
            cfg.lambda,
        )?),
        None => None,
    };
    let traj = solve_seir(&cfg, args.initial_infected, args.horizon, args.dt)?;
    let mut out = Outputs::default();

    let mut t = Table::new(&["t", "S", "E", "I", "incidence", "logR"]);
    t.meta("r0", format_float(cfg.r0));
    t.meta("lambda", format_float(cfg.lambda));
    t.meta("delta", format_float(cfg.delta));
    t.meta("gamma", format_float(cfg.gamma));
    for k in traj.daily_indices() {
        let r = traj.r_eff[k];
        t.push(vec![
            num(traj.t[k].round()),
            num(traj.s[k]),
            num(traj.e[k]),
            num(traj.i[k]),
            num(traj.incidence[k]),
            if r > 0.0 { num(r.ln()) } else { num(f64::NAN) },
        ]);
    }
    let plot = Plot::new("SEIR trajectory", "t", "day", "fraction of population")
        .series(Series::line("S", "S"))
        .series(Series::line("E", "E"))
        .series(Series::line("I", "I"))
        .series(Series::line("incidence", "new infections per day"));
    out.figure("trajectory", &t, render(&t, &plot));

    if let (Some(onset), Some(locked)) = (args.lockdown_day, lockdown_cfgs) {
        let opts = LockdownOptions {
            onset,
            ramp_days: args.ramp_days,
            mixing: args.mixing,
            initial_infected: args.initial_infected,
            horizon: args.horizon,
            dt: args.dt,
        };
        let res = two_compartment_lockdown(&locked, &cfg, args.key_share, &opts)?;
        let mut l = Table::new(&["t", "r_locked", "r_key", "aggregate_r"]);
        l.meta("onset", format_float(onset));
        l.meta("key_share", format_float(args.key_share));
        l.meta("locked_r0", format_float(args.locked_r0));
        l.meta("key_r0", format_float(cfg.r0));
        l.meta("mixing", format_float(args.mixing));
        let mut next = 0.0;
        for k in 0..res.t.len() {
            if res.t[k] >= next - 1e-9 {
                l.push(vec![
                    num(res.t[k].round()),
                    num(res.locked.r_eff[k]),
                    num(res.key.r_eff[k]),
                    num(res.aggregate_r[k]),
                ]);
                next += 1.0;
            }
        }
        let plot = Plot::new("R under lockdown", "t", "day", "R")
            .series(Series::line("aggregate_r", "aggregate"))
            .series(Series::line("r_locked", "locked down"))
            .series(Series::line("r_key", "key workers"));
        out.figure("lockdown", &l, render(&l, &plot));
    }

    if args.finalsize_grid {
        finalsize_figure(&mut out, &[2.0, 3.0, 4.0, 5.0], &lambda_grid())?;
    }
    println!(
        "attack fraction after {} days: {:.4}",
        args.horizon,
        traj.attack_fraction()
    );
    println!("final size: {:.4}", final_size(cfg.r0, cfg.lambda)?);
    Ok(out)
}

pub fn run_finalsize(args: &FinalsizeArgs) -> CliResult<Outputs> {
    args.common.reject_input("finalsize")?;
    let lambdas = if args.lambda.is_empty() {
        lambda_grid()
    } else {
        args.lambda.clone()
    };
    if args.r0.is_empty() {
        return Err(CliError::input("--r0 needs at least one value"));
    }
    let mut out = Outputs::default();
    finalsize_figure(&mut out, &args.r0, &lambdas)?;
    println!(
        "{} final sizes for {} R0 values",
        args.r0.len() * lambdas.len(),
        args.r0.len()
    );
    Ok(out)
}
