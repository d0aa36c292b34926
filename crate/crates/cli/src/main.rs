use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::{Outcome, PartialOutput};
use config::{Curve, Range, RunConfig, Vary};

/// Bifurcation analysis of the Kaldor–Kalecki growth model with a
/// gamma-distributed investment delay.
#[derive(Parser, Debug)]
#[command(name = "chaintrick", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Slope of the logistic investment function.
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Minimum investment rate.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Width of the investment range.
    #[arg(long, global = true)]
    d: Option<f64>,
    /// Output-capital sensitivity.
    #[arg(long, global = true)]
    v: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Growth rate.
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Autonomous expenditure.
    #[arg(long = "G0", global = true)]
    g0: Option<f64>,
    /// Mean delay.
    #[arg(long = "T", global = true)]
    t: Option<f64>,
    /// Kernel order.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// JSON configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the primary output here instead of stdout (CSV for simulate,
    /// sweep and table2, with a `.json` metadata sidecar for the latter two).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON instead of `key: value` text.
    #[arg(long, global = true)]
    json: bool,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    emit_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady state x*, y*, k* and the investment derivatives there.
    Equilibrium,
    /// Characteristic coefficients, Routh–Hurwitz conditions and eigenvalues.
    Stability,
    /// Hopf points in T, g or alpha.
    Hopf {
        #[arg(long)]
        vary: Option<Vary>,
        #[arg(long)]
        t_lo: Option<f64>,
        #[arg(long)]
        t_hi: Option<f64>,
        #[arg(long)]
        t_count: Option<usize>,
        #[arg(long)]
        alpha_lo: Option<f64>,
        #[arg(long)]
        alpha_hi: Option<f64>,
        #[arg(long)]
        alpha_count: Option<usize>,
    },
    /// Integrate the chain system and measure the cycle.
    Simulate {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        sample_interval: Option<f64>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        /// Constant initial history of y.
        #[arg(long)]
        y0: Option<f64>,
        /// Constant initial history of k.
        #[arg(long)]
        k0: Option<f64>,
        #[arg(long)]
        transient: Option<f64>,
    },
    /// Critical delay over parameter grids.
    Sweep {
        #[arg(long)]
        curve: Option<Curve>,
        #[arg(long)]
        alpha_lo: Option<f64>,
        #[arg(long)]
        alpha_hi: Option<f64>,
        #[arg(long)]
        alpha_count: Option<usize>,
        #[arg(long)]
        g_lo: Option<f64>,
        #[arg(long)]
        g_hi: Option<f64>,
        #[arg(long)]
        g_count: Option<usize>,
        /// Worker threads, 0 = one per core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Growth-rate Hopf points for several kernel orders.
    Table2 {
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
    },
}

/// Configuration problems map to the domain exit code.
#[derive(Debug)]
struct ConfigError;

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration")
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_range(r: &mut Range, lo: Option<f64>, hi: Option<f64>, count: Option<usize>) {
    set(&mut r.lo, lo);
    set(&mut r.hi, hi);
    set(&mut r.count, count);
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path).context(ConfigError)?,
        None => RunConfig::default(),
    };
    let inv = &mut cfg.investment;
    set(&mut inv.a, c.a);
    set(&mut inv.c, c.c);
    set(&mut inv.d, c.d);
    set(&mut inv.v, c.v);
    let p = &mut cfg.macro_params;
    set(&mut p.alpha, c.alpha);
    set(&mut p.gamma, c.gamma);
    set(&mut p.delta, c.delta);
    set(&mut p.g, c.g);
    set(&mut p.g0, c.g0);
    set(&mut p.t, c.t);
    set(&mut p.m, c.m);
    match &cli.command {
        Command::Equilibrium | Command::Stability => {}
        Command::Hopf {
            vary,
            t_lo,
            t_hi,
            t_count,
            alpha_lo,
            alpha_hi,
            alpha_count,
        } => {
            set(&mut cfg.hopf.vary, *vary);
            set_range(&mut cfg.hopf.t_range, *t_lo, *t_hi, *t_count);
            set_range(&mut cfg.hopf.alpha_range, *alpha_lo, *alpha_hi, *alpha_count);
        }
        Command::Simulate {
            horizon,
            sample_interval,
            rtol,
            atol,
            y0,
            k0,
            transient,
        } => {
            let s = &mut cfg.simulate;
            set(&mut s.horizon, *horizon);
            set(&mut s.sample_interval, *sample_interval);
            set(&mut s.rtol, *rtol);
            set(&mut s.atol, *atol);
            set(&mut s.y0, *y0);
            set(&mut s.k0, *k0);
            set(&mut s.transient_fraction, *transient);
        }
        Command::Sweep {
            curve,
            alpha_lo,
            alpha_hi,
            alpha_count,
            g_lo,
            g_hi,
            g_count,
            workers,
        } => {
            let s = &mut cfg.sweep;
            set(&mut s.curve, *curve);
            set_range(&mut s.alpha_range, *alpha_lo, *alpha_hi, *alpha_count);
            set_range(&mut s.g_range, *g_lo, *g_hi, *g_count);
            set(&mut s.workers, *workers);
        }
        Command::Table2 { orders } => set(&mut cfg.table2.orders, orders.clone()),
    }
    Ok(cfg)
}

fn emit(outcome: &Outcome, common: &Common) -> anyhow::Result<()> {
    let report = if common.json {
        let mut s = serde_json::to_string_pretty(&outcome.report)?;
        s.push('\n');
        s
    } else {
        commands::render_text(&outcome.report)
    };
    let mut stdout = std::io::stdout().lock();
    match (&outcome.csv, &common.out) {
        (Some(csv), Some(path)) => {
            commands::write_file(path, csv)?;
            if let Some(meta) = &outcome.sidecar {
                let mut s = serde_json::to_string_pretty(meta)?;
                s.push('\n');
                commands::write_file(&commands::sidecar_path(path), &s)?;
            }
            if !outcome.csv_primary || common.json {
                stdout.write_all(report.as_bytes())?;
            }
        }
        (Some(csv), None) if outcome.csv_primary && !common.json => stdout.write_all(csv.as_bytes())?,
        (_, Some(path)) if outcome.csv.is_none() => commands::write_file(path, &report)?,
        _ => stdout.write_all(report.as_bytes())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = build_config(cli)?;
    if cli.common.emit_config {
        let body = cfg.to_json();
        match &cli.common.out {
            Some(path) => commands::write_file(path, &body)?,
            None => std::io::stdout().write_all(body.as_bytes())?,
        }
        return Ok(());
    }
    commands::validate(&cfg)?;
    let result = match cli.command {
        Command::Equilibrium => commands::equilibrium_cmd(&cfg),
        Command::Stability => commands::stability_cmd(&cfg),
        Command::Hopf { .. } => commands::hopf_cmd(&cfg),
        Command::Simulate { .. } => commands::simulate_cmd(&cfg),
        Command::Sweep { .. } => commands::sweep_cmd(&cfg),
        Command::Table2 { .. } => commands::table2_cmd(&cfg),
    };
    match result {
        Ok(outcome) => emit(&outcome, &cli.common),
        Err(e) => {
            if let Some(PartialOutput(partial)) = e.downcast_ref::<PartialOutput>() {
                if let (Some(csv), Some(path)) = (&partial.csv, &cli.common.out) {
                    commands::write_file(path, csv)?;
                }
            }
            Err(e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.downcast_ref::<chaintrick::Error>() {
        return if err.is_domain() { 2 } else { 3 };
    }
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
