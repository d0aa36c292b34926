//! One function per subcommand. Each returns what should be printed and
//! any files to be written next to it.

use std::path::{Path, PathBuf};

use anyhow::Context;
use chaintrick::charpoly::stability;
use chaintrick::hopf::{self, hopf_in_alpha_grid, hopf_in_g, hopf_in_t_numeric};
use chaintrick::model::{equilibrium, linearization};
use chaintrick::simulate::{cycle_metrics, integrate, zero_crossing_period};
use chaintrick::sweep::{self, Axis, SweepMetadata};
use chaintrick::{ChainState, ChainSystem, Error, Parameter, StepControl};
use serde_json::{json, Value};

use crate::config::{Curve, Range, RunConfig, Vary};

/// A report shown on stdout, plus an optional CSV body.
pub struct Outcome {
    pub report: Value,
    pub csv: Option<String>,
    /// For sweeps and tables the CSV is the primary output.
    pub csv_primary: bool,
    pub sidecar: Option<Value>,
}

impl Outcome {
    fn report(report: Value) -> Self {
        Self {
            report,
            csv: None,
            csv_primary: false,
            sidecar: None,
        }
    }
}

/// Checks every parameter precondition before any command runs.
pub fn validate(cfg: &RunConfig) -> chaintrick::Result<()> {
    cfg.investment.validate()?;
    cfg.macro_params.validate_with_delay()?;
    let (g_min, g_max) = cfg.investment.growth_bounds(cfg.macro_params.delta);
    let g = cfg.macro_params.g;
    if !(g > g_min && g < g_max) {
        return Err(Error::GrowthOutOfRange { g, g_min, g_max });
    }
    Ok(())
}

pub fn equilibrium_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let eq = equilibrium(&cfg.macro_params, &cfg.investment)?;
    let mut report = serde_json::to_value(eq)?;
    report["beyond_midpoint"] = json!(eq.beyond_midpoint(&cfg.investment));
    Ok(Outcome::report(report))
}

pub fn stability_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p = &cfg.macro_params;
    let verdict = stability(p, &linearization(p, &cfg.investment)?)?;
    let eigenvalues: Vec<Value> = verdict
        .eigenvalues
        .iter()
        .map(|z| json!({"re": z.re, "im": z.im}))
        .collect();
    Ok(Outcome::report(json!({
        "m": p.m,
        "g": p.g,
        "T": p.t,
        "alpha": p.alpha,
        "verdict": if verdict.stable { "stable" } else { "unstable" },
        "marginal": verdict.marginal,
        "hopf_condition": verdict.hopf_condition,
        "eigenvalue_signature": verdict.signature.to_string(),
        "coefficients": verdict.coefficients,
        "conditions": verdict.conditions,
        "diagnostics": verdict.diagnostics,
        "eigenvalues": eigenvalues,
    })))
}

pub fn hopf_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (p, inv, opts) = (&cfg.macro_params, &cfg.investment, &cfg.hopf);
    let report = match opts.vary {
        Vary::T => {
            let points = if p.m <= 2 {
                hopf::hopf_in_t(p, inv)?
            } else {
                let r = opts.t_range;
                hopf_in_t_numeric(p, inv, (r.lo, r.hi), r.count)?
            };
            json!({"vary": "T", "m": p.m, "points": points})
        }
        Vary::G => {
            let r = hopf_in_g(p, inv)?;
            let mut v = serde_json::to_value(&r)?;
            v["vary"] = json!("g");
            v["g1"] = json!(r.g1());
            v["g1_hopf"] = json!(r.g1_hopf());
            v["g2_hopf"] = json!(r.g2_hopf());
            v["g2"] = json!(r.g2());
            v
        }
        Vary::Alpha => {
            let r = opts.alpha_range;
            let points = hopf_in_alpha_grid(p, inv, (r.lo, r.hi), r.count)?;
            json!({"vary": "alpha", "m": p.m, "points": points})
        }
    };
    Ok(Outcome::report(report))
}

pub fn simulate_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (p, opts) = (&cfg.macro_params, &cfg.simulate);
    let sys = ChainSystem::build(p, &cfg.investment)?;
    let s0 = ChainState::from_history(opts.y0, opts.k0, p.m);
    let ctl = StepControl::default()
        .with_tolerances(opts.rtol, opts.atol)
        .with_sample_interval(opts.sample_interval);
    let traj = integrate(&sys, &s0, opts.horizon, &ctl)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let csv = String::from_utf8(csv).expect("ascii");

    let metrics = cycle_metrics(&traj, opts.transient_fraction);
    let report = match &metrics {
        Ok(m) => json!({
            "kind": m.kind,
            "period": m.period,
            "amplitude": m.amplitude,
            "semi_amplitude": m.semi_amplitude(),
            "decay_rate": m.decay_rate,
            "maxima": m.maxima,
            "zero_crossing_period": zero_crossing_period(&traj, opts.transient_fraction).ok(),
            "samples": traj.len(),
            "diverged": traj.diverged,
        }),
        Err(_) => Value::Null,
    };
    let outcome = Outcome {
        report,
        csv: Some(csv),
        csv_primary: false,
        sidecar: None,
    };
    match metrics {
        Ok(_) => Ok(outcome),
        // The trajectory is still worth writing; the caller reports the error.
        Err(e) => Err(anyhow::Error::new(e).context(PartialOutput(outcome))),
    }
}

/// Attached to an error when part of the output was produced.
pub struct PartialOutput(pub Outcome);

impl std::fmt::Display for PartialOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cycle measurement failed")
    }
}

impl std::fmt::Debug for PartialOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PartialOutput")
    }
}

fn axis(parameter: Parameter, r: Range) -> Axis {
    Axis::new(parameter, r.lo, r.hi, r.count)
}

pub fn sweep_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (p, inv, opts) = (&cfg.macro_params, &cfg.investment, &cfg.sweep);
    let workers = cfg.workers()?;
    let mut csv = Vec::new();
    let (kind, sidecar, data) = match opts.curve {
        Curve::TVsAlpha => {
            let ax = axis(Parameter::Alpha, opts.alpha_range);
            let c = sweep::curve_t_vs_alpha(&ax, p, inv, workers)?;
            c.write_csv(&mut csv)?;
            ("T-vs-alpha", SweepMetadata::for_curve("T-vs-alpha", inv, p, ax, &c), serde_json::to_value(&c)?)
        }
        Curve::TVsG => {
            let ax = axis(Parameter::G, opts.g_range);
            let c = sweep::curve_t_vs_g(&ax, p, inv, workers)?;
            c.write_csv(&mut csv)?;
            ("T-vs-g", SweepMetadata::for_curve("T-vs-g", inv, p, ax, &c), serde_json::to_value(&c)?)
        }
        Curve::Surface => {
            let (a, g) = (axis(Parameter::Alpha, opts.alpha_range), axis(Parameter::G, opts.g_range));
            let s = sweep::surface_t(&a, &g, p, inv, workers)?;
            s.write_csv(&mut csv)?;
            ("surface", SweepMetadata::new("surface", inv, p, vec![a, g]), serde_json::to_value(&s)?)
        }
    };
    let sidecar = serde_json::to_value(&sidecar)?;
    Ok(Outcome {
        report: json!({"kind": kind, "metadata": sidecar, "result": data}),
        csv: Some(String::from_utf8(csv).expect("ascii")),
        csv_primary: true,
        sidecar: Some(sidecar),
    })
}

pub fn table2_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (p, inv) = (&cfg.macro_params, &cfg.investment);
    let rows = sweep::table_g_bifurcations(&cfg.table2.orders, p, inv, cfg.workers()?)?;
    let mut csv = Vec::new();
    sweep::write_table_csv(&rows, &mut csv)?;
    let sidecar = serde_json::to_value(SweepMetadata::new("table2", inv, p, Vec::new()))?;
    Ok(Outcome {
        report: json!({"kind": "table2", "metadata": sidecar, "rows": rows}),
        csv: Some(String::from_utf8(csv).expect("ascii")),
        csv_primary: true,
        sidecar: Some(sidecar),
    })
}

/// `curve.csv` → `curve.json`
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn write_file(path: &Path, body: &str) -> anyhow::Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Renders a JSON report as `key: value` lines, numbers with 17
/// significant digits. Nested keys are joined with `.`.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    flatten("", v, &mut out);
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str(&format!("{prefix}: []\n"));
            }
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::Number(n) => {
            let s = match (n.as_i64(), n.as_u64(), n.as_f64()) {
                (Some(i), _, _) => i.to_string(),
                (_, Some(u), _) => u.to_string(),
                (_, _, Some(f)) => format!("{f:.16e}"),
                _ => n.to_string(),
            };
            out.push_str(&format!("{prefix}: {s}\n"));
        }
        Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        Value::Bool(b) => out.push_str(&format!("{prefix}: {b}\n")),
        Value::Null => out.push_str(&format!("{prefix}: NA\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_rendering_flattens_nested_values() {
        let v = json!({"a": 0.5, "b": {"c": [1, 2.25]}, "d": null, "e": "x"});
        let text = render_text(&v);
        assert_eq!(
            text,
            "a: 5.0000000000000000e-1\nb.c[0]: 1\nb.c[1]: 2.2500000000000000e0\nd: NA\ne: x\n"
        );
    }

    #[test]
    fn sidecar_sits_next_to_csv() {
        assert_eq!(sidecar_path(Path::new("out/curve.csv")), PathBuf::from("out/curve.json"));
    }
}
