//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use chaintrick::charpoly::{coeffs_m1, coeffs_m2, routh_hurwitz_cubic, routh_hurwitz_quartic, EigenSignature};
use chaintrick::chain::equilibrium_jacobian;
use chaintrick::hopf::{hopf_in_alpha, hopf_in_g, hopf_in_t, numeric_crossing_rate, spectrum, HopfPoint};
use chaintrick::model::{equilibrium, linearization};
use chaintrick::poly;
use chaintrick::simulate::{cycle_metrics, simulate, CycleKind, StepControl};
use chaintrick::sweep::classify_g_grid;
use chaintrick::{ChainState, InvestmentParams, MacroParams, Parameter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_chaintrick");

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CHAINTRICK_THREADS", t),
        None => cmd.env_remove("CHAINTRICK_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_json(args: &[&str]) -> Result<Value, String> {
    let out = run(args, None);
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1 ---------------------------------------------------------------------------

const EXPECTED_G_BI: [(usize, f64, f64); 4] = [
    (1, 0.01011989, 0.02032586),
    (2, 0.01011919, 0.02032671),
    (3, 0.01011909, 0.02032693),
    (4, 0.01011906, 0.02032703),
];

fn growth_rate_hopf() -> Check {
    let start = Instant::now();
    let out = run(&["table2"], None);
    let elapsed = start.elapsed().as_secs_f64();
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some("m,g_bi1,g_bi2") {
        return Err("unexpected header".into());
    }
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for (line, (m, g1, g2)) in lines.zip(EXPECTED_G_BI) {
        let f: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
        if f[0] != m.to_string() {
            return Err(format!("row order: {line}"));
        }
        worst = worst.max((parse(f[1])? - g1).abs()).max((parse(f[2])? - g2).abs());
        rows += 1;
    }
    ensure(
        rows == 4 && worst < 2e-6 && elapsed < 30.0,
        format!("{rows} rows, max |Δg| = {worst:.2e} (tol 2e-6), {elapsed:.1} s (limit 30 s)"),
    )
}

// 2 ---------------------------------------------------------------------------

fn g_regimes() -> Check {
    let inv = InvestmentParams::default();
    let base = MacroParams::default();
    let grid: Vec<f64> = (1..=500).map(|i| 0.003 + i as f64 * 0.026 / 501.0).collect();
    let c = classify_g_grid(&grid, &base, &inv, 0).map_err(|e| e.to_string())?;
    let pattern: Vec<bool> = c.regimes.iter().map(|r| r.stable).collect();
    if pattern != [true, false, true] || c.boundaries.len() != 2 {
        return Err(format!("regimes {pattern:?}"));
    }
    let (b1, b2) = (c.boundaries[0], c.boundaries[1]);
    // Every 25th grid verdict is re-derived through the command line.
    for v in c.verdicts.iter().step_by(25) {
        let g = v.g.to_string();
        let report = run_json(&["stability", "--g", &g, "--json"])?;
        let stable = report["verdict"] == "stable";
        if stable != v.stable {
            return Err(format!("command line disagrees at g = {g}"));
        }
    }
    let unstable = &c.regimes[1];
    let sig_mid = EigenSignature::of(&spectrum(&base.with_g(0.5 * (b1 + b2)), &inv).map_err(|e| e.to_string())?);
    ensure(
        (b1 - 0.0101199).abs() < 2e-6 && (b2 - 0.0203259).abs() < 2e-6 && sig_mid.unstable_pairs == 1,
        format!(
            "3 regimes (stable {} pts, unstable {} pts \"{sig_mid}\", stable {} pts), boundaries {b1:.8} {b2:.8} (tol 2e-6)",
            c.regimes[0].points, unstable.points, c.regimes[2].points
        ),
    )
}

// 3 ---------------------------------------------------------------------------

fn alpha_curve() -> Check {
    let v = run_json(&[
        "sweep", "--curve", "T-vs-alpha", "--g", "0.016", "--m", "1", "--alpha-lo", "0.6", "--alpha-hi", "0.764",
        "--alpha-count", "40", "--json",
    ])?;
    let coeffs = &v["metadata"]["fit"]["coefficients"];
    let (c0, c1) = (coeffs[0].as_f64().ok_or("c0")?, coeffs[1].as_f64().ok_or("c1")?);
    let zero = v["metadata"]["zero_crossing"].as_f64().ok_or("zero crossing")?;
    let e0 = (c0 / -11.137983 - 1.0).abs();
    let e1 = (c1 / 8.512805 - 1.0).abs();
    ensure(
        e0 < 0.03 && e1 < 0.03 && (zero - 0.7644).abs() < 0.002,
        format!(
            "c0 = {c0:.6} ({:.2}%), c1 = {c1:.6} ({:.2}%), alpha at T_bi = 0: {zero:.5} (tol 3%, 0.002)",
            100.0 * e0,
            100.0 * e1
        ),
    )
}

// 4 ---------------------------------------------------------------------------

fn cycles() -> Check {
    let mut detail = Vec::new();
    let mut ok = true;
    for (m, period_ref, amp_ref) in [("1", 114.85, 12.9555), ("2", 116.45, 12.966)] {
        let v = run_json(&["simulate", "--m", m, "--alpha", "0.9", "--g", "0.016", "--T", "3", "--json"])?;
        let period = v["period"].as_f64().ok_or("no period")?;
        let amp = v["amplitude"].as_f64().ok_or("no amplitude")?;
        let (ep, ea) = ((period / period_ref - 1.0).abs(), (amp / amp_ref - 1.0).abs());
        ok &= v["kind"] == "limit_cycle" && ep < 0.02 && ea < 0.03;
        detail.push(format!(
            "m={m}: period {period:.3} ({:.2}%), amplitude {amp:.4} ({:.2}%)",
            100.0 * ep,
            100.0 * ea
        ));
    }
    ensure(ok, detail.join("; ") + " (tol 2%, 3%)")
}

// 5 ---------------------------------------------------------------------------

fn random_params(rng: &mut ChaCha8Rng, m: usize) -> (MacroParams, InvestmentParams) {
    loop {
        let inv = InvestmentParams {
            a: rng.random_range(1.0..20.0),
            c: rng.random_range(0.002..0.05),
            d: rng.random_range(0.005..0.1),
            v: rng.random_range(1.0..10.0),
        };
        let delta = rng.random_range(0.001..0.05);
        let (g_min, g_max) = inv.growth_bounds(delta);
        let lo = g_min.max(1e-4);
        if g_max - lo < 1e-3 {
            continue;
        }
        let p = MacroParams {
            alpha: rng.random_range(0.1..3.0),
            gamma: rng.random_range(0.05..0.5),
            delta,
            g: rng.random_range(lo + 1e-4..g_max - 1e-4),
            g0: rng.random_range(0.5..5.0),
            t: rng.random_range(0.05..20.0),
            m,
        };
        if equilibrium(&p, &inv).is_ok() {
            return (p, inv);
        }
    }
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let (mut worst, mut compared, mut skipped) = (0.0_f64, 0, 0);
    for m in [1, 2] {
        for _ in 0..1000 {
            let (p, inv) = random_params(&mut rng, m);
            let lin = linearization(&p, &inv).map_err(|e| e.to_string())?;
            let jac = equilibrium_jacobian(&p, &lin).map_err(|e| e.to_string())?;
            let numeric = poly::char_poly(&jac);
            let eigs = poly::eigenvalues(&jac).map_err(|e| e.to_string())?;
            let (closed, verdict) = if m == 1 {
                let c = coeffs_m1(&lin, &p).map_err(|e| e.to_string())?;
                (c.monic().to_vec(), routh_hurwitz_cubic(&c).map_err(|e| e.to_string())?)
            } else {
                let c = coeffs_m2(&lin, &p).map_err(|e| e.to_string())?;
                (c.monic().to_vec(), routh_hurwitz_quartic(&c).map_err(|e| e.to_string())?)
            };
            // The i-th coefficient scales like the i-th power of the spectral radius.
            let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (i, (a, b)) in closed.iter().zip(&numeric).enumerate() {
                let scale = a.abs().max(b.abs()).max(radius.powi(i as i32 + 1));
                worst = worst.max((a - b).abs() / scale);
            }
            let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            if verdict.marginal || max_re.abs() < 1e-8 {
                skipped += 1;
                continue;
            }
            if verdict.stable != (max_re < 0.0) {
                return Err(format!("verdict mismatch at {p:?} {inv:?}: routh {} max Re {max_re:e}", verdict.stable));
            }
            compared += 1;
        }
    }
    ensure(
        worst < 1e-9,
        format!("2000 draws: max coefficient error {worst:.1e} (tol 1e-9), {compared} verdicts agree, {skipped} marginal skipped"),
    )
}

// 6 ---------------------------------------------------------------------------

fn delay_hopf_points() -> Vec<(MacroParams, HopfPoint)> {
    let inv = InvestmentParams::default();
    let mut out = Vec::new();
    for m in [1, 2] {
        for alpha in [0.55, 0.6, 0.65, 0.7, 0.74] {
            for g in [0.013, 0.016] {
                let p = MacroParams::default().with_m(m).with_alpha(alpha).with_g(g);
                if let Ok(points) = hopf_in_t(&p, &inv) {
                    out.extend(points.into_iter().map(|h| (p, h)));
                }
            }
        }
    }
    out.truncate(20);
    out
}

fn transversality() -> Check {
    let inv = InvestmentParams::default();
    let points = delay_hopf_points();
    if points.len() < 20 {
        return Err(format!("only {} Hopf points located", points.len()));
    }
    for (p, h) in &points {
        let fd = numeric_crossing_rate(p, &inv, h).map_err(|e| e.to_string())?;
        let lin = linearization(p, &inv).map_err(|e| e.to_string())?;
        let q = p.with_t(h.value);
        let closed = if p.m == 1 {
            let c = coeffs_m1(&lin, &q).map_err(|e| e.to_string())?;
            c.b_const * h.value * h.value + 1.0
        } else {
            -coeffs_m2(&lin, &q).map_err(|e| e.to_string())?.hurwitz_deriv()
        };
        if fd.signum() != closed.signum() || fd == 0.0 {
            return Err(format!("m={} T*={}: FD {fd:e} vs closed form {closed:e}", p.m, h.value));
        }
    }
    let m1 = points.iter().filter(|(p, _)| p.m == 1).count();
    Ok(format!("20 Hopf points in T ({m1} with m=1, {} with m=2): FD sign matches closed form", 20 - m1))
}

// 7 ---------------------------------------------------------------------------

fn cycle_hopf_points() -> Result<Vec<(MacroParams, HopfPoint)>, String> {
    let inv = InvestmentParams::default();
    let e = |e: chaintrick::Error| e.to_string();
    let mut out = Vec::new();
    for m in 1..=4 {
        let p = MacroParams::default().with_m(m);
        out.extend(hopf_in_g(&p, &inv).map_err(e)?.hopf_points.into_iter().map(|h| (p, h)));
    }
    for m in [1, 2] {
        for alpha in [0.55, 0.6, 0.65, 0.7] {
            let p = MacroParams::default().with_m(m).with_alpha(alpha);
            out.push((p, hopf_in_t(&p, &inv).map_err(e)?[0]));
        }
        for t in [0.5, 2.0] {
            let p = MacroParams::default().with_m(m).with_t(t);
            out.push((p, hopf_in_alpha(&p, &inv, (0.3, 1.5)).map_err(e)?[0]));
        }
    }
    Ok(out)
}

fn hopf_to_cycle() -> Check {
    let inv = InvestmentParams::default();
    let points = cycle_hopf_points()?;
    if points.len() != 20 {
        return Err(format!("{} Hopf points", points.len()));
    }
    let mut worst_freq: f64 = 0.0;
    for (p, h) in &points {
        for unstable in [true, false] {
            let q = h.parameter.set(p, h.offset(0.01, unstable));
            // Horizon from the growth/decay rate of the critical pair.
            let z = *spectrum(&q, &inv)
                .map_err(|e| e.to_string())?
                .iter()
                .filter(|z| z.im > 0.0)
                .min_by(|a, b| (a.im - h.omega).abs().total_cmp(&(b.im - h.omega).abs()))
                .ok_or("no complex pair")?;
            let period = std::f64::consts::TAU / z.im;
            let settle = if unstable { 30.0 } else { 8.0 };
            let horizon = (settle / z.re.abs()).max(14.0 * period);
            let eq = equilibrium(&q, &inv).map_err(|e| e.to_string())?;
            let s0 = ChainState::from_history(1.01 * eq.y_star, eq.k_star, q.m);
            let ctl = StepControl::default()
                .with_sample_interval(period / 100.0)
                .recording_from(0.5 * horizon);
            let traj = simulate(&q, &inv, &s0, horizon, &ctl).map_err(|e| e.to_string())?;
            let metrics = cycle_metrics(&traj, 0.0).map_err(|e| e.to_string())?;
            let label = format!("{} = {:.6} (m={}, {})", h.parameter.name(), h.value, p.m, if unstable { "past" } else { "before" });
            if unstable {
                if metrics.kind != CycleKind::LimitCycle {
                    return Err(format!("{label}: {:?}", metrics.kind));
                }
                let err = (metrics.angular_frequency().unwrap() / h.omega - 1.0).abs();
                if err >= 0.05 {
                    return Err(format!("{label}: 2π/period off ω* by {:.2}%", 100.0 * err));
                }
                worst_freq = worst_freq.max(err);
            } else if metrics.kind != CycleKind::Damped {
                return Err(format!("{label}: {:?}", metrics.kind));
            }
        }
    }
    let n_g = points.iter().filter(|(_, h)| h.parameter == Parameter::G).count();
    Ok(format!(
        "20 Hopf points ({n_g} in g, 8 in T, 4 in alpha): cycles 1% past, damped 1% before, max |2π/period/ω* − 1| = {:.2}% (tol 5%)",
        100.0 * worst_freq
    ))
}

// 8 ---------------------------------------------------------------------------

fn sweep_outputs(dir: &Path, threads: &str) -> Result<Vec<Vec<u8>>, String> {
    let jobs: [&[&str]; 4] = [
        &["sweep", "--curve", "T-vs-alpha", "--alpha-lo", "0.6", "--alpha-hi", "0.764", "--alpha-count", "24"],
        &["sweep", "--curve", "T-vs-g", "--alpha", "0.9", "--g-lo", "0.004", "--g-hi", "0.028", "--g-count", "25"],
        &[
            "sweep", "--curve", "surface", "--alpha-lo", "0.5", "--alpha-hi", "1.0", "--alpha-count", "16", "--g-lo",
            "0.01", "--g-hi", "0.02", "--g-count", "16", "--m", "2",
        ],
        &["table2", "--orders", "1,2,3"],
    ];
    let mut files = Vec::new();
    for (i, args) in jobs.iter().enumerate() {
        let csv = dir.join(format!("out{i}.csv"));
        let mut full: Vec<&str> = args.to_vec();
        let csv_s = csv.to_str().unwrap().to_string();
        full.extend(["--out", &csv_s]);
        let out = run(&full, Some(threads));
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        files.push(std::fs::read(&csv).map_err(|e| e.to_string())?);
        files.push(std::fs::read(csv.with_extension("json")).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, threads) in ["1", "4", "0", "4"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
        runs.push(sweep_outputs(&dir, threads)?);
    }
    let identical = runs.iter().all(|r| r == &runs[0]);
    let bytes: usize = runs[0].iter().map(Vec::len).sum();
    ensure(
        identical,
        format!("4 sweep CSVs + sidecars ({bytes} bytes) identical over CHAINTRICK_THREADS = 1, 4, 0, 4"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("growth-rate Hopf points, m = 1..4", growth_rate_hopf),
        ("stability regimes on a 500-point g grid", g_regimes),
        ("fitted T_bi(alpha) curve and alpha threshold", alpha_curve),
        ("cycle period and amplitude", cycles),
        ("closed-form vs numeric characteristic polynomial and verdicts", oracle_equivalence),
        ("transversality sign at Hopf points", transversality),
        ("Hopf-to-cycle consistency", hopf_to_cycle),
        ("bit-identical sweep output across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
