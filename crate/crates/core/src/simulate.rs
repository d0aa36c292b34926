//! Trajectories of the chain system and cycle measurement.
//!
//! Integration uses the Dormand–Prince 5(4) pair with its fourth-order
//! continuous extension, so samples land exactly on the requested grid
//! regardless of the accepted step sizes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainState, ChainSystem};
use crate::error::{Error, Result};
use crate::model::{InvestmentParams, MacroParams};

/// Integration halts, marking the run diverged, once `|y|` exceeds this.
pub const DIVERGENCE_BOUND: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the recorded samples.
    pub sample_interval: f64,
    /// Samples before this time are not stored.
    pub record_from: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            sample_interval: 0.5,
            record_from: 0.0,
            max_steps: 50_000_000,
        }
    }
}

impl StepControl {
    pub fn with_sample_interval(self, dt: f64) -> Self {
        Self {
            sample_interval: dt,
            ..self
        }
    }

    pub fn with_tolerances(self, rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..self }
    }

    pub fn recording_from(self, t: f64) -> Self {
        Self { record_from: t, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: MacroParams,
    pub investment: InvestmentParams,
    pub times: Vec<f64>,
    /// Row-major samples `[y, u1, …, um, k]`.
    pub data: Vec<f64>,
    pub dim: usize,
    /// Set when `|y|` exceeded [`DIVERGENCE_BOUND`]; the series stops there.
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn state(&self, i: usize) -> ChainState {
        ChainState::from_slice(self.row(i))
    }

    pub fn y(&self) -> Vec<f64> {
        self.data.iter().step_by(self.dim).copied().collect()
    }

    pub fn k(&self) -> Vec<f64> {
        self.data.iter().skip(self.dim - 1).step_by(self.dim).copied().collect()
    }

    pub fn last(&self) -> Option<ChainState> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    /// CSV with header `t,y,u1..um,k` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = self.dim - 2;
        let mut header = String::from("t,y");
        for i in 1..=m {
            header.push_str(&format!(",u{i}"));
        }
        header.push_str(",k\n");
        w.write_all(header.as_bytes())?;
        for (i, t) in self.times.iter().enumerate() {
            let mut line = format!("{t:.16e}");
            for x in self.row(i) {
                line.push_str(&format!(",{x:.16e}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes
// c2..c7 never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y1: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

fn combine(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// One trial step from `(t, y)` with `k1 = f(y)` already in `st.k[0]`.
/// Returns the scaled error norm; `st.y1` and `st.k[6]` hold the proposal.
fn trial_step(sys: &ChainSystem, y: &[f64], h: f64, ctl: &StepControl, st: &mut Stages) -> Result<f64> {
    let Stages { k, tmp, y1, err } = st;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    combine(tmp, y, h, &[(A21, k1)]);
    sys.rhs_into(tmp, k2)?;
    combine(tmp, y, h, &[(A31, k1), (A32, k2)]);
    sys.rhs_into(tmp, k3)?;
    combine(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    sys.rhs_into(tmp, k4)?;
    combine(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    sys.rhs_into(tmp, k5)?;
    combine(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
    sys.rhs_into(tmp, k6)?;
    combine(y1, y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
    sys.rhs_into(y1, k7)?;
    let mut sum = 0.0;
    for i in 0..y.len() {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = ctl.atol + ctl.rtol * y[i].abs().max(y1[i].abs());
        sum += (err[i] / sc).powi(2);
    }
    Ok((sum / y.len() as f64).sqrt())
}

fn initial_step(sys: &ChainSystem, y: &[f64], f0: &[f64], ctl: &StepControl) -> Result<f64> {
    let n = y.len() as f64;
    let norm = |v: &[f64]| {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(a, b)| (a / (ctl.atol + ctl.rtol * b.abs())).powi(2))
            .sum();
        (s / n).sqrt()
    };
    let (d0, d1) = (norm(y), norm(f0));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    sys.rhs_into(&y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

/// Integrates `sys` from `s0` over `[0, horizon]`, sampling every
/// `ctl.sample_interval`.
pub fn integrate(sys: &ChainSystem, s0: &ChainState, horizon: f64, ctl: &StepControl) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            reason: "must be positive and finite",
        });
    }
    if !(ctl.sample_interval > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sample_interval",
            value: ctl.sample_interval,
            reason: "must be positive",
        });
    }
    if !(ctl.rtol > 0.0 && ctl.atol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tolerance",
            value: ctl.rtol.min(ctl.atol),
            reason: "must be positive",
        });
    }
    if s0.order() != sys.order() {
        return Err(Error::StateShape {
            expected: sys.order(),
            found: s0.order(),
        });
    }
    if !(s0.k > 0.0) {
        return Err(Error::CapitalNonPositive {
            k: s0.k,
            time: Some(0.0),
        });
    }

    let n = sys.dimension();
    let mut y = s0.to_vec();
    let mut st = Stages::new(n);
    sys.rhs_into(&y, &mut st.k[0])?;

    let samples = (horizon / ctl.sample_interval + 1e-9).floor() as usize + 1;
    let first = (ctl.record_from.max(0.0) / ctl.sample_interval).ceil() as usize;
    let mut traj = Trajectory {
        params: *sys.params(),
        investment: *sys.investment(),
        times: Vec::with_capacity(samples.saturating_sub(first)),
        data: Vec::with_capacity(samples.saturating_sub(first) * n),
        dim: n,
        diverged: false,
    };
    let mut next_sample = first;
    let sample_time = |j: usize| (j as f64 * ctl.sample_interval).min(horizon);
    if next_sample == 0 {
        traj.times.push(0.0);
        traj.data.extend_from_slice(&y);
        next_sample = 1;
    }

    let mut t = 0.0;
    let mut h = initial_step(sys, &y, &st.k[0], ctl)?.min(horizon);
    let mut rejected_last = false;
    let mut dense = vec![vec![0.0; n]; 5];
    for _ in 0..ctl.max_steps {
        if t >= horizon {
            return Ok(traj);
        }
        h = h.min(horizon - t);
        let hmin = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < hmin {
            return Err(Error::StepFailure { time: t, step: h });
        }
        let err = match trial_step(sys, &y, h, ctl, &mut st) {
            Ok(e) if e.is_finite() => e,
            // A stage left the positive-capital region or overflowed: the
            // step was too long, unless it is already minimal.
            Ok(_) | Err(Error::CapitalNonPositive { .. }) if h > 4.0 * hmin => {
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            Ok(_) => return Err(Error::StepFailure { time: t, step: h }),
            Err(Error::CapitalNonPositive { k, .. }) => {
                return Err(Error::CapitalNonPositive { k, time: Some(t) })
            }
            Err(e) => return Err(e),
        };
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            rejected_last = true;
            continue;
        }

        // Accepted: build the continuous extension on [t, t + h].
        let k = &st.k;
        for i in 0..n {
            let ydiff = st.y1[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            dense[0][i] = y[i];
            dense[1][i] = ydiff;
            dense[2][i] = bspl;
            dense[3][i] = ydiff - h * k[6][i] - bspl;
            dense[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
        let t_new = if horizon - (t + h) <= 1e-12 * horizon { horizon } else { t + h };
        while next_sample < samples && sample_time(next_sample) <= t_new {
            let ts = sample_time(next_sample);
            let theta = ((ts - t) / h).clamp(0.0, 1.0);
            let theta1 = 1.0 - theta;
            traj.data.extend((0..n).map(|i| {
                dense[0][i] + theta * (dense[1][i] + theta1 * (dense[2][i] + theta * (dense[3][i] + theta1 * dense[4][i])))
            }));
            traj.times.push(ts);
            next_sample += 1;
        }

        t = t_new;
        y.copy_from_slice(&st.y1);
        let (k0, rest) = st.k.split_at_mut(1);
        k0[0].copy_from_slice(&rest[5]);
        if y[0].abs() > DIVERGENCE_BOUND || !y[0].is_finite() {
            traj.diverged = true;
            return Ok(traj);
        }
        if !(y[n - 1] > 0.0) {
            return Err(Error::CapitalNonPositive {
                k: y[n - 1],
                time: Some(t),
            });
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if rejected_last { fac.min(1.0) } else { fac };
        rejected_last = false;
    }
    Err(Error::StepFailure { time: t, step: h })
}

/// Builds the system from parameters and integrates it.
pub fn simulate(
    p: &MacroParams,
    inv: &InvestmentParams,
    s0: &ChainState,
    horizon: f64,
    ctl: &StepControl,
) -> Result<Trajectory> {
    integrate(&ChainSystem::build(p, inv)?, s0, horizon, ctl)
}

// ---------------------------------------------------------------------------
// Cycle measurement

pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.5;
/// Number of successive maxima used for period and amplitude.
pub const PEAKS_USED: usize = 6;
/// Relative spread of the peak-to-trough heights below which the
/// oscillation counts as a limit cycle.
pub const LIMIT_CYCLE_SPREAD: f64 = 1e-3;
/// Oscillations smaller than this (relative to `max(1, |ȳ|)`) are treated
/// as converged to the equilibrium.
pub const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleKind {
    LimitCycle,
    Damped,
    Diverged,
    /// Oscillation neither settled nor monotonically decaying within the
    /// analysed window (typically still growing towards a cycle).
    Unsettled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub kind: CycleKind,
    /// Mean spacing of the last six maxima.
    pub period: Option<f64>,
    /// Peak-to-trough excursion of `y` over the final period.
    pub amplitude: Option<f64>,
    /// Exponential rate of the peak-to-trough envelope (`< 0` when decaying).
    pub decay_rate: Option<f64>,
    /// Number of maxima found after the transient.
    pub maxima: usize,
}

impl CycleMetrics {
    pub fn semi_amplitude(&self) -> Option<f64> {
        self.amplitude.map(|a| 0.5 * a)
    }

    pub fn angular_frequency(&self) -> Option<f64> {
        self.period.map(|p| std::f64::consts::TAU / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub t: f64,
    pub y: f64,
}

fn parabola_vertex(t: f64, dt: f64, ym: f64, y0: f64, yp: f64) -> Extremum {
    let denom = ym - 2.0 * y0 + yp;
    if denom == 0.0 {
        return Extremum { t, y: y0 };
    }
    let delta = (0.5 * (ym - yp) / denom).clamp(-1.0, 1.0);
    Extremum {
        t: t + delta * dt,
        y: y0 - 0.25 * (ym - yp) * delta,
    }
}

/// Local maxima (or minima with `maxima = false`) refined by quadratic
/// interpolation through the neighbouring samples.
pub fn extrema(times: &[f64], y: &[f64], maxima: bool) -> Vec<Extremum> {
    let s = if maxima { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        let (a, b, c) = (s * y[i - 1], s * y[i], s * y[i + 1]);
        if a < b && b >= c {
            let dt = 0.5 * (times[i + 1] - times[i - 1]);
            let e = parabola_vertex(times[i], dt, y[i - 1], y[i], y[i + 1]);
            out.push(e);
        }
    }
    out
}

fn analysed_window(traj: &Trajectory, transient_fraction: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&transient_fraction) {
        return Err(Error::InvalidParameter {
            name: "transient_fraction",
            value: transient_fraction,
            reason: "must lie in [0, 1)",
        });
    }
    let (t0, t1) = match (traj.times.first(), traj.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::InsufficientOscillations { found: 0 }),
    };
    let cut = t0 + transient_fraction * (t1 - t0);
    let start = traj.times.partition_point(|t| *t < cut);
    let y = traj.y();
    Ok((traj.times[start..].to_vec(), y[start..].to_vec()))
}

fn log_linear_slope(t: &[f64], v: &[f64]) -> f64 {
    let n = t.len() as f64;
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let tm = t.iter().sum::<f64>() / n;
    let lm = lv.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(&lv).map(|(a, b)| (a - tm) * (b - lm)).sum();
    let den: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    num / den
}

/// Classifies the oscillation of `y` after discarding the first
/// `transient_fraction` of the run.
pub fn cycle_metrics(traj: &Trajectory, transient_fraction: f64) -> Result<CycleMetrics> {
    if traj.diverged {
        return Ok(CycleMetrics {
            kind: CycleKind::Diverged,
            period: None,
            amplitude: None,
            decay_rate: None,
            maxima: 0,
        });
    }
    let (t, y) = analysed_window(traj, transient_fraction)?;
    if y.len() < 3 {
        return Err(Error::InsufficientOscillations { found: 0 });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi - lo <= NOISE_FLOOR * mean.abs().max(1.0) {
        return Ok(CycleMetrics {
            kind: CycleKind::Damped,
            period: None,
            amplitude: None,
            decay_rate: None,
            maxima: 0,
        });
    }

    let maxima = extrema(&t, &y, true);
    let minima = extrema(&t, &y, false);
    if maxima.len() < PEAKS_USED {
        return Err(Error::InsufficientOscillations { found: maxima.len() });
    }
    let last = &maxima[maxima.len() - PEAKS_USED..];
    let period = (last[PEAKS_USED - 1].t - last[0].t) / (PEAKS_USED - 1) as f64;

    // Peak-to-trough height of each cycle: a maximum and the deepest minimum
    // before the next one.
    let mut heights = Vec::with_capacity(PEAKS_USED - 1);
    let mut at = Vec::with_capacity(PEAKS_USED - 1);
    for w in last.windows(2) {
        let trough = minima
            .iter()
            .filter(|m| m.t > w[0].t && m.t < w[1].t)
            .map(|m| m.y)
            .fold(f64::INFINITY, f64::min);
        if !trough.is_finite() {
            return Err(Error::InsufficientOscillations { found: maxima.len() });
        }
        heights.push(w[0].y - trough);
        at.push(w[0].t);
    }
    let (hmin, hmax) = heights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let hmean = heights.iter().sum::<f64>() / heights.len() as f64;
    let rate = if hmin > 0.0 { log_linear_slope(&at, &heights) } else { f64::NAN };

    let settled = (hmax - hmin) / hmean < LIMIT_CYCLE_SPREAD;
    let decaying = heights.windows(2).all(|w| w[1] < w[0]);
    if settled {
        let final_cycle_start = last[PEAKS_USED - 1].t - period;
        let start = t.partition_point(|x| *x < final_cycle_start);
        let trough = minima
            .iter()
            .filter(|m| m.t >= final_cycle_start)
            .map(|m| m.y)
            .chain(y[start..].iter().copied())
            .fold(f64::INFINITY, f64::min);
        let peak = last[PEAKS_USED - 1].y.max(y[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        return Ok(CycleMetrics {
            kind: CycleKind::LimitCycle,
            period: Some(period),
            amplitude: Some(peak - trough),
            decay_rate: None,
            maxima: maxima.len(),
        });
    }
    Ok(CycleMetrics {
        kind: if decaying { CycleKind::Damped } else { CycleKind::Unsettled },
        period: None,
        amplitude: None,
        decay_rate: rate.is_finite().then_some(rate),
        maxima: maxima.len(),
    })
}

/// Period from upward crossings of `y − ȳ` over the analysed window, with
/// linear interpolation between samples.
pub fn zero_crossing_period(traj: &Trajectory, transient_fraction: f64) -> Result<f64> {
    let (t, y) = analysed_window(traj, transient_fraction)?;
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let crossings: Vec<f64> = (1..y.len())
        .filter(|&i| y[i - 1] < mean && y[i] >= mean)
        .map(|i| {
            let (a, b) = (y[i - 1] - mean, y[i] - mean);
            t[i - 1] + (t[i] - t[i - 1]) * a / (a - b)
        })
        .collect();
    if crossings.len() < PEAKS_USED {
        return Err(Error::InsufficientOscillations { found: crossings.len() });
    }
    let last = &crossings[crossings.len() - PEAKS_USED..];
    Ok((last[PEAKS_USED - 1] - last[0]) / (PEAKS_USED - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equilibrium;
    use approx::assert_relative_eq;

    fn inv() -> InvestmentParams {
        InvestmentParams::default()
    }

    fn baseline_run(m: usize) -> Trajectory {
        let p = MacroParams::default().with_alpha(0.9).with_t(3.0).with_m(m);
        let s0 = ChainState::from_history(15.0, 100.0, m);
        simulate(&p, &inv(), &s0, 3000.0, &StepControl::default().with_sample_interval(0.25)).unwrap()
    }

    #[test]
    fn dense_output_reproduces_exponential() {
        // y' = α(I − γy + G0) − g y is linear in y for a = 0 (I ≡ (c + d/2)k).
        let inv = InvestmentParams::new(1e-12, 0.01, 0.026, 4.23).unwrap();
        let p = MacroParams::default().with_g(0.01);
        let sys = ChainSystem::build(&p, &inv).unwrap();
        let s0 = ChainState::from_history(10.0, 100.0, 1);
        let traj = integrate(&sys, &s0, 50.0, &StepControl::default().with_sample_interval(0.1)).unwrap();
        // k' = (c + d/2 − g − δ) k exactly in this limit.
        let rate = 0.01 + 0.013 - 0.01 - 0.007;
        for (i, t) in traj.times.iter().enumerate() {
            assert_relative_eq!(traj.k()[i], 100.0 * (rate * t).exp(), max_relative = 1e-9);
        }
        assert_eq!(traj.times.len(), 501);
        assert_eq!(*traj.times.last().unwrap(), 50.0);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = MacroParams::default().with_alpha(0.6).with_m(2);
        let eq = equilibrium(&p, &inv()).unwrap();
        let s0 = ChainState::at_equilibrium(&eq, 2);
        let traj = simulate(&p, &inv(), &s0, 1000.0, &StepControl::default().with_sample_interval(10.0)).unwrap();
        let v0 = s0.to_vec();
        for i in 0..traj.len() {
            for (a, b) in traj.row(i).iter().zip(&v0) {
                assert!((a - b).abs() <= 1e-8 * b.abs(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn tolerance_refinement_converges() {
        let p = MacroParams::default().with_alpha(0.6).with_t(1.0);
        let s0 = ChainState::from_history(25.0, 110.0, 1);
        let coarse = simulate(&p, &inv(), &s0, 400.0, &StepControl::default()).unwrap();
        let fine = simulate(
            &p,
            &inv(),
            &s0,
            400.0,
            &StepControl::default().with_tolerances(0.5e-9, 0.5e-11),
        )
        .unwrap();
        let (a, b) = (coarse.last().unwrap().y, fine.last().unwrap().y);
        assert!((a - b).abs() < 1e-6 * b.abs(), "{a} vs {b}");
    }

    #[test]
    fn weak_kernel_cycle_period() {
        let m = cycle_metrics(&baseline_run(1), DEFAULT_TRANSIENT_FRACTION).unwrap();
        assert_eq!(m.kind, CycleKind::LimitCycle);
        let period = m.period.unwrap();
        assert!((period - 114.85).abs() < 0.02 * 114.85, "{period}");
        let amp = m.amplitude.unwrap();
        assert!((amp - 12.9555).abs() < 0.03 * 12.9555, "{amp}");
    }

    #[test]
    fn strong_kernel_cycle_period() {
        let m = cycle_metrics(&baseline_run(2), DEFAULT_TRANSIENT_FRACTION).unwrap();
        assert_eq!(m.kind, CycleKind::LimitCycle);
        let period = m.period.unwrap();
        assert!((period - 116.45).abs() < 0.02 * 116.45, "{period}");
        let amp = m.amplitude.unwrap();
        assert!((amp - 12.966).abs() < 0.03 * 12.966, "{amp}");
    }

    #[test]
    fn zero_crossings_agree_with_maxima() {
        let traj = baseline_run(1);
        let a = cycle_metrics(&traj, 0.5).unwrap().period.unwrap();
        let b = zero_crossing_period(&traj, 0.5).unwrap();
        assert!((a - b).abs() < 0.005 * a, "{a} vs {b}");
    }

    #[test]
    fn stable_focus_is_damped() {
        let p = MacroParams::default().with_alpha(0.6).with_t(1.0);
        let eq = equilibrium(&p, &inv()).unwrap();
        let s0 = ChainState::from_history(eq.y_star * 1.2, eq.k_star, 1);
        let traj = simulate(&p, &inv(), &s0, 1500.0, &StepControl::default()).unwrap();
        let m = cycle_metrics(&traj, 0.5).unwrap();
        assert_eq!(m.kind, CycleKind::Damped, "{m:?}");
        assert!(m.decay_rate.unwrap() < 0.0);
        assert!(m.period.is_none() && m.amplitude.is_none());
    }

    #[test]
    fn too_short_runs_are_reported() {
        let p = MacroParams::default().with_alpha(0.9).with_t(3.0);
        let s0 = ChainState::from_history(15.0, 100.0, 1);
        let traj = simulate(&p, &inv(), &s0, 300.0, &StepControl::default()).unwrap();
        assert!(matches!(
            cycle_metrics(&traj, 0.5),
            Err(Error::InsufficientOscillations { .. })
        ));
    }

    #[test]
    fn csv_header_and_precision() {
        let p = MacroParams::default().with_m(2);
        let s0 = ChainState::from_history(15.0, 100.0, 2);
        let traj = simulate(&p, &inv(), &s0, 1.0, &StepControl::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y,u1,u2,k");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 15.0, 15.0, 15.0, 100.0]);
        let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last[1..], traj.row(traj.len() - 1)[..]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = MacroParams::default();
        let sys = ChainSystem::build(&p, &inv()).unwrap();
        let s = ChainState::from_history(15.0, 100.0, 1);
        assert!(integrate(&sys, &s, 0.0, &StepControl::default()).is_err());
        let bad = ChainState::from_history(15.0, -1.0, 1);
        assert!(matches!(
            integrate(&sys, &bad, 10.0, &StepControl::default()),
            Err(Error::CapitalNonPositive { time: Some(_), .. })
        ));
        let wrong = ChainState::from_history(15.0, 100.0, 3);
        assert!(matches!(
            integrate(&sys, &wrong, 10.0, &StepControl::default()),
            Err(Error::StateShape { .. })
        ));
    }
}
