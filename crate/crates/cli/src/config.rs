//! Run configuration: a versioned JSON document, overridden by flags.

use std::path::Path;

use anyhow::{bail, Context};
use chaintrick::{InvestmentParams, MacroParams};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Vary {
    #[serde(rename = "T")]
    #[value(name = "T")]
    T,
    #[serde(rename = "g")]
    #[value(name = "g")]
    G,
    #[serde(rename = "alpha")]
    #[value(name = "alpha")]
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Curve {
    #[serde(rename = "T-vs-alpha")]
    #[value(name = "T-vs-alpha")]
    TVsAlpha,
    #[serde(rename = "T-vs-g")]
    #[value(name = "T-vs-g")]
    TVsG,
    #[serde(rename = "surface")]
    #[value(name = "surface")]
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfOptions {
    pub vary: Vary,
    /// Delay window and grid for numeric scans in `T` (m ≥ 3).
    pub t_range: Range,
    pub alpha_range: Range,
}

impl Default for HopfOptions {
    fn default() -> Self {
        Self {
            vary: Vary::T,
            t_range: Range {
                lo: 1e-3,
                hi: 100.0,
                count: 1200,
            },
            alpha_range: Range {
                lo: 0.1,
                hi: 2.0,
                count: 1024,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub horizon: f64,
    pub sample_interval: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Constant initial history `y(t) = y0`, `k(t) = k0`.
    pub y0: f64,
    pub k0: f64,
    pub transient_fraction: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            horizon: 3000.0,
            sample_interval: 0.25,
            rtol: 1e-9,
            atol: 1e-11,
            y0: 15.0,
            k0: 100.0,
            transient_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub curve: Curve,
    pub alpha_range: Range,
    pub g_range: Range,
    /// Worker threads, 0 = one per core. `CHAINTRICK_THREADS` overrides.
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            curve: Curve::TVsAlpha,
            alpha_range: Range {
                lo: 0.6,
                hi: 0.764,
                count: 40,
            },
            g_range: Range {
                lo: 0.01,
                hi: 0.02,
                count: 21,
            },
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table2Options {
    pub orders: Vec<usize>,
}

impl Default for Table2Options {
    fn default() -> Self {
        Self { orders: vec![1, 2, 3, 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub investment: InvestmentParams,
    #[serde(default, rename = "macro")]
    pub macro_params: MacroParams,
    #[serde(default)]
    pub hopf: HopfOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub table2: Table2Options,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            investment: InvestmentParams::default(),
            macro_params: MacroParams::default(),
            hopf: HopfOptions::default(),
            simulate: SimulateOptions::default(),
            sweep: SweepOptions::default(),
            table2: Table2Options::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.version != CONFIG_VERSION {
            bail!(
                "unsupported config version {} in {} (expected {CONFIG_VERSION})",
                cfg.version,
                path.display()
            );
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Worker count after the `CHAINTRICK_THREADS` override.
    pub fn workers(&self) -> anyhow::Result<usize> {
        match std::env::var("CHAINTRICK_THREADS") {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("CHAINTRICK_THREADS must be a non-negative integer, got {v:?}")),
            Err(_) => Ok(self.sweep.workers),
        }
    }
}
