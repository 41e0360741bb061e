//! Experiment configuration, read from a flat TOML table.
//!
//! ```toml
//! k = 2
//! p = [2, 4]
//! n = 1024
//! snr_db = [0.0, 10.0, 20.0, 30.0, inf]
//! n_channels = 50
//! n_mc = 5
//! cfo_range_mode = "paper"
//! seed = 7
//! ```
//!
//! `p`, `n` and `snr_db` take a scalar or a list. Unknown keys are rejected.

use std::path::Path;

use itertools::iproduct;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pll::PllConfig;
use crate::signal::{CfoRange, Constellation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pulse {
    #[default]
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfoRangeMode {
    #[default]
    Paper,
    Full,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    k: Option<usize>,
    p: Option<OneOrMany<usize>>,
    ts: Option<f64>,
    n: Option<OneOrMany<usize>>,
    snr_db: Option<OneOrMany<f64>>,
    n_channels: Option<usize>,
    n_mc: Option<usize>,
    constellation: Option<Constellation>,
    pulse: Option<Pulse>,
    cfo_range_mode: Option<CfoRangeMode>,
    cfo_full_bound: Option<f64>,
    seed: Option<u64>,
    pll_kp: Option<f64>,
    pll_ki: Option<f64>,
    pll_acq_kp: Option<f64>,
    pll_acq_ki: Option<f64>,
    pll_acq_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub p: Vec<usize>,
    pub ts: f64,
    pub n: Vec<usize>,
    /// `f64::INFINITY` means noiseless.
    pub snr_db: Vec<f64>,
    pub n_channels: usize,
    pub n_mc: usize,
    pub constellation: Constellation,
    pub pulse: Pulse,
    pub cfo_range: CfoRange,
    pub seed: u64,
    pub pll: PllConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 2,
            p: vec![4],
            ts: 1.0,
            n: vec![1024],
            snr_db: vec![30.0],
            n_channels: 300,
            n_mc: 20,
            constellation: Constellation::Qam4,
            pulse: Pulse::Hamming,
            cfo_range: CfoRange::Paper,
            seed: 0,
            pll: PllConfig::default(),
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub snr_db: f64,
    pub ts: f64,
    pub range: CfoRange,
    pub constellation: Constellation,
    pub pll: PllConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let d = ExperimentConfig::default();
        let mode = raw.cfo_range_mode.unwrap_or_default();
        if raw.cfo_full_bound.is_some() && mode != CfoRangeMode::Full {
            return Err(Error::Config("cfo_full_bound requires cfo_range_mode = \"full\"".into()));
        }
        let cfo_range = match mode {
            CfoRangeMode::Paper => CfoRange::Paper,
            CfoRangeMode::Full => CfoRange::Full { bound: raw.cfo_full_bound.unwrap_or(0.5) },
        };
        let constellation = raw.constellation.unwrap_or(d.constellation);
        let pll = PllConfig {
            kp: raw.pll_kp.unwrap_or(d.pll.kp),
            ki: raw.pll_ki.unwrap_or(d.pll.ki),
            acq_kp: raw.pll_acq_kp.unwrap_or(d.pll.acq_kp),
            acq_ki: raw.pll_acq_ki.unwrap_or(d.pll.acq_ki),
            acq_len: raw.pll_acq_len.unwrap_or(d.pll.acq_len),
            constellation,
        };
        let cfg = ExperimentConfig {
            k: raw.k.unwrap_or(d.k),
            p: raw.p.map(Vec::from).unwrap_or(d.p),
            ts: raw.ts.unwrap_or(d.ts),
            n: raw.n.map(Vec::from).unwrap_or(d.n),
            snr_db: raw.snr_db.map(Vec::from).unwrap_or(d.snr_db),
            n_channels: raw.n_channels.unwrap_or(d.n_channels),
            n_mc: raw.n_mc.unwrap_or(d.n_mc),
            constellation,
            pulse: raw.pulse.unwrap_or_default(),
            cfo_range,
            seed: raw.seed.unwrap_or(d.seed),
            pll,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.p.is_empty() || self.n.is_empty() || self.snr_db.is_empty() {
            return Err(Error::EmptySweep);
        }
        if let Some(&p) = self.p.iter().find(|&&p| p < self.k) {
            return bad(format!("p = {p} is below k = {}", self.k));
        }
        if self.n.contains(&0) {
            return bad("n must be >= 1".into());
        }
        if let Some(s) = self.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return bad(format!("invalid snr_db {s}"));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return bad(format!("ts must be positive (got {})", self.ts));
        }
        if self.n_channels == 0 || self.n_mc == 0 {
            return bad("n_channels and n_mc must be >= 1".into());
        }
        if let CfoRange::Full { bound } = self.cfo_range {
            if !(bound > 0.0 && bound <= 0.5) {
                return bad(format!("cfo_full_bound must lie in (0, 0.5] (got {bound})"));
            }
        }
        self.pll.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Grid cells in `P`, then `N`, then SNR order.
    pub fn cells(&self) -> Vec<Cell> {
        iproduct!(&self.p, &self.n, &self.snr_db)
            .map(|(&p, &n, &snr_db)| Cell {
                k: self.k,
                p,
                n,
                snr_db,
                ts: self.ts,
                range: self.cfo_range,
                constellation: self.constellation,
                pll: self.pll,
            })
            .collect()
    }
}
