//! Decision-directed second-order PLL for the residual carrier rotation.
//!
//! Per symbol the loop derotates the input by its current phase, slices to
//! the nearest constellation point, and feeds the normalized phase error
//! `Im{z d*} / |d|^2` through a proportional-plus-integrator filter:
//!
//! ```text
//! v     <- v + ki e
//! phase <- phase + kp e + v
//! ```
//!
//! The integrator `v` converges to the residual rotation rate in
//! rad/symbol. For the first `acq_len` symbols the gains taper linearly from
//! the wide acquisition pair `(acq_kp, acq_ki)` down to the tracking pair
//! `(kp, ki)`; a narrow loop alone cannot pull in rotations near the 4QAM
//! limit of `pi/4` rad/symbol.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Constellation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PllConfig {
    pub kp: f64,
    pub ki: f64,
    pub acq_kp: f64,
    pub acq_ki: f64,
    /// Length of the acquisition taper in symbols; 0 disables it.
    pub acq_len: usize,
    pub constellation: Constellation,
}

impl Default for PllConfig {
    fn default() -> Self {
        PllConfig {
            kp: 0.05,
            ki: 0.005,
            acq_kp: 0.8,
            acq_ki: 0.2,
            acq_len: 200,
            constellation: Constellation::Qam4,
        }
    }
}

impl PllConfig {
    /// Tracking gains only.
    pub fn tracking(kp: f64, ki: f64) -> Self {
        PllConfig { kp, ki, acq_len: 0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |kp: f64, ki: f64, which: &str| {
            if kp > 0.0 && ki >= 0.0 && ki < kp {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "{which} gains need kp > 0, 0 <= ki < kp (got kp = {kp}, ki = {ki})"
                )))
            }
        };
        check(self.kp, self.ki, "tracking")?;
        if self.acq_len > 0 {
            check(self.acq_kp, self.acq_ki, "acquisition")?;
        }
        Ok(())
    }

    /// Loop gains `(kp, ki)` in effect at symbol `i`.
    pub fn gains_at(&self, i: usize) -> (f64, f64) {
        if i >= self.acq_len {
            return (self.kp, self.ki);
        }
        let w = 1.0 - i as f64 / self.acq_len as f64;
        (
            self.kp + (self.acq_kp - self.kp) * w,
            self.ki + (self.acq_ki - self.ki) * w,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PllTrace {
    /// `input(i) e^{-j phase(i)}`.
    pub corrected: Vec<Complex64>,
    /// Phase applied at each symbol.
    pub phase: Vec<f64>,
    /// Phase-detector output at each symbol.
    pub error: Vec<f64>,
    /// Final integrator value, rad/symbol.
    pub freq: f64,
}

/// Nearest constellation point; ties go to the point with the smallest angle in `[0, 2pi)`.
pub fn slice(z: Complex64, constellation: Constellation) -> Complex64 {
    let mut best = constellation.points()[0];
    let mut best_d = (z - best).norm_sqr();
    for &pt in &constellation.points()[1..] {
        let d = (z - pt).norm_sqr();
        if d < best_d {
            best = pt;
            best_d = d;
        }
    }
    best
}

pub fn pll_track(stream: &[Complex64], cfg: &PllConfig) -> PllTrace {
    let n = stream.len();
    let mut trace = PllTrace {
        corrected: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        error: Vec::with_capacity(n),
        freq: 0.0,
    };
    let mut phase = 0.0;
    let mut v = 0.0;
    for (i, &x) in stream.iter().enumerate() {
        let z = x * Complex64::cis(-phase);
        let d = slice(z, cfg.constellation);
        let e = (z * d.conj()).im / d.norm_sqr();
        trace.corrected.push(z);
        trace.phase.push(phase);
        trace.error.push(e);
        let (kp, ki) = cfg.gains_at(i);
        v += ki * e;
        phase += kp * e + v;
    }
    trace.freq = v;
    trace
}
