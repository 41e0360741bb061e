//! One Monte-Carlo trial: draw, synthesize, receive blindly, score.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bss::{estimate_mixing, SeparationResult};
use crate::cfo::{compensate, fold_frequency, ls_cfo_fit, phase_matrix, CfoEstimate};
use crate::error::{Error, Result};
use crate::harness::config::Cell;
use crate::harness::metrics::{align_with, ber, bit_error_counts, match_rows, mse_cfo};
use crate::pll::{pll_track, slice, PllConfig};
use crate::signal::{
    build_virtual_channel, generate_symbols, noise_variance_for_snr, rotate_symbols, synthesize_received,
    SampleFrame, ScenarioDraw, SystemParams,
};
use crate::CMatrix;

/// Residual `|P (f_hat - f)|` at which the loop is taken to have locked onto a wrong rate.
pub const LOCK_FAILURE_RESIDUAL: f64 = 0.125;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: one independent stream per `(master, path...)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

/// Seed of channel `channel_id`. Shared by every cell, so cells see common channels.
pub fn channel_seed(master: u64, channel_id: u64) -> u64 {
    derive_seed(master, &[0, channel_id])
}

/// Seed of symbols and noise for Monte-Carlo run `mc_id` on channel `channel_id`.
pub fn noise_seed(master: u64, channel_id: u64, mc_id: u64) -> u64 {
    derive_seed(master, &[1, channel_id, mc_id])
}

impl Cell {
    /// Scenario for `channel_seed` with the noise variance set from the cell SNR.
    pub fn scenario(&self, channel_seed: u64) -> Result<SystemParams> {
        let draw = ScenarioDraw { k: self.k, p: self.p, ts: self.ts, n: self.n, range: self.range };
        let mut params = draw.draw(channel_seed)?;
        params.sigma2_w = noise_variance_for_snr(&build_virtual_channel(&params)?, self.snr_db);
        Ok(params)
    }
}

/// Everything the blind receiver produces. It sees only `y`, `K`, `P` and the loop settings.
#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    pub separation: SeparationResult,
    pub coarse: CfoEstimate,
    /// Coarse estimate refined by the loop integrator, `f_hat + v / (2 pi P)`.
    pub f_hat_pll: Vec<f64>,
    /// Unit-RMS streams after the loop.
    pub corrected: CMatrix,
    pub decisions: CMatrix,
    /// Final loop integrator per stream, rad/symbol.
    pub pll_freq: Vec<f64>,
}

pub fn blind_receive(y: &SampleFrame, k: usize, p: usize, pll: &PllConfig) -> Result<ReceiverOutput> {
    let separation = estimate_mixing(y, k)?;
    let coarse = ls_cfo_fit(&phase_matrix(&separation.a_hat, true)?)?;
    let streams = compensate(&separation.s_tilde_hat, &coarse, p)?;
    let n = streams.ncols();
    let mut corrected = CMatrix::zeros(k, n);
    let mut decisions = CMatrix::zeros(k, n);
    let mut pll_freq = Vec::with_capacity(k);
    for r in 0..k {
        let row: Vec<Complex64> = streams.row(r).iter().copied().collect();
        let rms = (row.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt();
        let row: Vec<Complex64> = if rms > 0.0 { row.iter().map(|z| z / rms).collect() } else { row };
        let trace = pll_track(&row, pll);
        for (i, z) in trace.corrected.iter().enumerate() {
            corrected[(r, i)] = *z;
            decisions[(r, i)] = slice(*z, pll.constellation);
        }
        pll_freq.push(trace.freq);
    }
    let f_hat_pll = coarse
        .f_hat
        .iter()
        .zip(&pll_freq)
        .map(|(f, v)| fold_frequency(f + v / (2.0 * PI * p as f64)))
        .collect();
    Ok(ReceiverOutput { separation, coarse, f_hat_pll, corrected, decisions, pll_freq })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialFlags {
    pub separation_failed: bool,
    pub lock_failure: bool,
    pub low_kurtosis: bool,
}

impl TrialFlags {
    /// Flagged trials are kept in BER averages but left out of MSE averages.
    pub fn excluded_from_mse(&self) -> bool {
        self.separation_failed || self.lock_failure
    }

    /// `;`-joined flag names, empty when none is set.
    pub fn label(&self) -> String {
        let names = [
            (self.separation_failed, "separation_failed"),
            (self.lock_failure, "lock_failure"),
            (self.low_kurtosis, "low_kurtosis"),
        ];
        names.iter().filter(|(on, _)| *on).map(|(_, n)| *n).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub f_true: Vec<f64>,
    /// Coarse estimates, aligned to the true user order.
    pub f_hat: Vec<f64>,
    /// Loop-refined estimates, aligned to the true user order.
    pub f_hat_pll: Vec<f64>,
    pub mse_cfo: f64,
    pub mse_cfo_pll: f64,
    pub ber: f64,
    pub ber_per_user: Vec<f64>,
    /// Users whose loop settled on a wrong rotation rate.
    pub lock_failures: usize,
    pub flags: TrialFlags,
}

impl TrialResult {
    fn separation_failed(f_true: Vec<f64>) -> Self {
        let k = f_true.len();
        TrialResult {
            f_true,
            f_hat: vec![f64::NAN; k],
            f_hat_pll: vec![f64::NAN; k],
            mse_cfo: f64::NAN,
            mse_cfo_pll: f64::NAN,
            ber: 0.5,
            ber_per_user: vec![0.5; k],
            lock_failures: 0,
            flags: TrialFlags { separation_failed: true, ..Default::default() },
        }
    }

    /// Squared scaled error `[fold(f_hat_k - f_k) P]^2` of user `k`.
    pub fn user_error(&self, k: usize, p: usize) -> f64 {
        (fold_frequency(self.f_hat[k] - self.f_true[k]) * p as f64).powi(2)
    }
}

pub fn run_trial(cell: &Cell, channel_seed: u64, noise_seed: u64) -> Result<TrialResult> {
    let params = cell.scenario(channel_seed)?;
    run_trial_on(&params, cell, noise_seed)
}

/// Trial on a fixed scenario; `params.n` is taken from the cell.
pub fn run_trial_on(params: &SystemParams, cell: &Cell, noise_seed: u64) -> Result<TrialResult> {
    let params = SystemParams { n: cell.n, ..params.clone() };
    let symbols = generate_symbols(params.k, params.n, cell.constellation, derive_seed(noise_seed, &[0]))?;
    let y = synthesize_received(&params, &symbols, derive_seed(noise_seed, &[1]))?;

    let rx = match blind_receive(&y, params.k, params.p, &cell.pll) {
        Ok(rx) => rx,
        Err(e @ (Error::InsufficientSamples { .. } | Error::InvalidParams(_))) => return Err(e),
        Err(_) => return Ok(TrialResult::separation_failed(params.f.clone())),
    };

    // Scoring only from here on.
    let s_tilde = rotate_symbols(&params, &symbols)?;
    let perm = match_rows(&rx.separation.s_tilde_hat, &s_tilde)?;
    let aligned = align_with(&rx.decisions, &symbols.s, &perm, cell.constellation.symmetry())?;
    let decisions = aligned.aligned.map(|z| slice(z, cell.constellation));
    let errors = bit_error_counts(&decisions, &symbols.s)?;
    let bits_per_user = (cell.constellation.bits_per_symbol() * params.n) as f64;

    let f_hat: Vec<f64> = perm.iter().map(|&r| rx.coarse.f_hat[r]).collect();
    let f_hat_pll: Vec<f64> = perm.iter().map(|&r| rx.f_hat_pll[r]).collect();
    let lock_failures = f_hat_pll
        .iter()
        .zip(&params.f)
        .filter(|(e, t)| (fold_frequency(*e - *t) * params.p as f64).abs() >= LOCK_FAILURE_RESIDUAL)
        .count();
    Ok(TrialResult {
        mse_cfo: mse_cfo(&f_hat, &params.f, params.p)?,
        mse_cfo_pll: mse_cfo(&f_hat_pll, &params.f, params.p)?,
        ber: ber(&decisions, &symbols.s)?,
        ber_per_user: errors.iter().map(|&e| e as f64 / bits_per_user).collect(),
        lock_failures,
        flags: TrialFlags {
            separation_failed: false,
            lock_failure: lock_failures > 0,
            low_kurtosis: rx.separation.low_kurtosis,
        },
        f_true: params.f.clone(),
        f_hat,
        f_hat_pll,
    })
}
