//! CFO read-out from the phase ramp of the estimated channel columns.
//!
//! Column `k` of `A_hat` has phase `2 pi f_k m + phi_k` over rows `m = 1..=P`
//! (the pulse is non-negative and the unknown scalar only shifts `phi_k`), so
//! an unweighted least-squares line fit over `m` recovers `f_k` modulo 1.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{mismatch, Error, Result};
use crate::signal::cis_cycles;
use crate::CMatrix;

/// Unwrapped column phases of `A_hat`, `P x K`, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    pub psi: DMatrix<f64>,
    /// `|a_hat_{m,k}|`, kept for diagnosing low-amplitude rows.
    pub magnitude: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfoEstimate {
    /// Cycles per oversampled sample, folded into `[-0.5, 0.5)`, in `A_hat` column order.
    pub f_hat: Vec<f64>,
    /// Fitted phase intercepts, wrapped into `(-pi, pi]`.
    pub intercepts: Vec<f64>,
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor();
    // y in [-pi, pi); move the lower endpoint to +pi.
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Folds a normalized frequency into `[-0.5, 0.5)`.
pub fn fold_frequency(f: f64) -> f64 {
    (f + 0.5).rem_euclid(1.0) - 0.5
}

/// Elementwise phase of `A_hat` with per-column unwrapping down the rows.
///
/// With `pulse_nonneg` the row-to-row increments are mapped into `(-pi, pi]`.
/// Without it the pulse may flip sign between rows, so increments are
/// taken modulo `pi` (into `(-pi/2, pi/2]`), which halves the usable range.
pub fn phase_matrix(a_hat: &CMatrix, pulse_nonneg: bool) -> Result<PhaseMatrix> {
    let (p, k) = a_hat.shape();
    if let Some(idx) = a_hat.iter().position(|z| z.norm() == 0.0 || !z.norm().is_finite()) {
        return Err(Error::PhaseUndefined { row: idx % p, col: idx / p });
    }
    let period = if pulse_nonneg { 2.0 * PI } else { PI };
    let wrap = |d: f64| {
        let y = d - period * ((d + period / 2.0) / period).floor();
        if y <= -period / 2.0 {
            y + period
        } else {
            y
        }
    };
    let mut psi = DMatrix::zeros(p, k);
    for col in 0..k {
        let mut prev = a_hat[(0, col)].arg();
        psi[(0, col)] = prev;
        for row in 1..p {
            let raw = a_hat[(row, col)].arg();
            psi[(row, col)] = psi[(row - 1, col)] + wrap(raw - prev);
            prev = raw;
        }
    }
    Ok(PhaseMatrix { psi, magnitude: a_hat.map(|z| z.norm()) })
}

/// Least-squares slope of the unwrapped phases against `p = 1..=P`.
pub fn ls_cfo_fit(phases: &PhaseMatrix) -> Result<CfoEstimate> {
    let (rows, k) = phases.psi.shape();
    if rows < 2 {
        return Err(Error::SlopeUnidentifiable(rows));
    }
    let pf = rows as f64;
    let sum_p = pf * (pf + 1.0) / 2.0;
    let sum_p2 = pf * (pf + 1.0) * (2.0 * pf + 1.0) / 6.0;
    let denom = pf * sum_p2 - sum_p * sum_p;
    let mut f_hat = Vec::with_capacity(k);
    let mut intercepts = Vec::with_capacity(k);
    for col in phases.psi.column_iter() {
        let sum_psi: f64 = col.iter().sum();
        let sum_p_psi: f64 = col.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
        let slope = (pf * sum_p_psi - sum_p * sum_psi) / denom;
        let intercept = (sum_psi - slope * sum_p) / pf;
        f_hat.push(fold_frequency(slope / (2.0 * PI)));
        intercepts.push(wrap_phase(intercept));
    }
    Ok(CfoEstimate { f_hat, intercepts })
}

/// Derotates stream `k` by `e^{-j 2 pi f_hat_k i P}`.
pub fn compensate(streams: &CMatrix, estimate: &CfoEstimate, p: usize) -> Result<CMatrix> {
    if streams.nrows() != estimate.f_hat.len() {
        return Err(mismatch("CFO compensation", estimate.f_hat.len(), streams.nrows()));
    }
    let pf = p as f64;
    Ok(CMatrix::from_fn(streams.nrows(), streams.ncols(), |k, i| {
        streams[(k, i)] * cis_cycles(-estimate.f_hat[k] * (i as f64 * pf))
    }))
}
