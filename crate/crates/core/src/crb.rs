//! Stochastic Cramer-Rao bound on the CFOs under a Gaussian model for `y`.
//!
//! The received vector is treated as zero-mean circular Gaussian with
//! covariance `C = A A^H + sigma^2 I`. Parameters are
//! `alpha = (f_1..f_K, tau_1..tau_K, sigma^2)`; delays and noise power are
//! nuisance and get projected out of the CFO information.
//!
//! With `D_l = dC/d alpha_l` the per-snapshot Fisher information is
//! `tr(C^-1 D_l C^-1 D_n)`. In vectorized form this is
//! `vec(D_l)^H (C^-T (x) C^-1) vec(D_n)`, factored here as `g_l^H g_n` with
//! `g_l = vec(C^-1/2 D_l C^-1/2)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_map, identity, vec};
use crate::signal::{build_virtual_channel, channel_entry, cis_cycles, pulse_derivative, ChannelMatrix, SystemParams};
use crate::CMatrix;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub c_y: CMatrix,
    /// Weighted CFO derivative columns, `P^2 x K`.
    pub g: CMatrix,
    /// Weighted nuisance columns (`tau_1..tau_K`, then `sigma^2`), `P^2 x (K+1)`.
    pub delta: CMatrix,
    /// Bound on the variance of each `f_k` estimate, in cycles^2 per oversampled sample.
    pub crb_f: Vec<f64>,
    /// Full `(2K+1) x (2K+1)` FIM for `T` snapshots, same parameter order as above.
    pub fim: DMatrix<f64>,
}

/// `A A^H + sigma^2 I`.
pub fn covariance(a: &ChannelMatrix, sigma2_w: f64) -> CMatrix {
    let m = a.matrix();
    m * m.adjoint() + identity(m.nrows()).scale(sigma2_w)
}

fn check_user(params: &SystemParams, k: usize) -> Result<()> {
    if k >= params.k {
        return Err(Error::IndexOutOfRange { index: k, len: params.k });
    }
    Ok(())
}

/// `d a_col / d f_k = j 2 pi (a_col (.) [1..P])`.
pub fn channel_df_column(params: &SystemParams, k: usize) -> Result<DVector<Complex64>> {
    check_user(params, k)?;
    Ok(DVector::from_fn(params.p, |r, _| {
        let m = r + 1;
        Complex64::new(0.0, 2.0 * PI * m as f64) * channel_entry(params, m, k)
    }))
}

/// `d a_col / d tau_k = -a_k e^{j 2 pi m f_k} p'(m Ts/P - tau_k)`.
pub fn channel_dtau_column(params: &SystemParams, k: usize) -> Result<DVector<Complex64>> {
    check_user(params, k)?;
    Ok(DVector::from_fn(params.p, |r, _| {
        let m = r + 1;
        let t = m as f64 / params.p as f64 * params.ts - params.tau[k];
        -params.a[k] * cis_cycles(m as f64 * params.f[k]) * pulse_derivative(t, params.ts)
    }))
}

fn sandwich(params: &SystemParams, k: usize, d: &DVector<Complex64>) -> CMatrix {
    let a = DVector::from_fn(params.p, |r, _| channel_entry(params, r + 1, k));
    d * a.adjoint() + &a * d.adjoint()
}

pub fn dcov_df(params: &SystemParams, k: usize) -> Result<CMatrix> {
    let d = channel_df_column(params, k)?;
    Ok(sandwich(params, k, &d))
}

pub fn dcov_dtau(params: &SystemParams, k: usize) -> Result<CMatrix> {
    let e = channel_dtau_column(params, k)?;
    Ok(sandwich(params, k, &e))
}

/// All `2K+1` covariance derivatives in parameter order.
pub fn covariance_derivatives(params: &SystemParams) -> Result<Vec<CMatrix>> {
    let mut out = Vec::with_capacity(2 * params.k + 1);
    for k in 0..params.k {
        out.push(dcov_df(params, k)?);
    }
    for k in 0..params.k {
        out.push(dcov_dtau(params, k)?);
    }
    out.push(identity(params.p));
    Ok(out)
}

fn check_bound_inputs(params: &SystemParams, t: usize) -> Result<CMatrix> {
    if t == 0 {
        return Err(Error::InvalidParams("snapshot count T must be >= 1".into()));
    }
    if !(params.sigma2_w > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    if params.p * params.p < 2 * params.k + 1 {
        return Err(Error::RankDeficient("fewer covariance dimensions than parameters"));
    }
    Ok(covariance(&build_virtual_channel(params)?, params.sigma2_w))
}

/// Cholesky of a real SPD matrix with a relative pivot floor.
fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let scale = sym.diagonal().iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let chol = sym.cholesky()?;
    let min_pivot = chol.l_dirty().diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot <= 1e-14 * scale {
        return None;
    }
    Some(chol.inverse())
}

pub fn crb_report(params: &SystemParams, t: usize) -> Result<CrbReport> {
    let c_y = check_bound_inputs(params, t)?;
    let w = hermitian_map(&c_y, |l| l.powf(-0.5));
    let derivs = covariance_derivatives(params)?;
    let k = params.k;
    let p2 = params.p * params.p;
    let cols: Vec<DVector<Complex64>> = derivs.iter().map(|d| vec(&(&w * d * &w))).collect();
    let g = CMatrix::from_columns(&cols[..k]);
    let delta = CMatrix::from_columns(&cols[k..]);
    debug_assert_eq!(g.nrows(), p2);

    // Entries of the Gram blocks are traces of Hermitian products, hence real.
    let dd = (delta.adjoint() * &delta).map(|z| z.re);
    let dd_inv = spd_inverse(&dd).ok_or(Error::NuisanceSingular)?;
    let dd_inv_c = dd_inv.map(|x| Complex64::new(x, 0.0));
    let proj = identity(p2) - &delta * dd_inv_c * delta.adjoint();
    let schur = (g.adjoint() * proj * &g).map(|z| z.re);
    let schur_inv = spd_inverse(&schur).ok_or(Error::RankDeficient("CFO information singular"))?;
    let tf = t as f64;
    let crb_f = schur_inv.diagonal().iter().map(|v| v / tf).collect();

    let h = CMatrix::from_columns(&cols);
    let fim = (h.adjoint() * h).map(|z| z.re * tf);
    Ok(CrbReport { c_y, g, delta, crb_f, fim })
}

pub fn crb_f(params: &SystemParams, t: usize) -> Result<Vec<f64>> {
    Ok(crb_report(params, t)?.crb_f)
}

/// FIM from the trace form `T tr(C^-1 D_l C^-1 D_n)`, without any factoring.
pub fn fim_trace_form(params: &SystemParams, t: usize) -> Result<DMatrix<f64>> {
    let c_y = check_bound_inputs(params, t)?;
    let c_inv = c_y.try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let scaled: Vec<CMatrix> = covariance_derivatives(params)?.iter().map(|d| &c_inv * d).collect();
    let n = scaled.len();
    let tf = t as f64;
    Ok(DMatrix::from_fn(n, n, |l, m| (&scaled[l] * &scaled[m]).trace().re * tf))
}
