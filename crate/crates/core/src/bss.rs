//! Blind identification of the virtual channel with JADE.
//!
//! The received frame is whitened onto the `K`-dimensional signal subspace,
//! the fourth-order cumulant matrices of the whitened process are jointly
//! diagonalized by complex Givens sweeps, and the resulting unitary is mapped
//! back through the whitener. The estimate carries the usual blind
//! ambiguities: `A_hat = A P Lambda` for a permutation `P` and an invertible
//! diagonal `Lambda`.

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{mismatch, Error, Result};
use crate::linalg::{hermitian_eigen, left_inverse};
use crate::signal::SampleFrame;
use crate::CMatrix;

/// Stop once every Givens angle of a sweep is below this (radians).
pub const JD_TOL: f64 = 1e-8;
pub const JD_MAX_SWEEPS: usize = 100;
/// Minimum snapshots per user accepted by [`estimate_mixing`].
pub const MIN_SNAPSHOTS_PER_USER: usize = 50;
/// Streams whose normalized kurtosis magnitude falls below this trip the warning.
pub const LOW_KURTOSIS: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct SeparationResult {
    /// `P x K` estimated mixing matrix.
    pub a_hat: CMatrix,
    /// `K x N` least-squares equalized streams.
    pub s_tilde_hat: CMatrix,
    /// `K x P` whitening matrix (signal subspace, noise removed).
    pub whitener: CMatrix,
    /// Noise power estimated from the `P - K` smallest covariance eigenvalues.
    pub noise_variance: f64,
    /// Normalized kurtosis of each separated stream.
    pub kurtosis: Vec<f64>,
    /// Set when some stream looks Gaussian (zero kurtosis).
    pub low_kurtosis: bool,
    /// Joint-diagonalization sweeps used.
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct JointDiagonalization {
    pub v: CMatrix,
    pub sweeps: usize,
    pub converged: bool,
}

/// Unitary `V` approximately diagonalizing every `V^H M_r V`.
pub fn joint_diagonalize(mats: &[CMatrix], tol: f64) -> Result<CMatrix> {
    joint_diagonalize_with(mats, tol, JD_MAX_SWEEPS).map(|jd| jd.v)
}

/// Cardoso-Souloumiac Jacobi joint diagonalization.
pub fn joint_diagonalize_with(
    mats: &[CMatrix],
    tol: f64,
    max_sweeps: usize,
) -> Result<JointDiagonalization> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidParams("empty matrix set".into()))?;
    let n = first.nrows();
    for m in mats {
        if !m.is_square() || m.nrows() != n {
            return Err(mismatch(
                "joint diagonalization",
                format!("{n}x{n}"),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
    }

    let mut work: Vec<CMatrix> = mats.to_vec();
    let mut v = CMatrix::identity(n, n);
    let threshold = tol.sin();
    let j = Complex64::i();
    for sweep in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                // Real 3x3 Gram of the (p,q) sub-problem, with g mapped through
                // B = [1 0 0; 0 1 1; 0 -j j].
                let mut gram = Matrix3::<f64>::zeros();
                for m in &work {
                    let g = [m[(p, p)] - m[(q, q)], m[(p, q)], m[(q, p)]];
                    let h = [g[0], g[1] + g[2], j * (g[2] - g[1])];
                    for r in 0..3 {
                        for c in 0..3 {
                            gram[(r, c)] += (h[r] * h[c].conj()).re;
                        }
                    }
                }
                let eig = SymmetricEigen::new(gram);
                let imax = eig.eigenvalues.imax();
                let mut angles = eig.eigenvectors.column(imax).into_owned();
                if angles[0] < 0.0 {
                    angles = -angles;
                }
                let c = (0.5 + angles[0] / 2.0).sqrt();
                let s = Complex64::new(angles[1], -angles[2]) * (0.5 / c);
                if s.norm() <= threshold {
                    continue;
                }
                rotated = true;
                let cc = Complex64::new(c, 0.0);
                // G = [c, -s*; s, c]
                for r in 0..n {
                    let (vp, vq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = vp * cc + vq * s;
                    v[(r, q)] = -vp * s.conj() + vq * cc;
                }
                for m in work.iter_mut() {
                    for col in 0..n {
                        let (mp, mq) = (m[(p, col)], m[(q, col)]);
                        m[(p, col)] = cc * mp + s.conj() * mq;
                        m[(q, col)] = -s * mp + cc * mq;
                    }
                    for row in 0..n {
                        let (mp, mq) = (m[(row, p)], m[(row, q)]);
                        m[(row, p)] = mp * cc + mq * s;
                        m[(row, q)] = -mp * s.conj() + mq * cc;
                    }
                }
            }
        }
        if !rotated {
            return Ok(JointDiagonalization { v, sweeps: sweep + 1, converged: true });
        }
    }
    Ok(JointDiagonalization { v, sweeps: max_sweeps, converged: false })
}

/// Orthonormal basis of the `K^2`-dimensional real space of `K x K` Hermitian matrices.
fn hermitian_basis(k: usize) -> Vec<CMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(k * k);
    for p in 0..k {
        let mut m = CMatrix::zeros(k, k);
        m[(p, p)] = Complex64::new(1.0, 0.0);
        basis.push(m);
        for q in p + 1..k {
            let mut sym = CMatrix::zeros(k, k);
            sym[(p, q)] = Complex64::new(r, 0.0);
            sym[(q, p)] = Complex64::new(r, 0.0);
            basis.push(sym);
            let mut anti = CMatrix::zeros(k, k);
            anti[(p, q)] = Complex64::new(0.0, r);
            anti[(q, p)] = Complex64::new(0.0, -r);
            basis.push(anti);
        }
    }
    basis
}

/// Cumulant matrices `Q(M)_{ij} = sum_{kl} Cum(z_i, z_j*, z_k, z_l*) M_{lk}`
/// of a `K x N` process for every `M` of the Hermitian basis.
///
/// For `z = U s` with independent sources, `Q(M) = U diag(kappa_p u_p^H M u_p) U^H`,
/// so every matrix of the set is diagonalized by the same unitary.
pub fn cumulant_matrices(z: &CMatrix) -> Vec<CMatrix> {
    let k = z.nrows();
    let n = z.ncols() as f64;
    let r = z * z.adjoint() / Complex64::new(n, 0.0);
    let c = z * z.transpose() / Complex64::new(n, 0.0);
    let c_conj = c.conjugate();
    hermitian_basis(k)
        .into_iter()
        .map(|m| {
            let mut weighted = z.clone();
            for (i, mut col) in weighted.column_iter_mut().enumerate() {
                let zi = z.column(i);
                let q = (zi.adjoint() * &m * zi)[(0, 0)].re;
                col.scale_mut(q);
            }
            let e4 = weighted * z.adjoint() / Complex64::new(n, 0.0);
            let trace = (&m * &r).trace();
            let q = e4 - &r * trace - &r * &m * &r - &c * m.transpose() * &c_conj;
            // Exact Hermitian symmetry for the Givens sweep.
            (&q + q.adjoint()).scale(0.5)
        })
        .collect()
}

/// Normalized circular kurtosis `(E|x|^4 - 2 E^2|x|^2 - |E x^2|^2) / E^2|x|^2` of each row.
pub fn stream_kurtosis(x: &CMatrix) -> Vec<f64> {
    let n = x.ncols() as f64;
    x.row_iter()
        .map(|row| {
            let m2 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
            let m4 = row.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() / n;
            let c2 = row.iter().map(|z| z * z).sum::<Complex64>() / n;
            if m2 > 0.0 {
                (m4 - 2.0 * m2 * m2 - c2.norm_sqr()) / (m2 * m2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Blind estimate of the virtual channel and the decoupled rotated streams.
pub fn estimate_mixing(y: &SampleFrame, k: usize) -> Result<SeparationResult> {
    let p = y.rows();
    let n = y.len();
    if k == 0 || k > p {
        return Err(Error::InvalidParams(format!("need 1 <= K <= P, got K = {k}, P = {p}")));
    }
    let required = MIN_SNAPSHOTS_PER_USER * k;
    if n < required {
        return Err(Error::InsufficientSamples { n, required });
    }

    let cov = &y.y * y.y.adjoint() / Complex64::new(n as f64, 0.0);
    let (values, vectors) = hermitian_eigen(&cov);
    let noise_variance = if p > k {
        values[k..].iter().sum::<f64>() / (p - k) as f64
    } else {
        0.0
    };
    let top = values[0];
    let floor = 1e-10 * top.max(f64::MIN_POSITIVE);
    let rank = values.iter().filter(|&&l| l - noise_variance > floor).count();
    if !(top > 0.0) || values[k - 1] - noise_variance <= floor {
        return Err(Error::InsufficientExcitation { rank: rank.min(k - 1), k });
    }

    let mut whitener = CMatrix::zeros(k, p);
    let mut unwhitener = CMatrix::zeros(p, k);
    for c in 0..k {
        let scale = (values[c] - noise_variance).sqrt();
        for r in 0..p {
            whitener[(c, r)] = vectors[(r, c)].conj() / scale;
            unwhitener[(r, c)] = vectors[(r, c)] * scale;
        }
    }

    let z = &whitener * &y.y;
    let jd = joint_diagonalize_with(&cumulant_matrices(&z), JD_TOL, JD_MAX_SWEEPS)?;
    let a_hat = unwhitener * &jd.v;
    let s_tilde_hat = separate(&a_hat, y)?;
    let kurtosis = stream_kurtosis(&(jd.v.adjoint() * z));
    let low_kurtosis = kurtosis.iter().any(|kap| kap.abs() < LOW_KURTOSIS);

    Ok(SeparationResult {
        a_hat,
        s_tilde_hat,
        whitener,
        noise_variance,
        kurtosis,
        low_kurtosis,
        sweeps: jd.sweeps,
    })
}

/// Least-squares equalization `(A_hat^H A_hat)^{-1} A_hat^H y`.
pub fn separate(a_hat: &CMatrix, y: &SampleFrame) -> Result<CMatrix> {
    if a_hat.nrows() != y.rows() {
        return Err(mismatch("equalizer rows", y.rows(), a_hat.nrows()));
    }
    Ok(left_inverse(a_hat)? * &y.y)
}

impl SeparationResult {
    pub fn users(&self) -> usize {
        self.a_hat.ncols()
    }

    /// Re-equalizes another frame with this channel estimate.
    pub fn separate(&self, y: &SampleFrame) -> Result<CMatrix> {
        separate(&self.a_hat, y)
    }
}
