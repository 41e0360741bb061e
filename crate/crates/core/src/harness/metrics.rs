//! Ground-truth alignment and scoring. Nothing here is used by the receiver.

use std::f64::consts::PI;

use itertools::Itertools;
use num_complex::Complex64;

use crate::cfo::fold_frequency;
use crate::error::{mismatch, Result};
use crate::CMatrix;

/// Largest user count searched exhaustively; above it the assignment is greedy.
const EXHAUSTIVE_MAX: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `perm[k]` is the estimated row matched to true stream `k`.
    pub perm: Vec<usize>,
    /// Rotation of each matched row relative to the truth, a multiple of `2pi / M`.
    pub phases: Vec<f64>,
    /// `est[perm[k]] e^{-j phases[k]}`.
    pub aligned: CMatrix,
}

fn inner(est: &CMatrix, r: usize, truth: &CMatrix, k: usize) -> Complex64 {
    est.row(r).iter().zip(truth.row(k).iter()).map(|(e, t)| e * t.conj()).sum()
}

fn check_dims(est: &CMatrix, truth: &CMatrix) -> Result<()> {
    if est.shape() != truth.shape() {
        return Err(mismatch(
            "alignment",
            format!("{}x{}", truth.nrows(), truth.ncols()),
            format!("{}x{}", est.nrows(), est.ncols()),
        ));
    }
    Ok(())
}

/// Phase in `{0, 2pi/M, ...}` nearest to `arg(z)`.
pub fn nearest_symmetry_phase(z: Complex64, symmetry: usize) -> f64 {
    let step = 2.0 * PI / symmetry as f64;
    let q = (z.arg() / step).round().rem_euclid(symmetry as f64);
    q * step
}

/// Best row assignment by `sum_k |<est_perm(k), truth_k>|`.
pub fn match_rows(est: &CMatrix, truth: &CMatrix) -> Result<Vec<usize>> {
    check_dims(est, truth)?;
    let k = truth.nrows();
    let score: Vec<Vec<f64>> = (0..k).map(|t| (0..k).map(|r| inner(est, r, truth, t).norm()).collect()).collect();
    if k <= EXHAUSTIVE_MAX {
        let best = (0..k)
            .permutations(k)
            .map(|perm| {
                let s: f64 = perm.iter().enumerate().map(|(t, &r)| score[t][r]).sum();
                (perm, s)
            })
            .fold((Vec::new(), f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        return Ok(best.0);
    }
    let mut perm = vec![usize::MAX; k];
    let mut used = vec![false; k];
    let mut pairs: Vec<(usize, usize)> = (0..k).cartesian_product(0..k).collect();
    pairs.sort_by(|a, b| score[b.0][b.1].total_cmp(&score[a.0][a.1]));
    for (t, r) in pairs {
        if perm[t] == usize::MAX && !used[r] {
            perm[t] = r;
            used[r] = true;
        }
    }
    Ok(perm)
}

/// Applies `perm` and removes the nearest symmetry rotation per stream.
pub fn align_with(est: &CMatrix, truth: &CMatrix, perm: &[usize], symmetry: usize) -> Result<Alignment> {
    check_dims(est, truth)?;
    if perm.len() != truth.nrows() {
        return Err(mismatch("alignment permutation", truth.nrows(), perm.len()));
    }
    let phases: Vec<f64> = perm
        .iter()
        .enumerate()
        .map(|(t, &r)| nearest_symmetry_phase(inner(est, r, truth, t), symmetry))
        .collect();
    let aligned = CMatrix::from_fn(truth.nrows(), truth.ncols(), |t, i| {
        est[(perm[t], i)] * Complex64::cis(-phases[t])
    });
    Ok(Alignment { perm: perm.to_vec(), phases, aligned })
}

/// Resolves the permutation and quarter-turn ambiguity of 4QAM streams.
pub fn resolve_ambiguity(est: &CMatrix, truth: &CMatrix) -> Result<Alignment> {
    let perm = match_rows(est, truth)?;
    align_with(est, truth, &perm, 4)
}

/// `(1/K) sum_k [fold(f_hat_k - f_k) P]^2`.
pub fn mse_cfo(f_hat: &[f64], f_true: &[f64], p: usize) -> Result<f64> {
    if f_hat.len() != f_true.len() {
        return Err(mismatch("CFO vectors", f_true.len(), f_hat.len()));
    }
    if f_hat.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = f_hat
        .iter()
        .zip(f_true)
        .map(|(a, b)| (fold_frequency(a - b) * p as f64).powi(2))
        .sum();
    Ok(sum / f_hat.len() as f64)
}

/// Gray-mapped 4QAM bits are the signs of the real and imaginary parts.
fn bit_errors(a: Complex64, b: Complex64) -> usize {
    usize::from((a.re < 0.0) != (b.re < 0.0)) + usize::from((a.im < 0.0) != (b.im < 0.0))
}

/// Bit errors per row.
pub fn bit_error_counts(decisions: &CMatrix, truth: &CMatrix) -> Result<Vec<usize>> {
    check_dims(decisions, truth)?;
    Ok((0..truth.nrows())
        .map(|k| decisions.row(k).iter().zip(truth.row(k).iter()).map(|(a, b)| bit_errors(*a, *b)).sum())
        .collect())
}

/// Bit-error rate over `2 K N` Gray-mapped bits.
pub fn ber(decisions: &CMatrix, truth: &CMatrix) -> Result<f64> {
    let errors: usize = bit_error_counts(decisions, truth)?.iter().sum();
    let bits = 2 * truth.len();
    Ok(if bits == 0 { 0.0 } else { errors as f64 / bits as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_symbols, Constellation};

    fn truth(k: usize, n: usize) -> CMatrix {
        generate_symbols(k, n, Constellation::Qam4, 11).unwrap().s
    }

    #[test]
    fn identity_alignment() {
        let s = truth(2, 100);
        let al = resolve_ambiguity(&s, &s).unwrap();
        assert_eq!(al.perm, vec![0, 1]);
        assert_eq!(al.phases, vec![0.0, 0.0]);
        assert_eq!(al.aligned, s);
    }

    #[test]
    fn swapped_and_rotated_rows() {
        let s = truth(2, 100);
        let j = Complex64::new(0.0, 1.0);
        let est = CMatrix::from_fn(2, 100, |r, i| s[(1 - r, i)] * j);
        let al = resolve_ambiguity(&est, &s).unwrap();
        assert_eq!(al.perm, vec![1, 0]);
        for &ph in &al.phases {
            assert!((ph - PI / 2.0).abs() < 1e-12);
        }
        assert!((al.aligned - s).norm() < 1e-12);
    }

    #[test]
    fn greedy_path_for_many_users() {
        let s = truth(8, 200);
        let order = [3, 0, 7, 1, 6, 2, 5, 4];
        let est = CMatrix::from_fn(8, 200, |r, i| s[(order[r], i)] * Complex64::new(-1.0, 0.0));
        let al = resolve_ambiguity(&est, &s).unwrap();
        for (t, &r) in al.perm.iter().enumerate() {
            assert_eq!(order[r], t);
        }
        assert!((al.aligned - s).norm() < 1e-12);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_cfo(&[0.1, -0.2], &[0.1, -0.2], 4).unwrap(), 0.0);
        assert!((mse_cfo(&[0.11], &[0.1], 4).unwrap() - 1.6e-3).abs() < 1e-15);
        // Folding: 0.49 vs -0.49 differ by 0.02 modulo 1.
        assert!((mse_cfo(&[0.49], &[-0.49], 1).unwrap() - 4e-4).abs() < 1e-12);
        assert!(mse_cfo(&[0.0], &[0.0, 0.0], 4).is_err());
    }

    #[test]
    fn ber_examples() {
        let s = truth(2, 50);
        assert_eq!(ber(&s, &s).unwrap(), 0.0);
        let mut one = s.clone();
        one[(1, 7)] = Complex64::new(-one[(1, 7)].re, one[(1, 7)].im);
        assert_eq!(ber(&one, &s).unwrap(), 1.0 / 200.0);
        assert_eq!(ber(&(-&s), &s).unwrap(), 1.0);
        assert!(ber(&s.rows(0, 1).into_owned(), &s).is_err());
    }
}
