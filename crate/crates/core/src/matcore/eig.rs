//! Hermitian eigensolvers.
//!
//! `hermitian_eig` is a cyclic complex Jacobi method returning eigenvectors.
//! `hermitian_eigvals` and `singular_values` skip the eigenvectors and go
//! through Householder reduction to a real tridiagonal matrix followed by
//! implicit QL, which is what the large tensor-product spectra need.

use super::matrix::{c64, ComplexMatrix, C64};
use crate::error::{Error, Result};

pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column k belongs to `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// V diag(h(λ)) V*.
    pub fn apply_fn(&self, h: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&l| h(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = c64(0.0, 0.0);
                for (k, &lk) in vals.iter().enumerate() {
                    s += v[(i, k)] * v[(j, k)].conj() * lk;
                }
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
            out[(i, i)] = c64(out[(i, i)].re, 0.0);
        }
        out
    }
}

fn check_hermitian(a: &ComplexMatrix, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.rows(), a.cols()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if !a.is_hermitian(tol) {
        let defect = (a - &a.adjoint()).frob_norm();
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
pub fn hermitian_eig(a: &ComplexMatrix, tol: f64) -> Result<HermitianEig> {
    check_hermitian(a, tol)?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frob_norm();
    let target = f64::EPSILON * scale;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // negligible relative to both diagonal entries: zero it without rotating
                if r < 1e-18 * (app.abs() + aqq.abs()) && r < target {
                    m[(p, q)] = c64(0.0, 0.0);
                    m[(q, p)] = c64(0.0, 0.0);
                    continue;
                }
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let ph_c = phase.conj();
                // A <- A W, W = [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - akq * ph_c * s;
                    m[(k, q)] = akp * s + akq * ph_c * c;
                }
                // A <- W* A
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c - aqk * phase * s;
                    m[(q, k)] = apk * s + aqk * phase * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * ph_c * s;
                    v[(k, q)] = vkp * s + vkq * ph_c * c;
                }
                m[(p, q)] = c64(0.0, 0.0);
                m[(q, p)] = c64(0.0, 0.0);
                m[(p, p)] = c64(app - t * r, 0.0);
                m[(q, q)] = c64(aqq + t * r, 0.0);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > target * 16.0 {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut vecs = v.select_columns(&order);
    normalize_phases(&mut vecs);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors: vecs,
    })
}

/// Rotates each column so that its first entry of (near-)maximal modulus is real positive.
pub(crate) fn normalize_phases(v: &mut ComplexMatrix) {
    let (rows, cols) = v.shape();
    for j in 0..cols {
        let big = (0..rows).map(|i| v[(i, j)].norm()).fold(0.0, f64::max);
        if big == 0.0 {
            continue;
        }
        let pivot = (0..rows)
            .find(|&i| v[(i, j)].norm() >= big * (1.0 - 1e-9))
            .unwrap_or(0);
        let z = v[(pivot, j)];
        let rot = z.conj() / z.norm();
        for i in 0..rows {
            v[(i, j)] *= rot;
        }
    }
}

/// Householder reduction of a Hermitian matrix to a real symmetric tridiagonal
/// (diagonal, off-diagonal magnitudes). Off-diagonal has length n with last entry 0.
fn tridiagonalize(a: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut v = vec![c64(0.0, 0.0); n];
    let mut p = vec![c64(0.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let lo = k + 1;
        let xnorm = (lo..n).map(|i| m[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        diag[k] = m[(k, k)].re;
        off[k] = xnorm;
        if xnorm == 0.0 || lo == n - 1 {
            continue;
        }
        let x0 = m[(lo, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { c64(1.0, 0.0) };
        let alpha = -phase * xnorm;
        for i in lo..n {
            v[i] = m[(i, k)];
        }
        v[lo] -= alpha;
        let vn = (lo..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for vi in v.iter_mut().take(n).skip(lo) {
            *vi /= vn;
        }
        // p = B v on the trailing block
        for i in lo..n {
            let mut s = c64(0.0, 0.0);
            for j in lo..n {
                s += m[(i, j)] * v[j];
            }
            p[i] = s;
        }
        let kk: f64 = (lo..n).map(|i| (v[i].conj() * p[i]).re).sum();
        for i in lo..n {
            p[i] -= v[i] * kk;
        }
        // B <- B - 2 (v w* + w v*)
        for i in lo..n {
            for j in lo..n {
                let delta = v[i] * p[j].conj() + p[i] * v[j].conj();
                m[(i, j)] -= delta * 2.0;
            }
        }
    }
    if n > 0 {
        diag[n - 1] = m[(n - 1, n - 1)].re;
    }
    (diag, off)
}

/// Eigenvalues of the real symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples i and i+1), by implicit QL with Wilkinson-type shifts.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    e.resize(n, 0.0);
    if n > 0 {
        e[n - 1] = 0.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m] == 0.0 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 * n.max(1) {
                return Err(Error::NoConvergence { sweeps: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// Eigenvalues (descending) of a Hermitian matrix, without eigenvectors.
pub fn hermitian_eigvals(a: &ComplexMatrix, tol: f64) -> Result<Vec<f64>> {
    check_hermitian(a, tol)?;
    let (d, e) = tridiagonalize(a);
    tridiagonal_eigenvalues(d, e)
}

/// Householder bidiagonalization of an m×n matrix with m ≥ n, returning the
/// magnitudes of the diagonal and super-diagonal.
fn bidiagonalize(a: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut w = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![c64(0.0, 0.0); m.max(n)];
    for k in 0..n {
        // left reflector on column k, rows k..m
        let xnorm = (k..m).map(|i| w[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        d[k] = xnorm;
        if xnorm > 0.0 && k + 1 < m {
            let x0 = w[(k, k)];
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { c64(1.0, 0.0) };
            let alpha = -phase * xnorm;
            for i in k..m {
                v[i] = w[(i, k)];
            }
            v[k] -= alpha;
            let vn = (k..m).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
            if vn > 0.0 {
                for vi in v.iter_mut().take(m).skip(k) {
                    *vi /= vn;
                }
                for j in (k + 1)..n {
                    let mut s = c64(0.0, 0.0);
                    for i in k..m {
                        s += v[i].conj() * w[(i, j)];
                    }
                    let s2 = s * 2.0;
                    for i in k..m {
                        let vi = v[i];
                        w[(i, j)] -= vi * s2;
                    }
                }
            }
        }
        if k + 1 >= n {
            continue;
        }
        // right reflector on row k, columns k+1..n
        let lo = k + 1;
        let rnorm = (lo..n).map(|j| w[(k, j)].norm_sqr()).sum::<f64>().sqrt();
        e[k] = rnorm;
        if rnorm == 0.0 || lo + 1 >= n {
            continue;
        }
        // reflector mapping conj(row) to a multiple of e_1
        let x0 = w[(k, lo)].conj();
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { c64(1.0, 0.0) };
        let alpha = -phase * rnorm;
        for j in lo..n {
            v[j] = w[(k, j)].conj();
        }
        v[lo] -= alpha;
        let vn = (lo..n).map(|j| v[j].norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for vj in v.iter_mut().take(n).skip(lo) {
            *vj /= vn;
        }
        for i in (k + 1)..m {
            let mut s = c64(0.0, 0.0);
            for j in lo..n {
                s += w[(i, j)] * v[j];
            }
            let s2 = s * 2.0;
            for j in lo..n {
                let vj = v[j].conj();
                w[(i, j)] -= s2 * vj;
            }
        }
    }
    (d, e)
}

/// Singular values (descending, length min(m, n)) without singular vectors.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let owned;
    let a = if a.rows() >= a.cols() {
        a
    } else {
        owned = a.adjoint();
        &owned
    };
    let k = a.cols();
    let (d, e) = bidiagonalize(a);
    // Golub-Kahan form: zero diagonal, off-diagonal d0, e0, d1, e1, ...
    let mut off = Vec::with_capacity(2 * k);
    for i in 0..k {
        off.push(d[i]);
        if i + 1 < k {
            off.push(e[i]);
        }
    }
    off.push(0.0);
    let eig = tridiagonal_eigenvalues(vec![0.0; 2 * k], off)?;
    Ok(eig.into_iter().take(k).map(|s| s.max(0.0)).collect())
}

/// Dot product ⟨u, v⟩ = Σ conj(u_i) v_i.
pub(crate) fn cdot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub(crate) fn cnorm(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = ComplexMatrix::from_fn(n, n, |_, _| c64(next(), next()));
        g.hermitian_part()
    }

    #[test]
    fn identity_and_swap() {
        let e = hermitian_eig(&ComplexMatrix::identity(3), 1e-10).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = hermitian_eig(&x, 1e-10).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn not_hermitian_rejected() {
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            hermitian_eig(&x, 1e-10),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            hermitian_eig(&ComplexMatrix::zeros(2, 3), 1e-10),
            Err(Error::NotSquare(2, 3))
        ));
    }

    #[test]
    fn jacobi_reconstructs() {
        for n in [1, 2, 5, 12, 30] {
            let a = herm(n, n as u64 + 3);
            let e = hermitian_eig(&a, 1e-10).unwrap();
            let v = &e.eigenvectors;
            let rec = e.apply_fn(|l| l);
            assert!((&rec - &a).frob_norm() <= 1e-10 * (1.0 + a.frob_norm()));
            let vv = v.adj_mul(v);
            assert!((&vv - &ComplexMatrix::identity(n)).max_abs() <= 1e-12);
            for w in e.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn tridiagonal_path_matches_jacobi() {
        for n in [1, 2, 3, 7, 20, 45] {
            let a = herm(n, 100 + n as u64);
            let j = hermitian_eig(&a, 1e-10).unwrap().eigenvalues;
            let t = hermitian_eigvals(&a, 1e-10).unwrap();
            for (x, y) in j.iter().zip(&t) {
                assert!((x - y).abs() < 1e-12 * (1.0 + a.frob_norm()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn bidiagonal_singular_values_match_gram_spectrum() {
        for (m, n) in [(1, 1), (3, 2), (2, 5), (6, 6), (9, 4), (17, 23)] {
            let mut s = (m * 31 + n) as u64;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let a = ComplexMatrix::from_fn(m, n, |_, _| c64(next(), next()));
            let sv = singular_values(&a).unwrap();
            assert_eq!(sv.len(), m.min(n));
            let gram = if m >= n { a.adj_mul(&a) } else { a.mul_adj(&a) };
            let ev = hermitian_eig(&gram, 1e-10).unwrap().eigenvalues;
            for (x, l) in sv.iter().zip(&ev) {
                assert!((x * x - l).abs() < 1e-11 * (1.0 + gram.frob_norm()));
            }
        }
    }

    #[test]
    fn rank_deficient_singular_values_are_small() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let sv = singular_values(&a).unwrap();
        assert!((sv[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(sv[1] < 1e-15);
    }
}
