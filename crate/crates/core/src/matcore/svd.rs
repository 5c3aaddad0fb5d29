//! SVD and PSD square root built on the Jacobi eigensolver.

use super::eig::{cdot, cnorm, hermitian_eig, DEFAULT_HERMITIAN_TOL};
use super::matrix::{c64, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// A = left · diag(singulars) · right*, with `left` m×m and `right` n×n unitary.
#[derive(Clone, Debug)]
pub struct Svd {
    pub singulars: Vec<f64>,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.left.rows(), self.right.rows());
        let mut out = ComplexMatrix::zeros(m, n);
        for (k, &s) in self.singulars.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let u = self.left[(i, k)] * s;
                for j in 0..n {
                    out[(i, j)] += u * self.right[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Singular value decomposition through the eigendecomposition of A*A (or AA* when wide).
pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if a.rows() < a.cols() {
        let t = svd(&a.adjoint())?;
        return Ok(Svd {
            singulars: t.singulars,
            left: t.right,
            right: t.left,
        });
    }
    let (m, n) = a.shape();
    let gram = a.adj_mul(a);
    let eig = hermitian_eig(&gram, DEFAULT_HERMITIAN_TOL)?;
    let right = eig.eigenvectors;
    let av = a.matmul(&right);

    // σ_k = ‖A v_k‖ is more accurate than sqrt(λ_k) for small singular values
    let mut sig: Vec<f64> = (0..n).map(|k| cnorm(&av.column(k))).collect();
    let smax = sig.iter().cloned().fold(0.0, f64::max);
    let floor = smax * 1e-13;

    let mut left = ComplexMatrix::zeros(m, m);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    for (k, s) in sig.iter_mut().enumerate() {
        if *s > floor && *s > 0.0 {
            let mut u: Vec<C64> = av.column(k).iter().map(|z| z / *s).collect();
            if orthonormalize_against(&mut u, &basis) {
                basis.push(u);
                continue;
            }
        }
        *s = 0.0;
        basis.push(completion_vector(&basis, m));
    }
    while basis.len() < m {
        let v = completion_vector(&basis, m);
        basis.push(v);
    }
    for (k, u) in basis.iter().enumerate() {
        left.set_column(k, u);
    }
    // keep descending order after any zeroing
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));
    let singulars: Vec<f64> = order.iter().map(|&i| sig[i]).collect();
    let mut full_order = order.clone();
    full_order.extend(n..m);
    let left = left.select_columns(&full_order);
    let right = right.select_columns(&order);
    Ok(Svd {
        singulars,
        left,
        right,
    })
}

/// Two passes of Gram-Schmidt; returns false when `u` is numerically in span(basis).
fn orthonormalize_against(u: &mut [C64], basis: &[Vec<C64>]) -> bool {
    let before = cnorm(u);
    for _ in 0..2 {
        for b in basis {
            let c = cdot(b, u);
            for (x, y) in u.iter_mut().zip(b) {
                *x -= y * c;
            }
        }
    }
    let after = cnorm(u);
    if after <= 1e-8 * before.max(f64::MIN_POSITIVE) {
        return false;
    }
    for x in u.iter_mut() {
        *x /= after;
    }
    true
}

/// First standard basis vector (after Gram-Schmidt) not in span(basis).
fn completion_vector(basis: &[Vec<C64>], m: usize) -> Vec<C64> {
    let mut best: Option<(f64, Vec<C64>)> = None;
    for i in 0..m {
        let mut u = vec![c64(0.0, 0.0); m];
        u[i] = c64(1.0, 0.0);
        for _ in 0..2 {
            for b in basis {
                let c = cdot(b, &u);
                for (x, y) in u.iter_mut().zip(b) {
                    *x -= y * c;
                }
            }
        }
        let r = cnorm(&u);
        if r > 0.5 {
            return u.iter().map(|z| z / r).collect();
        }
        if best.as_ref().is_none_or(|(br, _)| r > *br) {
            best = Some((r, u));
        }
    }
    let (r, u) = best.expect("m > 0");
    u.iter().map(|z| z / r).collect()
}

/// Square root of a Hermitian positive semidefinite matrix. Eigenvalues in
/// [−1e-8·‖A‖, 0) are treated as roundoff and clamped to zero.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a, DEFAULT_HERMITIAN_TOL)?;
    let norm = eig
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max);
    if let Some(&worst) = eig.eigenvalues.last() {
        if worst < -1e-8 * norm {
            return Err(Error::NotPsd { eigenvalue: worst });
        }
    }
    Ok(eig.apply_fn(|l| l.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_zero() {
        let d = ComplexMatrix::from_diag_real(&[3.0, 1.0]);
        let s = svd(&d).unwrap();
        assert!((s.singulars[0] - 3.0).abs() < 1e-14 && (s.singulars[1] - 1.0).abs() < 1e-14);
        let z = svd(&ComplexMatrix::zeros(3, 2)).unwrap();
        assert!(z.singulars.iter().all(|&x| x == 0.0));
        let u = &z.left;
        assert!((&u.adj_mul(u) - &ComplexMatrix::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn reconstruction_wide_and_tall() {
        for (m, n) in [(2, 5), (5, 2), (4, 4), (1, 3)] {
            let a = ComplexMatrix::from_fn(m, n, |i, j| {
                c64((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)
            });
            let s = svd(&a).unwrap();
            assert!((&s.reconstruct() - &a).frob_norm() <= 1e-10 * (1.0 + a.frob_norm()));
            assert!((&s.left.adj_mul(&s.left) - &ComplexMatrix::identity(m)).max_abs() < 1e-12);
            assert!((&s.right.adj_mul(&s.right) - &ComplexMatrix::identity(n)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn psd_sqrt_cases() {
        let r = psd_sqrt(&ComplexMatrix::from_diag_real(&[4.0, 9.0])).unwrap();
        assert!((&r - &ComplexMatrix::from_diag_real(&[2.0, 3.0])).max_abs() < 1e-14);
        let i = psd_sqrt(&ComplexMatrix::identity(4)).unwrap();
        assert!((&i - &ComplexMatrix::identity(4)).max_abs() < 1e-14);
        // A = v v*, ‖v‖ = 2  =>  sqrt(A) = A / 2
        let v = ComplexMatrix::from_vec(
            3,
            1,
            vec![c64(1.0, 1.0), c64(0.0, -1.0), c64(1.0, 0.0)],
        )
        .unwrap();
        let a = v.mul_adj(&v);
        let r = psd_sqrt(&a).unwrap();
        assert!((&r - &a.scale(0.5)).max_abs() < 1e-12);
        let neg = ComplexMatrix::from_diag_real(&[1.0, -0.5]);
        assert!(matches!(psd_sqrt(&neg), Err(Error::NotPsd { .. })));
        // roundoff-level negatives are clamped
        let tiny = ComplexMatrix::from_diag_real(&[1.0, -1e-12]);
        assert!(psd_sqrt(&tiny).is_ok());
    }
}
