//! Projection functionals: k_t and its nested, generalized-exponent and weak-type variants.
//!
//! All of them are maxima over projection pairs (P, Q) of an expression in the
//! numerator Σ_n ‖P a_n Q‖_2² and the ranks τ(P), τ(Q). A [`ProjectionTable`] records,
//! for each rank pair, the largest numerator found by the search, so that every
//! functional and every t is evaluated from one search.

use serde::{Deserialize, Serialize};

use super::ThetaQ;
use crate::error::Result;
use crate::matcore::{ginibre, hermitian_eig, rng_for, ComplexMatrix, DEFAULT_HERMITIAN_TOL};
use crate::seqnorms::{gram_col, gram_row, MatrixSeq};

/// Which orthonormal bases feed the exhaustive coordinate-subset search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Standard basis only.
    Standard,
    /// Standard basis plus eigenbases of Σ a_n a_n* and Σ a_n* a_n.
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchStrategy {
    pub bases: BasisFamily,
    /// Largest dimension for which all coordinate subsets are enumerated; above it,
    /// subsets are grown greedily.
    pub max_exhaustive_dim: usize,
    /// Number of alternating-eigenvector ascents per rank pair (0 disables them).
    pub stiefel_restarts: usize,
    pub stiefel_iters: usize,
    pub seed: u64,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy {
            bases: BasisFamily::Spectral,
            max_exhaustive_dim: 10,
            stiefel_restarts: 3,
            stiefel_iters: 50,
            seed: 0,
        }
    }
}

impl SearchStrategy {
    /// Coordinate subsets of the standard basis and nothing else.
    pub fn coordinate() -> Self {
        SearchStrategy {
            bases: BasisFamily::Standard,
            stiefel_restarts: 0,
            ..SearchStrategy::default()
        }
    }
}

/// Two orthogonal projections given by orthonormal frames (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
}

impl ProjectionPair {
    pub fn rank_p(&self) -> usize {
        self.p.cols()
    }

    pub fn rank_q(&self) -> usize {
        self.q.cols()
    }

    /// Σ_n ‖P a_n Q‖_2², computed as Σ_n ‖U* a_n V‖_F² for the frames U, V.
    pub fn numerator(&self, a: &MatrixSeq) -> f64 {
        a.items()
            .iter()
            .map(|x| self.p.adj_mul(&x.matmul(&self.q)).frob_norm_sq())
            .sum()
    }

    /// Largest entrywise deviation of U*U and V*V from the identity.
    pub fn frame_defect(&self) -> f64 {
        let dp = (&self.p.adj_mul(&self.p) - &ComplexMatrix::identity(self.rank_p())).max_abs();
        let dq = (&self.q.adj_mul(&self.q) - &ComplexMatrix::identity(self.rank_q())).max_abs();
        dp.max(dq)
    }
}

#[derive(Clone, Debug)]
enum Source {
    Coordinate {
        left: usize,
        right: usize,
        e: Vec<usize>,
        f: Vec<usize>,
    },
    Frames(ProjectionPair),
}

#[derive(Clone, Debug, Default)]
struct Cell {
    num: f64,
    src: Option<Source>,
}

/// Best numerators per rank pair (rP, rQ), 1 ≤ rP ≤ n, 1 ≤ rQ ≤ m.
#[derive(Clone, Debug)]
struct Grid {
    n: usize,
    m: usize,
    cells: Vec<Cell>,
}

impl Grid {
    fn new(n: usize, m: usize) -> Self {
        Grid {
            n,
            m,
            cells: vec![Cell::default(); n * m],
        }
    }

    fn offer(&mut self, rp: usize, rq: usize, num: f64, src: impl FnOnce() -> Source) {
        let c = &mut self.cells[(rp - 1) * self.m + (rq - 1)];
        if num > c.num {
            c.num = num;
            c.src = Some(src());
        }
    }

    fn get(&self, rp: usize, rq: usize) -> &Cell {
        &self.cells[(rp - 1) * self.m + (rq - 1)]
    }

    /// argmax over rank pairs of `score(num, rP, rQ)`; ties keep the first pair.
    fn best(&self, score: impl Fn(f64, f64, f64) -> f64) -> (f64, usize, usize) {
        let mut best = (0.0, 0, 0);
        for rp in 1..=self.n {
            for rq in 1..=self.m {
                let c = self.get(rp, rq);
                if c.src.is_none() {
                    continue;
                }
                let v = score(c.num, rp as f64, rq as f64);
                if v > best.0 {
                    best = (v, rp, rq);
                }
            }
        }
        best
    }
}

/// Search results for one sequence, reusable for every t and functional.
#[derive(Clone, Debug)]
pub struct ProjectionTable {
    bases: Vec<ComplexMatrix>,
    general: Grid,
    /// P ≤ Q.
    nested_up: Option<Grid>,
    /// Q ≤ P.
    nested_down: Option<Grid>,
    /// P = Q.
    nested_equal: Option<Grid>,
}

/// Nesting constraint of the restricted functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nesting {
    PBelowQ,
    QBelowP,
    Equal,
}

impl Nesting {
    pub fn for_t(t: f64) -> Nesting {
        if t > 1.0 {
            Nesting::PBelowQ
        } else if t < 1.0 {
            Nesting::QBelowP
        } else {
            Nesting::Equal
        }
    }
}

/// w_ij = Σ_n |(U* a_n V)_ij|².
fn weights(a: &MatrixSeq, u: &ComplexMatrix, v: &ComplexMatrix) -> Vec<Vec<f64>> {
    let (n, m) = a.shape();
    let mut w = vec![vec![0.0; m]; n];
    for x in a.items() {
        let b = u.adj_mul(&x.matmul(v));
        for (i, wi) in w.iter_mut().enumerate() {
            for (j, wij) in wi.iter_mut().enumerate() {
                *wij += b[(i, j)].norm_sqr();
            }
        }
    }
    w
}

/// Indices sorted by value descending, ties by index.
fn order_desc(v: &[f64], allowed: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).filter(|&j| allowed(j)).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

fn mask_members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Row subsets to scan: all of them for small n, otherwise greedy prefixes by row mass.
fn row_subsets(w: &[Vec<f64>], exhaustive: bool) -> Vec<Vec<usize>> {
    let n = w.len();
    if exhaustive {
        (1u64..(1u64 << n)).map(|m| mask_members(m, n)).collect()
    } else {
        let mass: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
        let ord = order_desc(&mass, |_| true);
        (1..=n).map(|k| {
            let mut e = ord[..k].to_vec();
            e.sort_unstable();
            e
        })
        .collect()
    }
}

fn scan_general(grid: &mut Grid, w: &[Vec<f64>], left: usize, right: usize, exhaustive: bool) {
    let m = grid.m;
    for e in row_subsets(w, exhaustive) {
        let mut c = vec![0.0; m];
        for &i in &e {
            for j in 0..m {
                c[j] += w[i][j];
            }
        }
        let ord = order_desc(&c, |_| true);
        let mut acc = 0.0;
        for (k, &j) in ord.iter().enumerate() {
            acc += c[j];
            grid.offer(e.len(), k + 1, acc, || {
                let mut f = ord[..=k].to_vec();
                f.sort_unstable();
                Source::Coordinate {
                    left,
                    right,
                    e: e.clone(),
                    f,
                }
            });
        }
    }
}

/// Nested pairs inside one basis (w square).
fn scan_nested(up: &mut Grid, down: &mut Grid, equal: &mut Grid, w: &[Vec<f64>], basis: usize, exhaustive: bool) {
    let n = w.len();
    for s in row_subsets(w, exhaustive) {
        let inside = |j: usize| s.binary_search(&j).is_ok();
        let col_mass: Vec<f64> = (0..n).map(|j| s.iter().map(|&i| w[i][j]).sum()).collect();
        let row_mass: Vec<f64> = (0..n).map(|i| s.iter().map(|&j| w[i][j]).sum()).collect();
        let core: f64 = s.iter().map(|&j| col_mass[j]).sum();
        let src = |e: Vec<usize>, f: Vec<usize>| Source::Coordinate {
            left: basis,
            right: basis,
            e,
            f,
        };
        equal.offer(s.len(), s.len(), core, || src(s.clone(), s.clone()));
        // E = s ⊆ F
        let ord = order_desc(&col_mass, |j| !inside(j));
        let mut acc = core;
        up.offer(s.len(), s.len(), acc, || src(s.clone(), s.clone()));
        for (k, &j) in ord.iter().enumerate() {
            acc += col_mass[j];
            up.offer(s.len(), s.len() + k + 1, acc, || {
                let mut f = s.clone();
                f.extend_from_slice(&ord[..=k]);
                f.sort_unstable();
                src(s.clone(), f)
            });
        }
        // F = s ⊆ E
        let ord = order_desc(&row_mass, |i| !inside(i));
        let mut acc = core;
        down.offer(s.len(), s.len(), acc, || src(s.clone(), s.clone()));
        for (k, &i) in ord.iter().enumerate() {
            acc += row_mass[i];
            down.offer(s.len() + k + 1, s.len(), acc, || {
                let mut e = s.clone();
                e.extend_from_slice(&ord[..=k]);
                e.sort_unstable();
                src(e, s.clone())
            });
        }
    }
}

fn top_frame(h: &ComplexMatrix, r: usize) -> Result<(ComplexMatrix, f64)> {
    let e = hermitian_eig(&h.hermitian_part(), DEFAULT_HERMITIAN_TOL)?;
    let cols: Vec<usize> = (0..r).collect();
    let val = e.eigenvalues[..r].iter().sum();
    Ok((e.eigenvectors.select_columns(&cols), val))
}

/// Σ_n a_n V V* a_n*.
fn left_density(a: &MatrixSeq, v: &ComplexMatrix) -> ComplexMatrix {
    let (n, _) = a.shape();
    let mut g = ComplexMatrix::zeros(n, n);
    for x in a.items() {
        let xv = x.matmul(v);
        g = &g + &xv.mul_adj(&xv);
    }
    g
}

/// Σ_n a_n* U U* a_n.
fn right_density(a: &MatrixSeq, u: &ComplexMatrix) -> ComplexMatrix {
    let (_, m) = a.shape();
    let mut g = ComplexMatrix::zeros(m, m);
    for x in a.items() {
        let ux = u.adj_mul(x);
        g = &g + &ux.adj_mul(&ux);
    }
    g
}

fn orthonormal_frame(g: ComplexMatrix) -> ComplexMatrix {
    let (n, r) = g.shape();
    let mut out = ComplexMatrix::zeros(n, r);
    let mut cols: Vec<Vec<crate::matcore::C64>> = Vec::new();
    for j in 0..r {
        let mut v = g.column(j);
        for _ in 0..2 {
            for q in &cols {
                let c: crate::matcore::C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= y * c;
                }
            }
        }
        let nr = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<_> = v.iter().map(|z| z / nr).collect();
        out.set_column(j, &v);
        cols.push(v);
    }
    out
}

/// Alternating exact maximization over U (top eigenvectors of the left density) and V.
fn ascend(a: &MatrixSeq, rp: usize, mut v: ComplexMatrix, iters: usize) -> Result<(f64, ComplexMatrix, ComplexMatrix)> {
    let rq = v.cols();
    let mut best = -1.0;
    let mut u = ComplexMatrix::zeros(a.shape().0, rp);
    for _ in 0..iters {
        let (nu, _) = top_frame(&left_density(a, &v), rp)?;
        u = nu;
        let (nv, val) = top_frame(&right_density(a, &u), rq)?;
        v = nv;
        if val <= best * (1.0 + 1e-13) {
            best = best.max(val);
            break;
        }
        best = val;
    }
    Ok((best, u, v))
}

impl ProjectionTable {
    pub fn build(a: &MatrixSeq, strategy: &SearchStrategy) -> Result<Self> {
        let (n, m) = a.shape();
        let mut left = vec![ComplexMatrix::identity(n)];
        let mut right = vec![ComplexMatrix::identity(m)];
        if strategy.bases == BasisFamily::Spectral {
            left.push(hermitian_eig(&gram_row(a).hermitian_part(), DEFAULT_HERMITIAN_TOL)?.eigenvectors);
            right.push(hermitian_eig(&gram_col(a).hermitian_part(), DEFAULT_HERMITIAN_TOL)?.eigenvectors);
            if n == m {
                left.push(right[1].clone());
                right.push(left[1].clone());
            }
        }
        // bases are stored once: left ones first, then right ones
        let nl = left.len();
        let mut bases = left.clone();
        bases.extend(right.iter().cloned());
        let exhaustive = n.max(m) <= strategy.max_exhaustive_dim;

        let mut general = Grid::new(n, m);
        for (li, u) in left.iter().enumerate() {
            for (ri, v) in right.iter().enumerate() {
                let w = weights(a, u, v);
                scan_general(&mut general, &w, li, nl + ri, exhaustive);
            }
        }
        let (mut nested_up, mut nested_down, mut nested_equal) = (None, None, None);
        if n == m {
            let (mut up, mut down, mut eq) = (Grid::new(n, n), Grid::new(n, n), Grid::new(n, n));
            for (li, u) in left.iter().enumerate() {
                let w = weights(a, u, u);
                scan_nested(&mut up, &mut down, &mut eq, &w, li, exhaustive);
            }
            nested_up = Some(up);
            nested_down = Some(down);
            nested_equal = Some(eq);
        }
        let mut table = ProjectionTable {
            bases,
            general,
            nested_up,
            nested_down,
            nested_equal,
        };
        if strategy.stiefel_restarts > 0 {
            table.stiefel(a, strategy)?;
        }
        Ok(table)
    }

    fn stiefel(&mut self, a: &MatrixSeq, strategy: &SearchStrategy) -> Result<()> {
        let (n, m) = a.shape();
        for rp in 1..=n {
            for rq in 1..=m {
                let mut starts = Vec::new();
                if let Some(src) = self.general.get(rp, rq).src.clone() {
                    starts.push(self.materialize(&src).q);
                }
                let mut rng = rng_for(strategy.seed, ((rp as u64) << 32) | rq as u64);
                while starts.len() < strategy.stiefel_restarts {
                    starts.push(orthonormal_frame(ginibre(&mut rng, m, rq)));
                }
                for v in starts.into_iter().take(strategy.stiefel_restarts) {
                    let (val, u, v) = ascend(a, rp, v, strategy.stiefel_iters)?;
                    self.general
                        .offer(rp, rq, val, || Source::Frames(ProjectionPair { p: u, q: v }));
                }
            }
        }
        Ok(())
    }

    fn materialize(&self, src: &Source) -> ProjectionPair {
        match src {
            Source::Coordinate { left, right, e, f } => ProjectionPair {
                p: self.bases[*left].select_columns(e),
                q: self.bases[*right].select_columns(f),
            },
            Source::Frames(p) => p.clone(),
        }
    }

    fn pick(&self, grid: &Grid, score: impl Fn(f64, f64, f64) -> f64) -> (f64, Option<ProjectionPair>) {
        let (v, rp, rq) = grid.best(score);
        if rp == 0 {
            return (0.0, None);
        }
        let src = grid.get(rp, rq).src.as_ref().expect("scored cells have a source");
        (v, Some(self.materialize(src)))
    }

    /// Largest numerator found for the rank pair.
    pub fn numerator(&self, rp: usize, rq: usize) -> f64 {
        self.general.get(rp, rq).num
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.general.n, self.general.m)
    }

    /// k_t: sup (Σ‖P a_n Q‖²)^{1/2} / max(τ(P)^{1/2}, τ(Q)^{1/2}/t).
    pub fn k_t(&self, t: f64) -> (f64, Option<ProjectionPair>) {
        self.pick(&self.general, |num, rp, rq| num.sqrt() / rp.sqrt().max(rq.sqrt() / t))
    }

    /// k_t restricted to nested pairs (P ≤ Q for t > 1, Q ≤ P for t < 1, P = Q at t = 1).
    /// Only defined for square items.
    pub fn k_t_nested(&self, t: f64) -> Option<f64> {
        let grid = match Nesting::for_t(t) {
            Nesting::PBelowQ => self.nested_up.as_ref()?,
            Nesting::QBelowP => self.nested_down.as_ref()?,
            Nesting::Equal => self.nested_equal.as_ref()?,
        };
        Some(grid.best(|num, rp, rq| num.sqrt() / rp.sqrt().max(rq.sqrt() / t)).0)
    }

    /// k_t with exponents α0, α1 in place of 1/2.
    pub fn k_t_generalized(&self, t: f64, e: &ThetaQ) -> (f64, Option<ProjectionPair>) {
        let (a0, a1) = (e.alpha0(), e.alpha1());
        self.pick(&self.general, |num, rp, rq| num.sqrt() / rp.powf(a0).max(rq.powf(a1) / t))
    }

    /// sup Σ tr(P a_n Q a_n*) τ(P)^{−(1−θ)} τ(Q)^{−θ}.
    pub fn weak_type(&self, theta: f64) -> (f64, Option<ProjectionPair>) {
        self.pick(&self.general, |num, rp, rq| num * rp.powf(-(1.0 - theta)) * rq.powf(-theta))
    }

    /// sup Σ tr(P a_n Q a_n*) τ(Q)^{−1/r} τ(P)^{−1/s'}.
    pub fn weak_type_generalized(&self, e: &ThetaQ) -> (f64, Option<ProjectionPair>) {
        let (ir, isc) = (1.0 / e.r(), 1.0 / e.s_conjugate());
        self.pick(&self.general, |num, rp, rq| num * rq.powf(-ir) * rp.powf(-isc))
    }

    /// Rank pairs present in the table.
    pub fn rank_pairs(&self) -> Vec<(usize, usize)> {
        let (n, m) = self.dims();
        let mut v = Vec::new();
        for rp in 1..=n {
            for rq in 1..=m {
                if self.general.get(rp, rq).src.is_some() {
                    v.push((rp, rq));
                }
            }
        }
        v
    }
}

/// Lower bound on k_t (hence on K_t for the row/column couple) with its maximizing pair.
pub fn kt_projection_lower(a: &MatrixSeq, t: f64, strategy: &SearchStrategy) -> Result<(f64, Option<ProjectionPair>)> {
    Ok(ProjectionTable::build(a, strategy)?.k_t(t))
}

/// The nested-pair functional; `None` for non-square items.
pub fn kt_projection_nested(a: &MatrixSeq, t: f64, strategy: &SearchStrategy) -> Result<Option<f64>> {
    Ok(ProjectionTable::build(a, strategy)?.k_t_nested(t))
}

pub fn kt_generalized_lower(a: &MatrixSeq, t: f64, e: &ThetaQ, strategy: &SearchStrategy) -> Result<f64> {
    Ok(ProjectionTable::build(a, strategy)?.k_t_generalized(t, e).0)
}

pub fn weak_type_norm(a: &MatrixSeq, theta: f64, strategy: &SearchStrategy) -> Result<f64> {
    Ok(ProjectionTable::build(a, strategy)?.weak_type(theta).0)
}

pub fn weak_type_generalized(a: &MatrixSeq, e: &ThetaQ, strategy: &SearchStrategy) -> Result<f64> {
    Ok(ProjectionTable::build(a, strategy)?.weak_type_generalized(e).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{random_instance, InstanceFamily};

    fn e11(n: usize) -> MatrixSeq {
        MatrixSeq::single(ComplexMatrix::unit(n, n, 0, 0))
    }

    #[test]
    fn rank_one_unit() {
        for strategy in [SearchStrategy::coordinate(), SearchStrategy::default()] {
            let t = ProjectionTable::build(&e11(3), &strategy).unwrap();
            for s in [0.2, 1.0, 5.0] {
                let (v, pair) = t.k_t(s);
                assert!((v - s.min(1.0)).abs() < 1e-12, "t={s}: {v}");
                let pair = pair.unwrap();
                assert_eq!((pair.rank_p(), pair.rank_q()), (1, 1));
                assert!((pair.numerator(&e11(3)) - 1.0).abs() < 1e-12);
            }
            assert!((t.k_t_nested(1.0).unwrap() - 1.0).abs() < 1e-12);
            assert!((t.weak_type(0.3).0 - 1.0).abs() < 1e-12);
            let g = ThetaQ::generalized(0.4, f64::INFINITY, 3.0, 5.0).unwrap();
            assert!((t.weak_type_generalized(&g).0 - 1.0).abs() < 1e-12);
            assert!((t.k_t_generalized(0.5, &g).0 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_case() {
        let a = MatrixSeq::new(vec![
            ComplexMatrix::from_real(1, 1, &[3.0]).unwrap(),
            ComplexMatrix::from_real(1, 1, &[4.0]).unwrap(),
        ])
        .unwrap();
        let t = ProjectionTable::build(&a, &SearchStrategy::default()).unwrap();
        for s in [0.1, 1.0, 7.0] {
            assert!((t.k_t(s).0 - 5.0 * s.min(1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_at_infinity_is_plain() {
        let a = random_instance(2, 3, 2, InstanceFamily::Ginibre);
        let t = ProjectionTable::build(&a, &SearchStrategy::default()).unwrap();
        let inf = ThetaQ::generalized(0.5, 2.0, f64::INFINITY, f64::INFINITY).unwrap();
        for s in [0.3, 1.0, 2.5] {
            assert_eq!(t.k_t(s).0, t.k_t_generalized(s, &inf).0);
        }
        assert!((t.weak_type(0.5).0 - t.weak_type_generalized(&inf).0).abs() <= 1e-14 * t.weak_type(0.5).0);
    }

    #[test]
    fn nested_below_general_and_sanity_cap() {
        for seed in 0..5 {
            let a = random_instance(seed, 4, 3, InstanceFamily::Ginibre);
            let table = ProjectionTable::build(&a, &SearchStrategy::coordinate()).unwrap();
            for s in [0.3, 1.0, 3.0] {
                let k = table.k_t(s).0;
                let kh = table.k_t_nested(s).unwrap();
                assert!(kh <= k + 1e-12);
                assert!(k <= 2f64.sqrt() * kh + 1e-9);
                assert!(k <= s.max(1.0) * a.frob_norm() + 1e-12);
            }
        }
    }

    #[test]
    fn frames_are_orthonormal_and_numerators_reproduce() {
        let a = random_instance(8, 5, 2, InstanceFamily::Hermitian);
        let table = ProjectionTable::build(&a, &SearchStrategy::default()).unwrap();
        for s in [0.5, 2.0] {
            let (v, pair) = table.k_t(s);
            let pair = pair.unwrap();
            assert!(pair.frame_defect() < 1e-10);
            let direct = pair.numerator(&a).sqrt()
                / (pair.rank_p() as f64).sqrt().max((pair.rank_q() as f64).sqrt() / s);
            assert!((direct - v).abs() <= 1e-10 * v);
        }
    }

    #[test]
    fn stiefel_improves_on_coordinates_for_generic_input() {
        let a = random_instance(5, 4, 2, InstanceFamily::Ginibre);
        let coord = ProjectionTable::build(&a, &SearchStrategy::coordinate()).unwrap();
        let full = ProjectionTable::build(&a, &SearchStrategy::default()).unwrap();
        for (rp, rq) in coord.rank_pairs() {
            assert!(full.numerator(rp, rq) >= coord.numerator(rp, rq) - 1e-12);
        }
    }
}
