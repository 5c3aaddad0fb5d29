//! Primal-dual solver for sums of spectral norms of linear images of sequences.
//!
//! A program minimizes
//!
//! ```text
//! Σ_j c_j · ℓ_{r_j}( singular values pooled over the blocks of term j )
//! ```
//!
//! where every block is `layout(Σ_i coef_i · v_i + offset)` for sequence variables v_i
//! and `layout` is the row block [x_1 … x_N] or the column block [x_1; …; x_N].
//! Iterates follow Chambolle–Pock with the dual update projected onto the unit ball of
//! the dual norm. Every few iterations the dual iterate is turned into a certificate:
//! it is projected onto {K*u = 0}, rescaled into the dual ball, and paired with the
//! offsets, which gives a lower bound on the optimum.

use crate::error::Result;
use crate::lorentz::conjugate;
use crate::matcore::{c64, hermitian_eig, hermitian_eigvals, singular_values, ComplexMatrix};

use super::{gram_col, gram_row, MatrixSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Layout {
    Row,
    Col,
}

#[derive(Clone, Debug)]
pub(crate) struct Block {
    layout: Layout,
    coefs: Vec<f64>,
    offset: Option<MatrixSeq>,
}

impl Block {
    pub(crate) fn new(layout: Layout, coefs: Vec<f64>, offset: Option<MatrixSeq>) -> Self {
        Block {
            layout,
            coefs,
            offset,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Term {
    weight: f64,
    r: f64,
    blocks: Vec<Block>,
}

impl Term {
    pub(crate) fn new(weight: f64, r: f64, blocks: Vec<Block>) -> Self {
        assert!(weight > 0.0 && r >= 1.0);
        Term { weight, r, blocks }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SolveOptions {
    pub budget: usize,
    pub rel_gap: f64,
    pub check_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            budget: super::DEFAULT_BUDGET,
            rel_gap: super::DEFAULT_REL_GAP,
            check_every: 10,
        }
    }
}

/// Dual iterate: one sequence per block, grouped by term.
pub(crate) type Dual = Vec<Vec<MatrixSeq>>;

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub vars: Vec<MatrixSeq>,
    pub cost: f64,
    pub lower: f64,
    pub iterations: usize,
    pub dual: Dual,
}

pub(crate) struct Program {
    nvars: usize,
    len: usize,
    shape: (usize, usize),
    terms: Vec<Term>,
    /// Inverse of M = Σ_blocks coef coefᵀ, so that K*K = M ⊗ I.
    m_inv: Vec<Vec<f64>>,
    op_norm: f64,
}

impl Program {
    pub(crate) fn new(nvars: usize, template: &MatrixSeq, terms: Vec<Term>) -> Self {
        let mut m = vec![vec![0.0; nvars]; nvars];
        for t in &terms {
            for b in &t.blocks {
                assert_eq!(b.coefs.len(), nvars);
                for i in 0..nvars {
                    for j in 0..nvars {
                        m[i][j] += b.coefs[i] * b.coefs[j];
                    }
                }
            }
        }
        let mc = ComplexMatrix::from_fn(nvars, nvars, |i, j| c64(m[i][j], 0.0));
        let op_norm = hermitian_eigvals(&mc, 1e-12)
            .expect("coefficient Gram matrix is symmetric")[0]
            .sqrt();
        Program {
            nvars,
            len: template.len(),
            shape: template.shape(),
            terms,
            m_inv: invert_small(&m),
            op_norm,
        }
    }

    fn block_value(&self, b: &Block, vars: &[MatrixSeq]) -> MatrixSeq {
        let (r, c) = self.shape;
        let mut out = match &b.offset {
            Some(o) => o.clone(),
            None => MatrixSeq::zeros(self.len, r, c),
        };
        for (coef, v) in b.coefs.iter().zip(vars) {
            if *coef != 0.0 {
                out.axpy(*coef, v);
            }
        }
        out
    }

    fn term_value(&self, t: &Term, vars: &[MatrixSeq]) -> Result<f64> {
        let mut pooled = Vec::new();
        for b in &t.blocks {
            let v = self.block_value(b, vars);
            let m = match b.layout {
                Layout::Row => v.row_block(),
                Layout::Col => v.col_block(),
            };
            pooled.extend(singular_values(&m)?);
        }
        Ok(t.weight * lr_norm(&pooled, t.r))
    }

    pub(crate) fn objective(&self, vars: &[MatrixSeq]) -> Result<f64> {
        let mut s = 0.0;
        for t in &self.terms {
            s += self.term_value(t, vars)?;
        }
        Ok(s)
    }

    fn zero_dual(&self) -> Dual {
        let (r, c) = self.shape;
        self.terms
            .iter()
            .map(|t| vec![MatrixSeq::zeros(self.len, r, c); t.blocks.len()])
            .collect()
    }

    /// Lower bound certified by `dual`, after making it satisfy K*u = 0 and the norm bounds.
    pub(crate) fn certificate(&self, dual: &Dual) -> Result<f64> {
        let mut u = dual.clone();
        // g_i = Σ_b coef_{b,i} u_b
        let (r, c) = self.shape;
        let mut g = vec![MatrixSeq::zeros(self.len, r, c); self.nvars];
        for (t, ut) in self.terms.iter().zip(&u) {
            for (b, ub) in t.blocks.iter().zip(ut) {
                for (i, gi) in g.iter_mut().enumerate() {
                    if b.coefs[i] != 0.0 {
                        gi.axpy(b.coefs[i], ub);
                    }
                }
            }
        }
        let mut w = vec![MatrixSeq::zeros(self.len, r, c); self.nvars];
        for (i, wi) in w.iter_mut().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                if self.m_inv[i][j] != 0.0 {
                    wi.axpy(self.m_inv[i][j], gj);
                }
            }
        }
        for (t, ut) in self.terms.iter().zip(u.iter_mut()) {
            for (b, ub) in t.blocks.iter().zip(ut.iter_mut()) {
                for (i, wi) in w.iter().enumerate() {
                    if b.coefs[i] != 0.0 {
                        ub.axpy(-b.coefs[i], wi);
                    }
                }
            }
        }
        let mut scale = f64::INFINITY;
        for (t, ut) in self.terms.iter().zip(&u) {
            let nu = dual_norm(t, ut)?;
            if nu > 0.0 {
                scale = scale.min(t.weight / nu);
            }
        }
        let mut pairing = 0.0;
        for (t, ut) in self.terms.iter().zip(&u) {
            for (b, ub) in t.blocks.iter().zip(ut) {
                if let Some(o) = &b.offset {
                    pairing += ub.re_inner(o);
                }
            }
        }
        if !scale.is_finite() || pairing <= 0.0 {
            return Ok(0.0);
        }
        Ok(scale * pairing)
    }

    /// Runs the primal-dual iteration from `init`, also scoring the candidate duals in `seeds`.
    pub(crate) fn solve(&self, init: Vec<MatrixSeq>, seeds: &[Dual], opts: SolveOptions) -> Result<Solution> {
        assert_eq!(init.len(), self.nvars);
        let mut best_vars = init.clone();
        let mut best_cost = self.objective(&init)?;
        let mut best_lower: f64 = 0.0;
        let mut dual = self.zero_dual();
        for s in seeds {
            let lb = self.certificate(s)?;
            if lb > best_lower {
                best_lower = lb;
                dual = s.clone();
            }
        }
        let done = |cost: f64, lower: f64| cost - lower <= opts.rel_gap * cost.max(f64::MIN_POSITIVE);
        if done(best_cost, best_lower) || opts.budget == 0 {
            return Ok(Solution {
                vars: best_vars,
                cost: best_cost,
                lower: best_lower.min(best_cost),
                iterations: 0,
                dual,
            });
        }
        for (t, ut) in self.terms.iter().zip(dual.iter_mut()) {
            project_dual(t, ut)?;
        }

        let primal_scale = self
            .terms
            .iter()
            .flat_map(|t| t.blocks.iter())
            .filter_map(|b| b.offset.as_ref().map(|o| o.frob_norm()))
            .fold(0.0, f64::max)
            .max(init.iter().map(|v| v.frob_norm()).fold(0.0, f64::max))
            .max(f64::MIN_POSITIVE);
        let dual_scale = self.terms.iter().map(|t| t.weight).fold(0.0, f64::max);
        let omega = primal_scale / dual_scale;
        let tau = 0.95 * omega / self.op_norm;
        let sigma = 0.95 / (omega * self.op_norm);

        let mut x = init;
        let mut xbar = x.clone();
        let mut it = 0;
        while it < opts.budget {
            it += 1;
            // dual ascent at the extrapolated point
            for (t, ut) in self.terms.iter().zip(dual.iter_mut()) {
                for (b, ub) in t.blocks.iter().zip(ut.iter_mut()) {
                    let kb = self.block_value(b, &xbar);
                    ub.axpy(sigma, &kb);
                }
                project_dual(t, ut)?;
            }
            // primal descent: x_i −= τ Σ_b coef_{b,i} u_b
            let prev = x.clone();
            for (t, ut) in self.terms.iter().zip(&dual) {
                for (b, ub) in t.blocks.iter().zip(ut) {
                    for (i, xi) in x.iter_mut().enumerate() {
                        if b.coefs[i] != 0.0 {
                            xi.axpy(-tau * b.coefs[i], ub);
                        }
                    }
                }
            }
            for i in 0..self.nvars {
                xbar[i] = x[i].scale(2.0).sub(&prev[i]);
            }
            if it % opts.check_every == 0 || it == opts.budget {
                let cost = self.objective(&x)?;
                if cost < best_cost {
                    best_cost = cost;
                    best_vars = x.clone();
                }
                best_lower = best_lower.max(self.certificate(&dual)?);
                if done(best_cost, best_lower) {
                    break;
                }
            }
        }
        Ok(Solution {
            vars: best_vars,
            cost: best_cost,
            lower: best_lower.min(best_cost),
            iterations: it,
            dual,
        })
    }
}

/// (Σ s^r)^{1/r}, or max for r = ∞.
pub(crate) fn lr_norm(s: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return s.iter().cloned().fold(0.0, f64::max);
    }
    if r == 1.0 {
        return s.iter().sum();
    }
    let m = s.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    m * s.iter().map(|v| (v / m).powf(r)).sum::<f64>().powf(1.0 / r)
}

/// Eigen-decomposition of the layout Gram matrix; singular values are sqrt of its eigenvalues.
fn block_spectrum(u: &MatrixSeq, layout: Layout) -> Result<(Vec<f64>, ComplexMatrix)> {
    let g = match layout {
        Layout::Row => gram_row(u),
        Layout::Col => gram_col(u),
    };
    let e = hermitian_eig(&g.hermitian_part(), 1e-8)?;
    let s = e.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    Ok((s, e.eigenvectors))
}

fn dual_norm(t: &Term, ut: &[MatrixSeq]) -> Result<f64> {
    let rd = conjugate(t.r);
    if rd == 2.0 {
        return Ok(ut.iter().map(|u| u.frob_norm().powi(2)).sum::<f64>().sqrt());
    }
    let mut pooled = Vec::new();
    for (b, u) in t.blocks.iter().zip(ut) {
        let m = match b.layout {
            Layout::Row => u.row_block(),
            Layout::Col => u.col_block(),
        };
        pooled.extend(singular_values(&m)?);
    }
    Ok(lr_norm(&pooled, rd))
}

/// Replaces each block by h(G)·u (row) or u·h(G) (column) with h the ratio map of the
/// singular values.
fn apply_ratio(u: &mut MatrixSeq, layout: Layout, vecs: &ComplexMatrix, ratio: &[f64]) {
    let n = vecs.rows();
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = c64(0.0, 0.0);
            for (k, &rk) in ratio.iter().enumerate() {
                if rk != 0.0 {
                    s += vecs[(i, k)] * vecs[(j, k)].conj() * rk;
                }
            }
            h[(i, j)] = s;
        }
    }
    for x in u.items_mut() {
        *x = match layout {
            Layout::Row => h.matmul(x),
            Layout::Col => x.matmul(&h),
        };
    }
}

/// Projection of the term's dual blocks onto {ℓ_{r'}(pooled singular values) ≤ weight}.
fn project_dual(t: &Term, ut: &mut [MatrixSeq]) -> Result<()> {
    let rd = conjugate(t.r);
    if rd == 2.0 {
        let nu = ut.iter().map(|u| u.frob_norm().powi(2)).sum::<f64>().sqrt();
        if nu > t.weight {
            for u in ut.iter_mut() {
                *u = u.scale(t.weight / nu);
            }
        }
        return Ok(());
    }
    let mut spectra = Vec::with_capacity(ut.len());
    let mut pooled = Vec::new();
    for (b, u) in t.blocks.iter().zip(ut.iter()) {
        let (s, v) = block_spectrum(u, b.layout)?;
        pooled.extend_from_slice(&s);
        spectra.push((s, v));
    }
    if lr_norm(&pooled, rd) <= t.weight {
        return Ok(());
    }
    let projected = project_lr_ball(&pooled, rd, t.weight);
    let mut off = 0;
    for ((b, u), (s, v)) in t.blocks.iter().zip(ut.iter_mut()).zip(&spectra) {
        let ratio: Vec<f64> = s
            .iter()
            .zip(&projected[off..off + s.len()])
            .map(|(&a, &b)| if a > 0.0 { (b / a).min(1.0) } else { 0.0 })
            .collect();
        off += s.len();
        apply_ratio(u, b.layout, v, &ratio);
    }
    Ok(())
}

/// Euclidean projection of a nonnegative vector onto {‖x‖_ρ ≤ radius}.
pub(crate) fn project_lr_ball(s: &[f64], rho: f64, radius: f64) -> Vec<f64> {
    if lr_norm(s, rho) <= radius {
        return s.to_vec();
    }
    if rho.is_infinite() {
        return s.iter().map(|&v| v.min(radius)).collect();
    }
    if rho == 2.0 {
        let c = radius / lr_norm(s, 2.0);
        return s.iter().map(|&v| v * c).collect();
    }
    if rho == 1.0 {
        // soft threshold at the level λ where Σ (s − λ)_+ = radius
        let mut sorted = s.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cum = 0.0;
        let mut lambda = 0.0;
        for (k, &v) in sorted.iter().enumerate() {
            cum += v;
            let l = (cum - radius) / (k + 1) as f64;
            if k + 1 == sorted.len() || sorted[k + 1] <= l {
                lambda = l;
                break;
            }
        }
        return s.iter().map(|&v| (v - lambda).max(0.0)).collect();
    }
    // KKT: x_i + μ ρ x_i^{ρ−1} = s_i; Σ x_i^ρ is decreasing in μ
    let solve_x = |si: f64, mu: f64| -> f64 {
        if si <= 0.0 {
            return 0.0;
        }
        let phi = |x: f64| x + mu * rho * x.powf(rho - 1.0) - si;
        let (mut lo, mut hi) = (0.0, si);
        let mut x = si;
        for _ in 0..100 {
            let f = phi(x);
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = 1.0 + mu * rho * (rho - 1.0) * x.powf(rho - 2.0);
            let mut nx = x - f / d;
            if !(nx > lo && nx < hi) || !nx.is_finite() {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() <= 1e-15 * si {
                return nx;
            }
            x = nx;
        }
        x
    };
    let target = radius.powf(rho);
    let total = |mu: f64| s.iter().map(|&v| solve_x(v, mu).powf(rho)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while total(hi) > target {
        hi *= 4.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    s.iter().map(|&v| solve_x(v, hi)).collect()
}

/// A dual element D with ⟨D, x⟩ = ℓ_r(singular values of layout(x)) and dual norm 1.
pub(crate) fn norming_dual(x: &MatrixSeq, layout: Layout, r: f64) -> Result<MatrixSeq> {
    let (s, v) = block_spectrum(x, layout)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let mut u = x.clone();
    if smax == 0.0 {
        return Ok(u.scale(0.0));
    }
    let keep = |si: f64| si > 1e-12 * smax;
    let d: Vec<f64> = if r.is_infinite() {
        let mut d = vec![0.0; s.len()];
        d[0] = 1.0;
        d
    } else if r == 1.0 {
        s.iter().map(|&si| if keep(si) { 1.0 } else { 0.0 }).collect()
    } else {
        let norm = lr_norm(&s, r);
        s.iter().map(|&si| (si / norm).powf(r - 1.0)).collect()
    };
    let ratio: Vec<f64> = s
        .iter()
        .zip(&d)
        .map(|(&si, &di)| if keep(si) { di / si } else { 0.0 })
        .collect();
    apply_ratio(&mut u, layout, &v, &ratio);
    Ok(u)
}

fn invert_small(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        assert!(a[piv][col].abs() > 1e-14, "every variable must appear in some block");
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}
