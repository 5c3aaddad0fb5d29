//! Upper bounds on K_t from explicit decompositions a = a0 + a1, with dual certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentz::Exponents;
use crate::seqnorms::spectral::{norming_dual, Block, Dual, Layout, Program, SolveOptions, Term};
use crate::seqnorms::{col_norm, intersect_norm, row_norm, MatrixSeq, SumSplit, DEFAULT_REL_GAP};

/// The compatible couple whose K-functional is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPair {
    /// (M(R), M(C)): row and column operator norms.
    #[serde(alias = "RC")]
    Rc,
    /// (S_∞(R) ∩ S_∞(C), S_1(R) + S_1(C)).
    #[serde(alias = "A0A1")]
    A0a1,
}

/// Primal and dual state carried from one t to the next along a grid.
#[derive(Clone, Debug)]
pub struct WarmStart {
    vars: Vec<MatrixSeq>,
    dual: Dual,
}

fn program(a: &MatrixSeq, t: f64, pair: KPair) -> Program {
    match pair {
        KPair::Rc => Program::new(
            1,
            a,
            vec![
                Term::new(1.0, f64::INFINITY, vec![Block::new(Layout::Row, vec![1.0], None)]),
                Term::new(
                    t,
                    f64::INFINITY,
                    vec![Block::new(Layout::Col, vec![-1.0], Some(a.clone()))],
                ),
            ],
        ),
        // variables (a0, y); a1 = a − a0 is split as y + (a1 − y)
        KPair::A0a1 => Program::new(
            2,
            a,
            vec![
                Term::new(
                    1.0,
                    f64::INFINITY,
                    vec![
                        Block::new(Layout::Row, vec![1.0, 0.0], None),
                        Block::new(Layout::Col, vec![1.0, 0.0], None),
                    ],
                ),
                Term::new(t, 1.0, vec![Block::new(Layout::Row, vec![0.0, 1.0], None)]),
                Term::new(
                    t,
                    1.0,
                    vec![Block::new(Layout::Col, vec![-1.0, -1.0], Some(a.clone()))],
                ),
            ],
        ),
    }
}

fn seeds(a: &MatrixSeq, pair: KPair) -> Result<Vec<Dual>> {
    let mut out = Vec::new();
    for (layout, r) in [
        (Layout::Row, f64::INFINITY),
        (Layout::Col, f64::INFINITY),
        (Layout::Row, 1.0),
        (Layout::Col, 1.0),
    ] {
        let d = norming_dual(a, layout, r)?;
        match pair {
            KPair::Rc => out.push(vec![vec![d.clone()], vec![d]]),
            KPair::A0a1 => {
                let zero = d.scale(0.0);
                let half = d.scale(0.5);
                out.push(vec![vec![half.clone(), half], vec![d.clone()], vec![d.clone()]]);
                out.push(vec![vec![d.clone(), zero.clone()], vec![d.clone()], vec![d.clone()]]);
                out.push(vec![vec![zero, d.clone()], vec![d.clone()], vec![d]]);
            }
        }
    }
    Ok(out)
}

/// Candidate starting points: a0 = a, and a0 = 0 with a1 assigned to its cheaper side.
fn initial_points(a: &MatrixSeq, pair: KPair) -> Result<Vec<Vec<MatrixSeq>>> {
    let zero = a.scale(0.0);
    Ok(match pair {
        KPair::Rc => vec![vec![a.clone()], vec![zero]],
        KPair::A0a1 => {
            let tr = Exponents::trace_class();
            let y = if row_norm(a, tr)? <= col_norm(a, tr)? {
                a.clone()
            } else {
                zero.clone()
            };
            vec![vec![a.clone(), zero.clone()], vec![zero, y]]
        }
    })
}

/// Minimizes ‖a0‖_0 + t‖a − a0‖_1 for the requested couple and returns the best split
/// (y = a0, z = a1) with its certified lower bound, plus state for warm-starting a
/// neighbouring t.
pub fn kt_solve(
    a: &MatrixSeq,
    t: f64,
    pair: KPair,
    budget: usize,
    rel_gap: f64,
    warm: Option<&WarmStart>,
) -> Result<(SumSplit, WarmStart)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t} must be positive and finite")));
    }
    let prog = program(a, t, pair);
    if a.is_zero() {
        let zero = a.scale(0.0);
        let nv = if pair == KPair::Rc { 1 } else { 2 };
        return Ok((
            SumSplit {
                y: zero.clone(),
                z: zero.clone(),
                cost: 0.0,
                lower: 0.0,
                gap: 0.0,
                iterations: 0,
            },
            WarmStart {
                vars: vec![zero; nv],
                dual: Vec::new(),
            },
        ));
    }
    let mut candidates = initial_points(a, pair)?;
    let mut dual_seeds = seeds(a, pair)?;
    if let Some(w) = warm {
        candidates.push(w.vars.clone());
        dual_seeds.insert(0, w.dual.clone());
    }
    let mut init = candidates[0].clone();
    let mut init_cost = f64::INFINITY;
    for c in candidates {
        let v = prog.objective(&c)?;
        if v < init_cost {
            init_cost = v;
            init = c;
        }
    }
    let sol = prog.solve(
        init,
        &dual_seeds,
        SolveOptions {
            budget,
            rel_gap,
            ..SolveOptions::default()
        },
    )?;
    let a0 = sol.vars[0].clone();
    let a1 = a.sub(&a0);
    Ok((
        SumSplit {
            y: a0,
            z: a1,
            cost: sol.cost,
            lower: sol.lower,
            gap: (sol.cost - sol.lower).max(0.0),
            iterations: sol.iterations,
        },
        WarmStart {
            vars: sol.vars,
            dual: sol.dual,
        },
    ))
}

/// Best found value of K_t(a) for the couple: a true upper bound, certified to within the
/// returned split's gap. `BudgetExhausted` carries the split when the gap stays above the
/// default relative tolerance.
pub fn kt_upper(a: &MatrixSeq, t: f64, pair: KPair, budget: usize) -> Result<(f64, SumSplit)> {
    let (split, _) = kt_solve(a, t, pair, budget, DEFAULT_REL_GAP, None)?;
    if split.gap > DEFAULT_REL_GAP * split.cost.max(f64::MIN_POSITIVE) {
        return Err(Error::BudgetExhausted(Box::new(split)));
    }
    Ok((split.cost, split))
}

/// ‖a‖ in the left space of the couple.
pub fn endpoint0_norm(a: &MatrixSeq, pair: KPair) -> Result<f64> {
    match pair {
        KPair::Rc => row_norm(a, Exponents::operator()),
        KPair::A0a1 => intersect_norm(a, Exponents::operator()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c64, random_instance, ComplexMatrix, InstanceFamily};
    use crate::seqnorms::DEFAULT_BUDGET;

    #[test]
    fn single_item_rc_is_min_one_t_times_op() {
        let a = random_instance(4, 3, 1, InstanceFamily::Ginibre);
        let op = row_norm(&a, Exponents::operator()).unwrap();
        for t in [0.1, 0.7, 1.0, 3.0] {
            let (v, s) = kt_upper(&a, t, KPair::Rc, DEFAULT_BUDGET).unwrap();
            let want = t.min(1.0) * op;
            assert!((v - want).abs() <= 1e-6 * op, "t={t}: {v} vs {want}");
            assert!(s.lower <= v && s.y.add(&s.z).sub(&a).max_abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_sequence() {
        let a = MatrixSeq::new(vec![
            ComplexMatrix::from_vec(1, 1, vec![c64(1.0, 0.0)]).unwrap(),
            ComplexMatrix::zeros(1, 1),
            ComplexMatrix::zeros(1, 1),
        ])
        .unwrap();
        for t in [0.25, 1.0, 4.0] {
            let (v, _) = kt_upper(&a, t, KPair::Rc, DEFAULT_BUDGET).unwrap();
            assert!((v - t.min(1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn large_t_reaches_row_norm() {
        let a = random_instance(11, 3, 3, InstanceFamily::Ginibre);
        let r = row_norm(&a, Exponents::operator()).unwrap();
        let (v, s) = kt_upper(&a, 1e4, KPair::Rc, DEFAULT_BUDGET).unwrap();
        assert!(v <= r + 1e-12 && v >= r - s.gap - 1e-9);
    }

    #[test]
    fn a0a1_single_item_matches_trace_formula() {
        let a = random_instance(21, 4, 1, InstanceFamily::Ginibre);
        let sv = crate::matcore::singular_values(&a.items()[0]).unwrap();
        for t in [0.3, 0.5, 1.5] {
            // t ∫_0^{1/t} σ*
            let u: f64 = 1.0 / t;
            let mut acc = 0.0;
            for (k, s) in sv.iter().enumerate() {
                acc += s * (u - k as f64).clamp(0.0, 1.0);
            }
            let want = t * acc;
            let (split, _) = kt_solve(&a, t, KPair::A0a1, DEFAULT_BUDGET, 1e-6, None).unwrap();
            assert!(split.lower <= want * (1.0 + 1e-9) && split.cost >= want * (1.0 - 1e-9));
            assert!(split.gap <= 1e-3 * want, "t={t}: gap {}", split.gap);
        }
    }
}
