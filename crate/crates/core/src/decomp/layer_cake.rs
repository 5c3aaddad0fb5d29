//! Rectangle decomposition of g(i) ∧ f(j) into normalized indicator atoms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::rng_for;

const PRE_TOL: f64 = 1e-12;

/// 1_{E×F} / (|E|/t² + |F|), carried with its weight in the decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectAtom {
    /// Row indices (0-based).
    #[serde(rename = "E")]
    pub e: Vec<usize>,
    /// Column indices (0-based).
    #[serde(rename = "F")]
    pub f: Vec<usize>,
    pub t: f64,
    pub weight: f64,
    /// Constant value of the atom on E × F.
    pub value: f64,
}

impl RectAtom {
    pub fn mass(&self) -> f64 {
        self.e.len() as f64 / (self.t * self.t) + self.f.len() as f64
    }
}

fn check_vector(name: &str, v: &[f64]) -> Result<f64> {
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::PreconditionViolated(format!(
            "{name} must be finite and nonnegative, found {x}"
        )));
    }
    Ok(v.iter().sum())
}

/// Slices φ(i, j) = g(i) ∧ f(j) at the distinct levels of f and g.
///
/// Requires Σf ≤ 1 and Σg ≤ t²; the weights then sum to Σg/t² + Σf ≤ 2.
pub fn layer_cake(g: &[f64], f: &[f64], t: f64) -> Result<Vec<RectAtom>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t} must be positive and finite")));
    }
    let sg = check_vector("g", g)?;
    let sf = check_vector("f", f)?;
    if sf > 1.0 + PRE_TOL {
        return Err(Error::PreconditionViolated(format!("Σf = {sf} exceeds 1")));
    }
    if sg > t * t * (1.0 + PRE_TOL) {
        return Err(Error::PreconditionViolated(format!("Σg = {sg} exceeds t² = {}", t * t)));
    }
    let mut levels: Vec<f64> = g.iter().chain(f).copied().chain([0.0]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut atoms = Vec::new();
    for w in levels.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let e: Vec<usize> = (0..g.len()).filter(|&i| g[i] > lo).collect();
        let ff: Vec<usize> = (0..f.len()).filter(|&j| f[j] > lo).collect();
        if e.is_empty() || ff.is_empty() {
            break;
        }
        let m = e.len() as f64 / (t * t) + ff.len() as f64;
        atoms.push(RectAtom {
            e,
            f: ff,
            t,
            weight: m * (hi - lo),
            value: 1.0 / m,
        });
    }
    Ok(atoms)
}

/// t^{−2}|E|·v + |F|·v: the row/column budget used by one atom.
pub fn atom_row_col_bound(atom: &RectAtom) -> f64 {
    atom.mass() * atom.value
}

/// Σ weight·atom as a dense rows × cols array.
pub fn reconstruct(atoms: &[RectAtom], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; cols]; rows];
    for a in atoms {
        let c = a.weight * a.value;
        for &i in &a.e {
            for &j in &a.f {
                out[i][j] += c;
            }
        }
    }
    out
}

/// A reproducible (g, f, t) satisfying the preconditions of [`layer_cake`]: sizes up to
/// `size_max`, t log-uniform in [e^{−2}, e^2], values drawn from a small grid so that ties
/// occur, and every third instance saturating Σg = t² and Σf = 1.
pub fn random_layer_cake_input(seed: u64, k: u64, size_max: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut rng = rng_for(seed, k);
    let rows = rng.random_range(1..=size_max);
    let cols = rng.random_range(1..=size_max);
    let t = rng.random_range(-2.0..2.0f64).exp();
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| {
                if rng.random_bool(0.15) {
                    0.0
                } else {
                    f64::from(rng.random_range(1..=8u32)) * rng.random_range(0.5..1.5)
                }
            })
            .collect()
    };
    let mut g = draw(rows);
    let mut f = draw(cols);
    let saturate = k % 3 == 0;
    let (sg, sf): (f64, f64) = (g.iter().sum(), f.iter().sum());
    let cg = if saturate { 1.0 } else { rng.random_range(0.1..1.0) };
    let cf = if saturate { 1.0 } else { rng.random_range(0.1..1.0) };
    if sg > 0.0 {
        g.iter_mut().for_each(|v| *v *= cg * t * t / sg);
    }
    if sf > 0.0 {
        f.iter_mut().for_each(|v| *v *= cf / sf);
    }
    (g, f, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let atoms = layer_cake(&[2.0, 2.0], &[0.5, 0.5], 2.0).unwrap();
        assert_eq!(atoms.len(), 1);
        let a = &atoms[0];
        assert_eq!((a.e.clone(), a.f.clone()), (vec![0, 1], vec![0, 1]));
        assert!((a.weight - 1.25).abs() < 1e-15 && (a.value - 0.4).abs() < 1e-15);
        assert!((atom_row_col_bound(a) - 1.0).abs() < 1e-15);
        let r = reconstruct(&atoms, 2, 2);
        assert!(r.iter().flatten().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn zero_input_gives_no_atoms() {
        assert!(layer_cake(&[0.0, 0.0], &[0.3], 1.0).unwrap().is_empty());
        assert!(layer_cake(&[0.5], &[0.0], 1.0).unwrap().is_empty());
    }

    #[test]
    fn singleton_atom() {
        let atoms = layer_cake(&[1.0], &[1.0], 1.0).unwrap();
        assert_eq!(atoms.len(), 1);
        assert_eq!(atom_row_col_bound(&atoms[0]), 1.0);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            layer_cake(&[1.0], &[0.6, 0.6], 1.0),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            layer_cake(&[3.0, 2.0], &[0.5], 2.0),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(layer_cake(&[-1.0], &[0.5], 2.0).is_err());
    }

    #[test]
    fn json_field_names() {
        let atoms = layer_cake(&[1.0], &[1.0], 1.0).unwrap();
        let s = serde_json::to_string(&atoms[0]).unwrap();
        assert!(s.contains("\"E\":[0]") && s.contains("\"F\":[0]"));
    }
}
