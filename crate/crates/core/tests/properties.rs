use proptest::prelude::*;
use rowcol::decomp::{atom_row_col_bound, layer_cake, reconstruct, schur_split};
use rowcol::khintchine::{mixed_lorentz_norm, sign_average, SignMode, SignPattern};
use rowcol::lorentz::{lorentz_norm, s_numbers, Exponents, StepFunction};
use rowcol::matcore::{
    haar_unitary, hermitian_eigvals, ComplexMatrix, psd_sqrt, random_instance, rng_for, InstanceFamily,
    DEFAULT_HERMITIAN_TOL,
};
use rowcol::seqnorms::{col_norm, intersect_norm, row_norm, sum_norm, MatrixSeq};

fn family() -> impl Strategy<Value = InstanceFamily> {
    prop_oneof![
        Just(InstanceFamily::Ginibre),
        Just(InstanceFamily::Hermitian),
        Just(InstanceFamily::Diagonal),
        Just(InstanceFamily::RankOne),
    ]
}

fn exponents() -> impl Strategy<Value = Exponents> {
    (0.6f64..6.0, prop_oneof![1.0f64..6.0, Just(f64::INFINITY)]).prop_map(|(p, q)| Exponents::new(p, q).unwrap())
}

fn step() -> impl Strategy<Value = StepFunction> {
    prop::collection::vec((0.0f64..5.0, 0.05f64..3.0), 1..6).prop_map(|v| StepFunction::from_pairs(v).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_eigenvalue_sum(seed in any::<u64>(), n in 1usize..7) {
        let a = random_instance(seed, n, 1, InstanceFamily::Hermitian).into_items().remove(0);
        let ev = hermitian_eigvals(&a, DEFAULT_HERMITIAN_TOL).unwrap();
        prop_assert!(close(a.trace().re, ev.iter().sum(), 1e-10));
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn norms_are_unitarily_invariant(seed in any::<u64>(), n in 1usize..5, len in 1usize..4, e in exponents()) {
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let mut rng = rng_for(seed, 7);
        let u = haar_unitary(&mut rng, n);
        let v = haar_unitary(&mut rng, n);
        // U x_k V* keeps row and column Gram spectra
        let y = x.map(|a| u.matmul(a).mul_adj(&v));
        prop_assert!(close(row_norm(&x, e).unwrap(), row_norm(&y, e).unwrap(), 1e-9));
        prop_assert!(close(col_norm(&x, e).unwrap(), col_norm(&y, e).unwrap(), 1e-9));
    }

    #[test]
    fn psd_sqrt_is_monotone_on_diagonals(d in prop::collection::vec((0.0f64..10.0, 0.0f64..5.0), 1..6)) {
        let a: Vec<f64> = d.iter().map(|p| p.0).collect();
        let b: Vec<f64> = d.iter().map(|p| p.0 + p.1).collect();
        let ra = psd_sqrt(&ComplexMatrix::from_diag_real(&a)).unwrap();
        let rb = psd_sqrt(&ComplexMatrix::from_diag_real(&b)).unwrap();
        let diff = hermitian_eigvals(&(&rb - &ra).hermitian_part(), DEFAULT_HERMITIAN_TOL).unwrap();
        prop_assert!(*diff.last().unwrap() >= -1e-12);
        prop_assert!(ra.is_diagonal());
    }

    #[test]
    fn lorentz_norm_is_homogeneous(f in step(), e in exponents(), c in 0.01f64..100.0) {
        let a = lorentz_norm(&f, e).unwrap();
        let b = lorentz_norm(&f.scaled(c), e).unwrap();
        prop_assert!(close(b, c * a, 1e-12));
    }

    #[test]
    fn s_numbers_total_mass(seed in any::<u64>(), n in 1usize..6, fam in family(), w in 0.1f64..3.0) {
        let a = random_instance(seed, n, 1, fam).into_items().remove(0);
        let s = s_numbers(&a, w).unwrap();
        prop_assert!(close(s.total_measure(), n as f64 * w, 1e-12));
        prop_assert!(s.values().windows(2).all(|v| v[0] > v[1]));
    }

    #[test]
    fn intersection_norm_is_subadditive(seed in any::<u64>(), n in 1usize..5, len in 1usize..4, p in 1.0f64..8.0) {
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let y = random_instance(seed ^ 0x5555, n, len, InstanceFamily::Ginibre);
        let e = Exponents::schatten(p).unwrap();
        let lhs = intersect_norm(&x.add(&y), e).unwrap();
        let rhs = intersect_norm(&x, e).unwrap() + intersect_norm(&y, e).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10));
    }

    #[test]
    fn layer_cake_invariants(seed in any::<u64>(), k in 0u64..1000) {
        let (g, f, t) = rowcol::decomp::random_layer_cake_input(seed, k, 6);
        let atoms = layer_cake(&g, &f, t).unwrap();
        let r = reconstruct(&atoms, g.len(), f.len());
        let mut total = 0.0;
        for a in &atoms {
            total += a.weight;
            prop_assert!(a.weight > 0.0);
            prop_assert!(close(atom_row_col_bound(a), 1.0, 1e-12));
        }
        prop_assert!(total <= 2.0 * (1.0 + 1e-12));
        for (i, gi) in g.iter().enumerate() {
            for (j, fj) in f.iter().enumerate() {
                prop_assert!((r[i][j] - gi.min(*fj)).abs() <= 1e-12 * gi.max(*fj).max(1e-300));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sum_norm_below_both_one_sided_norms(seed in any::<u64>(), n in 1usize..4, len in 1usize..4, p in prop_oneof![Just(1.0f64), Just(1.5), Just(3.0), Just(f64::INFINITY)]) {
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let e = Exponents::schatten(p).unwrap();
        let s = sum_norm(&x, e, 2000).unwrap();
        let bound = row_norm(&x, e).unwrap().min(col_norm(&x, e).unwrap());
        prop_assert!(s.lower <= s.cost && s.cost <= bound * (1.0 + 1e-12));
        prop_assert!(s.y.add(&s.z).sub(&x).max_abs() <= 1e-10 * x.max_abs());
    }

    #[test]
    fn sum_norm_lower_bound_is_subadditive(seed in any::<u64>(), n in 1usize..4, len in 1usize..4) {
        let e = Exponents::schatten(2.0).unwrap();
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let y = random_instance(seed ^ 0xabcd, n, len, InstanceFamily::RankOne);
        let sx = sum_norm(&x, e, 2000).unwrap();
        let sy = sum_norm(&y, e, 2000).unwrap();
        let sxy = sum_norm(&x.add(&y), e, 2000).unwrap();
        prop_assert!(sxy.lower <= (sx.cost + sy.cost) * (1.0 + 1e-10));
    }

    #[test]
    fn intersection_and_sum_norms_pair_dually(seed in any::<u64>(), n in 1usize..4, len in 1usize..4) {
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let y = random_instance(seed ^ 0x9e37, n, len, InstanceFamily::Ginibre);
        let pairing = x.re_inner(&y).abs();
        let s = sum_norm(&y, Exponents::trace_class(), 2000).unwrap();
        prop_assert!(pairing <= intersect_norm(&x, Exponents::operator()).unwrap() * s.cost * (1.0 + 1e-10));
    }

    #[test]
    fn sign_average_permutation_and_sign_invariance(seed in any::<u64>(), n in 1usize..4, len in 1usize..6, e in exponents(), flips in any::<u8>()) {
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let base = sign_average(&x, e, SignMode::Exact).unwrap().mean;
        let mut items = x.clone().into_items();
        items.reverse();
        for (k, a) in items.iter_mut().enumerate() {
            if flips >> k & 1 == 1 {
                *a = a.scale(-1.0);
            }
        }
        let y = MatrixSeq::new(items).unwrap();
        let other = sign_average(&y, e, SignMode::Exact).unwrap().mean;
        prop_assert!(close(base, other, 1e-12));
    }

    #[test]
    fn fubini_at_equal_exponents(seed in any::<u64>(), n in 1usize..4, len in 1usize..6, p in 1.0f64..5.0) {
        // averaging ‖·‖_p^p over patterns is the p-th power of the mixed norm
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let e = Exponents::schatten(p).unwrap();
        let patterns = 1u64 << len;
        let mut avg = 0.0;
        for m in 0..patterns {
            let s = s_numbers(&SignPattern::from_mask(len, m).apply(&x), 1.0).unwrap();
            avg += lorentz_norm(&s, e).unwrap().powf(p) / patterns as f64;
        }
        let mixed = mixed_lorentz_norm(&x, e, SignMode::Exact).unwrap();
        prop_assert!(close(avg, mixed.powf(p), 1e-9));
    }

    #[test]
    fn schur_certificate_on_small_instances(seed in any::<u64>(), n in 1usize..4, len in 1usize..4, p0 in prop_oneof![Just(1.0f64), Just(4.0 / 3.0), Just(4.0), Just(f64::INFINITY)]) {
        let x = random_instance(seed, n, len, InstanceFamily::Ginibre);
        let cert = schur_split(&x, p0, None, 2000).unwrap();
        prop_assert!(cert.reconstruction_error(&x) <= 1e-9 * x.max_abs().max(1.0));
        prop_assert!(cert.all_hold(), "{:?}", cert.bounds);
    }
}
