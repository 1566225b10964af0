mod common;

use common::*;
use g2core::g2algebra::{canonical_phi0, canonical_psi0, volume_form};
use g2core::tensor7::*;
use proptest::prelude::*;

fn basis_form(idx: &[usize]) -> Tensor7 {
    idx.iter().map(|&i| Tensor7::basis1(i)).reduce(|a, b| wedge(&a, &b).unwrap()).unwrap()
}

fn random_metric(seed: u64) -> Metric7 {
    let mut r = rng(seed);
    let a = near_identity(&mut r, 0.3);
    Metric7::new(a.transpose() * a).unwrap()
}

#[test]
fn alternating_symbol_entries() {
    let e = alternating_symbol();
    assert_eq!(e.get(&[0, 1, 2, 3, 4, 5, 6]), 1.0);
    assert_eq!(e.get(&[1, 0, 2, 3, 4, 5, 6]), -1.0);
    assert_eq!(e.get(&[0, 0, 2, 3, 4, 5, 6]), 0.0);
    assert_eq!(*e.hint(), SymmetryHint::Antisymmetric);
}

#[test]
fn contraction_examples() {
    let g = Metric7::identity();
    let phi = canonical_phi0();
    let c = contract_form_into_form(&Tensor7::basis1(0), &phi, &g).unwrap();
    let expect = &(&basis_form(&[1, 2]) + &basis_form(&[3, 4])) + &basis_form(&[5, 6]);
    assert_eq!(c.max_abs_diff(&expect), 0.0);
    assert_eq!(contract_form_into_form(&phi, &phi, &g).unwrap().value(), 42.0);
    let z = contract_form_into_form(&Tensor7::zeros(1), &phi, &g).unwrap();
    assert_eq!(z.max_abs(), 0.0);
    assert!(contract_form_into_form(&canonical_psi0(), &phi, &g).is_err());
}

#[test]
fn wedge_examples() {
    let e12 = wedge(&Tensor7::basis1(0), &Tensor7::basis1(1)).unwrap();
    assert_eq!(e12.get(&[0, 1]), 1.0);
    assert_eq!(e12.get(&[1, 0]), -1.0);
    let top = wedge(&canonical_phi0(), &canonical_psi0()).unwrap();
    assert_eq!(top.get(&[0, 1, 2, 3, 4, 5, 6]), 7.0);
    assert!(wedge(&canonical_psi0(), &canonical_psi0()).is_err());
    let vol = basis_form(&[0, 1, 2, 3, 4, 5, 6]);
    assert_eq!(vol.get(&[0, 1, 2, 3, 4, 5, 6]), 1.0);
}

#[test]
fn hodge_examples() {
    let g = Metric7::identity();
    assert_eq!(hodge_star(&canonical_phi0(), &g).unwrap().max_abs_diff(&canonical_psi0()), 0.0);
    let vol = hodge_star(&Tensor7::scalar(1.0), &g).unwrap();
    assert_eq!(vol.max_abs_diff(&volume_form(&g)), 0.0);
    assert_eq!(hodge_star(&vol, &g).unwrap().value(), 1.0);
    let s = hodge_star(&basis_form(&[0, 1, 2]), &g).unwrap();
    assert_eq!(s.max_abs_diff(&basis_form(&[3, 4, 5, 6])), 0.0);
}

#[test]
fn raise_lower_examples() {
    let mut r = rng(3);
    let t = rand_tensor(&mut r, 3, 1.0);
    let id = Metric7::identity();
    assert_eq!(t.raise(1, &id).unwrap().max_abs_diff(&t), 0.0);
    let mut d = Mat7::identity();
    d[(0, 0)] = 4.0;
    let g = Metric7::new(d).unwrap();
    let up = Tensor7::basis1(0).raise(0, &g).unwrap();
    assert!((up.get(&[0]) - 0.25).abs() < 1e-15);
    assert_eq!(up.variance(), &[Variance::Up]);
    let g = random_metric(4);
    for slot in 0..3 {
        let back = t.raise(slot, &g).unwrap().lower(slot, &g).unwrap();
        assert!(back.max_abs_diff(&t) < 1e-13);
    }
    assert!(t.raise(3, &g).is_err());
}

#[test]
fn metric_invariants() {
    let g = random_metric(11);
    assert!((g.g * g.g_inv - Mat7::identity()).amax() < 1e-12);
    assert!(g.leading_minors().iter().all(|m| *m > 0.0));
    assert!((g.sqrt_det.powi(2) / g.g.determinant() - 1.0).abs() < 1e-12);
    assert!(Metric7::new(-Mat7::identity()).is_err());
}

#[test]
fn bad_lengths_are_errors() {
    assert!(Tensor7::from_vec(2, vec![0.0; 48]).is_err());
    assert!(Tensor7::from_vec(9, vec![]).is_err());
}

#[test]
fn antisymmetric_hint_sign_changes() {
    let mut r = rng(5);
    for k in 2..=5 {
        let t = rand_form(&mut r, k, 1.0);
        assert!(t.antisymmetry_defect() < 1e-14, "rank {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn antisymmetrizer_is_projector(seed in any::<u64>(), k in 1usize..=5) {
        let t = rand_tensor(&mut rng(seed), k, 1.0);
        let a = t.antisymmetrize();
        prop_assert!(a.antisymmetrize().max_abs_diff(&a) < 1e-13);
    }

    #[test]
    fn contraction_is_bilinear(seed in any::<u64>(), p in 1usize..=3, q in 0usize..=3) {
        let mut r = rng(seed);
        let g = random_metric(seed ^ 7);
        let (a1, a2) = (rand_form(&mut r, p, 1.0), rand_form(&mut r, p, 1.0));
        let (b1, b2) = (rand_form(&mut r, p + q, 1.0), rand_form(&mut r, p + q, 1.0));
        let (s, t) = (uni(&mut r), uni(&mut r));
        let c = |a: &Tensor7, b: &Tensor7| contract_form_into_form(a, b, &g).unwrap();
        let lhs = c(&(&a1 * s + &a2 * t), &b1);
        let rhs = c(&a1, &b1) * s + c(&a2, &b1) * t;
        let sc = lhs.max_abs().max(1.0);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-13 * sc);
        let lhs = c(&a1, &(&b1 * s + &b2 * t));
        let rhs = c(&a1, &b1) * s + c(&a1, &b2) * t;
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-13 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn wedge_graded_commutative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = rand_form(&mut r, 2, 1.0);
        let b = rand_form(&mut r, 3, 1.0);
        let ab = wedge(&a, &b).unwrap();
        prop_assert!(ab.max_abs_diff(&wedge(&b, &a).unwrap()) < 1e-13);
        let c = rand_form(&mut r, 1, 1.0);
        let l = wedge(&ab, &c).unwrap();
        let rr = wedge(&a, &wedge(&b, &c).unwrap()).unwrap();
        prop_assert!(l.max_abs_diff(&rr) < 1e-12);
        let x = rand_form(&mut r, 1, 1.0);
        let y = rand_form(&mut r, 3, 1.0);
        let xy = wedge(&x, &y).unwrap();
        prop_assert!((&xy + &wedge(&y, &x).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn double_star_is_identity(seed in any::<u64>(), p in 0usize..=7) {
        let g = random_metric(seed);
        let w = rand_form(&mut rng(seed ^ 1), p, 1.0);
        let ss = hodge_star(&hodge_star(&w, &g).unwrap(), &g).unwrap();
        prop_assert!(ss.max_abs_diff(&w) < 1e-11 * w.max_abs().max(1.0));
    }

    #[test]
    fn hodge_isometry(seed in any::<u64>(), p in 0usize..=7) {
        let g = random_metric(seed);
        let w = rand_form(&mut rng(seed ^ 2), p, 1.0);
        let lhs = volume_form(&g) * form_inner(&w, &w, &g);
        let rhs = wedge(&w, &hodge_star(&w, &g).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * lhs.max_abs().max(1.0));
    }
}
