mod common;

use common::*;
use g2core::g2algebra::*;
use g2core::tensor7::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn basis(k: usize, idx: &[usize]) -> Tensor7 {
    fill_antisymmetric(k, |t| {
        let mut s = t.to_vec();
        s.sort();
        if s == idx {
            perm_sign(&t.iter().map(|i| idx.iter().position(|j| j == i).unwrap()).collect::<Vec<_>>())
        } else {
            0.0
        }
    })
}

/// Matrix of a linear map on k-forms in the basis of increasing index tuples.
fn form_map_matrix(k: usize, f: impl Fn(&Tensor7) -> Tensor7) -> DMatrix<f64> {
    let combos = combinations(k);
    let n = combos.len();
    let mut m = DMatrix::zeros(n, n);
    for (j, c) in combos.iter().enumerate() {
        let img = f(&basis(k, c));
        for (i, r) in combos.iter().enumerate() {
            m[(i, j)] = img.get(r);
        }
    }
    m
}

fn rank(m: &DMatrix<f64>) -> usize {
    m.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-9).count()
}

fn is_projector(m: &DMatrix<f64>) -> bool {
    (m * m - m).amax() < 1e-12
}

#[test]
fn canonical_components() {
    let phi = canonical_phi0();
    let psi = canonical_psi0();
    assert_eq!(phi.get(&[0, 1, 2]), 1.0);
    assert_eq!(phi.get(&[1, 4, 6]), -1.0);
    assert_eq!(psi.get(&[0, 1, 3, 6]), -1.0);
    assert_eq!(phi.antisymmetry_defect(), 0.0);
}

#[test]
fn metric_from_canonical() {
    let st = metric_from_phi(&canonical_phi0()).unwrap();
    assert!((st.metric.g - Mat7::identity()).amax() <= 1e-14);
    assert!((st.det_s - 1.0).abs() <= 1e-14);
    assert!(st.psi.max_abs_diff(&canonical_psi0()) <= 1e-14);
}

#[test]
fn metric_from_scaled_phi() {
    let st = metric_from_phi(&(canonical_phi0() * 8.0)).unwrap();
    assert!((st.metric.g - Mat7::identity() * 4.0).amax() < 1e-13);
    assert!(st.psi.max_abs_diff(&(canonical_psi0() * 16.0)) < 1e-12);
}

#[test]
fn split_form_is_rejected() {
    let mut phi = Tensor7::zeros(3);
    for (_, ix) in PHI0_TERMS {
        phi = phi + basis(3, &[ix[0] - 1, ix[1] - 1, ix[2] - 1]);
    }
    assert!(matches!(metric_from_phi(&phi), Err(NotPositive::Indefinite { .. })));
    let degenerate = basis(3, &[0, 1, 2]);
    assert!(matches!(metric_from_phi(&degenerate), Err(NotPositive::Degenerate { .. })));
}

#[test]
fn contraction_identities_canonical_exact() {
    let r = verify_contractions(&G2Structure::canonical());
    assert!(r.exact);
    assert_eq!((r.phiphi1, r.phipsi, r.psipsi0), (0.0, 0.0, 0.0));
}

#[test]
fn structure_invariants_on_gl_transport() {
    let mut r = rng(21);
    for _ in 0..5 {
        let st = gl_structure(&mut r, 0.3);
        let g = st.s * st.det_s.powf(-1.0 / 9.0);
        assert!((g - st.metric.g).amax() <= 1e-12 * st.metric.g.amax());
        assert!(hodge_star(&st.phi, &st.metric).unwrap().max_abs_diff(&st.psi) <= 1e-12 * st.psi.max_abs());
        let pp = contract_form_into_form(&st.phi, &st.phi, &st.metric).unwrap().value();
        let qq = contract_form_into_form(&st.psi, &st.psi, &st.metric).unwrap().value();
        assert!((pp - 42.0).abs() < 1e-11 && (qq - 168.0).abs() < 1e-10);
        let res = verify_contractions(&st);
        assert!(!res.exact);
        let sc = st.metric.g.amax().powi(3).max(1.0);
        assert!(res.phiphi1.max(res.phipsi).max(res.psipsi0) <= 1e-11 * sc, "{res:?}");
    }
}

#[test]
fn project_3form_examples() {
    let st = G2Structure::canonical();
    let d = project_3form(&st.phi, &st);
    assert!((d.a - 1.0).abs() < 1e-15 && d.omega.max_abs() < 1e-15 && d.h.max_abs() < 1e-15);
    let chi = contract_form_into_form(&Tensor7::basis1(0), &st.psi, &st.metric).unwrap();
    let d = project_3form(&chi, &st);
    assert!(d.a.abs() < 1e-15 && d.h.max_abs() < 1e-14);
    let rebuilt = contract_form_into_form(&(contract_form_into_form(&chi, &st.psi, &st.metric).unwrap() * (-1.0 / 24.0)), &st.psi, &st.metric).unwrap();
    assert!(rebuilt.max_abs_diff(&chi) < 1e-14);
    assert!(d.pi7.max_abs_diff(&chi) < 1e-14);
}

#[test]
fn project_2form_example() {
    let st = G2Structure::canonical();
    let w = basis(2, &[0, 1]);
    let d = project_2form(&w, &st);
    assert!(d.reassemble().max_abs_diff(&w) < 1e-15);
    let c = contract_form_into_form(&d.pi14, &st.phi, &st.metric).unwrap();
    assert!(c.max_abs() < 1e-15);
}

#[test]
fn i_phi_examples() {
    let mut r = rng(8);
    let st = gl_structure(&mut r, 0.2);
    assert!(i_phi(&st.g(), &st).max_abs_diff(&st.phi) < 1e-12);
    let st0 = G2Structure::canonical();
    let v = Tensor7::basis1(0);
    let h = einsum("a,b->ab", &[&v, &v]) - st0.g() * (1.0 / 7.0);
    let d = project_3form(&i_phi(&h, &st0), &st0);
    assert!(d.a.abs() < 1e-15 && d.omega.max_abs() < 1e-15);
    let h = rand_traceless(&mut r, &st, 1.0);
    let c = contract_form_into_form(&i_phi(&h, &st), &st.phi, &st.metric).unwrap();
    assert!(c.value().abs() < 1e-12);
}

#[test]
fn decompose_2tensor_examples() {
    let st = G2Structure::canonical();
    let d = decompose_2tensor(&st.g(), &st);
    assert!((d.s1 - 1.0).abs() < 1e-15 && d.s7.max_abs() + d.s14.max_abs() + d.s27.max_abs() < 1e-15);
    let a = contract_form_into_form(&Tensor7::basis1(0), &st.phi, &st.metric).unwrap();
    let d = decompose_2tensor(&a, &st);
    assert!(d.s1.abs() < 1e-15 && d.s14.max_abs() < 1e-15 && d.s27.max_abs() < 1e-15);
    assert!(d.s7.max_abs_diff(&Tensor7::basis1(0)) < 1e-15);
    let mut r = rng(9);
    let st = gl_structure(&mut r, 0.3);
    let a = rand_tensor(&mut r, 2, 1.0);
    assert!(decompose_2tensor(&a, &st).compose(&st).max_abs_diff(&a) <= 1e-11);
}

#[test]
fn projector_algebra_on_two_forms() {
    let st = G2Structure::canonical();
    let p7 = form_map_matrix(2, |w| project_2form(w, &st).pi7);
    let p14 = form_map_matrix(2, |w| project_2form(w, &st).pi14);
    assert!(is_projector(&p7) && is_projector(&p14));
    assert!((&p7 * &p14).amax() < 1e-12);
    assert!((&p7 + &p14 - DMatrix::identity(21, 21)).amax() < 1e-12);
    assert_eq!((rank(&p7), rank(&p14)), (7, 14));
}

#[test]
fn projector_ranks_three_four_five() {
    let mut r = rng(4);
    let st = gl_structure(&mut r, 0.2);
    let p = [
        form_map_matrix(3, |c| project_3form(c, &st).pi1),
        form_map_matrix(3, |c| project_3form(c, &st).pi7),
        form_map_matrix(3, |c| project_3form(c, &st).pi27),
    ];
    assert!(p.iter().all(is_projector));
    assert_eq!(p.iter().map(rank).collect::<Vec<_>>(), vec![1, 7, 27]);
    assert!((&p[0] + &p[1] + &p[2] - DMatrix::identity(35, 35)).amax() < 1e-11);
    let q = [
        form_map_matrix(4, |c| project_4form(c, &st).pi1),
        form_map_matrix(4, |c| project_4form(c, &st).pi7),
        form_map_matrix(4, |c| project_4form(c, &st).pi27),
    ];
    assert!(q.iter().all(is_projector));
    assert_eq!(q.iter().map(rank).collect::<Vec<_>>(), vec![1, 7, 27]);
    let f = [form_map_matrix(5, |c| project_5form(c, &st).pi7), form_map_matrix(5, |c| project_5form(c, &st).pi14)];
    assert!(f.iter().all(is_projector));
    assert_eq!(f.iter().map(rank).collect::<Vec<_>>(), vec![7, 14]);
    assert!((&f[0] + &f[1] - DMatrix::identity(21, 21)).amax() < 1e-11);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn decomposition3_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.25);
        let chi = rand_form(&mut r, 3, 1.0);
        let d = project_3form(&chi, &st);
        prop_assert!(d.reassemble().max_abs_diff(&chi) <= 1e-11 * chi.max_abs());
        prop_assert!(d.h.trace2(&st.metric).abs() <= 1e-11 * d.h.max_abs().max(1.0));
        let w = rand_form(&mut r, 2, 1.0);
        let d2 = project_2form(&w, &st);
        prop_assert!(d2.reassemble().max_abs_diff(&w) <= 1e-11);
        let c = contract_form_into_form(&d2.pi14, &st.phi, &st.metric).unwrap();
        prop_assert!(c.max_abs() <= 1e-11);
        let q = rand_form(&mut r, 4, 1.0);
        prop_assert!(project_4form(&q, &st).reassemble().max_abs_diff(&q) <= 1e-11);
    }

    #[test]
    fn five_form_pi7_coefficient(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.25);
        let alpha = rand_vec(&mut r, 1.0);
        let w14 = project_2form(&rand_form(&mut r, 2, 1.0), &st).pi14;
        let eta = wedge(&alpha, &st.psi).unwrap() + wedge(&w14, &st.phi).unwrap();
        let got = contract_form_into_form(&st.psi, &eta, &st.metric).unwrap();
        prop_assert!(got.max_abs_diff(&(&alpha * 72.0)) <= 1e-10);
        let d = project_5form(&eta, &st);
        prop_assert!(d.alpha.max_abs_diff(&alpha) <= 1e-11);
        prop_assert!(d.pi14.max_abs_diff(&wedge(&w14, &st.phi).unwrap()) <= 1e-10);
    }

    #[test]
    fn star_of_pi7_stays_in_pi7(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.25);
        let s7 = hodge_star(&project_3form(&rand_form(&mut r, 3, 1.0), &st).pi7, &st.metric).unwrap();
        prop_assert!(project_4form(&s7, &st).pi7.max_abs_diff(&s7) <= 1e-11 * s7.max_abs().max(1.0));
    }

    #[test]
    fn star_i_phi_is_i_psi(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.25);
        let h = rand_traceless(&mut r, &st, 1.0);
        let lhs = hodge_star(&i_phi(&h, &st), &st.metric).unwrap();
        // e sits in the last slot of i_ψ, which makes the factor +4/3
        let rhs = i_psi(&h, &st) * (4.0 / 3.0);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-11 * rhs.max_abs().max(1.0));
    }
}
