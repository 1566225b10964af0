mod common;

use common::*;
use g2core::deform::*;
use g2core::fields::*;
use g2core::g2algebra::*;
use g2core::tensor7::*;
use g2core::torsion::*;
use proptest::prelude::*;

fn vfield(spec: &GridSpec, f: impl Fn(&[f64; 7]) -> [f64; 7] + Sync) -> TensorField {
    TensorField::from_fn(spec, |_, x| Tensor7::vector(&f(&x)))
}

fn sin_v(spec: &GridSpec, slot: usize, amp: f64) -> TensorField {
    vfield(spec, |x| {
        let mut a = [0.0; 7];
        a[slot] = amp * (TAU * x[0]).sin();
        a
    })
}

/// Max over the grid of (formula vs general, formula vs direct FD) for T̃.
fn triple_path(sf: &StructureField, v: &TensorField) -> (f64, f64, f64) {
    let def = v7_deform(sf, v);
    let tf = torsion_field(sf);
    let mut w = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..sf.num_points() {
        let st = sf.structure_at(p);
        let f = v7_torsion_formula(&st, &decompose_2tensor(&tf.at(p), &st), &v.at(p), &def.grad_v_decomp[p]);
        let g = def.general.deformed_torsion_general_at(&tf, p);
        let d = torsion_at(def.deformed(), p);
        w.0 = w.0.max(f.t.max_abs_diff(&g.lowered));
        w.1 = w.1.max(f.t.max_abs_diff(&d));
        w.2 = w.2.max(d.max_abs());
    }
    w
}

#[test]
fn zero_chi_is_identity() {
    let mut r = rng(1);
    let st = gl_structure(&mut r, 0.2);
    let d = build_general(&st, &Tensor7::zeros(3)).unwrap();
    assert!((d.s - st.metric.g).amax() < 1e-12);
    assert!((d.gamma - st.metric.g_inv).amax() < 1e-12);
    assert!((d.det_ratio - 1.0).abs() < 1e-12);
    assert!(phi_tilde_raised(&d).max_abs_diff(&st.phi_low_up_up()) < 1e-12);
    let spec = GridSpec::line(16, 4);
    let flat = StructureField::flat(&spec);
    let gd = GeneralDeformationField::new(&flat, TensorField::from_fn(&spec, |_, _| Tensor7::zeros(3))).unwrap();
    assert_eq!(gd.delta_christoffel_at(3).max_abs(), 0.0);
    let t = gd.deformed_torsion_general_at(&torsion_field(&flat), 3);
    assert_eq!(t.lowered.max_abs(), 0.0);
}

#[test]
fn conformal_chi_example() {
    let st = G2Structure::canonical();
    let d = build_general(&st, &(&st.phi * 7.0)).unwrap();
    assert!((d.s - Mat7::identity() * 512.0).amax() < 1e-9);
    assert!((d.det_ratio / 16384.0 - 1.0).abs() < 1e-12);
    let cp = conformal_point(&st, 2.0);
    assert!((cp.g_tilde - Mat7::identity() * 4.0).amax() < 1e-12);
    assert!(phi_tilde_raised(&d).max_abs_diff(&(st.phi_low_up_up() * 0.5)) < 1e-12);
}

#[test]
fn lambda7_point_examples() {
    let st = G2Structure::canonical();
    let v = axis_vec(0, 0.5);
    let d = build_general(&st, &v7_chi(&st, &v)).unwrap();
    let mut expect = Mat7::identity() * 1.25;
    expect[(0, 0)] -= 0.25;
    assert!((d.s - expect).amax() < 1e-12);
    let v = Tensor7::vector(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let p = v7_point(&st, &v);
    assert!((p.m - 3.0).abs() < 1e-15);
    assert!((p.det_ratio - 4f64.powf(4.0 / 3.0)).abs() < 1e-12);
    assert!(v7_phi_tilde_raised(&st, &axis_vec(1, 0.3)).max_abs_diff(&{
        let d = build_general(&st, &v7_chi(&st, &axis_vec(1, 0.3))).unwrap();
        let gi = Tensor7::from_mat(&d.g_tilde_inv);
        einsum("axy,bx,cy->abc", &[&d.phi_tilde(), &gi, &gi])
    }) <= 1e-10);
}

#[test]
fn general_cross_checks() {
    let mut r = rng(2);
    for _ in 0..10 {
        let st = gl_structure(&mut r, 0.2);
        let chi = rand_form(&mut r, 3, 0.3);
        let d = build_general(&st, &chi).unwrap();
        assert!(d.cross_check().iter().all(|x| *x <= 1e-9), "{:?}", d.cross_check());
        let direct = metric_from_phi(&d.phi_tilde()).unwrap();
        assert!((direct.metric.g - d.g_tilde.g).amax() <= 1e-9);
        let tr: f64 = (d.gamma.component_mul(&d.s)).sum() / 7.0;
        assert!((d.det_ratio.powf(1.5) - tr).abs() <= 1e-10 * tr);
        let raised = einsum("axy,bx,cy->abc", &[&d.phi_tilde(), &direct.g_inv(), &direct.g_inv()]);
        assert!(raised.max_abs_diff(&phi_tilde_raised(&d)) <= 1e-10);
    }
}

#[test]
fn non_positive_chi_is_rejected() {
    let st = G2Structure::canonical();
    assert!(matches!(build_general(&st, &(&st.phi * -1.0)), Err(DeformError::NotPositive(_))));
}

#[test]
fn lambda27_examples() {
    let st = G2Structure::canonical();
    assert!((lambda27_s(&st, &Tensor7::zeros(2)) - Mat7::identity()).amax() < 1e-15);
    let mut h = Tensor7::zeros(2);
    h.set(&[0, 0], 6.0);
    for i in 1..7 {
        h.set(&[i, i], -1.0);
    }
    let chi = i_phi(&h, &st);
    let oracle = deformation_s(&st, &chi, &hodge_star(&chi, &st.metric).unwrap());
    let got = lambda27_s(&st, &h);
    assert!((got - oracle).amax() <= 1e-10 * oracle.amax(), "{}", (got - oracle).amax());
}

#[test]
fn corollary_6_4_constant_v_stays_torsion_free() {
    let spec = GridSpec::line(32, 4);
    let sf = StructureField::flat(&spec);
    let v = vfield(&spec, |_| [0.3, 0.0, 0.1, -0.2, 0.0, 0.4, 0.1]);
    let (a, b, m) = triple_path(&sf, &v);
    assert!(a.max(b).max(m) <= spec.fd_tolerance(1.0));
    let sol = solve_grad_v(&G2Structure::canonical(), &TensorSplit::zero(), &TensorSplit::zero(), &axis_vec(3, 0.7));
    assert_eq!(sol.norms().iter().sum::<f64>(), 0.0);
}

#[test]
fn corollary_6_5_varying_v_gains_14_or_27() {
    let spec = GridSpec::line(64, 4);
    let sf = StructureField::flat(&spec);
    let def = v7_deform(&sf, &sin_v(&spec, 1, 0.1));
    let rep = classify(def.deformed(), &torsion_field(def.deformed()));
    assert!(rep.class_mask.contains(&14) || rep.class_mask.contains(&27), "{rep:?}");
    assert!(rep.component_norms[2] + rep.component_norms[3] > 10.0 * rep.threshold);
}

#[test]
fn triple_path_lambda7() {
    let spec = GridSpec::line(128, 4);
    let (a, b, m) = triple_path(&StructureField::flat(&spec), &sin_v(&spec, 2, 0.2));
    let tol = spec.fd_tolerance(m.max(1.0));
    assert!(a <= tol && b <= tol, "{a} {b} {tol}");
}

#[test]
fn triple_path_conformal_base_constant_v() {
    let spec = GridSpec::line(128, 4);
    let sf = StructureField::from_fn(&spec, |x| canonical_phi0() * f_conf(&x).powi(3)).unwrap();
    let (a, b, m) = triple_path(&sf, &vfield(&spec, |_| [0.3, 0.0, 0.1, -0.2, 0.0, 0.4, 0.1]));
    let tol = spec.fd_tolerance(m.max(1.0));
    assert!(a <= tol && b <= tol, "{a} {b} {tol}");
}

#[test]
fn lambda7_field_invariants() {
    let spec = GridSpec::line(64, 4);
    let sf = StructureField::flat(&spec);
    let def = v7_deform(&sf, &sin_v(&spec, 2, 0.2));
    assert!(def.closed_form_residual() <= 1e-10);
    let worst = (0..spec.num_points())
        .map(|p| def.general.delta_christoffel_at(p).max_abs_diff(&def.general.christoffel_difference_at(p)))
        .fold(0.0, f64::max);
    assert!(worst <= spec.fd_tolerance(1.0));
    let zero = v7_deform(&sf, &vfield(&spec, |_| [0.0; 7]));
    assert_eq!(zero.deformed().phi.max_abs_diff(&sf.phi), 0.0);
}

#[test]
fn conformal_delta_christoffel_closed_form() {
    let spec = GridSpec::line(512, 4);
    let flat = StructureField::flat(&spec);
    let chi = TensorField::from_fn(&spec, |_, x| canonical_phi0() * (f_conf(&x).powi(3) - 1.0));
    let gd = GeneralDeformationField::new(&flat, chi).unwrap();
    let tf0 = torsion_field(&flat);
    let mut w = [0.0f64; 4];
    for p in 0..spec.num_points() {
        let st = flat.structure_at(p);
        let x = spec.coords(p);
        let df = axis_vec(0, df_conf(&x));
        let cp = conformal_point(&st, f_conf(&x));
        let d = &gd.points[p];
        w[0] = w[0].max((cp.g_tilde - d.g_tilde.g).amax()).max(cp.psi_tilde.max_abs_diff(&d.psi_tilde));
        w[0] = w[0].max((cp.g_tilde - st.metric.g * f_conf(&x).powi(2)).amax());
        w[0] = w[0].max(cp.psi_tilde.max_abs_diff(&(&st.psi * f_conf(&x).powi(4))));
        w[1] = w[1].max(conformal_delta_christoffel(&st, f_conf(&x), &df).max_abs_diff(&gd.delta_christoffel_at(p)));
        let tc = conformal_torsion(&st, f_conf(&x), &df, &tf0.at(p));
        w[2] = w[2].max(tc.max_abs_diff(&torsion_at(&gd.deformed, p)));
        w[3] = w[3].max(tc.max_abs_diff(&gd.deformed_torsion_general_at(&tf0, p).lowered));
    }
    assert!(w[0] <= 1e-11, "{w:?}");
    assert!(w[1] <= 1e-8, "{w:?}");
    assert!(w[2] <= 5e-6 && w[3] <= 5e-6, "{w:?}");
}

#[test]
fn tau1_only_base_to_torsion_free() {
    // ∇_a v_b = τ₁ g_ab − (1/3) τ₁ v^c φ_cab
    let mut r = rng(7);
    for _ in 0..5 {
        let st = gl_structure(&mut r, 0.2);
        let tau1 = uni(&mut r) * 2.0;
        let v = rand_vec(&mut r, 1.0);
        let base = TensorSplit { s1: tau1, ..TensorSplit::zero() };
        let sol = solve_grad_v(&st, &base, &TensorSplit::zero(), &v);
        let expect = st.g() * tau1 - einsum("c,cab->ab", &[&v, &st.phi]) * (tau1 / 3.0);
        assert!(sol.compose(&st).max_abs_diff(&expect) <= 1e-12, "{}", sol.compose(&st).max_abs_diff(&expect));
    }
}

#[test]
fn inverse_deformation() {
    let spec = GridSpec::line(64, 4);
    let sf = StructureField::flat(&spec);
    let def = v7_deform(&sf, &vfield(&spec, |_| [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
    let inv = v7_inverse(&def);
    assert!((inv.m_tilde.scalar_at(3) - 3.0 / 16.0).abs() <= 1e-12);
    // constant v: ∇v = 0 and ∇̃ṽ = 0 together
    assert!(inv.grad_residual <= 1e-12);
    let zero = v7_inverse(&v7_deform(&sf, &vfield(&spec, |_| [0.0; 7])));
    assert_eq!(zero.v_tilde.max_abs(), 0.0);
    assert_eq!(zero.roundtrip, 0.0);

    let def = v7_deform(&sf, &sin_v(&spec, 2, 0.2));
    let inv = v7_inverse(&def);
    assert!(inv.m_tilde_residual <= 1e-12);
    assert!(inv.grad_residual <= inv.fd_tolerance);
    assert!(inv.roundtrip_pi7 <= 1e-10);
    // ṽ only undoes the Λ³₇ part; the full round trip misses by O(|v|²)
    assert!(inv.roundtrip > 1e-3);
}

#[test]
fn dv_consistency_checks() {
    let spec = GridSpec::new(vec![1, 2], 32, 1.0, 4).unwrap();
    let sf = StructureField::flat(&spec);
    let c = dv_consistency(&sf, &vfield(&spec, |_| [0.3, 0.0, 0.1, -0.2, 0.0, 0.4, 0.1]));
    assert_eq!(c.dv_residual + c.d2_residual, 0.0);
    let v = vfield(&spec, |x| {
        [0.2 * (TAU * x[1]).sin(), 0.1 * (TAU * x[0]).cos(), 0.3 * (TAU * (x[0] + x[1])).sin(), 0.0, 0.1, 0.0, 0.0]
    });
    let c = dv_consistency(&sf, &v);
    assert!(c.dv_residual <= c.fd_tolerance && c.d2_residual <= c.fd_tolerance, "{c:?}");
    let mut r = rng(5);
    let st = G2Structure::canonical();
    let noise7: Vec<Tensor7> = (0..spec.num_points()).map(|_| rand_vec(&mut r, 0.1)).collect();
    let noise14: Vec<Tensor7> = (0..spec.num_points()).map(|_| project_2form(&rand_form(&mut r, 2, 0.1), &st).pi14).collect();
    let res = dv_condition_residual(&sf, &TensorField::from_values(&spec, noise7), &TensorField::from_values(&spec, noise14));
    assert!(res > 10.0 * c.fd_tolerance, "{res}");
}

#[test]
fn conformal_gauge() {
    let spec = GridSpec::line(128, 4);
    let flat = StructureField::flat(&spec);
    let syn = SyntheticW1W7::standard(&spec);
    let g = conformal_gauge_w1w7(&flat, &syn.t).unwrap();
    assert_eq!(g.report.class_mask, vec![1]);
    let t1: Vec<f64> = (0..spec.num_points()).map(|p| decompose_2tensor(&g.torsion.at(p), &g.structure.structure_at(p)).s1).collect();
    assert!(t1.iter().all(|t| (t - 1.0).abs() <= g.report.threshold));

    let c = TensorField::from_fn(&spec, |_, _| Tensor7::from_mat(&(Mat7::identity() * 2.0)));
    let g = conformal_gauge_w1w7(&flat, &c).unwrap();
    assert!(g.f.data().iter().all(|f| (f - 2.0).abs() < 1e-14));
    assert_eq!(g.report.class_mask, vec![1]);

    let conf = StructureField::from_fn(&spec, |x| canonical_phi0() * f_conf(&x).powi(3)).unwrap();
    let err = conformal_gauge_w1w7(&conf, &torsion_field(&conf)).unwrap_err();
    assert!(matches!(err, DeformError::Precondition(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lambda7_metric_always_positive(seed in any::<u64>(), scale in 0.0f64..10.0) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.2);
        let v = rand_vec(&mut r, 1.0);
        let v = &v * (scale / v.max_abs().max(1e-12));
        let p = v7_point(&st, &v);
        prop_assert!(Metric7::new(p.g_tilde).is_ok());
        let xi = rand_vec(&mut r, 1.0).to_array7();
        let q: f64 = (0..7).flat_map(|a| (0..7).map(move |b| (a, b))).map(|(a, b)| p.g_tilde[(a, b)] * xi[a] * xi[b]).sum();
        prop_assert!(q > 0.0);
        let d = build_general(&st, &v7_chi(&st, &v)).unwrap();
        prop_assert!((d.s - p.s).amax() <= 1e-12 * p.s.amax());
        prop_assert!((d.det_ratio / p.det_ratio - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn solve_roundtrip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.2);
        let v = rand_vec(&mut r, 1.0);
        let td = decompose_2tensor(&rand_tensor(&mut r, 2, 1.0), &st);
        let dst = metric_from_phi(&(&st.phi + &v7_chi(&st, &v))).unwrap();
        let target = decompose_2tensor(&rand_tensor(&mut r, 2, 1.0), &dst);
        let sol = solve_grad_v(&st, &td, &target, &v);
        let back = decompose_2tensor(&v7_torsion_formula(&st, &td, &v, &sol).t, &dst);
        prop_assert!((back.s1 - target.s1).abs() <= 1e-9);
        prop_assert!(back.s7.max_abs_diff(&target.s7) <= 1e-9);
        prop_assert!(back.s14.max_abs_diff(&target.s14) <= 1e-9);
        prop_assert!(back.s27.max_abs_diff(&target.s27) <= 1e-9);
        prop_assert!(contract_form_into_form(&sol.s14, &st.phi, &st.metric).unwrap().max_abs() <= 1e-10);
        prop_assert!(sol.s27.trace2(&st.metric).abs() <= 1e-10);
    }

    #[test]
    fn formula_components_match_decomposition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.2);
        let v = rand_vec(&mut r, 1.0);
        let t = rand_tensor(&mut r, 2, 1.0);
        let nv = rand_tensor(&mut r, 2, 1.0);
        let f = v7_torsion_formula(&st, &decompose_2tensor(&t, &st), &v, &decompose_2tensor(&nv, &st));
        let dst = metric_from_phi(&(&st.phi + &v7_chi(&st, &v))).unwrap();
        let sp = decompose_2tensor(&f.t, &dst);
        let sc = f.t.max_abs().max(1.0);
        prop_assert!((sp.s1 - f.split.s1).abs() <= 1e-11 * sc);
        prop_assert!(sp.s7.max_abs_diff(&f.split.s7) <= 1e-11 * sc);
        prop_assert!(sp.s14.max_abs_diff(&f.split.s14) <= 1e-11 * sc);
        prop_assert!(sp.s27.max_abs_diff(&f.split.s27) <= 1e-11 * sc);
        prop_assert!(f.split.s27.trace2(&dst.metric).abs() <= 1e-10 * sc);
        let g = v7_torsion_general_point(&st, &t, &v, &nv);
        prop_assert!(g.lowered.max_abs_diff(&f.t) <= 1e-11 * sc);
    }

    #[test]
    fn inverse_is_involutive_on_lambda7_part(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.2);
        let v = rand_vec(&mut r, 1.0);
        let (_, rt7) = v7_roundtrip_point(&st, &v);
        prop_assert!(rt7 <= 1e-10);
        let p = v7_point(&st, &v);
        let dst = metric_from_phi(&(&st.phi + &v7_chi(&st, &v))).unwrap();
        let vt = &v * -(1.0 + p.m).powf(-2.0 / 3.0);
        let mt = einsum("a,ab,b->", &[&vt, &dst.g(), &vt]).value();
        prop_assert!((mt - p.m / (1.0 + p.m).powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn lambda27_matches_general(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = gl_structure(&mut r, 0.2);
        let h = rand_traceless(&mut r, &st, 0.2);
        let chi = i_phi(&h, &st);
        let oracle = deformation_s(&st, &chi, &hodge_star(&chi, &st.metric).unwrap());
        prop_assert!((lambda27_s(&st, &h) - oracle).amax() <= 1e-10);
    }
}
