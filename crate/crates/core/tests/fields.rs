mod common;

use common::*;
use g2core::deform::v7_chi;
use g2core::fieldexpr::parse;
use g2core::fields::*;
use g2core::g2algebra::{canonical_phi0, G2Structure};
use g2core::tensor7::*;
use g2core::torsion::ricci_w1w7;

fn sine(spec: &GridSpec) -> TensorField {
    TensorField::from_fn(spec, |_, x| Tensor7::scalar((TAU * x[0]).sin()))
}

fn partial_error(n: usize, order: usize) -> f64 {
    let spec = GridSpec::line(n, order);
    let f = sine(&spec);
    (0..n).map(|p| (f.partial(0, p).value() - TAU * (TAU * spec.coords(p)[0]).cos()).abs()).fold(0.0, f64::max)
}

/// f²δ with f = 1 + 0.1 sin(2πx¹).
fn conformal_metric(spec: &GridSpec) -> MetricField {
    let ms = (0..spec.num_points()).map(|p| Metric7::new(Mat7::identity() * f_conf(&spec.coords(p)).powi(2)).unwrap()).collect();
    MetricField::new(spec, ms)
}

/// A smooth 2-form varying along x¹ and x³.
fn smooth_two_form(spec: &GridSpec) -> TensorField {
    TensorField::from_fn(spec, |_, x| {
        fill_antisymmetric(2, |ij| {
            let (i, j) = (ij[0] as f64, ij[1] as f64);
            (TAU * x[0] + 0.3 * i).sin() * (TAU * x[2] + 0.7 * j).cos()
        })
    })
}

#[test]
fn grid_validation() {
    assert!(GridSpec::new(vec![1], 7, 1.0, 4).is_err());
    assert!(GridSpec::new(vec![1], 6, 1.0, 4).is_err());
    assert!(GridSpec::new(vec![1], 16, 1.0, 3).is_err());
    assert!(GridSpec::new(vec![1, 2, 3], 16, 1.0, 4).is_err());
    assert!(GridSpec::new(vec![2, 2], 16, 1.0, 4).is_err());
    assert!(GridSpec::new(vec![8], 16, 1.0, 4).is_err());
    assert!(GridSpec::new(vec![1], 16, -1.0, 4).is_err());
    let s = GridSpec::new(vec![2, 5], 16, 2.0, 2).unwrap();
    assert_eq!(s.num_points(), 256);
    assert_eq!(s.coords(17)[1], 0.125);
    assert_eq!(s.coords(17)[4], 0.125);
}

#[test]
fn constant_field_derivatives_vanish() {
    let spec = GridSpec::new(vec![1, 3], 16, 1.0, 4).unwrap();
    let c = TensorField::from_fn(&spec, |_, _| canonical_phi0());
    for p in [0, 37, 255] {
        assert_eq!(c.gradient_at(p).max_abs(), 0.0);
        assert_eq!(exterior_derivative_at(&c, p).max_abs(), 0.0);
    }
    let m = MetricField::flat(&spec);
    assert_eq!(m.gamma_at(5).max_abs(), 0.0);
    assert_eq!(m.ricci_at(5).amax(), 0.0);
}

#[test]
fn sine_derivative_accuracy() {
    assert!(partial_error(256, 4) <= 1e-7);
}

#[test]
fn halving_h_gains_two_to_the_order() {
    for order in [2, 4] {
        let r = partial_error(64, order) / partial_error(128, order);
        let ideal = 2f64.powi(order as i32);
        assert!(r >= 0.8 * ideal && r <= 1.2 * ideal, "order {order}: ratio {r}");
    }
}

#[test]
fn inactive_axes_and_periodicity() {
    let spec = GridSpec::line(32, 4);
    let f = sine(&spec);
    for axis in 1..7 {
        assert_eq!(f.partial(axis, 3).value(), 0.0);
    }
    for p in 0..32 {
        assert_eq!(spec.neighbor(p, 0, 32), p);
        assert_eq!(spec.neighbor(p, 0, -32), p);
    }
    let spec2 = GridSpec::new(vec![1, 4], 16, 1.0, 4).unwrap();
    for p in 0..256 {
        assert_eq!(spec2.neighbor(p, 1, 16), p);
        assert_eq!(spec2.neighbor(spec2.neighbor(p, 0, 3), 0, -3), p);
    }
}

#[test]
fn conformal_christoffels_match_analytic() {
    let spec = GridSpec::line(256, 4);
    let m = conformal_metric(&spec);
    let mut worst = 0.0f64;
    for p in 0..spec.num_points() {
        let x = spec.coords(p);
        let (f, df) = (f_conf(&x), df_conf(&x));
        let d = |k: usize| if k == 0 { df } else { 0.0 };
        let gm = m.gamma_at(p);
        for b in 0..7 {
            for a in 0..7 {
                for c in 0..7 {
                    let kd = |i: usize, j: usize| (i == j) as u8 as f64;
                    let exact = (kd(b, a) * d(c) + kd(b, c) * d(a) - kd(a, c) * d(b)) / f;
                    worst = worst.max((gm.get(&[b, a, c]) - exact).abs());
                    assert_eq!(gm.get(&[b, a, c]), gm.get(&[b, c, a]));
                }
            }
        }
    }
    assert!(worst <= spec.fd_tolerance(1.0), "{worst}");
}

#[test]
fn metricity_on_lambda7_metric() {
    let spec = GridSpec::line(128, 4);
    let st = G2Structure::canonical();
    let sf = StructureField::from_fn(&spec, |x| &st.phi + &v7_chi(&st, &axis_vec(2, 0.2 * (TAU * x[0]).sin()))).unwrap();
    let m = &sf.metric;
    let worst = (0..spec.num_points()).map(|p| m.covariant_at(&m.g, p).max_abs()).fold(0.0, f64::max);
    assert!(worst <= spec.fd_tolerance(1.0), "{worst}");
}

#[test]
fn covariant_derivative_product_rule() {
    // ∇(f g) = df ⊗ g since ∇g = 0
    let spec = GridSpec::line(128, 4);
    let m = conformal_metric(&spec);
    let fg = TensorField::from_fn(&spec, |p, x| m.metrics[p].g_tensor() * f_conf(&x));
    let mut worst = 0.0f64;
    for p in 0..spec.num_points() {
        let x = spec.coords(p);
        let expect = einsum("c,ab->cab", &[&axis_vec(0, df_conf(&x)), &m.metrics[p].g_tensor()]);
        worst = worst.max(m.covariant_at(&fg, p).max_abs_diff(&expect));
    }
    assert!(worst <= spec.fd_tolerance(1.0), "{worst}");
    // flat metric: ∇ = ∂
    let flat = MetricField::flat(&spec);
    let t = smooth_two_form(&GridSpec::line(128, 4));
    assert_eq!(flat.covariant_at(&t, 9).max_abs_diff(&t.gradient_at(9)), 0.0);
}

#[test]
fn d_squared_and_product_rule() {
    let spec = GridSpec::new(vec![1, 3], 48, 1.0, 4).unwrap();
    let w = smooth_two_form(&spec);
    let dw = TensorField::from_fn(&spec, |p, _| exterior_derivative_at(&w, p));
    let d2 = (0..spec.num_points()).map(|p| exterior_derivative_at(&dw, p).max_abs()).fold(0.0, f64::max);
    assert!(d2 <= spec.fd_tolerance(1.0), "{d2}");

    let spec = GridSpec::line(128, 4);
    let fphi = TensorField::from_fn(&spec, |_, x| canonical_phi0() * f_conf(&x));
    let worst = (0..spec.num_points())
        .map(|p| {
            let df = axis_vec(0, df_conf(&spec.coords(p)));
            exterior_derivative_at(&fphi, p).max_abs_diff(&wedge(&df, &canonical_phi0()).unwrap())
        })
        .fold(0.0, f64::max);
    assert!(worst <= spec.fd_tolerance(1.0), "{worst}");
}

#[test]
fn conformal_ricci_matches_w7_formula() {
    // τ₇ = −d log f for φ = f³φ₀
    let spec = GridSpec::line(128, 4);
    let sf = StructureField::from_fn(&spec, |x| canonical_phi0() * f_conf(&x).powi(3)).unwrap();
    let tau7 = TensorField::from_fn(&spec, |_, x| axis_vec(0, -df_conf(&x) / f_conf(&x)));
    let mut worst = 0.0f64;
    for p in 0..spec.num_points() {
        let st = sf.structure_at(p);
        let r = ricci_w1w7(&st, 0.0, &tau7.at(p), &sf.metric.covariant_at(&tau7, p));
        let rm = sf.metric.ricci_at(p);
        assert!((rm - rm.transpose()).amax() < 1e-12);
        worst = worst.max((r - rm).amax());
    }
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn convergence_orders() {
    let errs: Vec<[f64; 2]> = [32usize, 64, 128]
        .iter()
        .map(|&n| {
            let spec = GridSpec::line(n, 4);
            let m = conformal_metric(&spec);
            let w = TensorField::from_fn(&spec, |_, x| canonical_phi0() * f_conf(&x));
            let mut e = [0.0f64; 2];
            for p in 0..n {
                let x = spec.coords(p);
                let (f, df) = (f_conf(&x), df_conf(&x));
                e[0] = e[0].max((m.gamma_at(p).get(&[0, 0, 0]) - df / f).abs());
                let exact = wedge(&axis_vec(0, df), &canonical_phi0()).unwrap();
                e[1] = e[1].max(exterior_derivative_at(&w, p).max_abs_diff(&exact));
            }
            e
        })
        .collect();
    for k in 0..2 {
        let o = orders(&errs.iter().map(|e| e[k]).collect::<Vec<_>>());
        assert!(o.iter().all(|x| *x >= 3.5), "quantity {k}: {o:?}");
    }
}

#[test]
fn snapshot_roundtrip() {
    let spec = GridSpec::new(vec![2, 6], 8, 0.5, 2).unwrap();
    let f = smooth_two_form(&spec).map(|_, t| t.clone().with_variance(vec![Variance::Up, Variance::Down]));
    let mut buf = Vec::new();
    write_snapshot(&f, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"G2F1");
    let back = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(back, f);
    buf[0] = b'X';
    assert!(matches!(read_snapshot(buf.as_slice()), Err(FieldError::Snapshot(_))));
    assert!(read_snapshot(&b"G2F1"[..]).is_err());
    let lines = to_json_lines(&f);
    assert_eq!(lines.lines().count(), 64);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["values"].as_array().unwrap().len(), 49);
}

#[test]
fn tabulation_errors() {
    let spec = GridSpec::line(16, 4);
    assert!(matches!(tabulate_scalar(&spec, &parse("x2").unwrap()), Err(FieldError::InactiveAxis { axis: 2 })));
    assert!(matches!(tabulate_scalar(&spec, &parse("1/x1").unwrap()), Err(FieldError::Eval { point: 0, .. })));
    let f = tabulate_scalar(&spec, &parse("1 + 0.1*sin(2*pi*x1)").unwrap()).unwrap();
    assert!((f.scalar_at(4) - 1.1).abs() < 1e-15);
    let zero = parse("0").unwrap();
    let mut es = vec![zero; 7];
    es[2] = parse("0.2*sin(2*pi*x1)").unwrap();
    let v = tabulate_covector(&spec, &es).unwrap();
    assert!((v.at(4).get(&[2]) - 0.2).abs() < 1e-15);
    let bad = StructureField::from_fn(&spec, |_| Tensor7::zeros(3));
    assert!(matches!(bad, Err(FieldError::NotPositive { point: 0, .. })));
}
