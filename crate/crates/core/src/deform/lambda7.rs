//! φ̃ = φ + v⌟ψ with (v⌟ψ)_bcd = v^e ψ_bcde. Always positive, with
//! s = (1+M)g − v♭v♭, γ = (1+M)(g⁻¹ + vv), det g̃/det g = (1+M)^{4/3}, M = |v|².

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formulas::{FrameV, Parts};
use super::{dot, eye, mv, outer, vm, GeneralDeformationField};
use crate::fields::{exterior_derivative_at, StructureField, TensorField};
use crate::g2algebra::{decompose_2tensor, metric_from_phi, project_3form, G2Structure, TensorSplit};
use crate::tensor7::{einsum, Mat7, Tensor7};

/// χ_bcd = v^e ψ_bcde for a vector v^a.
pub fn v7_chi(st: &G2Structure, v: &Tensor7) -> Tensor7 {
    einsum("e,bcde->bcd", &[v, &st.psi])
}

/// Closed forms at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct V7Point {
    pub v: Tensor7,
    pub v_flat: Tensor7,
    pub m: f64,
    pub s: Mat7,
    pub gamma: Mat7,
    pub det_ratio: f64,
    pub g_tilde: Mat7,
    pub g_tilde_inv: Mat7,
}

pub fn v7_point(st: &G2Structure, v: &Tensor7) -> V7Point {
    let g = st.metric.g;
    let vu = nalgebra::SVector::<f64, 7>::from_column_slice(v.data());
    let vl = g * vu;
    let m = vu.dot(&vl);
    let q = 1.0 + m;
    let s = g * q - vl * vl.transpose();
    let gamma = (st.metric.g_inv + vu * vu.transpose()) * q;
    V7Point {
        v: v.clone(),
        v_flat: Tensor7::from_vec(1, vl.as_slice().to_vec()).unwrap(),
        m,
        s,
        gamma,
        det_ratio: q.powf(4.0 / 3.0),
        g_tilde: s * q.powf(-2.0 / 3.0),
        g_tilde_inv: (st.metric.g_inv + vu * vu.transpose()) * q.powf(-1.0 / 3.0),
    }
}

/// φ̃_a^{b̃c̃} = (1+M)^{−2/3}(φ_a^bc + χ_a^bc − v^b v_mφ_a^cm + v^c v_mφ_a^bm)
pub fn v7_phi_tilde_raised(st: &G2Structure, v: &Tensor7) -> Tensor7 {
    let gi = st.g_inv();
    let pt = v7_point(st, v);
    let pu = st.phi_low_up_up();
    let cu = einsum("axy,bx,cy->abc", &[&v7_chi(st, v), &gi, &gi]);
    let vp = einsum("m,acm->ac", &[&pt.v_flat, &pu]);
    let t = einsum("b,ac->abc", &[v, &vp]) - einsum("c,ab->abc", &[v, &vp]);
    (pu + cu - t) * (1.0 + pt.m).powf(-2.0 / 3.0)
}

/// A Λ⁷ deformation over a grid.
#[derive(Clone, Debug)]
pub struct V7Deformation {
    /// v^a.
    pub v: TensorField,
    pub m: TensorField,
    pub general: GeneralDeformationField,
    /// ∇_a v_b with v lowered by the base metric.
    pub grad_v: TensorField,
    pub grad_v_decomp: Vec<TensorSplit>,
}

impl V7Deformation {
    pub fn base(&self) -> &StructureField {
        &self.general.base
    }

    pub fn deformed(&self) -> &StructureField {
        &self.general.deformed
    }

    /// Largest deviation of the general closed forms (s, γ, det ratio) and of
    /// metric_from_phi(φ̃) from the Λ⁷ formulas.
    pub fn closed_form_residual(&self) -> f64 {
        (0..self.general.num_points())
            .into_par_iter()
            .map(|p| {
                let d = &self.general.points[p];
                let pt = v7_point(&d.base, &self.v.at(p));
                let gd = &self.general.deformed.metric.metrics[p].g;
                [
                    (d.s - pt.s).amax(),
                    (d.gamma - pt.gamma).amax(),
                    (d.det_ratio - pt.det_ratio).abs(),
                    (gd - pt.g_tilde).amax(),
                ]
                .into_iter()
                .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Deform a structure field by a vector field v^a. Positivity of φ + v⌟ψ is a
/// theorem, so failure here is a bug and panics.
pub fn v7_deform(sf: &StructureField, v: &TensorField) -> V7Deformation {
    let spec = sf.spec().clone();
    let chi = TensorField::from_fn(&spec, |p, _| v7_chi(&sf.structure_at(p), &v.at(p)));
    let general = GeneralDeformationField::new(sf, chi).expect("φ + v⌟ψ is always positive");
    let m = TensorField::from_fn(&spec, |p, _| Tensor7::scalar(v7_point(&sf.structure_at(p), &v.at(p)).m));
    let v_flat = lower_field(sf, v);
    let grad_v = TensorField::from_fn(&spec, |p, _| sf.metric.covariant_at(&v_flat, p));
    let grad_v_decomp =
        (0..spec.num_points()).into_par_iter().map(|p| decompose_2tensor(&grad_v.at(p), &sf.structure_at(p))).collect();
    V7Deformation { v: v.clone(), m, general, grad_v, grad_v_decomp }
}

fn lower_field(sf: &StructureField, v: &TensorField) -> TensorField {
    TensorField::from_fn(sf.spec(), |p, _| mv(&sf.metric.metrics[p].g_tensor(), &v.at(p)))
}

/// ∇̃_a ṽ_c (ṽ lowered with g̃) for ṽ = −(1+M)^{−2/3}v, from v and the split of ∇v.
pub fn grad_v_tilde_formula(st: &G2Structure, v: &Tensor7, vd: &TensorSplit) -> Tensor7 {
    let fv = FrameV::new(st, v);
    let vdf = fv.split_down(vd);
    let p = Parts::of(&vdf);
    let phi = fv.fr.phi();
    let v = &fv.v;
    let m = fv.m;
    let q = 1.0 + m;
    let (v1, v7, v14, v27) = (p.s1, p.s7, p.s14, p.s27);
    let hv = mv(v27, v);
    let vhv = dot(v, &hv);
    let (k7, k4, k1) = (q.powf(-7.0 / 3.0), q.powf(-4.0 / 3.0), q.powf(-1.0 / 3.0));
    let mut r = outer(v, v) * (2.0 / 3.0 * k7 * ((5.0 + 2.0 * m) * v1 - vhv));
    r.axpy(-k1, v27);
    r.axpy(-k4 / 3.0 * ((3.0 + 4.0 * m) * v1 + vhv), &eye());
    r.axpy(-k4, v14);
    r.axpy(k7 * (3.0 + m), &outer(&hv, v));
    r.axpy(k7 * (1.0 + 3.0 * m) / 3.0, &outer(v, &hv));
    r.axpy(2.0 * k7, &einsum("abd,b,d,c->ac", &[phi, v, v7, v]));
    r.axpy(-2.0 / 3.0 * k7, &einsum("cbd,b,d,a->ac", &[phi, v, v7, v]));
    r.axpy(2.0 / 3.0 * k7, &outer(v, &vm(v, v14)));
    r.axpy(-2.0 * k7, &einsum("c,b,ba->ac", &[v, v, v14]));
    r.axpy(-k4, &einsum("b,bac->ac", &[v7, phi]));
    fv.fr.up(&r)
}

/// Checks of the inverse deformation.
#[derive(Clone, Debug)]
pub struct V7Inverse {
    /// ṽ^a = −(1+M)^{−2/3} v^a, an index of the deformed structure.
    pub v_tilde: TensorField,
    pub m_tilde: TensorField,
    /// max |φ̂ − φ| after deforming φ̃ by ṽ. This is O(|v|²), not zero: ṽ only
    /// cancels the Λ³₇(φ̃) part of φ − φ̃.
    pub roundtrip: f64,
    /// max |π₇(φ̂ − φ)| with respect to φ̃, which does vanish.
    pub roundtrip_pi7: f64,
    /// max |g̃(ṽ,ṽ) − M(1+M)^{−2}|.
    pub m_tilde_residual: f64,
    /// max |∇̃ṽ♭ (finite differences on the deformed field) − closed form|.
    pub grad_residual: f64,
    pub fd_tolerance: f64,
}

pub fn v7_inverse(def: &V7Deformation) -> V7Inverse {
    let base = def.base();
    let spec = base.spec().clone();
    let n = spec.num_points();
    let v_tilde = TensorField::from_fn(&spec, |p, _| {
        let m = def.m.scalar_at(p);
        def.v.at(p) * -(1.0 + m).powf(-2.0 / 3.0)
    });
    let deformed = def.deformed();
    let m_tilde = TensorField::from_fn(&spec, |p, _| {
        let g = deformed.metric.metrics[p].g_tensor();
        let vt = v_tilde.at(p);
        Tensor7::scalar(dot(&vt, &mv(&g, &vt)))
    });
    let vt_flat = lower_field(deformed, &v_tilde);
    let stats: Vec<[f64; 5]> = (0..n)
        .into_par_iter()
        .map(|p| {
            let st = base.structure_at(p);
            let dst = deformed.structure_at(p);
            let (rt, rt7) = v7_roundtrip_residuals(&st, &dst, &v_tilde.at(p));
            let m = def.m.scalar_at(p);
            let mr = (m_tilde.scalar_at(p) - m / ((1.0 + m) * (1.0 + m))).abs();
            let formula = grad_v_tilde_formula(&st, &def.v.at(p), &def.grad_v_decomp[p]);
            let fd = deformed.metric.covariant_at(&vt_flat, p);
            [rt, rt7, mr, fd.max_abs_diff(&formula), formula.max_abs()]
        })
        .collect();
    let max = |k: usize| stats.iter().map(|s| s[k]).fold(0.0, f64::max);
    V7Inverse {
        roundtrip: max(0),
        roundtrip_pi7: max(1),
        m_tilde_residual: max(2),
        grad_residual: max(3),
        fd_tolerance: spec.fd_tolerance(max(4).max(1.0)),
        v_tilde,
        m_tilde,
    }
}

/// (max |φ̂ − φ|, max |π₇(φ̂ − φ)|) for φ̂ = φ̃ + ṽ⌟ψ̃, projections taken in `dst`.
fn v7_roundtrip_residuals(st: &G2Structure, dst: &G2Structure, v_tilde: &Tensor7) -> (f64, f64) {
    let diff = &dst.phi + &v7_chi(dst, v_tilde) - st.phi.clone();
    (diff.max_abs(), project_3form(&diff, dst).pi7.max_abs())
}

/// Deform by v, then by ṽ = −(1+M)^{−2/3}v from the deformed structure.
/// Returns (max |φ̂ − φ|, max |π₇(φ̂ − φ)|).
pub fn v7_roundtrip_point(st: &G2Structure, v: &Tensor7) -> (f64, f64) {
    let dst = metric_from_phi(&(&st.phi + &v7_chi(st, v))).expect("φ + v⌟ψ is always positive");
    let m = v7_point(st, v).m;
    v7_roundtrip_residuals(st, &dst, &(v * -(1.0 + m).powf(-2.0 / 3.0)))
}

/// dv♭ = 2(v₇⌟φ + v₁₄) and its consequence d(v₇⌟φ + v₁₄) = 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DvConsistency {
    /// max |dv♭ − 2(v₇⌟φ + v₁₄)|
    pub dv_residual: f64,
    /// max |d(v₇⌟φ + v₁₄)|
    pub d2_residual: f64,
    pub fd_tolerance: f64,
}

/// v₇⌟φ + v₁₄ as a 2-form field; v₇ is a 1-form raised with the metric.
pub fn dv_two_form(sf: &StructureField, v7: &TensorField, v14: &TensorField) -> TensorField {
    TensorField::from_fn(sf.spec(), |p, _| {
        let st = sf.structure_at(p);
        einsum("d,dc,cab->ab", &[&v7.at(p), &st.g_inv(), &st.phi]) + v14.at(p)
    })
}

/// max |d(v₇⌟φ + v₁₄)| for arbitrary component fields.
pub fn dv_condition_residual(sf: &StructureField, v7: &TensorField, v14: &TensorField) -> f64 {
    let w = dv_two_form(sf, v7, v14);
    (0..sf.num_points()).into_par_iter().map(|p| exterior_derivative_at(&w, p).max_abs()).reduce(|| 0.0, f64::max)
}

pub fn dv_consistency(sf: &StructureField, v: &TensorField) -> DvConsistency {
    let spec = sf.spec();
    let v_flat = lower_field(sf, v);
    let grad = TensorField::from_fn(spec, |p, _| sf.metric.covariant_at(&v_flat, p));
    let splits: Vec<TensorSplit> =
        (0..spec.num_points()).into_par_iter().map(|p| decompose_2tensor(&grad.at(p), &sf.structure_at(p))).collect();
    let v7 = TensorField::from_values(spec, splits.iter().map(|s| s.s7.clone()).collect());
    let v14 = TensorField::from_values(spec, splits.iter().map(|s| s.s14.clone()).collect());
    let w = dv_two_form(sf, &v7, &v14);
    let dv_residual = (0..spec.num_points())
        .into_par_iter()
        .map(|p| exterior_derivative_at(&v_flat, p).max_abs_diff(&(w.at(p) * 2.0)))
        .reduce(|| 0.0, f64::max);
    DvConsistency {
        dv_residual,
        d2_residual: dv_condition_residual(sf, &v7, &v14),
        fd_tolerance: spec.fd_tolerance(grad.max_abs().max(1.0)),
    }
}

/// T̃ of φ + v⌟ψ by the general-χ torsion formula, from pointwise data: base
/// torsion T_ab, v^a and ∇_a v_b. Uses ∇ψ_bcde = −4T_[b φ_cde] and
/// ∇s = ∇((1+M)g − v♭v♭).
pub fn v7_torsion_general_point(st: &G2Structure, t: &Tensor7, v: &Tensor7, grad_v: &Tensor7) -> super::GeneralTorsion {
    let d = super::build_general(st, &v7_chi(st, v)).expect("φ + v⌟ψ is always positive");
    let gi = st.g_inv();
    let vl = mv(&st.g(), v);
    let nv_up = einsum("ab,bc->ac", &[grad_v, &gi]);
    let npsi = einsum("ab,cde->abcde", &[t, &st.phi]).antisymmetrize_last(4) * -4.0;
    let nchi = einsum("ae,bcde->abcd", &[&nv_up, &st.psi]) + einsum("e,abcde->abcd", &[v, &npsi]);
    let dm = einsum("dm,m->d", &[grad_v, v]) * 2.0;
    let ns = einsum("d,pq->dpq", &[&dm, &st.g()]) - einsum("dp,q->dpq", &[grad_v, &vl]) - einsum("dq,p->dpq", &[grad_v, &vl]);
    super::general_torsion(&d, t, &nchi, &ns)
}
