//! Full torsion of a G₂-structure field, its components, the exterior-derivative
//! path, consistency conditions, Ricci curvature and the class split.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::{exterior_derivative_at, GridSpec, StructureField, TensorField};
use crate::g2algebra::{
    compose_2tensor, decompose_2tensor, project_4form, project_5form, Frame, G2Structure, TensorSplit,
};
use crate::tensor7::{einsum, Mat7, Tensor7, DIM};

/// Torsion at one point: T_ab = T_a^m g_mb and its four components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorsionData {
    pub t: Tensor7,
    pub tau1: f64,
    /// Lowered 1-form.
    pub tau7: Tensor7,
    pub tau14: Tensor7,
    pub tau27: Tensor7,
    pub class_mask: Vec<u8>,
}

impl TorsionData {
    pub fn new(t: Tensor7, st: &G2Structure, threshold: f64) -> Self {
        let sp = decompose_2tensor(&t, st);
        let class_mask = class_mask(&split_norms(&sp, st), threshold);
        TorsionData { t, tau1: sp.s1, tau7: sp.s7, tau14: sp.s14, tau27: sp.s27, class_mask }
    }

    pub fn split(&self) -> TensorSplit {
        TensorSplit { s1: self.tau1, s7: self.tau7.clone(), s14: self.tau14.clone(), s27: self.tau27.clone() }
    }
}

/// Max-abs of each component in an orthonormal frame, so the numbers do not
/// depend on the coordinate scale of the metric.
pub fn split_norms(sp: &TensorSplit, st: &G2Structure) -> [f64; 4] {
    let fr = Frame::of(st);
    [sp.s1.abs(), fr.down(&sp.s7).max_abs(), fr.down(&sp.s14).max_abs(), fr.down(&sp.s27).max_abs()]
}

pub fn class_mask(norms: &[f64; 4], threshold: f64) -> Vec<u8> {
    [1u8, 7, 14, 27].iter().zip(norms).filter(|(_, n)| **n > threshold).map(|(c, _)| *c).collect()
}

/// "W0", "W7", "W1+W7", ...
pub fn class_name(mask: &[u8]) -> String {
    if mask.is_empty() {
        "W0".into()
    } else {
        mask.iter().map(|c| format!("W{c}")).collect::<Vec<_>>().join("+")
    }
}

/// T_ab = (1/24) ∇_aφ_cde ψ_b^{cde}
pub fn torsion_at(sf: &StructureField, p: usize) -> Tensor7 {
    let nphi = sf.metric.covariant_at(&sf.phi, p);
    let gi = sf.metric.metrics[p].g_inv_tensor();
    let psi = sf.psi.at(p);
    let psi_up3 = einsum("bxyz,xc,yd,ze->bcde", &[&psi, &gi, &gi, &gi]);
    einsum("acde,bcde->ab", &[&nphi, &psi_up3]) * (1.0 / 24.0)
}

/// Lowered torsion at every grid point.
pub fn torsion_field(sf: &StructureField) -> TensorField {
    TensorField::from_fn(sf.spec(), |p, _| torsion_at(sf, p))
}

pub fn full_torsion(sf: &StructureField, p: usize, threshold: f64) -> TorsionData {
    TorsionData::new(torsion_at(sf, p), &sf.structure_at(p), threshold)
}

/// Torsion split read off from dφ and dψ:
/// dφ = 4τ₁ψ − 3τ₇∧φ − 4 i_ψ(τ₂₇), dψ = −4τ₇∧ψ + 2*τ₁₄.
pub fn torsion_from_exterior_at(sf: &StructureField, p: usize) -> (Tensor7, TensorSplit) {
    let st = sf.structure_at(p);
    let dphi = exterior_derivative_at(&sf.phi, p);
    let dpsi = exterior_derivative_at(&sf.psi, p);
    let d4 = project_4form(&dphi, &st);
    let d5 = project_5form(&dpsi, &st);
    let sp = TensorSplit { s1: d4.a / 4.0, s7: d4.omega * (-1.0 / 3.0), s14: d5.omega * (-0.5), s27: d4.h * (-0.25) };
    (compose_2tensor(&sp, &st.metric, &st.phi), sp)
}

pub fn torsion_from_exterior(sf: &StructureField, p: usize, threshold: f64) -> TorsionData {
    TorsionData::new(torsion_from_exterior_at(sf, p).0, &sf.structure_at(p), threshold)
}

/// Max-abs residual of ∇_aψ_bcde = −4 T_a[b φ_cde].
pub fn nabla_psi_check(sf: &StructureField, t: &Tensor7, p: usize) -> f64 {
    let npsi = sf.metric.covariant_at(&sf.psi, p);
    let rhs = einsum("ab,cde->abcde", &[t, &sf.phi.at(p)]).antisymmetrize_last(4) * -4.0;
    npsi.max_abs_diff(&rhs)
}

/// Structure, torsion and its covariant derivative at a point (∇T[a,b,c] = ∇_a T_bc).
#[derive(Clone, Debug)]
pub struct PointTorsion {
    pub st: G2Structure,
    pub t: Tensor7,
    pub nabla_t: Tensor7,
}

impl PointTorsion {
    pub fn from_field(sf: &StructureField, tfield: &TensorField, p: usize) -> Self {
        PointTorsion { st: sf.structure_at(p), t: tfield.at(p), nabla_t: sf.metric.covariant_at(tfield, p) }
    }

    fn in_frame(&self) -> (Frame, Tensor7, Tensor7) {
        let fr = Frame::of(&self.st);
        let t = fr.down(&self.t);
        let nt = fr.down(&self.nabla_t);
        (fr, t, nt)
    }
}

fn delta() -> Tensor7 {
    Tensor7::from_mat(&Mat7::identity())
}

fn trace(t: &Tensor7) -> f64 {
    (0..DIM).map(|a| t.get(&[a, a])).sum()
}

fn a2(t: &Tensor7) -> Tensor7 {
    t.antisymmetrize2()
}

/// π₁₄ datum of a 5-form with metric δ: (1/9)φ⌟η − (1/36)(φ⌟η)⌟ψ.
fn omega14(eta: &Tensor7, phi: &Tensor7, psi: &Tensor7) -> Tensor7 {
    let pe = einsum("abc,abcmn->mn", &[phi, eta]);
    &pe * (1.0 / 9.0) - einsum("ab,abmn->mn", &[&pe, psi]) * (1.0 / 36.0)
}

/// The three conditions on T, as frame components: two vectors and a Λ²₁₄ form.
#[derive(Clone, Debug)]
pub struct ConditionsT {
    pub c1: Tensor7,
    pub c2: Tensor7,
    pub c3: Tensor7,
}

impl ConditionsT {
    pub fn residuals(&self) -> [f64; 3] {
        [self.c1.max_abs(), self.c2.max_abs(), self.c3.max_abs()]
    }
}

/// Conditions 1 and 2 follow from d²φ = 0 projected to Λ⁵₇; condition 3 is the
/// Λ⁶-free part of d²ψ = 0, taken as the Λ²₁₄ datum of
/// η = Alt[∇_aT_b^f ψ_fcde − 4 T_b^f T_a[f φ_cde]].
pub fn consistency_conditions_t(pt: &PointTorsion) -> ConditionsT {
    let (fr, t, nt) = pt.in_frame();
    let (phi, psi) = (fr.phi(), fr.psi());
    let tr = trace(&t);
    let c1 = einsum("abc,bc,am->m", &[phi, &t, &t])
        - einsum("bd,cb,mdc->m", &[&t, &t, phi])
        - einsum("mabc,abc->m", &[psi, &nt])
        - einsum("mab,ab->m", &[phi, &t]) * tr;
    let ntr = einsum("mbc,bc->m", &[&nt, &delta()]);
    let c2 = ntr - einsum("amc,ac->m", &[&nt, &delta()]) - einsum("mc,abc,ab->m", &[&t, phi, &t]);
    let npsi = einsum("af,cde->afcde", &[&t, phi]).antisymmetrize_last(4) * -4.0;
    let eta = (einsum("abf,fcde->abcde", &[&nt, psi]) + einsum("bf,afcde->abcde", &[&t, &npsi])).antisymmetrize();
    let c3 = omega14(&eta, phi, psi);
    ConditionsT { c1, c2, c3 }
}

/// R_ab = (∇_aT_nm − ∇_nT_am)φ^{nm}_b − T_an T^n_b + Tr T·T_ab + T_ac T_nm ψ^{nmc}_b
pub fn ricci_from_torsion(pt: &PointTorsion) -> Mat7 {
    let (fr, t, nt) = pt.in_frame();
    let (phi, psi) = (fr.phi(), fr.psi());
    let r = einsum("anm,nmb->ab", &[&nt, phi]) - einsum("nam,nmb->ab", &[&nt, phi]) - einsum("an,nb->ab", &[&t, &t])
        + &t * trace(&t)
        + einsum("ac,nm,nmcb->ab", &[&t, &t, psi]);
    fr.up(&r).to_mat()
}

/// Ricci for torsion in W₁⊕W₇:
/// R = (∇^cτ₇_c + 5|τ₇|² + 6τ₁²) g − 5 τ₇⊗τ₇ + 5 ∇τ₇.
pub fn ricci_w1w7(st: &G2Structure, tau1: f64, tau7: &Tensor7, nabla_tau7: &Tensor7) -> Mat7 {
    let gi = st.metric.g_inv;
    let v = tau7.to_array7();
    let n = nabla_tau7.to_mat();
    let mut div = 0.0;
    let mut norm2 = 0.0;
    for a in 0..DIM {
        for b in 0..DIM {
            div += gi[(a, b)] * n[(a, b)];
            norm2 += gi[(a, b)] * v[a] * v[b];
        }
    }
    let vv = Mat7::from_fn(|a, b| v[a] * v[b]);
    st.metric.g * (div + 5.0 * norm2 + 6.0 * tau1 * tau1) - vv * 5.0 + n * 5.0
}

/// Component fields of a torsion field.
#[derive(Clone, Debug)]
pub struct ComponentFields {
    pub tau1: TensorField,
    pub tau7: TensorField,
    pub tau14: TensorField,
    pub tau27: TensorField,
}

impl ComponentFields {
    pub fn from_torsion(sf: &StructureField, tfield: &TensorField) -> Self {
        let splits: Vec<TensorSplit> =
            (0..sf.num_points()).into_par_iter().map(|p| decompose_2tensor(&tfield.at(p), &sf.structure_at(p))).collect();
        let spec = sf.spec();
        ComponentFields {
            tau1: TensorField::from_values(spec, splits.iter().map(|s| Tensor7::scalar(s.s1)).collect()),
            tau7: TensorField::from_values(spec, splits.iter().map(|s| s.s7.clone()).collect()),
            tau14: TensorField::from_values(spec, splits.iter().map(|s| s.s14.clone()).collect()),
            tau27: TensorField::from_values(spec, splits.iter().map(|s| s.s27.clone()).collect()),
        }
    }

    pub fn split_at(&self, p: usize) -> TensorSplit {
        TensorSplit { s1: self.tau1.scalar_at(p), s7: self.tau7.at(p), s14: self.tau14.at(p), s27: self.tau27.at(p) }
    }
}

/// Components and their covariant derivatives at a point; n1 = ∇τ₁, nX[a,..] = ∇_a τX.
#[derive(Clone, Debug)]
pub struct PointComponents {
    pub st: G2Structure,
    pub split: TensorSplit,
    pub n1: Tensor7,
    pub n7: Tensor7,
    pub n14: Tensor7,
    pub n27: Tensor7,
}

impl PointComponents {
    pub fn from_fields(sf: &StructureField, cf: &ComponentFields, p: usize) -> Self {
        let m = &sf.metric;
        PointComponents {
            st: sf.structure_at(p),
            split: cf.split_at(p),
            n1: cf.tau1.gradient_at(p),
            n7: m.covariant_at(&cf.tau7, p),
            n14: m.covariant_at(&cf.tau14, p),
            n27: m.covariant_at(&cf.tau27, p),
        }
    }
}

/// Component form of the three conditions, plus the simplified class-table checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentConditions {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// max |dτ₇|, which vanishes in class W₇.
    pub d_tau7: f64,
    /// max |τ₇ − d log τ₁| when τ₁ ≠ 0, the W₁⊕W₇ relation.
    pub log_gauge: Option<f64>,
    /// max |∇τ₁|, which vanishes in class W₁.
    pub grad_tau1: f64,
}

pub fn consistency_conditions_components(pc: &PointComponents) -> ComponentConditions {
    let fr = Frame::of(&pc.st);
    let (phi, psi) = (fr.phi(), fr.psi());
    let t1 = pc.split.s1;
    let t7 = fr.down(&pc.split.s7);
    let t14 = fr.down(&pc.split.s14);
    let t27 = fr.down(&pc.split.s27);
    let n1 = fr.down(&pc.n1);
    let n7 = fr.down(&pc.n7);
    let n14 = fr.down(&pc.n14);
    let n27 = fr.down(&pc.n27);

    let c1 = einsum("abm,ab->m", &[&n14, &delta()]) + einsum("mab,ab->m", &[phi, &n7]) * 2.0 + einsum("a,am->m", &[&t7, &t14]) * 4.0;
    let c2 = &n1 - &(einsum("mab,ab->m", &[phi, &n7]) * 0.5) - einsum("abm,ab->m", &[&n27, &delta()]) * (1.0 / 6.0)
        - einsum("a,am->m", &[&t7, &t27])
        - &t7 * t1;
    let div27 = einsum("bac,bc->a", &[&n27, &delta()]);
    let x = einsum("abm,nab->mn", &[&n27, phi]);
    let t3d = a2(&n7) * (2.0 / 3.0) - einsum("mnab,ab->mn", &[psi, &n7]) * (1.0 / 6.0);
    let y = einsum("am,an->mn", &[&t14, &t27]);
    let t3e = a2(&y) * (2.0 / 3.0) - einsum("mnab,ca,bc->mn", &[psi, &t14, &t27]) * (1.0 / 6.0);
    let c3 = einsum("mna,a->mn", &[phi, &div27]) + a2(&x) * 6.0 - &t14 * (24.0 * t1) - t3d * 18.0 - t3e * 18.0;

    let d_tau7 = (a2(&n7) * 2.0).max_abs();
    let log_gauge = (t1.abs() > 1e-12).then(|| (&t7 - &(&n1 * (1.0 / t1))).max_abs());
    ComponentConditions { c1: c1.max_abs(), c2: c2.max_abs(), c3: c3.max_abs(), d_tau7, log_gauge, grad_tau1: n1.max_abs() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorsionClassReport {
    pub class_mask: Vec<u8>,
    pub class_name: String,
    pub component_norms: [f64; 4],
    pub consistency_residuals: [f64; 3],
    pub threshold: f64,
    pub fd_tolerance: f64,
}

/// Classification scale: max |T|, at least 1.
fn torsion_scale(tfield: &TensorField) -> f64 {
    tfield.max_abs().max(1.0)
}

/// Classify a structure field by the grid-wide max of each component norm.
pub fn classify(sf: &StructureField, tfield: &TensorField) -> TorsionClassReport {
    let spec = sf.spec();
    let scale = torsion_scale(tfield);
    let threshold = spec.class_threshold(scale);
    let per_point: Vec<([f64; 4], [f64; 3])> = (0..sf.num_points())
        .into_par_iter()
        .map(|p| {
            let st = sf.structure_at(p);
            let norms = split_norms(&decompose_2tensor(&tfield.at(p), &st), &st);
            let res = consistency_conditions_t(&PointTorsion::from_field(sf, tfield, p)).residuals();
            (norms, res)
        })
        .collect();
    let mut norms = [0.0f64; 4];
    let mut res = [0.0f64; 3];
    for (n, r) in per_point {
        for k in 0..4 {
            norms[k] = norms[k].max(n[k]);
        }
        for k in 0..3 {
            res[k] = res[k].max(r[k]);
        }
    }
    let class_mask = class_mask(&norms, threshold);
    TorsionClassReport {
        class_name: class_name(&class_mask),
        class_mask,
        component_norms: norms,
        consistency_residuals: res,
        threshold,
        fd_tolerance: spec.fd_tolerance(scale),
    }
}

/// Grid-wide max of the three T-conditions.
pub fn consistency_field_max(sf: &StructureField, tfield: &TensorField) -> [f64; 3] {
    (0..sf.num_points())
        .into_par_iter()
        .map(|p| consistency_conditions_t(&PointTorsion::from_field(sf, tfield, p)).residuals())
        .reduce(|| [0.0; 3], |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])])
}

/// Torsion in W₁⊕W₇ on the flat torus with φ₀: τ₁ = exp(u), τ₇ = du for a
/// periodic potential u. No φ field on the torus carries this torsion, so ∇φ is
/// taken to be T·ψ, the relation that defines T; ∇T follows by the product rule.
#[derive(Clone, Debug)]
pub struct SyntheticW1W7 {
    pub spec: GridSpec,
    pub tau1: TensorField,
    pub tau7: TensorField,
    pub t: TensorField,
}

impl SyntheticW1W7 {
    /// `u` and its gradient are given analytically.
    pub fn new(
        spec: &GridSpec,
        u: impl Fn(&[f64; 7]) -> f64 + Sync,
        du: impl Fn(&[f64; 7]) -> [f64; 7] + Sync,
    ) -> Self {
        let st = G2Structure::canonical();
        let tau1 = TensorField::from_fn(spec, |_, x| Tensor7::scalar(u(&x).exp()));
        let tau7 = TensorField::from_fn(spec, |_, x| Tensor7::vector(&du(&x)));
        let t = TensorField::from_fn(spec, |p, _| {
            let sp = TensorSplit { s1: tau1.scalar_at(p), s7: tau7.at(p), s14: Tensor7::zeros(2), s27: Tensor7::zeros(2) };
            sp.compose(&st)
        });
        SyntheticW1W7 { spec: spec.clone(), tau1, tau7, t }
    }

    /// The standard test potential u = 0.1 sin(2πx¹).
    pub fn standard(spec: &GridSpec) -> Self {
        let k = 2.0 * std::f64::consts::PI / spec.period[0];
        let axis = spec.active_axes[0] - 1;
        SyntheticW1W7::new(spec, move |x| 0.1 * (k * x[axis]).sin(), move |x| {
            let mut d = [0.0; 7];
            d[axis] = 0.1 * k * (k * x[axis]).cos();
            d
        })
    }

    pub fn point(&self, p: usize) -> PointTorsion {
        let st = G2Structure::canonical();
        let t = self.t.at(p);
        let tau7 = self.tau7.at(p);
        // ∇_cT_ab = ∂_cτ₁ g_ab + ∂_cτ₇^d φ_dab + τ₇^d ∇_cφ_dab; the FD gradient holds the first two
        let nphi = einsum("ce,edab->cdab", &[&t, &st.psi]);
        let nabla_t = self.t.gradient_at(p) + einsum("d,cdab->cab", &[&tau7, &nphi]);
        PointTorsion { st, t, nabla_t }
    }

    pub fn components(&self, p: usize) -> PointComponents {
        let st = G2Structure::canonical();
        PointComponents {
            split: TensorSplit { s1: self.tau1.scalar_at(p), s7: self.tau7.at(p), s14: Tensor7::zeros(2), s27: Tensor7::zeros(2) },
            n1: self.tau1.gradient_at(p),
            n7: self.tau7.gradient_at(p),
            n14: Tensor7::zeros(3),
            n27: Tensor7::zeros(3),
            st,
        }
    }
}

/// Grid-wide max of the Ricci difference between the torsion formula and the
/// metric's own curvature.
pub fn ricci_two_path(sf: &StructureField, tfield: &TensorField) -> f64 {
    (0..sf.num_points())
        .into_par_iter()
        .map(|p| {
            let rt = ricci_from_torsion(&PointTorsion::from_field(sf, tfield, p));
            let rm = sf.metric.ricci_at(p);
            (rt - rm).amax()
        })
        .reduce(|| 0.0, f64::max)
}
