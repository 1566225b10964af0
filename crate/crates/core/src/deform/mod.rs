//! Deformations φ → φ̃ = φ + χ of a G₂-structure: the deformed metric, inverse
//! metric, 4-form and connection in closed form, the deformed torsion, and the
//! conformal and Λ⁷ special cases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, StructureField, TensorField};
use crate::g2algebra::{metric_from_phi, G2Structure, NotPositive};
use crate::tensor7::{einsum, hodge_star, Mat7, Metric7, Tensor7, DIM};

mod conformal;
mod formulas;
mod lambda7;
mod solve;

pub use conformal::*;
pub use formulas::*;
pub use lambda7::*;
pub use solve::*;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("deformed 3-form is not positive: {0}")]
    NotPositive(#[from] NotPositive),
    #[error("deformed 3-form is not positive at grid point {point}: {source}")]
    NotPositiveAt { point: usize, source: NotPositive },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Closed-form data of φ̃ = φ + χ at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneralDeformation {
    pub base: G2Structure,
    pub chi: Tensor7,
    /// *χ with respect to the base metric.
    pub star_chi: Tensor7,
    pub s: Mat7,
    /// γ^am, upper indices.
    pub gamma: Mat7,
    /// det g̃ / det g.
    pub det_ratio: f64,
    pub g_tilde: Metric7,
    /// γ / det_ratio.
    pub g_tilde_inv: Mat7,
    pub psi_tilde: Tensor7,
    /// ψ̃ with all indices raised by g̃.
    pub psi_tilde_up: Tensor7,
    /// δΓ_a^b_c stored [b, a, c] like the Christoffel symbols; only known on fields.
    pub delta_gamma: Option<Tensor7>,
}

fn sym(t: Tensor7) -> Tensor7 {
    t.symmetrize2()
}

fn frob(a: &Mat7, b: &Mat7) -> f64 {
    a.component_mul(b).sum()
}

fn dot_data(a: &Tensor7, b: &Tensor7) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Raise (or lower) every slot with a symmetric matrix.
fn all_slots(t: &Tensor7, m: &Mat7) -> Tensor7 {
    t.transform(m)
}

/// Raise the first slot only.
fn first_up(t: &Tensor7, gi: &Tensor7) -> Tensor7 {
    let spec = match t.rank() {
        2 => "ax,xb->ab",
        3 => "ax,xbc->abc",
        4 => "ax,xbcd->abcd",
        r => panic!("first_up: rank {r}"),
    };
    einsum(spec, &[gi, t])
}

/// s_ab = g_ab + ½χ_mn(a φ_b)^mn + (1/8)χ_amnχ_bpqψ^mnpq + (1/24)χ_amnχ_bpq(*χ)^mnpq
pub fn deformation_s(st: &G2Structure, chi: &Tensor7, star_chi: &Tensor7) -> Mat7 {
    let gi = &st.metric.g_inv;
    let psi_up = all_slots(&st.psi, gi);
    let sc_up = all_slots(star_chi, gi);
    let t = einsum("mna,bmn->ab", &[chi, &st.phi_low_up_up()]);
    let s = st.g() + sym(t) * 0.5 + einsum("amn,bpq,mnpq->ab", &[chi, chi, &psi_up]) * (1.0 / 8.0)
        + einsum("amn,bpq,mnpq->ab", &[chi, chi, &sc_up]) * (1.0 / 24.0);
    s.to_mat()
}

/// γ^am, the numerator of the deformed inverse metric.
pub fn deformation_gamma(st: &G2Structure, chi: &Tensor7, star_chi: &Tensor7) -> Mat7 {
    let gim = &st.metric.g_inv;
    let gi = st.g_inv();
    let (phiu, psiu, chiu) = (all_slots(&st.phi, gim), all_slots(&st.psi, gim), all_slots(chi, gim));
    let scm = first_up(star_chi, &gi);
    let psm = first_up(&st.psi, &gi);
    let chm = first_up(chi, &gi);
    let phiuue = einsum("xye,mx,by->mbe", &[&st.phi, &gi, &gi]);
    let quad = |a: &Tensor7, b: &Tensor7, c: &Tensor7, d: &Tensor7| einsum("abcd,mpqr,bcp,dqr->am", &[a, b, c, d]);
    let mut g = gi.clone();
    g.axpy(-1.0 / 96.0, &quad(&scm, &scm, &phiu, &phiu));
    g.axpy(-1.0 / 48.0, &sym(quad(&scm, &scm, &phiu, &chiu)));
    g.axpy(-1.0 / 48.0, &sym(quad(&scm, &psm, &chiu, &chiu)));
    g.axpy(-1.0 / 96.0, &quad(&psm, &psm, &chiu, &chiu));
    g.axpy(-1.0 / 96.0, &quad(&scm, &scm, &chiu, &chiu));
    g.axpy(-0.25, &sym(einsum("abc,mbc->am", &[&chm, &phiu])));
    g.axpy(1.0 / 6.0, &sym(einsum("abcd,mbe,cde->am", &[&scm, &phiuue, &chiu])));
    g.axpy(1.0 / 12.0, &sym(einsum("abcd,mbcd->am", &[&scm, &psiu])));
    g.axpy(dot_data(&chiu, &st.phi) / 12.0, &gi);
    g.to_mat()
}

/// Deformed data at a point. Fails if φ + χ leaves the positive orbit.
pub fn build_general(st: &G2Structure, chi: &Tensor7) -> Result<GeneralDeformation, DeformError> {
    let direct = metric_from_phi(&(&st.phi + chi))?;
    let star_chi = hodge_star(chi, &st.metric).expect("3-form");
    let s = deformation_s(st, chi, &star_chi);
    let gamma = deformation_gamma(st, chi, &star_chi);
    let det_ratio = (frob(&gamma, &s) / 7.0).powf(2.0 / 3.0);
    let g_tilde = Metric7::new(s / det_ratio.sqrt()).map_err(|_| NotPositive::Indefinite { det_s: direct.det_s })?;
    let g_tilde_inv = gamma / det_ratio;
    let check = (g_tilde_inv - g_tilde.g_inv).amax() / g_tilde.g_inv.amax().max(1.0);
    debug_assert!(check < 1e-9, "closed-form inverse metric off by {check:e}");
    let gim = &st.metric.g_inv;
    let psi_tilde_up = (all_slots(&st.psi, gim) + all_slots(&star_chi, gim)) * det_ratio.powf(-0.5);
    let psi_tilde = all_slots(&psi_tilde_up, &g_tilde.g);
    Ok(GeneralDeformation {
        base: st.clone(),
        chi: chi.clone(),
        star_chi,
        s,
        gamma,
        det_ratio,
        g_tilde,
        g_tilde_inv,
        psi_tilde,
        psi_tilde_up,
        delta_gamma: None,
    })
}

impl GeneralDeformation {
    pub fn phi_tilde(&self) -> Tensor7 {
        &self.base.phi + &self.chi
    }

    /// The deformed structure assembled from the closed forms.
    pub fn structure(&self) -> G2Structure {
        let metric = self.g_tilde.clone();
        G2Structure {
            phi: self.phi_tilde(),
            psi: self.psi_tilde.clone(),
            s: metric.g * metric.sqrt_det,
            det_s: metric.det().powf(4.5),
            metric,
        }
    }

    /// 4φ_c^bd + φ_cpq(*χ)^pqbd + χ_cpqψ^pqbd + χ_cpq(*χ)^pqbd
    fn p_tensor(&self) -> Tensor7 {
        let gim = &self.base.metric.g_inv;
        let psiu = all_slots(&self.base.psi, gim);
        let scu = all_slots(&self.star_chi, gim);
        self.base.phi_low_up_up() * 4.0
            + einsum("amn,mnbc->abc", &[&self.base.phi, &scu])
            + einsum("amn,mnbc->abc", &[&self.chi, &psiu])
            + einsum("amn,mnbc->abc", &[&self.chi, &scu])
    }

    /// Residuals of the closed forms against independent constructions:
    /// [g̃ vs metric_from_phi(φ+χ), γ/r vs inverse of g̃, r^{3/2} vs γ·s/7, ψ̃ vs direct].
    pub fn cross_check(&self) -> [f64; 4] {
        let direct = metric_from_phi(&self.phi_tilde()).expect("checked at construction");
        let inv = self.g_tilde.g.try_inverse().expect("positive definite");
        [
            (self.g_tilde.g - direct.metric.g).amax(),
            (self.g_tilde_inv - inv).amax(),
            (self.det_ratio.powf(1.5) - frob(&self.gamma, &self.s) / 7.0).abs(),
            self.psi_tilde.max_abs_diff(&direct.psi),
        ]
    }
}

/// φ̃_a^{b̃c̃} = ¼ r^{−1/2}(4φ_a^bc + φ_amn(*χ)^mnbc + χ_amnψ^mnbc + χ_amn(*χ)^mnbc), r = det g̃/det g.
pub fn phi_tilde_raised(def: &GeneralDeformation) -> Tensor7 {
    def.p_tensor() * (0.25 / def.det_ratio.sqrt())
}

/// T̃ of a general deformation at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneralTorsion {
    /// T̃_a^m̃ (second index raised with g̃).
    pub mixed: Tensor7,
    /// T̃_an, lowered with g̃ through s.
    pub lowered: Tensor7,
    /// τ̃₁ = r^{−1/2} tr B / 168.
    pub tau1: f64,
}

/// φ + χ over a grid with its pointwise closed forms.
#[derive(Clone, Debug)]
pub struct GeneralDeformationField {
    pub base: StructureField,
    pub chi: TensorField,
    pub points: Vec<GeneralDeformation>,
    pub s: TensorField,
    /// φ + χ with its metric reconstructed independently of the closed forms.
    pub deformed: StructureField,
}

impl GeneralDeformationField {
    pub fn new(base: &StructureField, chi: TensorField) -> Result<Self, DeformError> {
        let spec = base.spec().clone();
        let points: Result<Vec<_>, DeformError> = (0..base.num_points())
            .into_par_iter()
            .map(|p| {
                build_general(&base.structure_at(p), &chi.at(p)).map_err(|e| match e {
                    DeformError::NotPositive(source) => DeformError::NotPositiveAt { point: p, source },
                    e => e,
                })
            })
            .collect();
        let points = points?;
        let s = TensorField::from_values(&spec, points.iter().map(|d| Tensor7::from_mat(&d.s)).collect());
        let phi_t = TensorField::from_values(&spec, points.iter().map(|d| d.phi_tilde()).collect());
        let deformed = StructureField::from_phi(phi_t)?;
        Ok(GeneralDeformationField { base: base.clone(), chi, points, s, deformed })
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// The point data with δΓ filled in.
    pub fn point(&self, p: usize) -> GeneralDeformation {
        let mut d = self.points[p].clone();
        d.delta_gamma = Some(self.delta_christoffel_at(p));
        d
    }

    /// δΓ = Γ(g̃) − Γ(g) from ∇s, stored [b, a, c]:
    /// δΓ_a^b_c = ½ r^{−1/2}(g̃^bd(∇_c s_ad + ∇_a s_cd − ∇_d s_ac) − (δ_a^b t_c + δ_c^b t_a − g̃_ac g̃^be t_e)/9),
    /// t_e = g̃^mn ∇_e s_mn.
    pub fn delta_christoffel_at(&self, p: usize) -> Tensor7 {
        let d = &self.points[p];
        let ns = self.base.metric.covariant_at(&self.s, p);
        delta_christoffel_from(d, &ns)
    }

    /// Γ(g̃) − Γ(g) taken directly from the two metric fields.
    pub fn christoffel_difference_at(&self, p: usize) -> Tensor7 {
        self.deformed.metric.gamma_at(p) - self.base.metric.gamma_at(p)
    }

    /// Deformed torsion from the base torsion (lowered T_ab field) and ∇χ.
    pub fn deformed_torsion_general_at(&self, tfield: &TensorField, p: usize) -> GeneralTorsion {
        let d = &self.points[p];
        let ns = self.base.metric.covariant_at(&self.s, p);
        let nchi = self.base.metric.covariant_at(&self.chi, p);
        general_torsion(d, &tfield.at(p), &nchi, &ns)
    }
}

pub(crate) fn delta_christoffel_from(d: &GeneralDeformation, ns: &Tensor7) -> Tensor7 {
    let gti = Tensor7::from_mat(&d.g_tilde_inv);
    let gt = d.g_tilde.g_tensor();
    let del = Tensor7::from_mat(&Mat7::identity());
    let t = einsum("mn,emn->e", &[&gti, ns]);
    let mut out = einsum("bd,cad->bac", &[&gti, ns]) + einsum("bd,acd->bac", &[&gti, ns])
        - einsum("bd,dac->bac", &[&gti, ns]);
    let trace_part = einsum("ab,c->bac", &[&del, &t]) + einsum("cb,a->bac", &[&del, &t])
        - einsum("ac,be,e->bac", &[&gt, &gti, &t]);
    out.axpy(-1.0 / 9.0, &trace_part);
    out * (0.5 / d.det_ratio.sqrt())
}

/// T̃_a^m = r^{−1/2}B_a^m/24 − ½ δΓ_a^e_b φ̃_e^{m̃b̃}, with
/// B = 24T_a^m + T_a^eψ_ebcd(*χ)^mbcd + ψ^mbcd∇_aχ_bcd + ∇_aχ_bcd(*χ)^mbcd.
pub(crate) fn general_torsion(d: &GeneralDeformation, t: &Tensor7, nchi: &Tensor7, ns: &Tensor7) -> GeneralTorsion {
    let st = &d.base;
    let gim = &st.metric.g_inv;
    let gi = st.g_inv();
    let psiu = all_slots(&st.psi, gim);
    let scu = all_slots(&d.star_chi, gim);
    let tam = einsum("ab,bm->am", &[t, &gi]);
    let b = &tam * 24.0
        + einsum("ae,ebcd,mbcd->am", &[&tam, &st.psi, &scu])
        + einsum("mbcd,abcd->am", &[&psiu, nchi])
        + einsum("abcd,mbcd->am", &[nchi, &scu]);
    let rh = d.det_ratio.sqrt();
    let dg = delta_christoffel_from(d, ns);
    let p_t = d.p_tensor();
    let phit_r = &p_t * (0.25 / rh);
    // dg is stored [e, a, b]
    let mixed = &b * (1.0 / (24.0 * rh)) - einsum("eab,emb->am", &[&dg, &phit_r]) * 0.5;
    let tau1 = (0..DIM).map(|a| b.get(&[a, a])).sum::<f64>() / (168.0 * rh);
    // Q_cbdan = δ_cn ∇_b s_ad − δ_ca g̃_bn t_d / 9
    let gti = Tensor7::from_mat(&d.g_tilde_inv);
    let trs = einsum("pq,dpq->d", &[&gti, ns]);
    let pq = einsum("nbd,bad->an", &[&p_t, ns]) - einsum("abd,bn,d->an", &[&p_t, &d.g_tilde.g_tensor(), &trs]) * (1.0 / 9.0);
    let r = d.det_ratio;
    let lowered = einsum("am,mn->an", &[&b, &Tensor7::from_mat(&d.s)]) * (1.0 / (24.0 * r)) - pq * (1.0 / (8.0 * r));
    GeneralTorsion { mixed, lowered, tau1 }
}

/// s for χ = i_φ(h), h traceless symmetric:
/// s = g + (2/3)h + (2/9)h² − (1/18)tr(h²)g − (1/18)P(h,h) + (1/27)P(h,h²) + (1/81)tr(h³)g,
/// P(X,Y)_ab = φ_amnφ_bpq X^mp Y^nq.
pub fn lambda27_s(st: &G2Structure, h: &Tensor7) -> Mat7 {
    let gi = st.metric.g_inv;
    let hm = h.to_mat();
    let hu = gi * hm * gi;
    let h2 = hm * gi * hm;
    let hh = hm * gi;
    let tr2 = (hh * hh).trace();
    let tr3 = (hh * hh * hh).trace();
    let p = |x: &Mat7, y: &Mat7| {
        einsum("amn,bpq,mp,nq->ab", &[&st.phi, &st.phi, &Tensor7::from_mat(x), &Tensor7::from_mat(y)]).to_mat()
    };
    let g = st.metric.g;
    g + hm * (2.0 / 3.0) + h2 * (2.0 / 9.0) - g * (tr2 / 18.0) - p(&hu, &hu) / 18.0 + p(&hu, &(hu * hm * gi)) / 27.0
        + g * (tr3 / 81.0)
}

pub(crate) fn outer(a: &Tensor7, b: &Tensor7) -> Tensor7 {
    einsum("a,b->ab", &[a, b])
}

/// v_a X_ab
pub(crate) fn vm(v: &Tensor7, x: &Tensor7) -> Tensor7 {
    einsum("a,ab->b", &[v, x])
}

/// X_ab v_b
pub(crate) fn mv(x: &Tensor7, v: &Tensor7) -> Tensor7 {
    einsum("ab,b->a", &[x, v])
}

pub(crate) fn dot(a: &Tensor7, b: &Tensor7) -> f64 {
    dot_data(a, b)
}

pub(crate) fn eye() -> Tensor7 {
    Tensor7::from_mat(&Mat7::identity())
}
