//! Closed-form torsion of φ̃ = φ + v⌟ψ in terms of the base torsion and ∇v.
//! Everything is evaluated in an orthonormal frame of the base metric, where
//! upper and lower indices agree.

use serde::{Deserialize, Serialize};

use super::{dot, eye, mv, outer, vm};
use crate::g2algebra::{Frame, G2Structure, TensorSplit};
use crate::tensor7::{einsum, Tensor7};

/// Frame data for a vector v^a.
pub(crate) struct FrameV {
    pub fr: Frame,
    pub v: Tensor7,
    pub m: f64,
}

impl FrameV {
    pub fn new(st: &G2Structure, v_up: &Tensor7) -> Self {
        let fr = Frame::of(st);
        let v = v_up.transform(&fr.f.transpose());
        let m = dot(&v, &v);
        FrameV { fr, v, m }
    }

    pub fn split_down(&self, sp: &TensorSplit) -> TensorSplit {
        sp.transform(&self.fr.e)
    }

    pub fn split_up(&self, sp: &TensorSplit) -> TensorSplit {
        sp.transform(&self.fr.f)
    }
}

/// Frame-component pieces of a split.
pub(crate) struct Parts<'a> {
    pub s1: f64,
    pub s7: &'a Tensor7,
    pub s14: &'a Tensor7,
    pub s27: &'a Tensor7,
}

impl<'a> Parts<'a> {
    pub fn of(sp: &'a TensorSplit) -> Self {
        Parts { s1: sp.s1, s7: &sp.s7, s14: &sp.s14, s27: &sp.s27 }
    }
}

struct Acc(Tensor7);

impl Acc {
    fn new(rank: usize) -> Self {
        Acc(Tensor7::zeros(rank))
    }
    fn add(&mut self, c: f64, t: Tensor7) {
        self.0.axpy(c, &t);
    }
}

fn a2(t: Tensor7) -> Tensor7 {
    t.antisymmetrize2()
}

fn s2(t: Tensor7) -> Tensor7 {
    t.symmetrize2()
}

/// T̃_an in the frame; `vd` is the split of ∇_a v_b, `td` that of T.
pub(crate) fn t_tilde_frame(phi: &Tensor7, psi: &Tensor7, v: &Tensor7, vd: &Parts, td: &Parts) -> Tensor7 {
    let e = einsum;
    let m = dot(v, v);
    let q = 1.0 + m;
    let i7 = eye();
    let vv = outer(v, v);
    let (v1, v7, v14, v27) = (vd.s1, vd.s7, vd.s14, vd.s27);
    let (t1, t7, t14, t27) = (td.s1, td.s7, td.s14, td.s27);
    let phiv = e("anm,m->an", &[phi, v]);
    let vv27 = dot(v, &mv(v27, v));

    let mut a = Acc::new(2);
    a.add(v1, &vv - &(&i7 * q));
    a.add(-4.0 / 3.0 * q * v1, phiv.clone());
    a.add(-(1.0 + 4.0 * m / 3.0), e("anm,m->an", &[phi, v7]));
    a.add(-1.0 / 3.0, e("anmp,m,p->an", &[psi, v, v7]));
    a.add(5.0 / 3.0, e("a,nmp,m,p->an", &[v, phi, v, v7]));
    a.add(4.0 / 3.0, e("n,amp,m,p->an", &[v, phi, v, v7]));
    a.add(dot(v7, v) / 3.0, e("pan,p->an", &[phi, v]));
    a.add(1.0 / 3.0, outer(v7, v));
    a.add(8.0 / 3.0, outer(v, v7));
    a.add(-q, v14.clone());
    a.add(-1.0, outer(&vm(v, v14), v));
    a.add(1.0, outer(v, &vm(v, v14)));
    a.add(-1.0 / 3.0, e("anm,mp,p->an", &[phi, v14, v]));
    a.add(1.0 / 3.0, e("anmp,q,m,pq->an", &[psi, v, v, v14]));
    a.add(-q, v27.clone());
    a.add(1.0, outer(&vm(v, v27), v));
    a.add(-q, e("mpn,pa,m->an", &[phi, v27, v]));
    a.add(-1.0 / 3.0, e("anm,mp,p->an", &[phi, v27, v]));
    a.add(1.0 / 3.0, e("anmp,m,pq,q->an", &[psi, v, v27, v]));
    a.add(1.0, e("a,nmp,m,pq,q->an", &[v, phi, v, v27, v]));
    a.add(-vv27 / 3.0, phiv);

    let mut b = Acc::new(2);
    b.add(t1, i7.clone());
    b.add(t1, e("man,m->an", &[phi, v]));
    b.add(1.0, e("anm,m->an", &[phi, t7]));
    b.add(1.0, outer(v, t7));
    b.add(-dot(t7, v), i7);
    b.add(1.0, e("anmp,m,p->an", &[psi, t7, v]));
    b.add(1.0, t14.clone());
    b.add(-1.0, e("nmp,m,pa->an", &[phi, v, t14]));
    b.add(1.0, t27.clone());
    b.add(1.0, e("nmp,m,pa->an", &[phi, v, t27]));

    a.0 * q.powf(-4.0 / 3.0) + b.0 * q.powf(-1.0 / 3.0)
}

pub(crate) fn tau1_tilde_frame(v: &Tensor7, vd: &Parts, td: &Parts) -> f64 {
    let m = dot(v, v);
    (1.0 + m).powf(-2.0 / 3.0)
        * ((1.0 + m / 7.0) * td.s1 - vd.s1 - 6.0 / 7.0 * dot(td.s7, v)
            + 3.0 / 7.0 * dot(vd.s7, v)
            + dot(v, &mv(td.s27, v)) / 7.0)
}

/// τ̃₇ as a 1-form lowered with g̃.
pub(crate) fn tau7_tilde_frame(phi: &Tensor7, v: &Tensor7, vd: &Parts, td: &Parts) -> Tensor7 {
    let e = einsum;
    let m = dot(v, v);
    let q = 1.0 + m;
    let (v1, v7, v27) = (vd.s1, vd.s7, vd.s27);
    let (t1, t7, t14, t27) = (td.s1, td.s7, td.s14, td.s27);
    let mut a = Acc::new(1);
    a.add(1.0, t7.clone());
    a.add(-1.0 / 6.0, e("cab,a,b->c", &[phi, t7, v]));
    a.add(-1.0 / 6.0, vm(v, t27));
    a.add(-1.0 / 6.0, vm(v, t14));
    let c = dot(v, &mv(t27, v)) + 6.0 * t1 - 6.0 * dot(t7, v) - 8.0 * v1 + 3.0 * dot(v7, v);
    a.add(c / (6.0 * q), v.clone());
    let k = -1.0 / (6.0 * q);
    a.add(k * 3.0 * (m + 2.0), v7.clone());
    a.add(k, vm(v, v27));
    a.add(k, e("cab,a,bd,d->c", &[phi, v, v27, v]));
    a.add(k * 3.0, e("cab,a,b->c", &[phi, v, v7]));
    a.0
}

pub(crate) fn tau14_tilde_frame(phi: &Tensor7, psi: &Tensor7, v: &Tensor7, vd: &Parts, td: &Parts) -> Tensor7 {
    let e = einsum;
    let m = dot(v, v);
    let q = 1.0 + m;
    let (v7, v14, v27) = (vd.s7, vd.s14, vd.s27);
    let (t7, t14, t27) = (td.s7, td.s14, td.s27);
    let hv = mv(v27, v);
    let vv27 = dot(v, &hv);
    let mut a = Acc::new(2);
    a.add(-10.0 / 3.0, a2(outer(v7, v)));
    a.add(4.0 / 3.0, a2(e("a,mpn,m,p->an", &[v, phi, v, v7])));
    a.add(-(5.0 / 6.0 + m / 2.0), e("mpan,m,p->an", &[psi, v, v7]));
    a.add(dot(v7, v) / 3.0, e("p,pan->an", &[v, phi]));
    a.add(-m / 3.0, e("m,man->an", &[v7, phi]));
    a.add(-q, v14.clone());
    a.add(-2.0, a2(outer(&vm(v, v14), v)));
    a.add(1.0 / 3.0, e("man,p,pm->an", &[phi, v, v14]));
    a.add(1.0 / 3.0, e("mpan,m,pq,q->an", &[psi, v, v14, v]));
    a.add(-vv27 / 3.0, e("man,m->an", &[phi, v]));
    a.add(q, a2(e("mpa,np,m->an", &[phi, v27, v])));
    a.add((m - 1.0) / 6.0, e("man,pm,p->an", &[phi, v27, v]));
    a.add(2.0 / 3.0, a2(outer(&vm(v, v27), v)));
    a.add(-4.0 / 3.0, a2(e("mpa,n,m,p->an", &[phi, v, v, &hv])));
    a.add(1.0 / 3.0, e("mpan,m,p->an", &[psi, v, &hv]));

    let mut b = Acc::new(2);
    b.add(-m / 6.0, e("man,m->an", &[phi, t7]));
    b.add(1.0 / 6.0, e("mpan,m,p->an", &[psi, t7, v]));
    b.add(-1.0 / 3.0, a2(e("mpa,n,m,p->an", &[phi, v, t7, v])));
    b.add(2.0 / 3.0, a2(outer(v, t7)));
    b.add(dot(v, t7) / 6.0, e("man,m->an", &[phi, v]));
    b.add(1.0, t14.clone());
    b.add(1.0 / 6.0, e("mpan,qm,p,q->an", &[psi, t14, v, v]));
    b.add(-1.0 / 3.0, e("man,p,pm->an", &[phi, v, t14]));
    b.add(-1.0, a2(e("mpa,np,m->an", &[phi, t27, v])));
    b.add(1.0 / 6.0, e("man,pm,p->an", &[phi, t27, v]));
    b.add(1.0 / 6.0, e("mpan,qm,p,q->an", &[psi, t27, v, v]));

    a.0 * q.powf(-4.0 / 3.0) + b.0 * q.powf(-1.0 / 3.0)
}

pub(crate) fn tau27_tilde_frame(phi: &Tensor7, v: &Tensor7, vd: &Parts, td: &Parts) -> Tensor7 {
    let e = einsum;
    let m = dot(v, v);
    let q = 1.0 + m;
    let i7 = eye();
    let vv = outer(v, v);
    let (v7, v27) = (vd.s7, vd.s27);
    let (t1, t7, t14, t27) = (td.s1, td.s7, td.s14, td.s27);
    let hv = mv(v27, v);
    let t27vv = dot(v, &mv(t27, v));
    let mut a = Acc::new(2);
    a.add(-3.0 / 7.0 * dot(v7, v), &(&i7 * q) - &vv);
    a.add(3.0, s2(e("a,nmp,m,p->an", &[v, phi, v, v7])));
    a.add(3.0, s2(outer(v, v7)));
    a.add(-q, v27.clone());
    a.add(1.0, s2(outer(&hv, v)));
    a.add(-q, s2(e("mpa,np,m->an", &[phi, v27, v])));
    a.add(1.0, s2(e("a,nmp,m,p->an", &[v, phi, v, &hv])));
    a.add((1.0 + m / 7.0) * t1 - 6.0 / 7.0 * dot(t7, v) + t27vv / 7.0, vv);

    let mut b = Acc::new(2);
    b.add(-m / 7.0 * t1 - dot(t7, v) / 7.0 - t27vv / 7.0, i7);
    b.add(1.0, s2(outer(v, t7)));
    b.add(-1.0, s2(e("mpa,m,pn->an", &[phi, v, t14])));
    b.add(1.0, t27.clone());
    b.add(1.0, s2(e("mpa,m,pn->an", &[phi, v, t27])));

    a.0 * q.powf(-4.0 / 3.0) + b.0 * q.powf(-1.0 / 3.0)
}

/// T̃ of φ + v⌟ψ and its four components from the closed forms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct V7TorsionFormula {
    /// T̃_an, lowered with g̃.
    pub t: Tensor7,
    /// (τ̃₁, τ̃₇, τ̃₁₄, τ̃₂₇) with respect to (g̃, φ̃); τ̃₇ is a g̃-lowered 1-form.
    pub split: TensorSplit,
}

/// `td` splits the base torsion T_ab, `vd` splits ∇_a v_b, `v` is v^a.
pub fn v7_torsion_formula(st: &G2Structure, td: &TensorSplit, v: &Tensor7, vd: &TensorSplit) -> V7TorsionFormula {
    let fv = FrameV::new(st, v);
    let (tdf, vdf) = (fv.split_down(td), fv.split_down(vd));
    let (tp, vp) = (Parts::of(&tdf), Parts::of(&vdf));
    let (phi, psi) = (fv.fr.phi(), fv.fr.psi());
    let t = t_tilde_frame(phi, psi, &fv.v, &vp, &tp);
    let split = TensorSplit {
        s1: tau1_tilde_frame(&fv.v, &vp, &tp),
        s7: tau7_tilde_frame(phi, &fv.v, &vp, &tp),
        s14: tau14_tilde_frame(phi, psi, &fv.v, &vp, &tp),
        s27: tau27_tilde_frame(phi, &fv.v, &vp, &tp),
    };
    V7TorsionFormula { t: fv.fr.up(&t), split: fv.split_up(&split) }
}
