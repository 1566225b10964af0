//! Inverse problem: the split of ∇v that turns base torsion T into a target T̃
//! under φ → φ + v⌟ψ. The closed forms below reproduce a direct 49×49 linear
//! solve of the torsion map; the round trip through the forward formula is the
//! correctness check.

use super::formulas::{FrameV, Parts};
use super::{dot, mv, outer, vm};
use crate::g2algebra::{G2Structure, TensorSplit};
use crate::tensor7::{einsum, Tensor7};

fn a2(t: Tensor7) -> Tensor7 {
    t.antisymmetrize2()
}

fn s2(t: Tensor7) -> Tensor7 {
    t.symmetrize2()
}

fn v1_sol(v: &Tensor7, td: &Parts, tt: &Parts) -> f64 {
    let m = dot(v, v);
    let q = 1.0 + m;
    td.s1 - 3.0 / 7.0 * dot(td.s7, v) - (7.0 + 3.0 * m) / 7.0 * q.powf(-1.0 / 3.0) * tt.s1 - 3.0 / 7.0 * dot(tt.s7, v)
        + q.powf(1.0 / 3.0) / 14.0 * dot(v, &mv(tt.s27, v))
}

fn v7_sol(phi: &Tensor7, v: &Tensor7, td: &Parts, tt: &Parts) -> Tensor7 {
    let q = 1.0 + dot(v, v);
    let mut r = td.s7.clone();
    r.axpy(-td.s1 / 3.0, v);
    r.axpy(1.0 / 3.0, &einsum("cab,a,b->c", &[phi, td.s7, v]));
    r.axpy(-1.0 / 6.0, &vm(v, td.s14));
    r.axpy(-1.0 / 3.0, &vm(v, td.s27));
    r.axpy(4.0 / 3.0 * q.powf(-1.0 / 3.0) * tt.s1, v);
    r.axpy(-1.0, tt.s7);
    r.axpy(-0.5, &einsum("cab,a,b->c", &[phi, tt.s7, v]));
    r.axpy(q.powf(1.0 / 3.0) / 6.0, &vm(v, tt.s27));
    r
}

/// Building blocks shared by the Λ²₁₄ solution for a 2-tensor X.
struct Blocks {
    x: Tensor7,
    vxv: Tensor7,
    pp: Tensor7,
    pmn: Tensor7,
    vxphi: Tensor7,
    psi: Tensor7,
    vphix: Tensor7,
}

fn blocks(phi: &Tensor7, psi: &Tensor7, v: &Tensor7, x: &Tensor7) -> Blocks {
    let e = einsum;
    let vx = vm(v, x);
    Blocks {
        x: x.clone(),
        vxv: a2(outer(&vx, v)),
        pp: e("amn,bpq,m,p,nq->ab", &[phi, phi, v, v, x]),
        pmn: a2(e("mna,b,n,m->ab", &[phi, v, v, &vx])),
        vxphi: e("n,nab->ab", &[&vx, phi]),
        psi: e("mnab,m,n->ab", &[psi, &vx, v]),
        vphix: a2(e("m,mna,nb->ab", &[v, phi, x])),
    }
}

fn v14_sol(phi: &Tensor7, psi: &Tensor7, v: &Tensor7, td: &Parts, tt: &Parts) -> Tensor7 {
    let e = einsum;
    let m = dot(v, v);
    let q = 1.0 + m;
    let qc = q.powf(1.0 / 3.0);
    let phiv = e("pab,p->ab", &[phi, v]);
    let (t7, t14, t27) = (td.s7, td.s14, td.s27);
    let (s7, s14, s27) = (tt.s7, tt.s14, tt.s27);
    let a = blocks(phi, psi, v, t14);
    let b = blocks(phi, psi, v, s14);
    let c = blocks(phi, psi, v, s27);
    let mut r = Tensor7::zeros(2);
    let mut add = |k: f64, t: &Tensor7| r.axpy(k, t);
    add(4.0 / 3.0 * (m - 27.0), &a2(outer(t7, v)));
    add(-(m - 27.0) / 3.0, &e("mnab,m,n->ab", &[psi, t7, v]));
    add(-4.0 * m, &e("mab,m->ab", &[phi, t7]));
    add(4.0 * dot(t7, v), &phiv);
    add(-24.0, &a2(e("mna,b,m,n->ab", &[phi, v, t7, v])));
    add(0.5 * q * (m + 18.0), &a.x);
    add(q, &a.vxv);
    add(0.5 * q, &a.pp);
    add(-8.0, &a.pmn);
    add(-4.0 / 3.0 * m, &a.vxphi);
    add(16.0, &a2(outer(&vm(v, t27), v)));
    add(-4.0 / 3.0 * dot(v, &mv(t27, v)), &phiv);
    add(4.0 / 3.0 * m, &e("m,mn,nab->ab", &[v, t27, phi]));
    add(-4.0, &e("mnab,p,pm,n->ab", &[psi, v, t27, v]));
    add(8.0, &a2(e("mna,b,n,p,pm->ab", &[phi, v, v, v, t27])));
    add(-4.0 * dot(s7, v), &phiv);
    add(24.0, &a2(e("mna,b,m,n->ab", &[phi, v, s7, v])));
    add(-2.0 * (m - 15.0), &a2(outer(s7, v)));
    add(0.5 * (m - 15.0), &e("mnab,m,n->ab", &[psi, s7, v]));
    add(4.0 * m, &e("mab,m->ab", &[phi, s7]));
    add(-qc * (9.0 + 5.0 * m), &b.x);
    add(8.0 * qc, &b.vxv);
    add(4.0 * qc, &b.pp);
    add(-3.0 * qc * q, &b.vxphi);
    add(-qc * (m + 9.0), &c.vphix);
    add(-8.0 * qc, &c.pmn);
    add(-16.0 * qc, &c.vxv);
    add(-qc * (7.0 * m - 9.0) / 6.0, &c.vxphi);
    add(4.0 * qc, &c.psi);
    add(qc * (m + 17.0) / 6.0 * dot(v, &mv(s27, v)), &phiv);
    r * (1.0 / (m + 9.0))
}

fn v27_sol(phi: &Tensor7, v: &Tensor7, td: &Parts, tt: &Parts) -> Tensor7 {
    let e = einsum;
    let m = dot(v, v);
    let q = 1.0 + m;
    let (q1, q2, qc) = (q.powf(-1.0 / 3.0), q.powf(-2.0 / 3.0), q.powf(1.0 / 3.0));
    let (t7, t14, t27) = (td.s7, td.s14, td.s27);
    let (s1, s7, s27) = (tt.s1, tt.s7, tt.s27);
    let svv = dot(v, &mv(s27, v));
    let mut r = t27.clone();
    r.axpy(4.0, &s2(outer(t7, v)));
    r.axpy(4.0 * q1 * s1 - 0.5 * q2 * svv, &outer(v, v));
    r.axpy(-(4.0 * dot(t7, v) - 3.0 * dot(s7, v) + 4.0 * m * q1 * s1 + 0.5 * qc * svv) / 7.0, &super::eye());
    r.axpy(-3.0, &s2(outer(s7, v)));
    r.axpy(1.0, &s2(e("mna,bn,m->ab", &[phi, t14, v])));
    r.axpy(-0.5 * q2, &e("amn,bpq,mp,n,q->ab", &[phi, phi, s27, v, v]));
    r.axpy(-q2 * (2.0 + m) / 2.0, s27);
    r.axpy(-q2, &s2(outer(&vm(v, s27), v)));
    r.axpy(q2, &s2(e("m,mna,nb->ab", &[v, phi, s27])));
    r.axpy(-q2, &s2(e("mna,b,n,p,pm->ab", &[phi, v, v, v, s27])));
    r
}

/// The split (v₁, v₇, v₁₄, v₂₇) of ∇_a v_b that deforms base torsion `td` into
/// the target `tt` (split with respect to g̃, φ̃) under φ → φ + v⌟ψ.
pub fn solve_grad_v(st: &G2Structure, td: &TensorSplit, tt: &TensorSplit, v: &Tensor7) -> TensorSplit {
    let fv = FrameV::new(st, v);
    let (tdf, ttf) = (fv.split_down(td), fv.split_down(tt));
    let (tp, sp) = (Parts::of(&tdf), Parts::of(&ttf));
    let (phi, psi) = (fv.fr.phi(), fv.fr.psi());
    let out = TensorSplit {
        s1: v1_sol(&fv.v, &tp, &sp),
        s7: v7_sol(phi, &fv.v, &tp, &sp),
        s14: v14_sol(phi, psi, &fv.v, &tp, &sp),
        s27: v27_sol(phi, &fv.v, &tp, &sp),
    };
    fv.split_up(&out)
}
