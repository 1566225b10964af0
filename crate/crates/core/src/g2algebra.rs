//! Pointwise G₂-structure algebra: canonical forms, the metric of a 3-form,
//! contraction identities and the representation-theoretic projections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;
use crate::tensor7::{
    contract_form_into_form, einsum, fill_antisymmetric, hodge_star, permutations, wedge, Mat7, Metric7,
    SymmetryHint, Tensor7, Variance, DIM,
};

/// φ₀ = e123 + e145 + e167 + e246 − e257 − e347 − e356 (1-based indices).
pub const PHI0_TERMS: [(i64, [usize; 3]); 7] = [
    (1, [1, 2, 3]),
    (1, [1, 4, 5]),
    (1, [1, 6, 7]),
    (1, [2, 4, 6]),
    (-1, [2, 5, 7]),
    (-1, [3, 4, 7]),
    (-1, [3, 5, 6]),
];

/// ψ₀ = e4567 + e2367 + e2345 + e1357 − e1346 − e1256 − e1247.
pub const PSI0_TERMS: [(i64, [usize; 4]); 7] = [
    (1, [4, 5, 6, 7]),
    (1, [2, 3, 6, 7]),
    (1, [2, 3, 4, 5]),
    (1, [1, 3, 5, 7]),
    (-1, [1, 3, 4, 6]),
    (-1, [1, 2, 5, 6]),
    (-1, [1, 2, 4, 7]),
];

fn form_from_terms<const K: usize>(terms: &[(i64, [usize; K])]) -> Tensor7 {
    let mut t = Tensor7::zeros(K);
    let mut idx = [0usize; K];
    for (c, ix) in terms {
        for (p, s) in permutations(K) {
            for j in 0..K {
                idx[j] = ix[p[j]] - 1;
            }
            t.set(&idx, s * *c as f64);
        }
    }
    t.with_hint(SymmetryHint::Antisymmetric)
}

pub fn canonical_phi0() -> Tensor7 {
    form_from_terms(&PHI0_TERMS)
}

pub fn canonical_psi0() -> Tensor7 {
    form_from_terms(&PSI0_TERMS)
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum NotPositive {
    #[error("3-form is degenerate (det s = {det_s:e})")]
    Degenerate { det_s: f64 },
    #[error("3-form is not in the positive orbit (det s = {det_s:e}, indefinite metric)")]
    Indefinite { det_s: f64 },
}

/// A positive 3-form together with everything it determines.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct G2Structure {
    pub phi: Tensor7,
    pub metric: Metric7,
    pub psi: Tensor7,
    pub s: Mat7,
    pub det_s: f64,
}

/// s_ab = (1/144) φ_amn φ_bpq φ_rst ε̂^{mnpqrst}
pub fn bilinear_s(phi: &Tensor7) -> Mat7 {
    let d = phi.data();
    let mut s = Mat7::zeros();
    let mut x = [0.0; 7];
    let mut y = [0.0; 7];
    for (p, sign) in permutations(7) {
        let w = d[(p[4] * DIM + p[5]) * DIM + p[6]];
        if w == 0.0 {
            continue;
        }
        let w = w * sign;
        for a in 0..DIM {
            x[a] = d[(a * DIM + p[0]) * DIM + p[1]];
            y[a] = d[(a * DIM + p[2]) * DIM + p[3]];
        }
        for a in 0..DIM {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..DIM {
                s[(a, b)] += w * x[a] * y[b];
            }
        }
    }
    s / 144.0
}

pub fn metric_from_phi(phi: &Tensor7) -> Result<G2Structure, NotPositive> {
    assert_eq!(phi.rank(), 3, "metric_from_phi needs a 3-form");
    let s = bilinear_s(phi);
    let s = 0.5 * (s + s.transpose());
    let det_s = s.determinant();
    let scale = s.norm() / (DIM as f64).sqrt();
    if det_s.abs() <= 1e-10 * scale.powi(7) || !det_s.is_finite() {
        return Err(NotPositive::Degenerate { det_s });
    }
    if det_s < 0.0 {
        return Err(NotPositive::Indefinite { det_s });
    }
    let g = det_s.powf(-1.0 / 9.0) * s;
    let metric = Metric7::new(g).map_err(|_| NotPositive::Indefinite { det_s })?;
    let psi = hodge_star(phi, &metric).expect("3-form");
    let phi = phi.clone().with_hint(SymmetryHint::Antisymmetric);
    Ok(G2Structure { phi, metric, psi, s, det_s })
}

impl G2Structure {
    pub fn canonical() -> Self {
        G2Structure {
            phi: canonical_phi0(),
            metric: Metric7::identity(),
            psi: canonical_psi0(),
            s: Mat7::identity(),
            det_s: 1.0,
        }
    }

    /// True when this is exactly (φ₀, δ).
    pub fn is_canonical(&self) -> bool {
        self.metric.g == Mat7::identity() && self.phi.data() == canonical_phi0().data()
    }

    pub fn g(&self) -> Tensor7 {
        self.metric.g_tensor()
    }

    pub fn g_inv(&self) -> Tensor7 {
        self.metric.g_inv_tensor()
    }

    /// φ_a^{bc}
    pub fn phi_low_up_up(&self) -> Tensor7 {
        let gi = self.g_inv();
        einsum("axy,bx,cy->abc", &[&self.phi, &gi, &gi])
    }

    /// Express φ, ψ in an orthonormal frame of g. Returns (E, F, φ', ψ') where
    /// covariant tensors transform with E and back with F = E⁻¹.
    pub fn orthonormal(&self) -> (Mat7, Mat7, Tensor7, Tensor7) {
        let (e, f) = self.metric.orthonormal_frame();
        (e, f, self.phi.transform(&e), self.psi.transform(&e))
    }
}

/// An orthonormal frame of a structure. Covariant tensors go to frame
/// components with `down` and come back with `up`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub e: Mat7,
    pub f: Mat7,
    /// The structure in frame components (metric δ).
    pub st: G2Structure,
}

impl Frame {
    pub fn of(st: &G2Structure) -> Self {
        let (e, f, phi, psi) = st.orthonormal();
        let st = G2Structure { phi, psi, metric: Metric7::identity(), s: Mat7::identity(), det_s: 1.0 };
        Frame { e, f, st }
    }

    pub fn down(&self, t: &Tensor7) -> Tensor7 {
        t.transform(&self.e)
    }

    pub fn up(&self, t: &Tensor7) -> Tensor7 {
        t.transform(&self.f)
    }

    pub fn phi(&self) -> &Tensor7 {
        &self.st.phi
    }

    pub fn psi(&self) -> &Tensor7 {
        &self.st.psi
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContractionResiduals {
    pub phiphi1: f64,
    pub phipsi: f64,
    pub psipsi0: f64,
    pub exact: bool,
}

/// Max-abs residuals of the three basic contraction identities.
pub fn verify_contractions(st: &G2Structure) -> ContractionResiduals {
    if st.is_canonical() {
        let r = |c: Result<exact::Certificate, exact::CertificationFailure>| match c {
            Ok(c) => c.residual as f64,
            Err(e) => e.residual as f64,
        };
        return ContractionResiduals {
            phiphi1: r(exact::certify_phiphi(&exact::PhiPhiCoeffs::default())),
            phipsi: r(exact::certify_phipsi(&exact::PhiPsiCoeffs::default())),
            psipsi0: r(exact::certify_psipsi(&exact::PsiPsiCoeffs::default())),
            exact: true,
        };
    }
    let g = st.g();
    let gi = st.g_inv();
    let (phi, psi) = (&st.phi, &st.psi);
    let lhs = einsum("abc,mnd,cd->abmn", &[phi, phi, &gi]);
    let rhs = einsum("am,bn->abmn", &[&g, &g]) - einsum("an,bm->abmn", &[&g, &g]) + psi.clone();
    let phiphi1 = lhs.max_abs_diff(&rhs);

    let lhs = einsum("abc,dmnp,cd->abmnp", &[phi, psi, &gi]);
    let x = einsum("am,npb->abmnp", &[&g, phi]).antisymmetrize_last(3);
    let y = einsum("bm,npa->abmnp", &[&g, phi]).antisymmetrize_last(3);
    let rhs = (x - y) * 3.0;
    let phipsi = lhs.max_abs_diff(&rhs);

    let psi_up = psi.raise_all(&st.metric);
    let phi_up = phi.raise_all(&st.metric);
    let psi_mix = einsum("abxy,xm,yn->abmn", &[psi, &gi, &gi]);
    let mixed = |a: usize, b: usize, m: usize, n: usize| psi_mix.get(&[a, b, m, n]);
    let mut worst: f64 = 0.0;
    for lo in crate::tensor7::combinations(4) {
        for up in crate::tensor7::combinations(4) {
            let l = psi.get(lo) * psi_up.get(up);
            let r = psipsi_rhs(lo, up, &mixed, &|i| phi.get(i), &|i| phi_up.get(i), [24.0, 72.0, -16.0]);
            worst = worst.max((l - r).abs());
        }
    }
    ContractionResiduals { phiphi1, phipsi, psipsi0: worst, exact: false }
}

/// Right-hand side of the ψψ identity at one (lower, upper) index pair, with
/// explicit double antisymmetrization. `psi_mixed(a,b,m,n)` is ψ_ab^mn.
pub(crate) fn psipsi_rhs(
    lo: &[usize],
    up: &[usize],
    psi_mixed: &dyn Fn(usize, usize, usize, usize) -> f64,
    phi_lo: &dyn Fn(&[usize]) -> f64,
    phi_up: &dyn Fn(&[usize]) -> f64,
    c: [f64; 3],
) -> f64 {
    let perms = permutations(4);
    let (mut kron, mut a, mut b) = (0.0, 0.0, 0.0);
    let mut l = [0; 4];
    let mut u = [0; 4];
    for (pu, su) in perms {
        for j in 0..4 {
            u[j] = up[pu[j]];
        }
        if (0..4).all(|j| lo[j] == u[j]) {
            kron += su;
        }
        for (pl, sl) in perms {
            for j in 0..4 {
                l[j] = lo[pl[j]];
            }
            if l[3] != u[3] {
                continue;
            }
            let s = sl * su;
            if l[2] == u[2] {
                a += s * psi_mixed(l[0], l[1], u[0], u[1]);
            }
            b += s * phi_lo(&l[..3]) * phi_up(&u[..3]);
        }
    }
    let n = 576.0;
    c[0] * kron / 24.0 + c[1] * a / n + c[2] * b / n
}

/// Split of a 2-form: Λ² = Λ²₇ ⊕ Λ²₁₄.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition2 {
    pub alpha: Tensor7,
    pub pi7: Tensor7,
    pub pi14: Tensor7,
}

/// Split of a 3-form: Λ³ = Λ³₁ ⊕ Λ³₇ ⊕ Λ³₂₇.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition3 {
    pub a: f64,
    pub omega: Tensor7,
    pub h: Tensor7,
    pub pi1: Tensor7,
    pub pi7: Tensor7,
    pub pi27: Tensor7,
}

/// Split of a 4-form: Λ⁴ = Λ⁴₁ ⊕ Λ⁴₇ ⊕ Λ⁴₂₇.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition4 {
    pub a: f64,
    pub omega: Tensor7,
    pub h: Tensor7,
    pub pi1: Tensor7,
    pub pi7: Tensor7,
    pub pi27: Tensor7,
}

/// Split of a 5-form: Λ⁵ = Λ⁵₇ ⊕ Λ⁵₁₄.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition5 {
    pub alpha: Tensor7,
    pub omega: Tensor7,
    pub pi7: Tensor7,
    pub pi14: Tensor7,
}

impl Decomposition2 {
    pub fn reassemble(&self) -> Tensor7 {
        &self.pi7 + &self.pi14
    }
}
impl Decomposition3 {
    pub fn reassemble(&self) -> Tensor7 {
        &(&self.pi1 + &self.pi7) + &self.pi27
    }
}
impl Decomposition4 {
    pub fn reassemble(&self) -> Tensor7 {
        &(&self.pi1 + &self.pi7) + &self.pi27
    }
}
impl Decomposition5 {
    pub fn reassemble(&self) -> Tensor7 {
        &self.pi7 + &self.pi14
    }
}

fn ct(a: &Tensor7, b: &Tensor7, st: &G2Structure) -> Tensor7 {
    contract_form_into_form(a, b, &st.metric).expect("ranks checked by caller")
}

pub fn project_2form(omega: &Tensor7, st: &G2Structure) -> Decomposition2 {
    let alpha = ct(omega, &st.phi, st) * (1.0 / 6.0);
    let pi7 = ct(&alpha, &st.phi, st);
    let pi14 = omega * (2.0 / 3.0) - ct(omega, &st.psi, st) * (1.0 / 6.0);
    Decomposition2 { alpha, pi7, pi14 }
}

pub fn project_3form(chi: &Tensor7, st: &G2Structure) -> Decomposition3 {
    let cphi = ct(chi, &st.phi, st).value();
    let a = cphi / 42.0;
    let omega = ct(chi, &st.psi, st) * (-1.0 / 24.0);
    let pi7 = ct(&omega, &st.psi, st);
    let gi = st.g_inv();
    let x = einsum("mna,bxy,mx,ny->ab", &[chi, &st.phi, &gi, &gi]).symmetrize2();
    let h = x * 0.75 - st.g() * (3.0 / 28.0 * cphi);
    let pi27 = i_phi(&h, st);
    Decomposition3 { a, omega, pi1: &st.phi * a, pi7, h: h.with_hint(sym_hint()), pi27 }
}

pub fn project_4form(chi: &Tensor7, st: &G2Structure) -> Decomposition4 {
    let cpsi = ct(chi, &st.psi, st).value();
    let a = cpsi / 168.0;
    let omega = ct(&st.phi, chi, st) * (-1.0 / 24.0);
    let pi7 = wedge(&omega, &st.phi).unwrap();
    let gi = st.g_inv();
    let x = einsum("mnpa,bxyz,mx,ny,pz->ab", &[chi, &st.psi, &gi, &gi, &gi]).symmetrize2();
    let h = x * (1.0 / 3.0) + st.g() * (cpsi / 21.0);
    let pi27 = i_psi(&h, st);
    Decomposition4 { a, omega, pi1: &st.psi * a, pi7, h: h.with_hint(sym_hint()), pi27 }
}

pub fn project_5form(eta: &Tensor7, st: &G2Structure) -> Decomposition5 {
    let alpha = ct(&st.psi, eta, st) * (1.0 / 72.0);
    let pi7 = wedge(&alpha, &st.psi).unwrap();
    let pe = ct(&st.phi, eta, st);
    let omega = &pe * (1.0 / 9.0) - ct(&pe, &st.psi, st) * (1.0 / 36.0);
    let pi14 = wedge(&omega, &st.phi).unwrap();
    Decomposition5 { alpha, omega, pi7, pi14 }
}

fn sym_hint() -> SymmetryHint {
    SymmetryHint::SymmetricPairs(vec![(0, 1)])
}

/// (i_φ h)_abc = h_[a^d φ_bc]d
pub fn i_phi(h: &Tensor7, st: &G2Structure) -> Tensor7 {
    let gi = st.g_inv();
    einsum("ae,ed,bcd->abc", &[h, &gi, &st.phi]).antisymmetrize()
}

/// (i_ψ h)_abcd = h_[a^e ψ_bcd]e
pub fn i_psi(h: &Tensor7, st: &G2Structure) -> Tensor7 {
    let gi = st.g_inv();
    einsum("af,fe,bcde->abcd", &[h, &gi, &st.psi]).antisymmetrize()
}

/// A = s₁ g + s₇⌟φ + s₁₄ + s₂₇, the G₂ split of a 2-tensor. `s7` is a 1-form.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorSplit {
    pub s1: f64,
    pub s7: Tensor7,
    pub s14: Tensor7,
    pub s27: Tensor7,
}

impl TensorSplit {
    pub fn zero() -> Self {
        TensorSplit { s1: 0.0, s7: Tensor7::zeros(1), s14: Tensor7::zeros(2), s27: Tensor7::zeros(2) }
    }

    pub fn compose(&self, st: &G2Structure) -> Tensor7 {
        compose_2tensor(self, &st.metric, &st.phi)
    }

    pub fn norms(&self) -> [f64; 4] {
        [self.s1.abs(), self.s7.max_abs(), self.s14.max_abs(), self.s27.max_abs()]
    }

    pub fn scaled(&self, c: f64) -> Self {
        TensorSplit { s1: self.s1 * c, s7: &self.s7 * c, s14: &self.s14 * c, s27: &self.s27 * c }
    }

    /// Re-express all four (covariant) components with a matrix on every slot.
    pub fn transform(&self, m: &Mat7) -> Self {
        TensorSplit { s1: self.s1, s7: self.s7.transform(m), s14: self.s14.transform(m), s27: self.s27.transform(m) }
    }
}

pub fn compose_2tensor(sp: &TensorSplit, metric: &Metric7, phi: &Tensor7) -> Tensor7 {
    let g = metric.g_tensor();
    let gi = metric.g_inv_tensor();
    let mut a = &g * sp.s1;
    a.axpy(1.0, &einsum("d,dc,cab->ab", &[&sp.s7, &gi, phi]));
    a.axpy(1.0, &sp.s14);
    a.axpy(1.0, &sp.s27);
    a
}

pub fn decompose_2tensor(a: &Tensor7, st: &G2Structure) -> TensorSplit {
    decompose_with(a, &st.metric, &st.phi)
}

/// Decomposition with respect to an arbitrary (metric, φ) pair.
pub fn decompose_with(a: &Tensor7, metric: &Metric7, phi: &Tensor7) -> TensorSplit {
    let gi = metric.g_inv_tensor();
    let s1 = a.trace2(metric) / 7.0;
    let w = a.antisymmetrize2();
    let s7 = einsum("ab,ax,by,xyc->c", &[&w, &gi, &gi, phi]) * (1.0 / 6.0);
    let p7 = einsum("d,dc,cab->ab", &[&s7, &gi, phi]);
    let s14 = (&w - &p7).with_hint(SymmetryHint::Antisymmetric);
    let s27 = (a.symmetrize2() - metric.g_tensor() * s1).with_hint(sym_hint());
    TensorSplit { s1, s7, s14, s27 }
}

/// Up-index helper for vectors: v^a = g^{ab} v_b.
pub fn raise_vec(v: &Tensor7, metric: &Metric7) -> Tensor7 {
    v.raise(0, metric).unwrap_or_else(|_| v.clone()).with_variance(vec![Variance::Up])
}

/// The rank-7 volume form e¹²³⁴⁵⁶⁷ scaled by √det g.
pub fn volume_form(metric: &Metric7) -> Tensor7 {
    fill_antisymmetric(7, |_| metric.sqrt_det)
}
