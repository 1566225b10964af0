//! Zero-tolerance certificates at the canonical structure (φ₀, δ).
//!
//! All arithmetic is on i64 numerators sharing one denominator per array, so a
//! passing certificate has residual exactly 0 and reruns are bit-identical.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::g2algebra::{psipsi_rhs, PHI0_TERMS, PSI0_TERMS};
use crate::tensor7::{combinations, offset_of, perm_sign, permutations, pow7, DIM};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Certificate {
    pub name: String,
    /// Number of index tuples (or basis evaluations) enumerated.
    pub tuples: u64,
    /// Max-abs residual in units of 1/denominator; 0 for a pass.
    pub residual: i64,
    pub denominator: i64,
    pub duration_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Error, Serialize, Deserialize, PartialEq)]
#[error("certificate {name} failed: {message} (residual {residual} at {tuple:?})")]
pub struct CertificationFailure {
    pub name: String,
    pub residual: i64,
    pub tuple: Vec<usize>,
    pub message: String,
}

pub type CertResult = Result<Certificate, CertificationFailure>;

/// φ_abc φ_mn^c = gg·g_am g_bn + gg_swap·g_an g_bm + psi·ψ_abmn
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhiPhiCoeffs {
    pub gg: i64,
    pub gg_swap: i64,
    pub psi: i64,
}
impl Default for PhiPhiCoeffs {
    fn default() -> Self {
        PhiPhiCoeffs { gg: 1, gg_swap: -1, psi: 1 }
    }
}

/// φ_abc ψ^c_mnp = c·(g_a[m φ_np]b − g_b[m φ_np]a), ψ contracted on its first slot
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhiPsiCoeffs {
    pub c: i64,
    pub second_sign: i64,
}
impl Default for PhiPsiCoeffs {
    fn default() -> Self {
        PhiPsiCoeffs { c: 3, second_sign: -1 }
    }
}

/// ψψ = kron·δ^[mnpq] + psi·ψ_[ab^[mn δδ] + phiphi·φ_[abc φ^[mnp δ]
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PsiPsiCoeffs {
    pub kron: i64,
    pub psi: i64,
    pub phiphi: i64,
}
impl Default for PsiPsiCoeffs {
    fn default() -> Self {
        PsiPsiCoeffs { kron: 24, psi: 72, phiphi: -16 }
    }
}

/// A rational coefficient p/q.
pub type Rat = (i64, i64);

/// Coefficients of the projection formulas on Λ², Λ³, Λ⁴, Λ⁵.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProjectorCoeffs {
    /// α = c·ω⌟φ
    pub l2_alpha: Rat,
    /// π₁₄ = c₀ω + c₁ω⌟ψ
    pub l2_pi14: (Rat, Rat),
    pub l3_a: Rat,
    pub l3_omega: Rat,
    /// h = c₀ χ_mn(aφ_b)^mn + c₁ (χ⌟φ) g
    pub l3_h: (Rat, Rat),
    pub l4_a: Rat,
    pub l4_omega: Rat,
    /// h = c₀ χ_mnp(aψ_b)^mnp + c₁ (χ⌟ψ) g, for i_ψ with the summed index last
    pub l4_h: (Rat, Rat),
    pub l5_alpha: Rat,
    /// ω = c₀ φ⌟η + c₁ (φ⌟η)⌟ψ
    pub l5_omega: (Rat, Rat),
}

impl Default for ProjectorCoeffs {
    fn default() -> Self {
        ProjectorCoeffs {
            l2_alpha: (1, 6),
            l2_pi14: ((2, 3), (-1, 6)),
            l3_a: (1, 42),
            l3_omega: (-1, 24),
            l3_h: ((3, 4), (-3, 28)),
            l4_a: (1, 168),
            l4_omega: (-1, 24),
            l4_h: ((1, 3), (1, 21)),
            l5_alpha: (1, 72),
            l5_omega: ((1, 9), (-1, 36)),
        }
    }
}

/// Named coefficient perturbations, used to show the certificates detect errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mutation {
    PhiPhi,
    PhiPsi,
    PsiPsi,
    Projectors,
}

impl Mutation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "phiphi" => Some(Mutation::PhiPhi),
            "phipsi" => Some(Mutation::PhiPsi),
            "psipsi" => Some(Mutation::PsiPsi),
            "projectors" => Some(Mutation::Projectors),
            _ => None,
        }
    }
}

/// Dense integer array over 7^rank entries with a shared positive denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct QArray {
    pub rank: usize,
    pub num: Vec<i64>,
    pub den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

impl QArray {
    pub fn zeros(rank: usize) -> Self {
        QArray { rank, num: vec![0; pow7(rank)], den: 1 }
    }

    pub fn int(rank: usize, num: Vec<i64>) -> Self {
        assert_eq!(num.len(), pow7(rank));
        QArray { rank, num, den: 1 }
    }

    pub fn get(&self, idx: &[usize]) -> (i64, i64) {
        (self.num[offset_of(idx)], self.den)
    }

    pub fn reduce(mut self) -> Self {
        let g = self.num.iter().fold(self.den, |g, &x| gcd(g, x));
        if g > 1 {
            self.num.iter_mut().for_each(|x| *x /= g);
            self.den /= g;
        }
        self
    }

    pub fn scale(&self, (p, q): Rat) -> Self {
        let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
        QArray { rank: self.rank, num: self.num.iter().map(|x| x * p).collect(), den: self.den * q }.reduce()
    }

    pub fn add(&self, o: &QArray) -> Self {
        assert_eq!(self.rank, o.rank);
        let d = lcm(self.den, o.den);
        let (fa, fb) = (d / self.den, d / o.den);
        QArray { rank: self.rank, num: self.num.iter().zip(&o.num).map(|(x, y)| x * fa + y * fb).collect(), den: d }
            .reduce()
    }

    pub fn sub(&self, o: &QArray) -> Self {
        self.add(&o.scale((-1, 1)))
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|&x| x == 0)
    }

    /// Full antisymmetrization, carrying the 1/k! into the denominator.
    pub fn alt(&self) -> Self {
        let k = self.rank;
        let perms = permutations(k);
        let mut out = vec![0i64; self.num.len()];
        let mut idx = vec![0; k];
        for tuple in combinations(k) {
            let mut acc = 0i64;
            for (p, s) in perms {
                for j in 0..k {
                    idx[j] = tuple[p[j]];
                }
                acc += *s as i64 * self.num[offset_of(&idx)];
            }
            for (p, s) in perms {
                for j in 0..k {
                    idx[j] = tuple[p[j]];
                }
                out[offset_of(&idx)] = *s as i64 * acc;
            }
        }
        QArray { rank: k, num: out, den: self.den * perms.len() as i64 }.reduce()
    }

    pub fn sym2(&self) -> Self {
        assert_eq!(self.rank, 2);
        let mut out = vec![0; 49];
        for a in 0..DIM {
            for b in 0..DIM {
                out[a * DIM + b] = self.num[a * DIM + b] + self.num[b * DIM + a];
            }
        }
        QArray { rank: 2, num: out, den: self.den * 2 }.reduce()
    }
}

/// Direct-loop Einstein summation on integer arrays (Euclidean metric).
pub fn ieinsum(spec: &str, ops: &[&QArray]) -> QArray {
    let (lhs, out) = spec.split_once("->").expect("spec needs ->");
    let ins: Vec<Vec<u8>> = lhs.split(',').map(|s| s.bytes().collect()).collect();
    assert_eq!(ins.len(), ops.len());
    let out: Vec<u8> = out.bytes().collect();
    let mut letters = out.clone();
    for s in &ins {
        for c in s {
            if !letters.contains(c) {
                letters.push(*c);
            }
        }
    }
    let n = letters.len();
    let stride = |ls: &[u8]| -> Vec<usize> {
        letters
            .iter()
            .map(|c| ls.iter().position(|x| x == c).map_or(0, |p| pow7(ls.len() - 1 - p)))
            .collect()
    };
    let so = stride(&out);
    let sin: Vec<Vec<usize>> = ins.iter().map(|s| stride(s)).collect();
    let mut res = vec![0i64; pow7(out.len())];
    let mut idx = vec![0usize; n];
    for _ in 0..pow7(n) {
        let mut prod = 1i64;
        for (k, op) in ops.iter().enumerate() {
            let off: usize = (0..n).map(|d| idx[d] * sin[k][d]).sum();
            prod *= op.num[off];
            if prod == 0 {
                break;
            }
        }
        if prod != 0 {
            let off: usize = (0..n).map(|d| idx[d] * so[d]).sum();
            res[off] += prod;
        }
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < DIM {
                break;
            }
            idx[d] = 0;
        }
    }
    let den = ops.iter().map(|o| o.den).product();
    QArray { rank: out.len(), num: res, den }.reduce()
}

fn canonical_form<const K: usize>(terms: &[(i64, [usize; K])]) -> QArray {
    let mut num = vec![0i64; pow7(K)];
    let mut idx = [0usize; K];
    for (c, ix) in terms {
        for (p, s) in permutations(K) {
            for j in 0..K {
                idx[j] = ix[p[j]] - 1;
            }
            num[offset_of(&idx)] = *s as i64 * c;
        }
    }
    QArray::int(K, num)
}

pub fn phi0() -> QArray {
    canonical_form(&PHI0_TERMS)
}

pub fn psi0() -> QArray {
    canonical_form(&PSI0_TERMS)
}

fn delta() -> QArray {
    let mut d = QArray::zeros(2);
    for a in 0..DIM {
        d.num[a * DIM + a] = 1;
    }
    d
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64() * 1e3)
}

fn finish(name: &str, tuples: u64, worst: (i64, Vec<usize>), den: i64, ms: f64, ranks: Option<Vec<usize>>) -> CertResult {
    if worst.0 == 0 {
        Ok(Certificate { name: name.into(), tuples, residual: 0, denominator: den, duration_ms: ms, ranks })
    } else {
        Err(CertificationFailure {
            name: name.into(),
            residual: worst.0,
            tuple: worst.1,
            message: "identity does not hold".into(),
        })
    }
}

pub fn certify_phiphi(c: &PhiPhiCoeffs) -> CertResult {
    let phi = phi0();
    let psi = psi0();
    let ((worst, n), ms) = timed(|| {
        let mut worst = (0i64, vec![]);
        let mut n = 0u64;
        for a in 0..DIM {
            for b in 0..DIM {
                for m in 0..DIM {
                    for nn in 0..DIM {
                        let lhs: i64 = (0..DIM).map(|k| phi.num[offset_of(&[a, b, k])] * phi.num[offset_of(&[m, nn, k])]).sum();
                        let d = |i: usize, j: usize| (i == j) as i64;
                        let rhs = c.gg * d(a, m) * d(b, nn) + c.gg_swap * d(a, nn) * d(b, m) + c.psi * psi.num[offset_of(&[a, b, m, nn])];
                        let r = (lhs - rhs).abs();
                        if r > worst.0 {
                            worst = (r, vec![a, b, m, nn]);
                        }
                        n += 1;
                    }
                }
            }
        }
        (worst, n)
    });
    finish("phiphi1", n, worst, 1, ms, None)
}

pub fn certify_phipsi(c: &PhiPsiCoeffs) -> CertResult {
    let phi = phi0();
    let psi = psi0();
    let f = |i: usize, j: usize, k: usize| phi.num[(i * DIM + j) * DIM + k];
    let d = |i: usize, j: usize| (i == j) as i64;
    // 3·g_a[m φ_np]b = g_am φ_npb + g_an φ_pmb + g_ap φ_mnb; everything is scaled by 3
    let cyc = |a: usize, b: usize, m: usize, n: usize, p: usize| d(a, m) * f(n, p, b) + d(a, n) * f(p, m, b) + d(a, p) * f(m, n, b);
    let ((worst, n), ms) = timed(|| {
        let mut worst = (0i64, vec![]);
        let mut cnt = 0u64;
        for t in 0..pow7(5) {
            let [a, b, m, n, p] = {
                let v = crate::tensor7::index_of(t, 5);
                [v[0], v[1], v[2], v[3], v[4]]
            };
            let lhs: i64 = (0..DIM).map(|k| f(a, b, k) * psi.num[offset_of(&[k, m, n, p])]).sum();
            let rhs = c.c * (cyc(a, b, m, n, p) + c.second_sign * cyc(b, a, m, n, p));
            let r = (3 * lhs - rhs).abs();
            if r > worst.0 {
                worst = (r, vec![a, b, m, n, p]);
            }
            cnt += 1;
        }
        (worst, cnt)
    });
    finish("phipsi", n, worst, 3, ms, None)
}

/// Enumerates all 7⁸ tuples, streaming over the first index. The right-hand side
/// is antisymmetric in both index groups by construction, so it is tabulated on
/// increasing index pairs and extended by sign.
pub fn certify_psipsi(c: &PsiPsiCoeffs) -> CertResult {
    let phi = phi0();
    let psi = psi0();
    let combos = combinations(4);
    let ((worst, n), ms) = timed(|| {
        let mixed = |a: usize, b: usize, m: usize, n: usize| psi.num[offset_of(&[a, b, m, n])] as f64;
        let phi_f = |i: &[usize]| phi.num[offset_of(i)] as f64;
        // 576·RHS is an integer; build the 35×35 table
        let table: Vec<i64> = combos
            .iter()
            .flat_map(|lo| {
                combos.iter().map(move |up| {
                    let v = psipsi_rhs(lo, up, &mixed, &phi_f, &phi_f, [c.kron as f64, c.psi as f64, c.phiphi as f64]) * 576.0;
                    let r = v.round();
                    debug_assert!((v - r).abs() < 1e-9);
                    r as i64
                })
            })
            .collect();
        // sorted position and sign of every 4-tuple
        let mut slot = vec![(usize::MAX, 0i64); pow7(4)];
        for (k, cmb) in combos.iter().enumerate() {
            for (p, s) in permutations(4) {
                let t: Vec<usize> = p.iter().map(|&j| cmb[j]).collect();
                slot[offset_of(&t)] = (k, *s as i64);
            }
        }
        let results: Vec<((i64, Vec<usize>), u64)> = (0..DIM)
            .into_par_iter()
            .map(|a| {
                let mut worst = (0i64, vec![]);
                let mut cnt = 0u64;
                for rest in 0..pow7(3) {
                    let lo = a * pow7(3) + rest;
                    let (li, ls) = slot[lo];
                    let lpsi = psi.num[lo];
                    for up in 0..pow7(4) {
                        let (ui, us) = slot[up];
                        let lhs = 576 * lpsi * psi.num[up];
                        let rhs = if li == usize::MAX || ui == usize::MAX { 0 } else { ls * us * table[li * combos.len() + ui] };
                        let r = (lhs - rhs).abs();
                        if r > worst.0 {
                            let mut t = crate::tensor7::index_of(lo, 4);
                            t.extend(crate::tensor7::index_of(up, 4));
                            worst = (r, t);
                        }
                        cnt += 1;
                    }
                }
                (worst, cnt)
            })
            .collect();
        let n = results.iter().map(|r| r.1).sum();
        let worst = results.into_iter().map(|r| r.0).max_by_key(|w| w.0).unwrap();
        (worst, n)
    });
    finish("psipsi0", n, worst, 576, ms, None)
}

/// Forms of rank k given by components on increasing tuples.
fn basis_forms(k: usize) -> Vec<QArray> {
    combinations(k)
        .iter()
        .map(|cmb| {
            let mut num = vec![0i64; pow7(k)];
            for (p, s) in permutations(k) {
                let t: Vec<usize> = p.iter().map(|&j| cmb[j]).collect();
                num[offset_of(&t)] = *s as i64;
            }
            QArray::int(k, num)
        })
        .collect()
}

/// Exact wedge product, (p+q)!/(p!q!) Alt(a⊗b).
pub fn iwedge(a: &QArray, b: &QArray) -> QArray {
    let letters = b"abcdefg";
    let (p, q) = (a.rank, b.rank);
    let la = std::str::from_utf8(&letters[..p]).unwrap();
    let lb = std::str::from_utf8(&letters[p..p + q]).unwrap();
    let lo = std::str::from_utf8(&letters[..p + q]).unwrap();
    let outer = ieinsum(&format!("{la},{lb}->{lo}"), &[a, b]);
    let f = |n: usize| (1..=n as i64).product::<i64>();
    outer.alt().scale((f(p + q), f(p) * f(q)))
}

/// Contraction of a into the leading slots of b with δ.
fn ict(a: &QArray, b: &QArray) -> QArray {
    let letters = b"abcdefg";
    let (p, r) = (a.rank, b.rank);
    let la = std::str::from_utf8(&letters[..p]).unwrap();
    let lb = std::str::from_utf8(&letters[..r]).unwrap();
    let lo = std::str::from_utf8(&letters[p..r]).unwrap();
    ieinsum(&format!("{la},{lb}->{lo}"), &[a, b])
}

fn scalar(x: &QArray) -> Rat {
    (x.num[0], x.den)
}

fn scale_form(f: &QArray, r: Rat, c: Rat) -> QArray {
    f.scale((r.0 * c.0, r.1 * c.1))
}

fn rat_mul(a: Rat, b: Rat) -> Rat {
    (a.0 * b.0, a.1 * b.1)
}

type Proj<'a> = Box<dyn Fn(&QArray) -> QArray + 'a>;

/// Projectors on Λᵏ as functions of a form, in the order of the split.
fn projectors(k: usize, c: &ProjectorCoeffs) -> Vec<Proj<'_>> {
    let phi = phi0();
    let psi = psi0();
    let d = delta();
    match k {
        2 => {
            let (p1, s1) = (phi.clone(), psi.clone());
            vec![
                Box::new(move |w: &QArray| ict(&ict(w, &p1).scale(c.l2_alpha), &p1)) as Proj,
                Box::new(move |w: &QArray| w.scale(c.l2_pi14.0).add(&ict(w, &s1).scale(c.l2_pi14.1))),
            ]
        }
        3 => {
            let (p1, p2) = (phi.clone(), phi.clone());
            vec![
                Box::new(move |x: &QArray| scale_form(&p1, scalar(&ict(x, &p1)), c.l3_a)) as Proj,
                Box::new(move |x: &QArray| ict(&ict(x, &psi).scale(c.l3_omega), &psi)),
                Box::new(move |x: &QArray| {
                    let a = ieinsum("mna,bmn->ab", &[x, &p2]).sym2().scale(c.l3_h.0);
                    let tr = scalar(&ict(x, &p2));
                    let h = a.add(&d.scale(rat_mul(tr, c.l3_h.1)));
                    ieinsum("ad,bcd->abc", &[&h, &p2]).alt()
                }),
            ]
        }
        4 => {
            let (s1, s2) = (psi.clone(), psi.clone());
            vec![
                Box::new(move |x: &QArray| scale_form(&s1, scalar(&ict(x, &s1)), c.l4_a)) as Proj,
                Box::new(move |x: &QArray| iwedge(&ict(&phi, x).scale(c.l4_omega), &phi)),
                Box::new(move |x: &QArray| {
                    let a = ieinsum("mnpa,bmnp->ab", &[x, &s2]).sym2().scale(c.l4_h.0);
                    let tr = scalar(&ict(x, &s2));
                    let h = a.add(&d.scale(rat_mul(tr, c.l4_h.1)));
                    ieinsum("ae,bcde->abcd", &[&h, &s2]).alt()
                }),
            ]
        }
        5 => {
            let s1 = psi.clone();
            vec![
                Box::new(move |x: &QArray| iwedge(&ict(&s1, x).scale(c.l5_alpha), &s1)) as Proj,
                Box::new(move |x: &QArray| {
                    let pe = ict(&phi, x);
                    let w = pe.scale(c.l5_omega.0).add(&ict(&pe, &psi).scale(c.l5_omega.1));
                    iwedge(&w, &phi)
                }),
            ]
        }
        _ => unreachable!("projectors exist for degrees 2..5"),
    }
}

/// Integer matrix D·P on the increasing-tuple basis, with its common denominator D.
fn projector_matrix(k: usize, p: &dyn Fn(&QArray) -> QArray) -> (Vec<Vec<i64>>, i64) {
    let basis = basis_forms(k);
    let combos = combinations(k);
    let cols: Vec<QArray> = basis.iter().map(p).collect();
    let den = cols.iter().fold(1, |d, c| lcm(d, c.den));
    let mut m = vec![vec![0i64; basis.len()]; combos.len()];
    for (j, col) in cols.iter().enumerate() {
        let f = den / col.den;
        for (i, cmb) in combos.iter().enumerate() {
            m[i][j] = col.num[offset_of(cmb)] * f;
        }
    }
    (m, den)
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Rank by fraction-free Gaussian elimination. Each eliminated row is divided
/// by the gcd of its entries, which keeps the integers small without leaving Z.
pub fn bareiss_rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| a[r][c] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let p = a[rank][c];
        for r in rank + 1..rows {
            let x = a[r][c];
            if x == 0 {
                continue;
            }
            for cc in c..cols {
                a[r][cc] = a[r][cc] * p - x * a[rank][cc];
            }
            let g = a[r].iter().fold(0, |g, &v| gcd128(g, v));
            if g > 1 {
                a[r].iter_mut().for_each(|v| *v /= g);
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn matmul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i128>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] as i128 * b[k][j] as i128).sum()).collect())
        .collect()
}

/// Idempotence, mutual orthogonality, completeness and ranks of the projectors on Λᵏ.
pub fn certify_projectors_degree(k: usize, c: &ProjectorCoeffs) -> CertResult {
    let expected: &[usize] = match k {
        2 => &[7, 14],
        3 | 4 => &[1, 7, 27],
        5 => &[7, 14],
        _ => unreachable!(),
    };
    let name = format!("projectors_l{k}");
    let (res, ms) = timed(|| {
        let ps = projectors(k, c);
        let mats: Vec<(Vec<Vec<i64>>, i64)> = ps.iter().map(|p| projector_matrix(k, p.as_ref())).collect();
        let dim = combinations(k).len();
        let mut worst: (i64, Vec<usize>) = (0, vec![]);
        let mut bump = |r: i128, tag: Vec<usize>| {
            let r = r.unsigned_abs().min(i64::MAX as u128) as i64;
            if r > worst.0 {
                worst = (r, tag);
            }
        };
        for (i, (mi, di)) in mats.iter().enumerate() {
            // (D P)(D P) = D (D P)
            let sq = matmul(mi, mi);
            for r in 0..dim {
                for s in 0..dim {
                    bump(sq[r][s] - *di as i128 * mi[r][s] as i128, vec![i, i, r, s]);
                }
            }
            for (j, (mj, _)) in mats.iter().enumerate() {
                if i != j {
                    let pr = matmul(mi, mj);
                    for r in 0..dim {
                        for s in 0..dim {
                            bump(pr[r][s], vec![i, j, r, s]);
                        }
                    }
                }
            }
        }
        let den = mats.iter().fold(1, |d, m| lcm(d, m.1));
        for r in 0..dim {
            for s in 0..dim {
                let sum: i128 = mats.iter().map(|(m, d)| m[r][s] as i128 * (den / d) as i128).sum();
                bump(sum - if r == s { den as i128 } else { 0 }, vec![usize::MAX, r, s]);
            }
        }
        let ranks: Vec<usize> = mats.iter().map(|(m, _)| bareiss_rank(m)).collect();
        // an idempotent matrix has trace equal to its rank
        for (i, (m, d)) in mats.iter().enumerate() {
            let tr: i128 = (0..dim).map(|r| m[r][r] as i128).sum();
            bump(tr - ranks[i] as i128 * *d as i128, vec![i, usize::MAX]);
        }
        (worst, ranks, den)
    });
    let ((worst, ranks, den), ms2) = (res, ms);
    if ranks != expected {
        return Err(CertificationFailure {
            name,
            residual: worst.0.max(1),
            tuple: ranks.clone(),
            message: format!("ranks {ranks:?}, expected {expected:?}"),
        });
    }
    let tuples = (expected.len() * combinations(k).len()) as u64;
    finish(&name, tuples, worst, den, ms2, Some(ranks))
}

/// ψ⌟(α∧ψ) = 72α over the basis 1-forms.
pub fn certify_l5_pi7_coefficient(coef: i64) -> CertResult {
    let psi = psi0();
    let ((worst, n), ms) = timed(|| {
        let mut worst = (0i64, vec![]);
        for (i, e) in basis_forms(1).iter().enumerate() {
            let lhs = ict(&psi, &iwedge(e, &psi));
            let diff = lhs.sub(&e.scale((coef, 1)));
            let r = diff.num.iter().map(|x| x.abs()).max().unwrap();
            if r > worst.0 {
                worst = (r, vec![i]);
            }
        }
        (worst, 7u64)
    });
    finish("l5_pi7_coefficient", n, worst, 1, ms, None)
}

/// *φ₀ = ψ₀, φ₀⌟φ₀ = 42, ψ₀⌟ψ₀ = 168, φ₀∧ψ₀ = 7 vol.
pub fn certify_canonical_norms() -> CertResult {
    let phi = phi0();
    let psi = psi0();
    let ((worst, n), ms) = timed(|| {
        let mut worst = (0i64, vec![]);
        let mut check = |r: i64, tag: usize| {
            if r.abs() > worst.0 {
                worst = (r.abs(), vec![tag]);
            }
        };
        // Hodge star with δ: (*φ)_b = sign(c b) φ_c, c the complement of b
        let mut star = QArray::zeros(4);
        for b in combinations(4) {
            let c: Vec<usize> = (0..DIM).filter(|i| !b.contains(i)).collect();
            let mut full = c.clone();
            full.extend(b);
            let v = perm_sign(&full) as i64 * phi.num[offset_of(&c)];
            for (p, s) in permutations(4) {
                let t: Vec<usize> = p.iter().map(|&j| b[j]).collect();
                star.num[offset_of(&t)] = *s as i64 * v;
            }
        }
        check(star.sub(&psi).num.iter().map(|x| x.abs()).max().unwrap(), 0);
        let pp = ict(&phi, &phi);
        check(pp.num[0] - 42 * pp.den, 1);
        let ss = ict(&psi, &psi);
        check(ss.num[0] - 168 * ss.den, 2);
        let w = iwedge(&phi, &psi);
        check(w.num[offset_of(&[0, 1, 2, 3, 4, 5, 6])] - 7 * w.den, 3);
        (worst, 4u64)
    });
    finish("canonical_norms", n, worst, 1, ms, None)
}

/// Every certificate, optionally with one coefficient set perturbed.
pub fn certify_all(mutation: Option<Mutation>) -> Vec<CertResult> {
    let mut pp = PhiPhiCoeffs::default();
    let mut ps = PhiPsiCoeffs::default();
    let mut qq = PsiPsiCoeffs::default();
    let mut pc = ProjectorCoeffs::default();
    match mutation {
        Some(Mutation::PhiPhi) => pp.psi = -1,
        Some(Mutation::PhiPsi) => ps.c = 2,
        Some(Mutation::PsiPsi) => qq.kron = 23,
        Some(Mutation::Projectors) => pc.l3_h.1 = (3, 28),
        None => {}
    }
    vec![
        certify_phiphi(&pp),
        certify_phipsi(&ps),
        certify_psipsi(&qq),
        certify_projectors_degree(2, &pc),
        certify_projectors_degree(3, &pc),
        certify_projectors_degree(4, &pc),
        certify_projectors_degree(5, &pc),
        certify_l5_pi7_coefficient(72),
        certify_canonical_norms(),
    ]
}

/// Certificate names accepted by [`certify_named`].
pub const CERTIFICATE_NAMES: [&str; 9] = [
    "phiphi",
    "phipsi",
    "psipsi",
    "projectors_l2",
    "projectors_l3",
    "projectors_l4",
    "projectors_l5",
    "l5_pi7_coefficient",
    "canonical_norms",
];

pub fn certify_named(name: &str, mutation: Option<Mutation>) -> Option<CertResult> {
    let idx = CERTIFICATE_NAMES.iter().position(|n| *n == name)?;
    // cheap enough to build only the requested one
    let mut pp = PhiPhiCoeffs::default();
    let mut ps = PhiPsiCoeffs::default();
    let mut qq = PsiPsiCoeffs::default();
    let mut pc = ProjectorCoeffs::default();
    match mutation {
        Some(Mutation::PhiPhi) => pp.psi = -1,
        Some(Mutation::PhiPsi) => ps.c = 2,
        Some(Mutation::PsiPsi) => qq.kron = 23,
        Some(Mutation::Projectors) => pc.l3_h.1 = (3, 28),
        None => {}
    }
    Some(match idx {
        0 => certify_phiphi(&pp),
        1 => certify_phipsi(&ps),
        2 => certify_psipsi(&qq),
        3..=6 => certify_projectors_degree(idx - 1, &pc),
        7 => certify_l5_pi7_coefficient(72),
        _ => certify_canonical_norms(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bareiss_small() {
        assert_eq!(bareiss_rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(bareiss_rank(&[vec![1, 2], vec![3, 4]]), 2);
        assert_eq!(bareiss_rank(&[vec![0, 0], vec![0, 0]]), 0);
    }

    #[test]
    fn qarray_alt_is_projector() {
        let mut x = QArray::zeros(2);
        x.num[1] = 3;
        let a = x.alt();
        assert_eq!(a.alt(), a);
    }
}
