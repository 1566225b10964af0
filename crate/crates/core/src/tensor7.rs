//! Dense multilinear algebra over a 7-dimensional real vector space.
//!
//! Every tensor is a full row-major array of `7^rank` reals (slot 0 is the
//! slowest index). Forms keep all antisymmetric components; nothing is packed.

use std::sync::OnceLock;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DIM: usize = 7;
pub const MAX_RANK: usize = 8;

pub type Mat7 = SMatrix<f64, 7, 7>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("rank {0} exceeds the supported maximum of 8")]
    RankTooLarge(usize),
    #[error("data length {len} does not match 7^{rank}")]
    LengthMismatch { rank: usize, len: usize },
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("slot {slot} already has variance {variance:?}")]
    Variance { slot: usize, variance: Variance },
    #[error("invalid form degree {0}")]
    InvalidDegree(usize),
    #[error("metric is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variance {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SymmetryHint {
    #[default]
    None,
    SymmetricPairs(Vec<(usize, usize)>),
    Antisymmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor7 {
    rank: usize,
    variance: Vec<Variance>,
    data: Vec<f64>,
    hint: SymmetryHint,
}

pub fn pow7(k: usize) -> usize {
    DIM.pow(k as u32)
}

/// All permutations of `0..k` with their signs, in lexicographic order.
pub fn permutations(k: usize) -> &'static [(Vec<usize>, f64)] {
    static TABLES: OnceLock<Vec<Vec<(Vec<usize>, f64)>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| (0..=MAX_RANK).map(build_perms).collect());
    &tables[k]
}

fn build_perms(k: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..k).collect();
    loop {
        out.push((p.clone(), perm_sign(&p)));
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Sign of a sequence of distinct integers relative to its sorted order; 0 on repeats.
pub fn perm_sign(p: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] == p[j] {
                return 0.0;
            }
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// Strictly increasing k-tuples drawn from 0..7.
pub fn combinations(k: usize) -> &'static [Vec<usize>] {
    static TABLES: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=DIM)
            .map(|k| {
                let mut out = Vec::new();
                let mut cur = Vec::new();
                fn rec(start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                    if cur.len() == k {
                        out.push(cur.clone());
                        return;
                    }
                    for i in start..DIM {
                        cur.push(i);
                        rec(i + 1, k, cur, out);
                        cur.pop();
                    }
                }
                rec(0, k, &mut cur, &mut out);
                out
            })
            .collect()
    });
    if k > DIM {
        return &[];
    }
    &tables[k]
}

pub fn offset_of(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * DIM + i)
}

pub fn index_of(mut off: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for s in (0..rank).rev() {
        idx[s] = off % DIM;
        off /= DIM;
    }
    idx
}

impl Tensor7 {
    pub fn zeros(rank: usize) -> Self {
        assert!(rank <= MAX_RANK, "rank {rank} too large");
        Tensor7 {
            rank,
            variance: vec![Variance::Down; rank],
            data: vec![0.0; pow7(rank)],
            hint: SymmetryHint::None,
        }
    }

    pub fn scalar(x: f64) -> Self {
        let mut t = Self::zeros(0);
        t.data[0] = x;
        t
    }

    pub fn from_vec(rank: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if rank > MAX_RANK {
            return Err(TensorError::RankTooLarge(rank));
        }
        if data.len() != pow7(rank) {
            return Err(TensorError::LengthMismatch { rank, len: data.len() });
        }
        Ok(Tensor7 { rank, variance: vec![Variance::Down; rank], data, hint: SymmetryHint::None })
    }

    pub fn vector(v: &[f64; 7]) -> Self {
        Self::from_vec(1, v.to_vec()).unwrap()
    }

    /// Coordinate covector e^i (0-based).
    pub fn basis1(i: usize) -> Self {
        let mut t = Self::zeros(1);
        t.data[i] = 1.0;
        t
    }

    pub fn from_mat(m: &Mat7) -> Self {
        let mut t = Self::zeros(2);
        for a in 0..DIM {
            for b in 0..DIM {
                t.data[a * DIM + b] = m[(a, b)];
            }
        }
        t
    }

    pub fn to_mat(&self) -> Mat7 {
        assert_eq!(self.rank, 2);
        Mat7::from_fn(|a, b| self.data[a * DIM + b])
    }

    pub fn to_array7(&self) -> [f64; 7] {
        assert_eq!(self.rank, 1);
        let mut v = [0.0; 7];
        v.copy_from_slice(&self.data);
        v
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }
    pub fn hint(&self) -> &SymmetryHint {
        &self.hint
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn value(&self) -> f64 {
        assert_eq!(self.rank, 0);
        self.data[0]
    }

    pub fn with_variance(mut self, v: Vec<Variance>) -> Self {
        assert_eq!(v.len(), self.rank);
        self.variance = v;
        self
    }

    pub fn with_hint(mut self, h: SymmetryHint) -> Self {
        self.hint = h;
        self
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.rank);
        self.data[offset_of(idx)]
    }

    pub fn set(&mut self, idx: &[usize], x: f64) {
        self.data[offset_of(idx)] = x;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut t = self.clone();
        t.data.iter_mut().for_each(|x| *x = f(*x));
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| s * x)
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &Tensor7) {
        assert_eq!(self.rank, other.rank, "axpy rank mismatch");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += s * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor7) -> f64 {
        assert_eq!(self.rank, other.rank);
        self.data.iter().zip(&other.data).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Numpy-style transpose: slot k of the result is slot `perm[k]` of self.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank);
        let r = self.rank;
        let strides: Vec<usize> = (0..r).map(|s| pow7(r - 1 - s)).collect();
        let mut out = Tensor7::zeros(r);
        let mut idx = vec![0usize; r];
        for o in 0..self.data.len() {
            let mut src = 0;
            for k in 0..r {
                src += idx[k] * strides[perm[k]];
            }
            out.data[o] = self.data[src];
            for k in (0..r).rev() {
                idx[k] += 1;
                if idx[k] < DIM {
                    break;
                }
                idx[k] = 0;
            }
        }
        out.variance = perm.iter().map(|&p| self.variance[p]).collect();
        out
    }

    /// Full antisymmetrization (1/k!) Σ sign(σ) t_{σ(i)}.
    pub fn antisymmetrize(&self) -> Self {
        let k = self.rank;
        let perms = permutations(k);
        let norm = 1.0 / perms.len() as f64;
        let mut out = fill_antisymmetric(k, |tuple| {
            let mut acc = 0.0;
            let mut idx = vec![0; k];
            for (p, s) in perms {
                for j in 0..k {
                    idx[j] = tuple[p[j]];
                }
                acc += s * self.get(&idx);
            }
            acc * norm
        });
        out.variance = self.variance.clone();
        out
    }

    /// Antisymmetrize only the last `k` slots.
    pub fn antisymmetrize_last(&self, k: usize) -> Self {
        let r = self.rank;
        assert!(k <= r);
        let perms = permutations(k);
        let norm = 1.0 / perms.len() as f64;
        let mut out = Tensor7::zeros(r);
        for (p, s) in perms {
            let mut full: Vec<usize> = (0..r - k).collect();
            full.extend(p.iter().map(|&x| x + r - k));
            out.axpy(s * norm, &self.permute(&full));
        }
        out.variance = self.variance.clone();
        out
    }

    pub fn symmetrize2(&self) -> Self {
        assert_eq!(self.rank, 2);
        let mut out = self.clone();
        for a in 0..DIM {
            for b in 0..DIM {
                out.data[a * DIM + b] = 0.5 * (self.data[a * DIM + b] + self.data[b * DIM + a]);
            }
        }
        out.with_hint(SymmetryHint::SymmetricPairs(vec![(0, 1)]))
    }

    pub fn antisymmetrize2(&self) -> Self {
        assert_eq!(self.rank, 2);
        let mut out = self.clone();
        for a in 0..DIM {
            for b in 0..DIM {
                out.data[a * DIM + b] = 0.5 * (self.data[a * DIM + b] - self.data[b * DIM + a]);
            }
        }
        out.with_hint(SymmetryHint::Antisymmetric)
    }

    /// Largest deviation from full antisymmetry over all adjacent transpositions.
    pub fn antisymmetry_defect(&self) -> f64 {
        let r = self.rank;
        let mut worst: f64 = 0.0;
        for s in 0..r.saturating_sub(1) {
            let mut perm: Vec<usize> = (0..r).collect();
            perm.swap(s, s + 1);
            let t = self.permute(&perm);
            for (x, y) in self.data.iter().zip(&t.data) {
                worst = worst.max((x + y).abs());
            }
        }
        worst
    }

    pub fn trace2(&self, metric: &Metric7) -> f64 {
        assert_eq!(self.rank, 2);
        let mut t = 0.0;
        for a in 0..DIM {
            for b in 0..DIM {
                t += metric.g_inv[(a, b)] * self.data[a * DIM + b];
            }
        }
        t
    }

    fn contract_slot(&self, slot: usize, m: &Mat7) -> Self {
        let r = self.rank;
        let inner = pow7(r - 1 - slot);
        let outer = pow7(slot);
        let mut out = Tensor7::zeros(r);
        for o in 0..outer {
            for i in 0..DIM {
                for j in 0..DIM {
                    let mij = m[(i, j)];
                    if mij == 0.0 {
                        continue;
                    }
                    let src = (o * DIM + j) * inner;
                    let dst = (o * DIM + i) * inner;
                    for q in 0..inner {
                        out.data[dst + q] += mij * self.data[src + q];
                    }
                }
            }
        }
        out.variance = self.variance.clone();
        out.hint = self.hint.clone();
        out
    }

    pub fn raise(&self, slot: usize, metric: &Metric7) -> Result<Self, TensorError> {
        if slot >= self.rank {
            return Err(TensorError::SlotOutOfRange { slot, rank: self.rank });
        }
        if self.variance[slot] == Variance::Up {
            return Err(TensorError::Variance { slot, variance: Variance::Up });
        }
        let mut t = self.contract_slot(slot, &metric.g_inv);
        t.variance[slot] = Variance::Up;
        Ok(t)
    }

    pub fn lower(&self, slot: usize, metric: &Metric7) -> Result<Self, TensorError> {
        if slot >= self.rank {
            return Err(TensorError::SlotOutOfRange { slot, rank: self.rank });
        }
        if self.variance[slot] == Variance::Down {
            return Err(TensorError::Variance { slot, variance: Variance::Down });
        }
        let mut t = self.contract_slot(slot, &metric.g);
        t.variance[slot] = Variance::Down;
        Ok(t)
    }

    /// Raise every lower slot.
    pub fn raise_all(&self, metric: &Metric7) -> Self {
        let mut t = self.clone();
        for s in 0..self.rank {
            if t.variance[s] == Variance::Down {
                t = t.raise(s, metric).unwrap();
            }
        }
        t
    }

    /// Apply a matrix to every slot: t'_{i..} = Σ t_{a..} m[a,i] ...
    pub fn transform(&self, m: &Mat7) -> Self {
        let mt = m.transpose();
        let mut t = self.clone();
        for s in 0..self.rank {
            t = t.contract_slot(s, &mt);
        }
        t
    }
}

impl std::ops::Add for &Tensor7 {
    type Output = Tensor7;
    fn add(self, o: &Tensor7) -> Tensor7 {
        let mut t = self.clone();
        t.axpy(1.0, o);
        t
    }
}

impl std::ops::Sub for &Tensor7 {
    type Output = Tensor7;
    fn sub(self, o: &Tensor7) -> Tensor7 {
        let mut t = self.clone();
        t.axpy(-1.0, o);
        t
    }
}

impl std::ops::Add for Tensor7 {
    type Output = Tensor7;
    fn add(mut self, o: Tensor7) -> Tensor7 {
        self.axpy(1.0, &o);
        self
    }
}

impl std::ops::Sub for Tensor7 {
    type Output = Tensor7;
    fn sub(mut self, o: Tensor7) -> Tensor7 {
        self.axpy(-1.0, &o);
        self
    }
}

impl std::ops::Mul<f64> for Tensor7 {
    type Output = Tensor7;
    fn mul(mut self, s: f64) -> Tensor7 {
        self.data.iter_mut().for_each(|x| *x *= s);
        self
    }
}

impl std::ops::Mul<f64> for &Tensor7 {
    type Output = Tensor7;
    fn mul(self, s: f64) -> Tensor7 {
        self.scale(s)
    }
}

impl std::ops::Neg for Tensor7 {
    type Output = Tensor7;
    fn neg(self) -> Tensor7 {
        self * -1.0
    }
}

/// Build a fully antisymmetric rank-k tensor from its values on increasing tuples.
pub fn fill_antisymmetric(k: usize, mut f: impl FnMut(&[usize]) -> f64) -> Tensor7 {
    let mut out = Tensor7::zeros(k);
    if k > DIM {
        return out.with_hint(SymmetryHint::Antisymmetric);
    }
    let perms = permutations(k);
    let mut idx = vec![0; k];
    for tuple in combinations(k) {
        let v = f(tuple);
        if v == 0.0 {
            continue;
        }
        for (p, s) in perms {
            for j in 0..k {
                idx[j] = tuple[p[j]];
            }
            out.data[offset_of(&idx)] = s * v;
        }
    }
    out.with_hint(SymmetryHint::Antisymmetric)
}

/// Symmetric positive-definite metric with cached inverse and volume factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric7 {
    pub g: Mat7,
    pub g_inv: Mat7,
    pub sqrt_det: f64,
}

impl Metric7 {
    pub fn identity() -> Self {
        Metric7 { g: Mat7::identity(), g_inv: Mat7::identity(), sqrt_det: 1.0 }
    }

    pub fn new(g: Mat7) -> Result<Self, TensorError> {
        let g = 0.5 * (g + g.transpose());
        let chol = nalgebra::Cholesky::new(g).ok_or(TensorError::NotPositiveDefinite)?;
        let g_inv = chol.inverse();
        let g_inv = 0.5 * (g_inv + g_inv.transpose());
        let sqrt_det = chol.l().diagonal().iter().product::<f64>();
        Ok(Metric7 { g, g_inv, sqrt_det })
    }

    pub fn det(&self) -> f64 {
        self.sqrt_det * self.sqrt_det
    }

    pub fn g_tensor(&self) -> Tensor7 {
        Tensor7::from_mat(&self.g).with_hint(SymmetryHint::SymmetricPairs(vec![(0, 1)]))
    }

    pub fn g_inv_tensor(&self) -> Tensor7 {
        Tensor7::from_mat(&self.g_inv).with_variance(vec![Variance::Up, Variance::Up])
    }

    /// Leading principal minors, all positive for a valid metric.
    pub fn leading_minors(&self) -> [f64; 7] {
        let mut out = [0.0; 7];
        for k in 1..=DIM {
            out[k - 1] = self.g.view((0, 0), (k, k)).determinant();
        }
        out
    }

    /// Matrix E with Eᵀ g E = 1; its columns form an orthonormal frame.
    pub fn orthonormal_frame(&self) -> (Mat7, Mat7) {
        let chol = nalgebra::Cholesky::new(self.g).expect("metric is positive definite");
        let l = chol.l();
        let e = l.transpose().try_inverse().expect("triangular factor is invertible");
        (e, l.transpose())
    }
}

/// Levi-Civita symbol ε̂ with ε̂_{1234567} = +1.
pub fn alternating_symbol() -> Tensor7 {
    let mut t = Tensor7::zeros(7);
    for (p, s) in permutations(7) {
        t.data[offset_of(p)] = *s;
    }
    t.with_hint(SymmetryHint::Antisymmetric)
}

/// (α⌟β)_{b..} = α^{a..} β_{a.. b..}; α's indices are raised with the metric.
pub fn contract_form_into_form(alpha: &Tensor7, beta: &Tensor7, metric: &Metric7) -> Result<Tensor7, TensorError> {
    let p = alpha.rank;
    if p > beta.rank {
        return Err(TensorError::RankMismatch(format!("cannot contract a {p}-form into a {}-form", beta.rank)));
    }
    let up = alpha.raise_all(metric);
    Ok(contract_leading(&up, beta))
}

/// Σ_a t_a s_{a b} over the leading slots of s, no metric.
pub fn contract_leading(t: &Tensor7, s: &Tensor7) -> Tensor7 {
    let p = t.rank;
    let q = s.rank - p;
    let inner = pow7(q);
    let mut out = Tensor7::zeros(q);
    for (i, &ti) in t.data.iter().enumerate() {
        if ti == 0.0 {
            continue;
        }
        let row = &s.data[i * inner..(i + 1) * inner];
        for (o, x) in out.data.iter_mut().zip(row) {
            *o += ti * x;
        }
    }
    if matches!(s.hint, SymmetryHint::Antisymmetric) {
        out.hint = SymmetryHint::Antisymmetric;
    }
    out
}

/// Exterior product; e^i∧e^j∧e^k has component +1 at (i,j,k).
pub fn wedge(alpha: &Tensor7, beta: &Tensor7) -> Result<Tensor7, TensorError> {
    let p = alpha.rank;
    let q = beta.rank;
    if p + q > DIM {
        return Err(TensorError::InvalidDegree(p + q));
    }
    let n = p + q;
    let subsets = combinations_of(n, p);
    let mut ia = vec![0; p];
    let mut ib = vec![0; q];
    Ok(fill_antisymmetric(n, |tuple| {
        let mut acc = 0.0;
        for (sub, rest, sign) in &subsets {
            for (j, &s) in sub.iter().enumerate() {
                ia[j] = tuple[s];
            }
            for (j, &s) in rest.iter().enumerate() {
                ib[j] = tuple[s];
            }
            acc += sign * alpha.get(&ia) * beta.get(&ib);
        }
        acc
    }))
}

/// (subset, complement, sign of the shuffle) for p-subsets of 0..n.
fn combinations_of(n: usize, p: usize) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, p, cur, out);
            cur.pop();
        }
    }
    let mut subs = Vec::new();
    rec(0, n, p, &mut cur, &mut subs);
    for sub in subs {
        let rest: Vec<usize> = (0..n).filter(|i| !sub.contains(i)).collect();
        let mut full = sub.clone();
        full.extend(&rest);
        let s = perm_sign(&full);
        out.push((sub, rest, s));
    }
    out
}

/// (*ω)_{b..} = (1/p!) √det g ω^{a..} ε̂_{a.. b..}
pub fn hodge_star(omega: &Tensor7, metric: &Metric7) -> Result<Tensor7, TensorError> {
    let p = omega.rank;
    if p > DIM {
        return Err(TensorError::InvalidDegree(p));
    }
    let up = omega.raise_all(metric);
    let q = DIM - p;
    let mut full = vec![0; DIM];
    Ok(fill_antisymmetric(q, |b| {
        // only a = complement of b (in some order) contributes, p! times
        let mut k = 0;
        for i in 0..DIM {
            if !b.contains(&i) {
                full[k] = i;
                k += 1;
            }
        }
        full[p..].copy_from_slice(b);
        metric.sqrt_det * perm_sign(&full) * up.get(&full[..p])
    }))
}

/// Metric pairing of p-forms with the 1/p! normalization.
pub fn form_inner(a: &Tensor7, b: &Tensor7, metric: &Metric7) -> f64 {
    let up = a.raise_all(metric);
    let fact: f64 = (1..=a.rank).map(|x| x as f64).product();
    up.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>() / fact
}

struct Operand {
    letters: Vec<u8>,
    data: Vec<f64>,
}

/// Einstein summation over 7-dimensional indices, e.g. `einsum("amn,bmn->ab", &[&x, &y])`.
/// Operands are contracted pairwise in a greedy order; letters may not repeat within one operand.
pub fn einsum(spec: &str, ops: &[&Tensor7]) -> Tensor7 {
    let (lhs, out) = spec.split_once("->").expect("einsum spec needs ->");
    let ins: Vec<&str> = if lhs.is_empty() { vec![] } else { lhs.split(',').collect() };
    assert_eq!(ins.len(), ops.len(), "einsum operand count");
    let out_letters: Vec<u8> = out.bytes().collect();
    let mut work: Vec<Operand> = ins
        .iter()
        .zip(ops)
        .map(|(s, t)| {
            let letters: Vec<u8> = s.bytes().collect();
            assert_eq!(letters.len(), t.rank, "einsum rank mismatch in {spec}");
            assert!(
                letters.iter().enumerate().all(|(k, c)| !letters[..k].contains(c)),
                "repeated letter within one operand in {spec}"
            );
            Operand { letters, data: t.data.clone() }
        })
        .collect();
    if work.is_empty() {
        return Tensor7::scalar(1.0);
    }
    while work.len() > 1 {
        let mut best = (usize::MAX, usize::MAX, 0, 1);
        for i in 0..work.len() {
            for j in i + 1..work.len() {
                let u = union(&work[i].letters, &work[j].letters);
                let keep = kept_letters(&u, &work, i, j, &out_letters);
                let cost = (u.len(), keep.len());
                if cost < (best.0, best.1) {
                    best = (cost.0, cost.1, i, j);
                }
            }
        }
        let (_, _, i, j) = best;
        let u = union(&work[i].letters, &work[j].letters);
        let keep = kept_letters(&u, &work, i, j, &out_letters);
        let b = work.remove(j);
        let a = work.remove(i);
        let c = contract_pair(&a, &b, &keep);
        work.push(c);
    }
    let last = work.pop().unwrap();
    assert!(out_letters.iter().all(|c| last.letters.contains(c)), "output letter missing in {spec}");
    let one = Operand { letters: vec![], data: vec![1.0] };
    let res = contract_pair(&last, &one, &out_letters);
    let mut t = Tensor7::zeros(out_letters.len());
    t.data = res.data;
    t
}

fn union(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut u = a.to_vec();
    for c in b {
        if !u.contains(c) {
            u.push(*c);
        }
    }
    u
}

fn kept_letters(u: &[u8], work: &[Operand], i: usize, j: usize, out: &[u8]) -> Vec<u8> {
    u.iter()
        .copied()
        .filter(|c| {
            out.contains(c) || work.iter().enumerate().any(|(k, o)| k != i && k != j && o.letters.contains(c))
        })
        .collect()
}

fn strides_for(letters: &[u8], loop_letters: &[u8]) -> Vec<usize> {
    let r = letters.len();
    loop_letters
        .iter()
        .map(|c| match letters.iter().position(|x| x == c) {
            Some(p) => pow7(r - 1 - p),
            None => 0,
        })
        .collect()
}

fn contract_pair(a: &Operand, b: &Operand, keep: &[u8]) -> Operand {
    let mut loop_letters = keep.to_vec();
    for c in union(&a.letters, &b.letters) {
        if !loop_letters.contains(&c) {
            loop_letters.push(c);
        }
    }
    let n = loop_letters.len();
    let sa = strides_for(&a.letters, &loop_letters);
    let sb = strides_for(&b.letters, &loop_letters);
    let so = strides_for(keep, &loop_letters);
    let mut out = vec![0.0; pow7(keep.len())];
    let mut idx = vec![0usize; n];
    let (mut oa, mut ob, mut oo) = (0usize, 0usize, 0usize);
    let total = pow7(n);
    for _ in 0..total {
        out[oo] += a.data[oa] * b.data[ob];
        for k in (0..n).rev() {
            idx[k] += 1;
            oa += sa[k];
            ob += sb[k];
            oo += so[k];
            if idx[k] < DIM {
                break;
            }
            idx[k] = 0;
            oa -= DIM * sa[k];
            ob -= DIM * sb[k];
            oo -= DIM * so[k];
        }
    }
    Operand { letters: keep.to_vec(), data: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_tables() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(7).len(), 5040);
        assert_eq!(combinations(3).len(), 35);
        assert_eq!(perm_sign(&[1, 0, 2]), -1.0);
    }

    #[test]
    fn einsum_matches_loops() {
        let a = Tensor7::from_vec(2, (0..49).map(|x| x as f64 * 0.1).collect()).unwrap();
        let b = Tensor7::from_vec(2, (0..49).map(|x| (x as f64).sin()).collect()).unwrap();
        let c = einsum("ab,bc->ac", &[&a, &b]);
        let m = a.to_mat() * b.to_mat();
        assert!(c.max_abs_diff(&Tensor7::from_mat(&m)) < 1e-12);
        let tr = einsum("ab,ab->", &[&a, &b]).value();
        let direct: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
        assert!((tr - direct).abs() < 1e-12);
        let t = einsum("ab->ba", &[&a]);
        assert!(t.max_abs_diff(&Tensor7::from_mat(&a.to_mat().transpose())) < 1e-15);
    }
}
