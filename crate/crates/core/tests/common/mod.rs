#![allow(dead_code)]

use g2core::g2algebra::{canonical_phi0, metric_from_phi, G2Structure};
use g2core::tensor7::{pow7, Mat7, Tensor7};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const TAU: f64 = 2.0 * PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uni(r: &mut ChaCha8Rng) -> f64 {
    r.random_range(-1.0..1.0)
}

pub fn rand_tensor(r: &mut ChaCha8Rng, k: usize, amp: f64) -> Tensor7 {
    Tensor7::from_vec(k, (0..pow7(k)).map(|_| amp * uni(r)).collect()).unwrap()
}

pub fn rand_form(r: &mut ChaCha8Rng, k: usize, amp: f64) -> Tensor7 {
    rand_tensor(r, k, amp).antisymmetrize()
}

pub fn rand_vec(r: &mut ChaCha8Rng, amp: f64) -> Tensor7 {
    Tensor7::vector(&std::array::from_fn(|_| amp * uni(r)))
}

pub fn near_identity(r: &mut ChaCha8Rng, amp: f64) -> Mat7 {
    Mat7::from_fn(|i, j| if i == j { 1.0 } else { 0.0 } + amp * uni(r))
}

/// A positive φ obtained by pushing φ₀ through a random linear map.
pub fn gl_structure(r: &mut ChaCha8Rng, amp: f64) -> G2Structure {
    metric_from_phi(&canonical_phi0().transform(&near_identity(r, amp))).unwrap()
}

/// Traceless symmetric tensor with respect to the structure's metric.
pub fn rand_traceless(r: &mut ChaCha8Rng, st: &G2Structure, amp: f64) -> Tensor7 {
    let h = rand_tensor(r, 2, amp).symmetrize2();
    let tr = h.trace2(&st.metric) / 7.0;
    h - st.g() * tr
}

/// Empirical convergence order from errors at successive doublings.
pub fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Vector with a single component `a` in slot k.
pub fn axis_vec(k: usize, a: f64) -> Tensor7 {
    let mut v = [0.0; 7];
    v[k] = a;
    Tensor7::vector(&v)
}

/// 1 + 0.1 sin(2πx¹) and its derivative.
pub fn f_conf(x: &[f64; 7]) -> f64 {
    1.0 + 0.1 * (TAU * x[0]).sin()
}

pub fn df_conf(x: &[f64; 7]) -> f64 {
    0.1 * TAU * (TAU * x[0]).cos()
}
