//! Conformal deformations φ̃ = f³φ, i.e. χ = (f³ − 1)φ: g̃ = f²g, ψ̃ = f⁴ψ,
//! s = f⁹g, det g̃/det g = f¹⁴ and T̃_ab = f T_ab − (∂^c f) φ_cab.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DeformError;
use crate::fields::{StructureField, TensorField};
use crate::g2algebra::{decompose_2tensor, G2Structure};
use crate::tensor7::{einsum, Mat7, Tensor7};
use crate::torsion::{classify, TorsionClassReport};

pub fn conformal_chi(st: &G2Structure, f: f64) -> Tensor7 {
    &st.phi * (f.powi(3) - 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConformalPoint {
    pub f: f64,
    pub s: Mat7,
    pub det_ratio: f64,
    pub g_tilde: Mat7,
    pub g_tilde_inv: Mat7,
    pub psi_tilde: Tensor7,
}

pub fn conformal_point(st: &G2Structure, f: f64) -> ConformalPoint {
    let g = st.metric.g;
    ConformalPoint {
        f,
        s: g * f.powi(9),
        det_ratio: f.powi(14),
        g_tilde: g * f * f,
        g_tilde_inv: st.metric.g_inv / (f * f),
        psi_tilde: &st.psi * f.powi(4),
    }
}

/// T̃_ab = f T_ab − (∂^c f) φ_cab; `df` is the 1-form ∂_a f.
pub fn conformal_torsion(st: &G2Structure, f: f64, df: &Tensor7, t: &Tensor7) -> Tensor7 {
    t * f - einsum("d,dc,cab->ab", &[df, &st.g_inv(), &st.phi])
}

/// δΓ = f⁻¹(δ^b_a ∂_c f + δ^b_c ∂_a f − g_ac g^be ∂_e f), stored [b, a, c].
pub fn conformal_delta_christoffel(st: &G2Structure, f: f64, df: &Tensor7) -> Tensor7 {
    let del = Tensor7::from_mat(&Mat7::identity());
    let dfu = einsum("be,e->b", &[&st.g_inv(), df]);
    (einsum("ba,c->bac", &[&del, df]) + einsum("bc,a->bac", &[&del, df]) - einsum("ac,b->bac", &[&st.g(), &dfu]))
        * (1.0 / f)
}

/// Result of rescaling a W₁⊕W₇ structure by f = |τ₁|.
#[derive(Clone, Debug)]
pub struct ConformalGauge {
    pub f: TensorField,
    /// f³φ.
    pub structure: StructureField,
    /// f T − df⌟φ.
    pub torsion: TensorField,
    pub report: TorsionClassReport,
}

/// Removes τ₇ from a W₁⊕W₇ structure with τ₇ = d log τ₁ by the conformal factor
/// f = |τ₁|, leaving constant τ̃₁ = ±1. Fails if τ₁ vanishes somewhere.
pub fn conformal_gauge_w1w7(sf: &StructureField, tfield: &TensorField) -> Result<ConformalGauge, DeformError> {
    let spec = sf.spec().clone();
    let n = sf.num_points();
    let tau1: Vec<f64> = (0..n).into_par_iter().map(|p| decompose_2tensor(&tfield.at(p), &sf.structure_at(p)).s1).collect();
    let floor = spec.class_threshold(tfield.max_abs().max(1.0));
    if let Some((p, t)) = tau1.iter().enumerate().find(|(_, t)| t.abs() <= floor) {
        return Err(DeformError::Precondition(format!("τ₁ = {t:e} vanishes at grid point {p}; no conformal gauge to W₁")));
    }
    if tau1.iter().any(|t| t.signum() != tau1[0].signum()) {
        return Err(DeformError::Precondition("τ₁ changes sign".into()));
    }
    let f = TensorField::from_values(&spec, tau1.iter().map(|t| Tensor7::scalar(t.abs())).collect());
    let structure = rescaled(sf, &f)?;
    let torsion = TensorField::from_fn(&spec, |p, _| {
        conformal_torsion(&sf.structure_at(p), f.scalar_at(p), &f.gradient_at(p), &tfield.at(p))
    });
    let report = classify(&structure, &torsion);
    Ok(ConformalGauge { f, structure, torsion, report })
}

/// The field f³φ.
pub fn rescaled(sf: &StructureField, f: &TensorField) -> Result<StructureField, DeformError> {
    let phi = TensorField::from_fn(sf.spec(), |p, _| sf.phi.at(p) * f.scalar_at(p).powi(3));
    Ok(StructureField::from_phi(phi)?)
}
