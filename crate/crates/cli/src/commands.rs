//! The four subcommands. Each returns a JSON report and whether it passed.

use std::path::PathBuf;

use g2core::deform::{
    conformal_chi, conformal_point, conformal_torsion, dv_condition_residual, v7_deform, v7_inverse,
    v7_torsion_formula, DeformError, GeneralDeformationField,
};
use g2core::exact::{certify_all, certify_named, CertResult, Mutation, CERTIFICATE_NAMES};
use g2core::fields::{write_snapshot, GridSpec, StructureField, TensorField};
use g2core::g2algebra::{decompose_2tensor, project_2form, G2Structure, TensorSplit};
use g2core::tensor7::Tensor7;
use g2core::torsion::{
    classify, consistency_conditions_components, consistency_conditions_t, consistency_field_max, nabla_psi_check,
    ricci_two_path, torsion_field, torsion_from_exterior_at, ComponentFields, PointComponents,
    PointTorsion, TorsionClassReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{BuildError, Built, ConfigError, Origin, RunConfig, StructureConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Deform(DeformError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(c) => CliError::Config(c),
            BuildError::Deform(d) => CliError::Deform(d),
        }
    }
}

pub struct Outcome {
    pub report: Value,
    pub pass: bool,
}

/// One named comparison of a residual against its budget.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Check { name: name.into(), residual, tolerance, pass: residual <= tolerance }
    }

    /// A check that passes when the residual exceeds the floor.
    fn above(name: &str, residual: f64, floor: f64) -> Self {
        Check { name: name.into(), residual, tolerance: floor, pass: residual > floor }
    }
}

fn max_over(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    (0..n).into_par_iter().map(f).reduce(|| 0.0, f64::max)
}

fn torsion_scale(t: &TensorField) -> f64 {
    t.max_abs().max(1.0)
}

pub fn identities(only: Option<&str>, mutate: Option<&str>) -> Result<Outcome, CliError> {
    let mutation = match mutate {
        None => None,
        Some(m) => Some(Mutation::parse(m).ok_or_else(|| {
            CliError::Usage(format!("unknown mutation {m:?}; use phiphi, phipsi, psipsi or projectors"))
        })?),
    };
    let results: Vec<CertResult> = match only {
        None => certify_all(mutation),
        Some(name) => vec![certify_named(name, mutation).ok_or_else(|| {
            CliError::Usage(format!("unknown certificate {name:?}; known: {}", CERTIFICATE_NAMES.join(", ")))
        })?],
    };
    let pass = results.iter().all(|r| matches!(r, Ok(c) if c.residual == 0));
    let certificates: Vec<Value> = results
        .iter()
        .map(|r| match r {
            Ok(c) => json!({ "status": if c.residual == 0 { "pass" } else { "fail" }, "certificate": c }),
            Err(e) => json!({ "status": "fail", "failure": e }),
        })
        .collect();
    Ok(Outcome { report: json!({ "mutation": mutate, "certificates": certificates, "pass": pass }), pass })
}

pub fn torsion(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let built = build(cfg)?;
    let sf = &built.field;
    let tf = torsion_field(sf);
    let rep = classify(sf, &tf);
    let per_point: Vec<Value> = (0..sf.num_points())
        .map(|p| {
            let st = sf.structure_at(p);
            let d = decompose_2tensor(&tf.at(p), &st);
            json!({ "point": p, "x": sf.spec().coords(p), "norms": split_norms(&d, &st) })
        })
        .collect();
    let checks: Vec<Check> = rep
        .consistency_residuals
        .iter()
        .enumerate()
        .map(|(k, r)| Check::new(&format!("consistency_t{}", k + 1), *r, rep.fd_tolerance))
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(Outcome {
        report: json!({
            "grid": sf.spec(),
            "class": rep,
            "fd_tolerance": format!("50 (2 pi / {})^{} x {:.3e} = {:.3e}", sf.spec().points_per_axis, sf.spec().fd_order, torsion_scale(&tf), rep.fd_tolerance),
            "checks": checks,
            "points": per_point,
            "pass": pass,
        }),
        pass,
    })
}

fn split_norms(d: &TensorSplit, st: &G2Structure) -> [f64; 4] {
    g2core::torsion::split_norms(d, st)
}

#[derive(Serialize)]
struct Stats {
    min: f64,
    max: f64,
    mean: f64,
}

fn stats(xs: &[f64]) -> Stats {
    Stats {
        min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
        max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean: xs.iter().sum::<f64>() / xs.len() as f64,
    }
}

fn min_eigenvalue(sf: &StructureField) -> f64 {
    sf.metric
        .metrics
        .iter()
        .map(|m| m.g.symmetric_eigen().eigenvalues.min())
        .fold(f64::INFINITY, f64::min)
}

pub fn deform(cfg: &RunConfig, snapshot: Option<PathBuf>) -> Result<Outcome, CliError> {
    let spec = cfg.grid_spec()?;
    let (before, general, extra, mut checks) = match &cfg.structure {
        StructureConfig::V7 { .. } => {
            let Built { origin: Origin::V7 { base: bsf, v }, .. } = cfg.structure.build(&spec)? else {
                unreachable!("a v7 structure builds a v7 origin")
            };
            let def = v7_deform(&bsf, &v);
            let bt = torsion_field(&bsf);
            let dt = torsion_field(def.deformed());
            let tol = spec.fd_tolerance(torsion_scale(&bt).max(torsion_scale(&dt)));
            let formula = max_over(spec.num_points(), |p| {
                let st = bsf.structure_at(p);
                let td = decompose_2tensor(&bt.at(p), &st);
                let f = v7_torsion_formula(&st, &td, &v.at(p), &def.grad_v_decomp[p]);
                f.t.max_abs_diff(&dt.at(p))
            });
            let inv = v7_inverse(&def);
            let checks = vec![
                Check::new("closed_form", def.closed_form_residual(), 1e-10),
                Check::new("torsion_formula", formula, tol),
                Check::new("inverse_pi7", inv.roundtrip_pi7, 1e-10),
                Check::new("inverse_m_tilde", inv.m_tilde_residual, 1e-12),
                Check::new("inverse_gradient", inv.grad_residual, inv.fd_tolerance),
            ];
            let extra = json!({
                "kind": "v7",
                "inverse": {
                    "roundtrip_full": inv.roundtrip,
                    "roundtrip_pi7": inv.roundtrip_pi7,
                    "m_tilde_residual": inv.m_tilde_residual,
                    "grad_residual": inv.grad_residual,
                    "note": "the inverse vector only cancels the Lambda7 part of the difference; the full roundtrip is second order in v and is reported, not checked",
                },
            });
            (bsf, def.general, extra, checks)
        }
        StructureConfig::Conformal { .. } => {
            let Built { origin: Origin::Conformal { f }, .. } = cfg.structure.build(&spec)? else {
                unreachable!("a conformal structure builds a conformal origin")
            };
            let flat = StructureField::flat(&spec);
            let chi = TensorField::from_fn(&spec, |p, _| conformal_chi(&flat.structure_at(p), f.scalar_at(p)));
            let general = GeneralDeformationField::new(&flat, chi).map_err(CliError::Deform)?;
            let dt = torsion_field(&general.deformed);
            let tol = spec.fd_tolerance(torsion_scale(&dt));
            let zero = Tensor7::zeros(2);
            let closed = max_over(spec.num_points(), |p| {
                let st = flat.structure_at(p);
                let cp = conformal_point(&st, f.scalar_at(p));
                let d = &general.points[p];
                (d.g_tilde.g - cp.g_tilde).amax().max(d.psi_tilde.max_abs_diff(&cp.psi_tilde))
            });
            let formula = max_over(spec.num_points(), |p| {
                let st = flat.structure_at(p);
                conformal_torsion(&st, f.scalar_at(p), &f.gradient_at(p), &zero).max_abs_diff(&dt.at(p))
            });
            let general_path = max_over(spec.num_points(), |p| {
                general.deformed_torsion_general_at(&torsion_field(&flat), p).lowered.max_abs_diff(&dt.at(p))
            });
            let checks = vec![
                Check::new("closed_form", closed, 1e-10),
                Check::new("torsion_formula", formula, tol),
                Check::new("torsion_general", general_path, tol),
            ];
            (flat, general, json!({ "kind": "conformal" }), checks)
        }
        _ => {
            return Err(CliError::Usage("deform needs a structure of kind \"v7\" or \"conformal\"".into()));
        }
    };
    let dets: Vec<f64> = general.points.iter().map(|d| d.det_ratio).collect();
    let min_eig = min_eigenvalue(&general.deformed);
    checks.push(Check::above("positivity_min_eigenvalue", min_eig, 0.0));
    let rep_before = classify(&before, &torsion_field(&before));
    let rep_after = classify(&general.deformed, &torsion_field(&general.deformed));
    if let Some(path) = &snapshot {
        let file = std::fs::File::create(path).map_err(|source| CliError::Write { path: path.clone(), source })?;
        write_snapshot(&general.deformed.phi, std::io::BufWriter::new(file)).map_err(|e| CliError::Write {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Outcome {
        report: json!({
            "grid": spec,
            "deformation": extra,
            "det_ratio": stats(&dets),
            "positive": min_eig > 0.0,
            "min_metric_eigenvalue": min_eig,
            "class_before": rep_before,
            "class_after": rep_after,
            "checks": checks,
            "snapshot": snapshot,
            "pass": pass,
        }),
        pass,
    })
}

fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    // a snapshot carries its own grid and ignores this one
    Ok(cfg.structure.build(&cfg.grid_spec()?)?)
}

/// Closed-form and two-path torsion comparisons for one built structure.
fn triple_path(built: &Built) -> Vec<Check> {
    let sf = &built.field;
    let n = sf.num_points();
    let tf = torsion_field(sf);
    let tol = sf.spec().fd_tolerance(torsion_scale(&tf));
    let mut out = vec![
        Check::new("exterior_vs_levi_civita", max_over(n, |p| torsion_from_exterior_at(sf, p).0.max_abs_diff(&tf.at(p))), tol),
        Check::new("nabla_psi", max_over(n, |p| nabla_psi_check(sf, &tf.at(p), p)), tol),
    ];
    match &built.origin {
        Origin::Conformal { f } => {
            let st0 = G2Structure::canonical();
            let zero = Tensor7::zeros(2);
            let r = max_over(n, |p| {
                conformal_torsion(&st0, f.scalar_at(p), &f.gradient_at(p), &zero).max_abs_diff(&tf.at(p))
            });
            out.push(Check::new("conformal_closed_form", r, tol));
        }
        Origin::V7 { base, v } => {
            let def = v7_deform(base, v);
            let bt = torsion_field(base);
            let formula = max_over(n, |p| {
                let st = base.structure_at(p);
                let td = decompose_2tensor(&bt.at(p), &st);
                v7_torsion_formula(&st, &td, &v.at(p), &def.grad_v_decomp[p]).t.max_abs_diff(&tf.at(p))
            });
            let general = max_over(n, |p| def.general.deformed_torsion_general_at(&bt, p).lowered.max_abs_diff(&tf.at(p)));
            out.push(Check::new("lambda7_formula", formula, tol));
            out.push(Check::new("general_chi_formula", general, tol));
        }
        Origin::Flat | Origin::File => {}
    }
    out
}

fn ricci(built: &Built) -> Vec<Check> {
    let sf = &built.field;
    let tf = torsion_field(sf);
    vec![Check::new("ricci_two_path", ricci_two_path(sf, &tf), sf.spec().fd_tolerance(torsion_scale(&tf)))]
}

fn consistency(built: &Built) -> Vec<Check> {
    let sf = &built.field;
    let tf = torsion_field(sf);
    let tol = sf.spec().fd_tolerance(torsion_scale(&tf));
    let c = consistency_field_max(sf, &tf);
    let cf = ComponentFields::from_torsion(sf, &tf);
    let comps: Vec<[f64; 4]> = (0..sf.num_points())
        .into_par_iter()
        .map(|p| {
            let c = consistency_conditions_components(&PointComponents::from_fields(sf, &cf, p));
            [c.c1, c.c2, c.c3, c.d_tau7]
        })
        .collect();
    let cmax = |k: usize| comps.iter().map(|c| c[k]).fold(0.0, f64::max);
    let mut out: Vec<Check> = (0..3).map(|k| Check::new(&format!("t_condition_{}", k + 1), c[k], tol)).collect();
    out.extend((0..3).map(|k| Check::new(&format!("component_condition_{}", k + 1), cmax(k), tol)));
    out
}

/// Largest closed-form or two-path residual, the quantity tracked under refinement.
fn convergence_residual(built: &Built) -> f64 {
    triple_path(built).iter().map(|c| c.residual).fold(0.0, f64::max)
}

/// Residuals below this are roundoff, not truncation error.
const ROUNDOFF: f64 = 1e-10;

fn convergence(cfg: &RunConfig, spec: &GridSpec) -> Result<(Vec<Check>, Value), CliError> {
    let n = spec.points_per_axis;
    let ns = [n / 4, n / 2, n];
    let mut errs = Vec::new();
    for &m in &ns {
        let s = spec.with_points(m);
        s.validate().map_err(ConfigError::from)?;
        errs.push(convergence_residual(&cfg.structure.build(&s)?));
    }
    let orders: Vec<f64> = errs.windows(2).filter(|w| w[1] > ROUNDOFF).map(|w| (w[0] / w[1]).log2()).collect();
    let target = spec.fd_order as f64 - 0.5;
    let observed = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let check = if orders.is_empty() {
        Check::new("exact_at_all_resolutions", errs.iter().cloned().fold(0.0, f64::max), ROUNDOFF)
    } else {
        Check::above("observed_order", observed, target - f64::EPSILON)
    };
    Ok((vec![check], json!({ "points": ns, "residuals": errs, "orders": orders, "required_order": target })))
}

fn negative_control(built: &Built, seed: u64) -> Vec<Check> {
    let sf = &built.field;
    let spec = sf.spec();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_tensor = |rank: usize, amp: f64| {
        let data = (0..7usize.pow(rank as u32)).map(|_| amp * r.random_range(-1.0..1.0)).collect();
        Tensor7::from_vec(rank, data).expect("sized to rank")
    };
    let st = sf.structure_at(0);
    let fired = (0..100)
        .filter(|_| {
            let pt = PointTorsion { st: st.clone(), t: rand_tensor(2, 1.0), nabla_t: Tensor7::zeros(3) };
            consistency_conditions_t(&pt).residuals()[0] > 1e-6
        })
        .count();
    let (mut n7, mut n14) = (Vec::new(), Vec::new());
    for p in 0..sf.num_points() {
        n7.push(rand_tensor(1, 0.1));
        n14.push(project_2form(&rand_tensor(2, 0.1).antisymmetrize(), &sf.structure_at(p)).pi14);
    }
    let res = dv_condition_residual(sf, &TensorField::from_values(spec, n7), &TensorField::from_values(spec, n14));
    vec![
        Check::above("random_torsion_detected", fired as f64, 98.0),
        Check::above("dv_noise_detected", res, 10.0 * spec.fd_tolerance(1.0)),
    ]
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let suites = cfg.suites()?;
    let built = build(cfg)?;
    let spec = built.field.spec().clone();
    let mut pass = true;
    let mut reports = serde_json::Map::new();
    for suite in &suites {
        let (checks, detail) = match suite.as_str() {
            "triple_path" => (triple_path(&built), Value::Null),
            "ricci" => (ricci(&built), Value::Null),
            "consistency" => (consistency(&built), Value::Null),
            "convergence" if cfg.structure.is_file() => {
                (vec![], json!({ "skipped": "a snapshot has a single resolution" }))
            }
            "convergence" => convergence(cfg, &spec)?,
            "negative_control" => (negative_control(&built, cfg.seed), Value::Null),
            other => return Err(ConfigError::UnknownSuite(other.into()).into()),
        };
        let ok = checks.iter().all(|c| c.pass);
        pass &= ok;
        reports.insert(suite.clone(), json!({ "pass": ok, "checks": checks, "detail": detail }));
    }
    let class: TorsionClassReport = classify(&built.field, &torsion_field(&built.field));
    Ok(Outcome { report: json!({ "grid": spec, "class": class, "suites": reports, "pass": pass }), pass })
}
