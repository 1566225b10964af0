//! Tensor fields on a flat periodic 7-torus that vary along one or two
//! coordinate axes, with central finite-difference derivatives.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fieldexpr::{EvalError, Expr};
use crate::g2algebra::{metric_from_phi, G2Structure, NotPositive};
use crate::tensor7::{pow7, Mat7, Metric7, Tensor7, Variance, DIM};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expression depends on inactive axis x{axis}")]
    InactiveAxis { axis: usize },
    #[error("evaluation failed at grid point {point}: {source}")]
    Eval { point: usize, source: EvalError },
    #[error("structure not positive at grid point {point}: {source}")]
    NotPositive { point: usize, source: NotPositive },
    #[error("bad snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    /// 1-based axes along which fields vary (one or two of them).
    pub active_axes: Vec<usize>,
    pub points_per_axis: usize,
    /// Period of each active axis.
    pub period: Vec<f64>,
    pub fd_order: usize,
}

impl GridSpec {
    pub fn new(active_axes: Vec<usize>, n: usize, period: f64, fd_order: usize) -> Result<Self, FieldError> {
        let spec = GridSpec { period: vec![period; active_axes.len()], active_axes, points_per_axis: n, fd_order };
        spec.validate()?;
        Ok(spec)
    }

    /// One active axis x¹ of period 1.
    pub fn line(n: usize, fd_order: usize) -> Self {
        GridSpec::new(vec![1], n, 1.0, fd_order).expect("valid line grid")
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: &str| Err(FieldError::InvalidGrid(m.into()));
        let k = self.active_axes.len();
        if !(1..=2).contains(&k) {
            return bad("one or two active axes required");
        }
        if self.active_axes.iter().any(|a| !(1..=7).contains(a)) {
            return bad("axes are numbered 1..7");
        }
        if k == 2 && self.active_axes[0] == self.active_axes[1] {
            return bad("active axes must differ");
        }
        if self.points_per_axis < 8 || self.points_per_axis % 2 != 0 {
            return bad("points per axis must be even and at least 8");
        }
        if self.period.len() != k || self.period.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return bad("one positive period per active axis");
        }
        if self.fd_order != 2 && self.fd_order != 4 {
            return bad("fd_order must be 2 or 4");
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.points_per_axis.pow(self.active_axes.len() as u32)
    }

    pub fn spacing(&self, slot: usize) -> f64 {
        self.period[slot] / self.points_per_axis as f64
    }

    /// Position of 0-based coordinate `axis` among the active axes.
    pub fn slot_of(&self, axis: usize) -> Option<usize> {
        self.active_axes.iter().position(|&a| a == axis + 1)
    }

    fn grid_index(&self, p: usize) -> [usize; 2] {
        let n = self.points_per_axis;
        if self.active_axes.len() == 1 {
            [p, 0]
        } else {
            [p / n, p % n]
        }
    }

    fn flat(&self, idx: [usize; 2]) -> usize {
        if self.active_axes.len() == 1 {
            idx[0]
        } else {
            idx[0] * self.points_per_axis + idx[1]
        }
    }

    pub fn coords(&self, p: usize) -> [f64; 7] {
        let mut x = [0.0; 7];
        let idx = self.grid_index(p);
        for (s, &a) in self.active_axes.iter().enumerate() {
            x[a - 1] = idx[s] as f64 * self.spacing(s);
        }
        x
    }

    /// Grid point shifted by `by` steps along active slot `slot`, wrapping around.
    pub fn neighbor(&self, p: usize, slot: usize, by: isize) -> usize {
        let n = self.points_per_axis as isize;
        let mut idx = self.grid_index(p);
        idx[slot] = (idx[slot] as isize + by).rem_euclid(n) as usize;
        self.flat(idx)
    }

    pub fn stencil(&self) -> &'static [(isize, f64)] {
        const O2: [(isize, f64); 2] = [(-1, -0.5), (1, 0.5)];
        const O4: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)];
        if self.fd_order == 2 {
            &O2
        } else {
            &O4
        }
    }

    /// 50·(2π/N)^order·scale, the declared error budget of one FD derivative.
    pub fn fd_tolerance(&self, scale: f64) -> f64 {
        50.0 * (2.0 * std::f64::consts::PI / self.points_per_axis as f64).powi(self.fd_order as i32) * scale
    }

    /// max(1e-6, 100·(2π/N)^order·scale)
    pub fn class_threshold(&self, scale: f64) -> f64 {
        (2.0 * self.fd_tolerance(scale)).max(1e-6)
    }

    /// Same grid with a different resolution.
    pub fn with_points(&self, n: usize) -> Self {
        GridSpec { points_per_axis: n, ..self.clone() }
    }
}

/// A tensor of fixed rank and variance at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    spec: GridSpec,
    rank: usize,
    variance: Vec<Variance>,
    data: Vec<f64>,
}

impl TensorField {
    pub fn from_values(spec: &GridSpec, values: Vec<Tensor7>) -> Self {
        assert_eq!(values.len(), spec.num_points());
        let rank = values[0].rank();
        let variance = values[0].variance().to_vec();
        let mut data = Vec::with_capacity(values.len() * pow7(rank));
        for v in &values {
            assert_eq!(v.rank(), rank, "rank must be uniform over the grid");
            data.extend_from_slice(v.data());
        }
        TensorField { spec: spec.clone(), rank, variance, data }
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn(usize, [f64; 7]) -> Tensor7 + Sync) -> Self {
        let vals: Vec<Tensor7> = (0..spec.num_points()).into_par_iter().map(|p| f(p, spec.coords(p))).collect();
        Self::from_values(spec, vals)
    }

    pub fn try_from_fn<E: Send>(
        spec: &GridSpec,
        f: impl Fn(usize, [f64; 7]) -> Result<Tensor7, E> + Sync,
    ) -> Result<Self, E> {
        let vals: Result<Vec<Tensor7>, E> =
            (0..spec.num_points()).into_par_iter().map(|p| f(p, spec.coords(p))).collect();
        Ok(Self::from_values(spec, vals?))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn num_points(&self) -> usize {
        self.spec.num_points()
    }

    fn slice(&self, p: usize) -> &[f64] {
        let n = pow7(self.rank);
        &self.data[p * n..(p + 1) * n]
    }

    pub fn at(&self, p: usize) -> Tensor7 {
        Tensor7::from_vec(self.rank, self.slice(p).to_vec()).unwrap().with_variance(self.variance.clone())
    }

    pub fn map(&self, f: impl Fn(usize, &Tensor7) -> Tensor7 + Sync) -> TensorField {
        TensorField::from_fn(&self.spec, |p, _| f(p, &self.at(p)))
    }

    /// ∂_axis at point p (0-based axis); exactly zero along inactive axes.
    pub fn partial(&self, axis: usize, p: usize) -> Tensor7 {
        let mut out = vec![0.0; pow7(self.rank)];
        if let Some(slot) = self.spec.slot_of(axis) {
            let h = self.spec.spacing(slot);
            // antisymmetric stencil taken in ± pairs, so constants give exactly 0
            for &(k, w) in self.spec.stencil().iter().filter(|(k, _)| *k > 0) {
                let (qp, qm) = (self.spec.neighbor(p, slot, k), self.spec.neighbor(p, slot, -k));
                for ((o, x), y) in out.iter_mut().zip(self.slice(qp)).zip(self.slice(qm)) {
                    *o += w * (x - y);
                }
            }
            out.iter_mut().for_each(|o| *o /= h);
        }
        Tensor7::from_vec(self.rank, out).unwrap().with_variance(self.variance.clone())
    }

    /// ∂_a t_{...} with the derivative slot first.
    pub fn gradient_at(&self, p: usize) -> Tensor7 {
        let n = pow7(self.rank);
        let mut out = vec![0.0; n * DIM];
        for &axis in &self.spec.active_axes {
            let d = self.partial(axis - 1, p);
            out[(axis - 1) * n..axis * n].copy_from_slice(d.data());
        }
        let mut var = vec![Variance::Down];
        var.extend_from_slice(&self.variance);
        Tensor7::from_vec(self.rank + 1, out).unwrap().with_variance(var)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &TensorField) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Value of a scalar field at p.
    pub fn scalar_at(&self, p: usize) -> f64 {
        assert_eq!(self.rank, 0);
        self.data[p]
    }
}

/// (dω)_{a0..ap} = (p+1) ∂_[a0 ω_{a1..ap]}
pub fn exterior_derivative_at(form: &TensorField, p: usize) -> Tensor7 {
    assert!(form.rank() <= 6, "no forms above degree 7");
    form.gradient_at(p).antisymmetrize() * (form.rank() + 1) as f64
}

/// Γ^b_ac = ½ g^bd (∂_c g_da + ∂_a g_dc − ∂_d g_ac), stored [b, a, c];
/// `dg[c, a, b]` is ∂_c g_ab.
pub fn christoffel_from(g_inv: &Mat7, dg: &Tensor7) -> Tensor7 {
    let d = dg.data();
    let at = |c: usize, a: usize, b: usize| d[(c * DIM + a) * DIM + b];
    let mut low = [0.0; 343];
    for dd in 0..DIM {
        for a in 0..DIM {
            for c in 0..DIM {
                low[(dd * DIM + a) * DIM + c] = 0.5 * (at(c, dd, a) + at(a, dd, c) - at(dd, a, c));
            }
        }
    }
    let mut out = vec![0.0; 343];
    for b in 0..DIM {
        for dd in 0..DIM {
            let w = g_inv[(b, dd)];
            for ac in 0..49 {
                out[b * 49 + ac] += w * low[dd * 49 + ac];
            }
        }
    }
    Tensor7::from_vec(3, out).unwrap()
}

/// ∇_a t from the partials `dt` (derivative slot first) and Γ^b_ac stored [b, a, c].
pub fn covariant_from(t: &Tensor7, dt: &Tensor7, gamma: &Tensor7) -> Tensor7 {
    let r = t.rank();
    let n = pow7(r);
    let g = gamma.data();
    let td = t.data();
    let mut out = dt.data().to_vec();
    for (slot, var) in t.variance().iter().enumerate() {
        let stride = pow7(r - 1 - slot);
        for a in 0..DIM {
            for off in 0..n {
                let i = (off / stride) % DIM;
                let base = off - i * stride;
                let mut acc = 0.0;
                for e in 0..DIM {
                    let x = td[base + e * stride];
                    if x == 0.0 {
                        continue;
                    }
                    acc += match var {
                        Variance::Down => -g[(e * DIM + a) * DIM + i] * x,
                        Variance::Up => g[(i * DIM + a) * DIM + e] * x,
                    };
                }
                out[a * n + off] += acc;
            }
        }
    }
    let mut var = vec![Variance::Down];
    var.extend_from_slice(t.variance());
    Tensor7::from_vec(r + 1, out).unwrap().with_variance(var)
}

/// A metric at every point with its Christoffel symbols.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub metrics: Vec<Metric7>,
    pub g: TensorField,
    pub christoffel: TensorField,
}

impl MetricField {
    pub fn new(spec: &GridSpec, metrics: Vec<Metric7>) -> Self {
        let g = TensorField::from_values(spec, metrics.iter().map(|m| m.g_tensor()).collect());
        let christoffel = TensorField::from_fn(spec, |p, _| christoffel_from(&metrics[p].g_inv, &g.gradient_at(p)));
        MetricField { metrics, g, christoffel }
    }

    pub fn flat(spec: &GridSpec) -> Self {
        MetricField::new(spec, vec![Metric7::identity(); spec.num_points()])
    }

    pub fn spec(&self) -> &GridSpec {
        self.g.spec()
    }

    pub fn gamma_at(&self, p: usize) -> Tensor7 {
        self.christoffel.at(p)
    }

    pub fn covariant_at(&self, t: &TensorField, p: usize) -> Tensor7 {
        covariant_from(&t.at(p), &t.gradient_at(p), &self.gamma_at(p))
    }

    /// R_ac = ∂_bΓ^b_ac − ∂_cΓ^b_ab + Γ^b_bd Γ^d_ac − Γ^b_cd Γ^d_ab
    pub fn ricci_at(&self, p: usize) -> Mat7 {
        let dg = self.christoffel.gradient_at(p);
        let d = dg.data();
        let gm = self.gamma_at(p);
        let g = gm.data();
        let dgam = |e: usize, b: usize, a: usize, c: usize| d[((e * DIM + b) * DIM + a) * DIM + c];
        let gam = |b: usize, a: usize, c: usize| g[(b * DIM + a) * DIM + c];
        Mat7::from_fn(|a, c| {
            let mut r = 0.0;
            for b in 0..DIM {
                r += dgam(b, b, a, c) - dgam(c, b, a, b);
                for e in 0..DIM {
                    r += gam(b, b, e) * gam(e, a, c) - gam(b, c, e) * gam(e, a, b);
                }
            }
            r
        })
    }
}

/// A positive 3-form field with its metric, 4-form and Levi-Civita connection.
#[derive(Clone, Debug)]
pub struct StructureField {
    pub phi: TensorField,
    pub psi: TensorField,
    pub metric: MetricField,
}

impl StructureField {
    pub fn from_phi(phi: TensorField) -> Result<Self, FieldError> {
        assert_eq!(phi.rank(), 3);
        let spec = phi.spec().clone();
        let sts: Result<Vec<G2Structure>, FieldError> = (0..spec.num_points())
            .into_par_iter()
            .map(|p| metric_from_phi(&phi.at(p)).map_err(|source| FieldError::NotPositive { point: p, source }))
            .collect();
        let sts = sts?;
        let psi = TensorField::from_values(&spec, sts.iter().map(|s| s.psi.clone()).collect());
        let metric = MetricField::new(&spec, sts.into_iter().map(|s| s.metric).collect());
        Ok(StructureField { phi, psi, metric })
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn([f64; 7]) -> Tensor7 + Sync) -> Result<Self, FieldError> {
        Self::from_phi(TensorField::from_fn(spec, |_, x| f(x)))
    }

    /// The constant canonical structure.
    pub fn flat(spec: &GridSpec) -> Self {
        Self::from_fn(spec, |_| crate::g2algebra::canonical_phi0()).expect("φ₀ is positive")
    }

    pub fn spec(&self) -> &GridSpec {
        self.phi.spec()
    }

    pub fn num_points(&self) -> usize {
        self.phi.num_points()
    }

    pub fn structure_at(&self, p: usize) -> G2Structure {
        let metric = self.metric.metrics[p].clone();
        // g = (det s)^(-1/9) s gives det s = (det g)^(9/2) and s = √det g · g
        let s = metric.g * metric.sqrt_det;
        let det_s = metric.det().powf(4.5);
        G2Structure { phi: self.phi.at(p), psi: self.psi.at(p), s, det_s, metric }
    }
}

/// Checks that an expression only uses the grid's active coordinates.
pub fn check_active(spec: &GridSpec, e: &Expr) -> Result<(), FieldError> {
    for axis in 0..DIM {
        if spec.slot_of(axis).is_none() && e.uses_coordinate(axis) {
            return Err(FieldError::InactiveAxis { axis: axis + 1 });
        }
    }
    Ok(())
}

pub fn tabulate_scalar(spec: &GridSpec, e: &Expr) -> Result<TensorField, FieldError> {
    check_active(spec, e)?;
    TensorField::try_from_fn(spec, |p, x| {
        e.evaluate(&x).map(Tensor7::scalar).map_err(|source| FieldError::Eval { point: p, source })
    })
}

/// A 1-form field from seven component expressions.
pub fn tabulate_covector(spec: &GridSpec, es: &[Expr]) -> Result<TensorField, FieldError> {
    assert_eq!(es.len(), DIM);
    for e in es {
        check_active(spec, e)?;
    }
    TensorField::try_from_fn(spec, |p, x| {
        let mut v = [0.0; 7];
        for (k, e) in es.iter().enumerate() {
            v[k] = e.evaluate(&x).map_err(|source| FieldError::Eval { point: p, source })?;
        }
        Ok(Tensor7::vector(&v))
    })
}

const MAGIC: &[u8; 4] = b"G2F1";

/// Binary snapshot: magic, rank, variance mask, grid, then row-major little-endian doubles.
pub fn write_snapshot(field: &TensorField, mut w: impl Write) -> Result<(), FieldError> {
    let s = field.spec();
    w.write_all(MAGIC)?;
    w.write_all(&(field.rank as u32).to_le_bytes())?;
    let mask: u32 = field.variance.iter().enumerate().map(|(k, v)| ((*v == Variance::Up) as u32) << k).sum();
    w.write_all(&mask.to_le_bytes())?;
    w.write_all(&(s.active_axes.len() as u32).to_le_bytes())?;
    for (a, per) in s.active_axes.iter().zip(&s.period) {
        w.write_all(&(*a as u32).to_le_bytes())?;
        w.write_all(&per.to_le_bytes())?;
    }
    w.write_all(&(s.points_per_axis as u32).to_le_bytes())?;
    w.write_all(&(s.fd_order as u32).to_le_bytes())?;
    for x in &field.data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> Result<TensorField, FieldError> {
    fn u32_(r: &mut impl Read) -> Result<u32, FieldError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    let magic = u32_(&mut r)?.to_le_bytes();
    if &magic != MAGIC {
        return Err(FieldError::Snapshot("missing G2F1 magic".into()));
    }
    let rank = u32_(&mut r)? as usize;
    if rank > crate::tensor7::MAX_RANK {
        return Err(FieldError::Snapshot(format!("rank {rank} too large")));
    }
    let mask = u32_(&mut r)?;
    let k = u32_(&mut r)? as usize;
    if !(1..=2).contains(&k) {
        return Err(FieldError::Snapshot("bad active-axis count".into()));
    }
    let mut axes = vec![];
    let mut period = vec![];
    for _ in 0..k {
        axes.push(u32_(&mut r)? as usize);
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        period.push(f64::from_le_bytes(b));
    }
    let n = u32_(&mut r)? as usize;
    let order = u32_(&mut r)? as usize;
    let spec = GridSpec { active_axes: axes, points_per_axis: n, period, fd_order: order };
    spec.validate()?;
    let len = spec.num_points() * pow7(rank);
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let variance = (0..rank).map(|k| if mask >> k & 1 == 1 { Variance::Up } else { Variance::Down }).collect();
    Ok(TensorField { spec, rank, variance, data })
}

/// One JSON object per grid point: {"point", "x", "values"}.
pub fn to_json_lines(field: &TensorField) -> String {
    let mut out = String::new();
    for p in 0..field.num_points() {
        let rec = serde_json::json!({
            "point": p,
            "x": field.spec().coords(p),
            "values": field.slice(p),
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}
