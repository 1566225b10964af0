//! G₂-structure calculus on a periodic 7-torus.
//!
//! Pointwise algebra lives in [`tensor7`] and [`g2algebra`]; exact integer
//! certificates in [`exact`]; grids and finite differences in [`fields`];
//! torsion and deformations in [`torsion`] and [`deform`].

pub mod deform;
pub mod exact;
pub mod fieldexpr;
pub mod fields;
pub mod g2algebra;
pub mod tensor7;
pub mod torsion;

pub use g2algebra::{G2Structure, NotPositive};
pub use tensor7::{einsum, Mat7, Metric7, Tensor7, Variance};
