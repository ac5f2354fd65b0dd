//! Numerical workbench for weighted trace and extension operators.
//!
//! Littlewood–Paley norms on periodic boxes, explicit trace/extension operators on the
//! half-space, graph-domain pullbacks with chart atlases, and an implicit Euler heat solver
//! on pulled-back strips that measures the maximal-regularity ratio.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod families;
pub mod geometry;
pub mod grid;
pub mod heat;
pub mod lp;
pub mod params;
pub mod quadrature;
pub mod spaces;
pub mod traceext;

pub use error::{MrError, Result};
pub use grid::{BoundaryField, GridField, TraceVector, C64};
pub use lp::{AnisotropyDescriptor, LpSequence};
pub use params::{AdmissibilityReport, CompatibilityMode, ParamSet};
pub use quadrature::{AxisWeight, WeightSpec};
