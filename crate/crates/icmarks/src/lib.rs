//! Placement watermarking laboratory.
//!
//! A minimal three-stage VLSI placement stack (global placement, row
//! legalization, detailed placement) plus the ICMarks two-level watermarking
//! scheme, baseline schemes, removal-attack procedures, extraction-rate and
//! statistical-strength calculators, and batch reporting.
//!
//! Coordinates are integers in abstract placement units throughout; the
//! row height is the base unit for vertical displacement, so displacement
//! watermarks extract by exact integer comparison rather than float
//! tolerance.

pub mod attacks;
pub mod baselines;
pub mod bookshelf;
pub mod certificate;
pub mod design;
pub mod dump;
pub mod dw;
pub mod geom;
pub mod gw;
pub mod icmarks;
pub mod metrics;
pub mod placer;
pub mod report;
pub mod rng;
pub mod strength;
pub mod synth;
pub mod textdoc;
pub mod timing;

pub use design::{Cell, CellKind, Design, FenceRegion, Net, Pin, Placement, Row, Stage};
pub use geom::Rect;
