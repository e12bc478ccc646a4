//! Cost-benefit appraisal of an operational digital platform (ODP) that
//! coordinates electric vehicle and truck fleets, renewable generation and
//! the distribution grid.
//!
//! The pipeline runs projections, benefit streams and cost schedules into a
//! discounted appraisal, then what-if scenarios, tornado sensitivity and
//! Monte Carlo risk analysis. Input tables and reports live in [`io`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appraisal;
pub mod benefits;
pub mod costs;
pub mod io;
pub mod model;
pub mod monte_carlo;
pub mod projections;
pub mod scenario;
