//! Seasonal power-generation planning toolkit.
//!
//! Two models of the same system sit side by side: a rolling-horizon
//! unit-commitment MILP that tracks binary on/off decisions hour by
//! hour, and a linear monthly dispatch model that trades that detail
//! for speed. Demand enters either as observed history (PF) or as a
//! climatological disaggregation of monthly totals (PFML), and the
//! study harness compares costs and generation by fuel across the four
//! scenario combinations.
//!
//! The narrative guide lives in `book/`; its code snippets are compiled
//! as doc-tests through the [`book`] module.

pub mod esom;
pub mod forecast;
pub mod rolling;
pub mod ucm;
pub mod solver;
pub mod study;
pub mod system;

pub use forecast::{DemandSeries, MonthIndex};
pub use system::{BusId, Fuel, NetworkCase};
