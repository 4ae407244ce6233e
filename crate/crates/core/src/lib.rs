//! Link-level simulation and outage analytics for downlink NOMA with a
//! reconfigurable intelligent surface split into per-user sub-surfaces.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod mc;
pub mod outage;
pub mod partition;
pub mod phy;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod special;
pub mod sweep;

pub use error::{Error, Result};
pub use partition::Partition;
pub use phy::{Placement, SystemConfig};
pub use report::MetricReport;
pub use scenario::Scenario;
