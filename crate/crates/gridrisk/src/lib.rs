//! Long-horizon tail-risk assessment and mitigation for renewable power systems.
//!
//! The crate simulates how a power system with seasonal energy storage (SES)
//! behaves over year-scale horizons under renewable/load uncertainty, and how
//! bad the tail of that behaviour is:
//!
//! 1. [`system`] — static system description (generators, renewables, storage,
//!    demand response, loads, lines) and DC shift factors for the network.
//! 2. [`scenario`] — multi-timescale Gaussian-copula generation of long
//!    representative renewable/load scenarios from historical records.
//! 3. [`solver`] — embedded bounded-variable simplex and branch-and-bound
//!    kernel that backs every dispatch problem in the crate.
//! 4. [`dispatch`] — long-term storage reference, per-window unit-commitment
//!    MILPs and rolling-horizon evolution of each scenario.
//! 5. [`risk`] — per-period VaR/CVaR over the evolved emergency-supply costs,
//!    high-risk flagging, subgradients and the mitigation loop that reshapes
//!    the storage reference.
//! 6. [`pipeline`] — configuration, CSV ingestion/persistence, manifests and
//!    the command drivers used by the `gridrisk` binary.
//!
//! Each major capability has a runnable example under `examples/`; start with
//! `rolling_dispatch` and `mitigation_loop`.

// Index loops over aligned period/unit matrices read better than iterator
// chains in the dispatch and solver code.
#![allow(clippy::needless_range_loop)]

pub mod dispatch;
pub mod pipeline;
pub mod risk;
pub mod scenario;
pub mod solver;
pub mod system;
