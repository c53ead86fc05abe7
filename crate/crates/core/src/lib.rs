//! Peak-power minimization for malleable energy demands.
//!
//! Every demand `A_i` must be supplied without interruption somewhere inside the
//! unit horizon `[0, 1]`, for a duration `s_i` chosen from `[ell, r]`, at constant
//! intensity `A_i / s_i`. The grid power at time `t` is the sum of the intensities
//! of the demands active at `t`, and the goal is to keep its maximum (the peak)
//! as low as possible.
//!
//! The crate is split along the lines of the problem:
//!
//! - [`region`]: which horizon lengths can be tiled by durations from `[ell, r]`,
//!   and how an instance is classified (ideal, near-ideal, non-ideal).
//! - [`demand`]: validated demand sets.
//! - [`scheduler`]: the linear-time slot-filling scheduler, its greedy variant and
//!   the two ideal constructions, plus a feasibility validator.
//! - [`profile`]: exact step-function power profiles, peaks and the
//!   `[A_bar, A_bar + A_max / ell]` optimality bounds.
//! - [`oracle`]: independent verification machinery (enumeration, exhaustive grid
//!   search, fractional fillings).
//! - [`harness`]: demand generation, repeated experiments and CSV/JSON I/O.
//!
//! ```
//! use psp_core::{DemandSet, SystemParams, schedule_psp, certify};
//!
//! let params = SystemParams::new(0.3571, 0.43103).unwrap();
//! let demands = DemandSet::from_energies(&[0.2, 0.1, 0.3, 0.05]).unwrap();
//! let policy = schedule_psp(&demands, &params).unwrap();
//! let cert = certify(&policy, &demands, &params).unwrap();
//! assert!(cert.within);
//! ```

pub mod demand;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod profile;
pub mod region;
pub mod scheduler;

pub use demand::{Demand, DemandSet};
pub use error::{Error, Result};
pub use profile::{
    certify, peak_power, power_profile, stacked_height, theoretical_bounds, BoundCertificate,
    Bounds, StepFunction,
};
pub use region::{
    classify, decompose, good_region, is_achievable, largest_achievable, slot_plan, Case, SlotPlan,
    SystemParams,
};
pub use scheduler::{
    schedule_greedy, schedule_ideal_proportional, schedule_ideal_stack, schedule_psp,
    validate_policy, AlgorithmTag, Assignment, Policy, ValidationReport, Violation,
};

/// Absolute tolerance used for feasibility and bound checks.
pub const TOLERANCE: f64 = 1e-9;
