//! Achievability of horizon lengths and instance classification.
//!
//! A length `w > 0` is *achievable* when it can be written as a sum of finitely
//! many durations, each in `[ell, r]`. This holds exactly when
//! `ceil(w / r) <= w / ell`; when it fails, the largest achievable length below
//! `w` is `r * floor(w / r)`. The pair `(ell, r)` is in the *good region* when
//! the whole horizon `w = 1` is achievable.
//!
//! Floating-point ratios are snapped to the nearest integer when they are
//! within [`SNAP_TOLERANCE`] of it, so that boundary pairs such as
//! `(0.25, 0.25)` or `(0.3, 0.3)` classify the way exact arithmetic would.

use serde::{Deserialize, Serialize};

use crate::demand::DemandSet;
use crate::error::{Error, Result};

/// Distance below which a ratio is treated as the integer next to it.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// Slack on the proportional ideal test `ell <= A_i / A <= r`.
const RATIO_SLACK: f64 = 1e-12;

pub(crate) fn snap(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() < SNAP_TOLERANCE {
        nearest
    } else {
        x
    }
}

pub(crate) fn snapped_ceil(x: f64) -> f64 {
    snap(x).ceil()
}

pub(crate) fn snapped_floor(x: f64) -> f64 {
    snap(x).floor()
}

fn check_length(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLength(w))
    }
}

/// The malleability bounds: every duration must lie in `[ell, r]`.
///
/// An upper bound above 1 is accepted and kept as [`SystemParams::raw_r`], but
/// all computations use `min(r, 1)` since nothing can run longer than the
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    ell: f64,
    r: f64,
    raw_r: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    ell: f64,
    r: f64,
}

impl TryFrom<RawParams> for SystemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        SystemParams::new(raw.ell, raw.r)
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        RawParams {
            ell: p.ell,
            r: p.raw_r,
        }
    }
}

impl SystemParams {
    pub fn new(ell: f64, r: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParams(format!(
                "ell must be positive and finite, got {ell}"
            )));
        }
        if ell > 1.0 {
            return Err(Error::InvalidParams(format!(
                "ell must not exceed the unit horizon, got {ell}"
            )));
        }
        if r.is_nan() || r < ell {
            return Err(Error::InvalidParams(format!(
                "r must satisfy ell <= r, got ell = {ell}, r = {r}"
            )));
        }
        Ok(Self {
            ell,
            r: r.min(1.0),
            raw_r: r,
        })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Effective upper bound, `min(r, 1)`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// The upper bound as supplied by the caller.
    pub fn raw_r(&self) -> f64 {
        self.raw_r
    }
}

/// Which construction applies to an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Peak `A` is attainable exactly, by stacking or by side-by-side placement.
    Ideal,
    /// The horizon is achievable; `ceil(1/r)` equal slots cover all of it.
    NearIdeal,
    /// The horizon is not achievable; `floor(1/r)` slots of width `r` cover `[0, Z*]`.
    NonIdeal,
}

/// Slot layout used by the slot-filling schedulers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotPlan {
    /// Number of slots.
    pub k0: usize,
    /// Width of each slot.
    pub s0: f64,
    /// Covered horizon length, `k0 * s0`.
    pub z_star: f64,
    pub case: Case,
}

impl SlotPlan {
    fn ideal() -> Self {
        Self {
            k0: 1,
            s0: 1.0,
            z_star: 1.0,
            case: Case::Ideal,
        }
    }

    /// Start time of slot `j`.
    pub fn slot_start(&self, j: usize) -> f64 {
        j as f64 * self.s0
    }
}

/// Whether `w` is a finite sum of durations drawn from `[ell, r]`.
pub fn is_achievable(w: f64, params: &SystemParams) -> Result<bool> {
    check_length(w)?;
    Ok(achievable_unchecked(w, params))
}

fn achievable_unchecked(w: f64, params: &SystemParams) -> bool {
    // At least one piece is always needed, even when w / r snaps to zero.
    let pieces = snapped_ceil(w / params.r()).max(1.0);
    pieces <= snap(w / params.ell())
}

/// Largest achievable length not exceeding `w`; `w` itself when achievable,
/// otherwise `r * floor(w / r)` (zero when `w < ell`).
pub fn largest_achievable(w: f64, params: &SystemParams) -> Result<f64> {
    check_length(w)?;
    if achievable_unchecked(w, params) {
        Ok(w)
    } else {
        Ok(params.r() * snapped_floor(w / params.r()))
    }
}

/// Whether the full horizon `[0, 1]` is achievable.
pub fn good_region(params: &SystemParams) -> bool {
    achievable_unchecked(1.0, params)
}

/// Picks the construction for an instance and lays out its slots.
pub fn classify(params: &SystemParams, demands: &DemandSet) -> Result<SlotPlan> {
    if demands.is_empty() {
        return Err(Error::EmptyInput("demand set"));
    }
    if proportional_fits(params, demands) {
        return Ok(SlotPlan::ideal());
    }
    Ok(slot_plan(params))
}

/// Slot layout determined by `(ell, r)` alone, i.e. without the side-by-side
/// ideal test, which depends on the demands.
pub fn slot_plan(params: &SystemParams) -> SlotPlan {
    if params.r() >= 1.0 {
        return SlotPlan::ideal();
    }
    let r = params.r();
    if good_region(params) {
        let k0 = snapped_ceil(1.0 / r) as usize;
        SlotPlan {
            k0,
            s0: 1.0 / k0 as f64,
            z_star: 1.0,
            case: Case::NearIdeal,
        }
    } else {
        let k0 = snapped_floor(1.0 / r) as usize;
        SlotPlan {
            k0,
            s0: r,
            z_star: r * k0 as f64,
            case: Case::NonIdeal,
        }
    }
}

/// True when every share `A_i / A` is itself a legal duration.
pub(crate) fn proportional_fits(params: &SystemParams, demands: &DemandSet) -> bool {
    let total = demands.total();
    params.ell() <= demands.a_min() / total + RATIO_SLACK
        && demands.a_max() / total <= params.r() + RATIO_SLACK
}

/// Splits an achievable `w` into `ceil(w / r)` equal durations.
pub fn decompose(w: f64, params: &SystemParams) -> Result<Vec<f64>> {
    check_length(w)?;
    if !achievable_unchecked(w, params) {
        return Err(Error::NotAchievable(w));
    }
    let q = snapped_ceil(w / params.r()).max(1.0) as usize;
    Ok(vec![w / q as f64; q])
}
