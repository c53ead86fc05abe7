//! Power profiles, peaks and optimality bounds.
//!
//! A demand running on `[tau, tau + s)` at intensity `d` contributes `d` to the
//! grid power on that half-open interval. Using half-open intervals means two
//! demands placed back to back never count as overlapping at their shared
//! endpoint, so the computed peak is the essential supremum of the power
//! signal.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::demand::DemandSet;
use crate::error::{Error, Result};
use crate::region::{classify, good_region, largest_achievable, SystemParams};
use crate::scheduler::{validate_policy, Assignment, Policy, ValidationReport, Violation};
use crate::TOLERANCE;

/// Events closer together than this are merged into one breakpoint.
pub const COALESCE_EPS: f64 = 1e-12;

/// Piecewise-constant function on `[0, 1]`.
///
/// `values[k]` holds on `[breakpoints[k], breakpoints[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Parse(format!(
                "step function needs n + 1 breakpoints for n >= 1 values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::Parse("breakpoints must run from 0 to 1".into()));
        }
        if breakpoints
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::Parse(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parse(
                "values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(start, end, value)` for every segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }

    /// Value at `t` (right-continuous; `t = 1` reads the last segment).
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.values[k.saturating_sub(1).min(self.values.len() - 1)]
    }

    pub fn integral(&self) -> f64 {
        self.segments().map(|(a, b, v)| v * (b - a)).sum()
    }

    /// Writes the `t,power` CSV: one row per breakpoint, the final row at
    /// `t = 1` repeating the last level so that step plots close properly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "power"])?;
        for (t, v) in self.breakpoints.iter().zip(
            self.values
                .iter()
                .chain(std::iter::once(self.values.last().unwrap())),
        ) {
            w.write_record([crate::harness::fmt_sig(*t), crate::harness::fmt_sig(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "power"] {
            return Err(Error::Parse(format!(
                "expected header t,power, got {:?}",
                headers
            )));
        }
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for row in reader.deserialize::<(f64, f64)>() {
            let (t, v) = row?;
            breakpoints.push(t);
            values.push(v);
        }
        values.pop();
        Self::new(breakpoints, values)
    }
}

/// Sweeps the `2n` start/end events of a policy into its power profile.
///
/// Fails if an assignment is non-finite, has a non-positive duration or leaves
/// `[0, 1]`.
pub fn power_profile(policy: &Policy) -> Result<StepFunction> {
    let mut events = Vec::with_capacity(2 * policy.len());
    for a in &policy.assignments {
        if let Some(v) = structural_violation(a) {
            return Err(Error::Infeasible(ValidationReport {
                violations: vec![v],
            }));
        }
        events.push((a.tau.clamp(0.0, 1.0), a.d, 1i64));
        events.push((a.end().clamp(0.0, 1.0), -a.d, -1i64));
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut breakpoints = vec![0.0];
    let mut values = Vec::new();
    let mut level = 0.0;
    let mut active = 0i64;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        if t - breakpoints.last().unwrap() >= COALESCE_EPS {
            values.push(level);
            breakpoints.push(t);
        }
        // Merge every event within COALESCE_EPS of the group's first time.
        while i < events.len() && events[i].0 - t < COALESCE_EPS {
            level += events[i].1;
            active += events[i].2;
            i += 1;
        }
        if active == 0 {
            level = 0.0;
        }
        level = level.max(0.0);
    }
    if 1.0 - breakpoints.last().unwrap() >= COALESCE_EPS {
        values.push(level);
        breakpoints.push(1.0);
    } else if values.is_empty() {
        return Ok(StepFunction::constant(0.0));
    } else {
        *breakpoints.last_mut().unwrap() = 1.0;
    }
    Ok(StepFunction {
        breakpoints,
        values,
    })
}

fn structural_violation(a: &Assignment) -> Option<Violation> {
    let id = a.demand_id;
    if !(a.tau.is_finite() && a.s.is_finite() && a.d.is_finite()) || a.s <= 0.0 || a.d < 0.0 {
        Some(Violation::NonFinite { id })
    } else if a.tau < -TOLERANCE {
        Some(Violation::StartsBeforeHorizon { id, tau: a.tau })
    } else if a.end() > 1.0 + TOLERANCE {
        Some(Violation::EndsAfterHorizon { id, end: a.end() })
    } else {
        None
    }
}

/// Maximum level of the profile.
pub fn peak_power(f: &StepFunction) -> f64 {
    f.values.iter().cloned().fold(0.0, f64::max)
}

/// Height of the tallest slot when demands are stacked per slot, i.e. the
/// traditional strip-packing height of a slot-structured policy.
pub fn stacked_height(policy: &Policy) -> Result<f64> {
    let mut loads: BTreeMap<usize, f64> = BTreeMap::new();
    for a in &policy.assignments {
        let slot = a.slot_index.ok_or_else(|| {
            Error::UnsupportedStructure(format!(
                "demand {} has no slot; stacked height needs a slot-structured policy",
                a.demand_id
            ))
        })?;
        *loads.entry(slot).or_default() += a.d;
    }
    Ok(loads.values().cloned().fold(0.0, f64::max))
}

/// The optimality window for an instance: the optimal peak lies in
/// `[a_bar, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// `A` in the good region, `A / Z*` outside it.
    pub a_bar: f64,
    /// `a_bar + A_max / ell`.
    pub upper: f64,
    /// `a_bar + A_max / s0`, the per-slot bound of the slot-filling schedulers
    /// (never above `upper`).
    pub slot_upper: f64,
}

impl Bounds {
    pub fn certify_peak(self, achieved_peak: f64) -> BoundCertificate {
        BoundCertificate {
            a_bar: self.a_bar,
            upper: self.upper,
            achieved_peak,
            within: achieved_peak <= self.upper + TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub a_bar: f64,
    pub upper: f64,
    pub achieved_peak: f64,
    /// `achieved_peak <= upper` up to [`TOLERANCE`].
    pub within: bool,
}

pub fn theoretical_bounds(demands: &DemandSet, params: &SystemParams) -> Result<Bounds> {
    let total = demands.total();
    let a_bar = if good_region(params) {
        total
    } else {
        total / largest_achievable(1.0, params)?
    };
    let plan = classify(params, demands)?;
    Ok(Bounds {
        a_bar,
        upper: a_bar + demands.a_max() / params.ell(),
        slot_upper: a_bar + demands.a_max() / plan.s0,
    })
}

/// Checks feasibility, computes the achieved peak and compares it with the
/// upper bound.
pub fn certify(
    policy: &Policy,
    demands: &DemandSet,
    params: &SystemParams,
) -> Result<BoundCertificate> {
    let report = validate_policy(policy, demands, params);
    if !report.is_feasible() {
        return Err(Error::Infeasible(report));
    }
    let peak = peak_power(&power_profile(policy)?);
    Ok(theoretical_bounds(demands, params)?.certify_peak(peak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{Case, SlotPlan};
    use crate::scheduler::{schedule_ideal_stack, schedule_psp, AlgorithmTag};
    use approx::assert_abs_diff_eq;

    fn p(ell: f64, r: f64) -> SystemParams {
        SystemParams::new(ell, r).unwrap()
    }

    fn plan() -> SlotPlan {
        SlotPlan {
            k0: 1,
            s0: 1.0,
            z_star: 1.0,
            case: Case::Ideal,
        }
    }

    fn free_policy(rects: &[(f64, f64, f64)]) -> Policy {
        Policy::custom(
            rects
                .iter()
                .enumerate()
                .map(|(i, &(tau, s, d))| Assignment {
                    demand_id: i as u64 + 1,
                    tau,
                    s,
                    d,
                    slot_index: None,
                })
                .collect(),
            plan(),
            AlgorithmTag::PspFill,
        )
    }

    #[test]
    fn overlapping_pair() {
        let f = power_profile(&free_policy(&[(0.0, 0.5, 2.0), (0.25, 0.5, 2.0)])).unwrap();
        assert_eq!(f.breakpoints(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(f.values(), &[2.0, 4.0, 2.0, 0.0]);
        assert_eq!(peak_power(&f), 4.0);
        assert_abs_diff_eq!(f.integral(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_and_empty() {
        let f = power_profile(&free_policy(&[(0.0, 1.0, 3.5)])).unwrap();
        assert_eq!(f, StepFunction::constant(3.5));
        assert_eq!(peak_power(&f), 3.5);

        let f = power_profile(&free_policy(&[])).unwrap();
        assert_eq!(f, StepFunction::constant(0.0));
        assert_eq!(peak_power(&f), 0.0);
    }

    #[test]
    fn back_to_back_does_not_double_count() {
        let f = power_profile(&free_policy(&[
            (0.0, 0.3, 10.0),
            (0.3, 0.3, 10.0),
            (0.6, 0.4, 10.0),
        ]))
        .unwrap();
        assert_eq!(peak_power(&f), 10.0);
        // 0.3 + 0.3 is not exactly 0.6 in binary; the tiny sliver is merged.
        let f = power_profile(&free_policy(&[(0.0, 0.1 + 0.2, 1.0), (0.3, 0.7, 1.0)])).unwrap();
        assert_eq!(peak_power(&f), 1.0);
    }

    #[test]
    fn profile_rejects_out_of_horizon() {
        assert!(matches!(
            power_profile(&free_policy(&[(0.8, 0.4, 1.0)])),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            power_profile(&free_policy(&[(f64::NAN, 0.4, 1.0)])),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn value_lookup() {
        let f = power_profile(&free_policy(&[(0.0, 0.5, 2.0), (0.25, 0.5, 2.0)])).unwrap();
        assert_eq!(f.value_at(0.0), 2.0);
        assert_eq!(f.value_at(0.25), 4.0);
        assert_eq!(f.value_at(0.8), 0.0);
        assert_eq!(f.value_at(1.0), 0.0);
    }

    #[test]
    fn stacked_heights() {
        let params = p(0.4, 0.5);
        let demands = DemandSet::from_energies(&[1.0, 1.0, 1.0]).unwrap();
        let policy = schedule_psp(&demands, &params).unwrap();
        let peak = peak_power(&power_profile(&policy).unwrap());
        assert_eq!(stacked_height(&policy).unwrap(), 4.0);
        assert_eq!(peak, 4.0);

        let demands = DemandSet::from_energies(&[2.0, 3.0, 5.0]).unwrap();
        let stack = schedule_ideal_stack(&demands, &p(0.5, 1.0)).unwrap();
        assert_eq!(stacked_height(&stack).unwrap(), 10.0);

        let one = schedule_psp(&DemandSet::from_energies(&[1.0]).unwrap(), &params).unwrap();
        assert_eq!(stacked_height(&one).unwrap(), 2.0);

        assert!(matches!(
            stacked_height(&free_policy(&[(0.0, 1.0, 1.0)])),
            Err(Error::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn bounds_examples() {
        // Non-ideal pair: Z* = 2 * 0.43103.
        let demands = DemandSet::from_energies(&[1.0, 1.0, 1.0]).unwrap();
        let b = theoretical_bounds(&demands, &p(0.3571, 0.43103)).unwrap();
        assert_abs_diff_eq!(b.a_bar, 3.0 / 0.86206, epsilon = 1e-12);
        assert_abs_diff_eq!(b.a_bar, 3.480036192376401, epsilon = 1e-12);
        assert_abs_diff_eq!(b.upper, 3.480036192376401 + 1.0 / 0.3571, epsilon = 1e-12);
        assert_abs_diff_eq!(
            b.slot_upper,
            3.480036192376401 + 1.0 / 0.43103,
            epsilon = 1e-12
        );

        let b = theoretical_bounds(&demands, &p(0.4, 0.5)).unwrap();
        assert_eq!(b.a_bar, 3.0);
        assert_eq!(b.upper, 5.5);

        let one = DemandSet::from_energies(&[1.0]).unwrap();
        let b = theoretical_bounds(&one, &p(1.0, 1.0)).unwrap();
        assert_eq!((b.a_bar, b.upper), (1.0, 2.0));
    }

    #[test]
    fn certify_examples() {
        let params = p(0.3571, 0.43103);
        let demands = DemandSet::from_energies(&[0.3, 0.1, 0.25, 0.05, 0.2, 0.33]).unwrap();
        let cert = certify(&schedule_psp(&demands, &params).unwrap(), &demands, &params).unwrap();
        assert!(cert.within);
        assert!(cert.achieved_peak <= cert.upper);

        let params = p(0.5, 1.0);
        let demands = DemandSet::from_energies(&[2.0, 3.0, 5.0]).unwrap();
        let stack = schedule_ideal_stack(&demands, &params).unwrap();
        let cert = certify(&stack, &demands, &params).unwrap();
        assert_eq!(cert.achieved_peak, 10.0);
        assert_eq!(cert.a_bar, 10.0);
        assert!(cert.within);
    }

    #[test]
    fn certify_reports_bad_policy() {
        // Everything piled up at t = 0 with the shortest legal duration.
        let params = p(0.4, 0.5);
        let demands = DemandSet::from_energies(&[1.0; 6]).unwrap();
        let rects: Vec<_> = (0..6).map(|_| (0.0, 0.4, 1.0 / 0.4)).collect();
        let pile = free_policy(&rects);
        let cert = certify(&pile, &demands, &params).unwrap();
        assert_abs_diff_eq!(cert.achieved_peak, 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.upper, 6.0 + 2.5, epsilon = 1e-12);
        assert!(!cert.within);

        let mut broken = pile;
        broken.assignments[0].tau = 0.9;
        assert!(matches!(
            certify(&broken, &demands, &params),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let f = power_profile(&free_policy(&[(0.0, 0.5, 2.0), (0.25, 0.5, 2.0)])).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "t,power\n0,2\n0.25,4\n0.5,2\n0.75,0\n1,0\n");
        assert_eq!(StepFunction::read_csv(buf.as_slice()).unwrap(), f);
    }
}
