//! Scheduling policies.
//!
//! Four constructions are provided:
//!
//! - [`schedule_ideal_stack`]: every demand runs over the whole horizon (needs `r >= 1`).
//! - [`schedule_ideal_proportional`]: demands placed side by side with `s_i = A_i / A`.
//! - [`schedule_psp`]: the linear-time slot filler. Slots are filled in order and a
//!   slot is closed once its load reaches `A / Z*`.
//! - [`schedule_greedy`]: demands in non-increasing energy order, each into the
//!   currently lightest slot.
//!
//! Slot-filling policies give every demand the slot width `s0` as its duration,
//! so a demand in slot `j` runs on `[j * s0, (j + 1) * s0)` at intensity `A_i / s0`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::demand::DemandSet;
use crate::error::{Error, Result};
use crate::region::{classify, proportional_fits, Case, SlotPlan, SystemParams};
use crate::TOLERANCE;

/// Placement of one demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(rename = "id")]
    pub demand_id: u64,
    /// Start time.
    pub tau: f64,
    /// Duration.
    pub s: f64,
    /// Power intensity, `energy / s`.
    pub d: f64,
    /// Slot (column) the demand was stacked into, when the policy has slots.
    #[serde(rename = "slot")]
    pub slot_index: Option<usize>,
}

impl Assignment {
    pub fn end(&self) -> f64 {
        self.tau + self.s
    }

    pub fn energy(&self) -> f64 {
        self.d * self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmTag {
    IdealStack,
    IdealProportional,
    PspFill,
    Greedy,
}

impl fmt::Display for AlgorithmTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AlgorithmTag::IdealStack => "ideal_stack",
            AlgorithmTag::IdealProportional => "ideal_proportional",
            AlgorithmTag::PspFill => "psp_fill",
            AlgorithmTag::Greedy => "greedy",
        };
        f.write_str(name)
    }
}

/// A scheduling policy: one assignment per demand, in demand order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub assignments: Vec<Assignment>,
    pub plan: SlotPlan,
    pub algorithm: AlgorithmTag,
}

impl Policy {
    /// Builds a policy from hand-made assignments, e.g. for validation or
    /// certification of an externally produced schedule.
    pub fn custom(assignments: Vec<Assignment>, plan: SlotPlan, algorithm: AlgorithmTag) -> Self {
        Self {
            assignments,
            plan,
            algorithm,
        }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

pub fn schedule_ideal_stack(demands: &DemandSet, params: &SystemParams) -> Result<Policy> {
    if params.r() < 1.0 {
        return Err(Error::CaseMismatch {
            construction: "ideal stacking",
            reason: format!("requires r >= 1, got r = {}", params.raw_r()),
        });
    }
    let assignments = demands
        .iter()
        .map(|d| Assignment {
            demand_id: d.id,
            tau: 0.0,
            s: 1.0,
            d: d.energy,
            slot_index: Some(0),
        })
        .collect();
    Ok(Policy {
        assignments,
        plan: ideal_plan(),
        algorithm: AlgorithmTag::IdealStack,
    })
}

pub fn schedule_ideal_proportional(demands: &DemandSet, params: &SystemParams) -> Result<Policy> {
    if !proportional_fits(params, demands) {
        return Err(Error::CaseMismatch {
            construction: "side-by-side placement",
            reason: format!(
                "shares A_i/A span [{}, {}], outside [{}, {}]",
                demands.a_min() / demands.total(),
                demands.a_max() / demands.total(),
                params.ell(),
                params.r()
            ),
        });
    }
    let total = demands.total();
    let mut tau = 0.0;
    let assignments = demands
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let s = d.energy / total;
            let a = Assignment {
                demand_id: d.id,
                tau,
                s,
                d: d.energy / s,
                slot_index: Some(i),
            };
            tau += s;
            a
        })
        .collect();
    Ok(Policy {
        assignments,
        plan: ideal_plan(),
        algorithm: AlgorithmTag::IdealProportional,
    })
}

fn ideal_plan() -> SlotPlan {
    SlotPlan {
        k0: 1,
        s0: 1.0,
        z_star: 1.0,
        case: Case::Ideal,
    }
}

fn schedule_ideal(demands: &DemandSet, params: &SystemParams) -> Result<Policy> {
    if params.r() >= 1.0 {
        schedule_ideal_stack(demands, params)
    } else {
        schedule_ideal_proportional(demands, params)
    }
}

fn slot_assignment(plan: &SlotPlan, id: u64, energy: f64, slot: usize) -> Assignment {
    Assignment {
        demand_id: id,
        tau: plan.slot_start(slot),
        s: plan.s0,
        d: energy / plan.s0,
        slot_index: Some(slot),
    }
}

/// Linear-time slot filler.
///
/// Demands are taken in input order. Each goes into the current slot; once the
/// slot's load is at least `A / Z*` the next demand opens the following slot.
/// The last slot takes whatever remains.
pub fn schedule_psp(demands: &DemandSet, params: &SystemParams) -> Result<Policy> {
    let plan = classify(params, demands)?;
    if plan.case == Case::Ideal {
        return schedule_ideal(demands, params);
    }
    let threshold = demands.total() / plan.z_star;
    let last = plan.k0 - 1;
    let mut slot = 0;
    let mut load = 0.0;
    let mut assignments = Vec::with_capacity(demands.len());
    for d in demands.iter() {
        let a = slot_assignment(&plan, d.id, d.energy, slot);
        load += a.d;
        assignments.push(a);
        if load >= threshold && slot < last {
            slot += 1;
            load = 0.0;
        }
    }
    Ok(Policy {
        assignments,
        plan,
        algorithm: AlgorithmTag::PspFill,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SlotLoad {
    load: f64,
    index: usize,
}

impl Eq for SlotLoad {}

impl Ord for SlotLoad {
    fn cmp(&self, other: &Self) -> Ordering {
        self.load
            .total_cmp(&other.load)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for SlotLoad {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy variant: largest energy first (ties by ascending id), always into the
/// least loaded slot (ties by lowest index). `O(n log n)`.
pub fn schedule_greedy(demands: &DemandSet, params: &SystemParams) -> Result<Policy> {
    let plan = classify(params, demands)?;
    if plan.case == Case::Ideal {
        return schedule_ideal(demands, params);
    }
    let all = demands.demands();
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| {
        all[b]
            .energy
            .total_cmp(&all[a].energy)
            .then(all[a].id.cmp(&all[b].id))
    });

    let mut heap: BinaryHeap<Reverse<SlotLoad>> = (0..plan.k0)
        .map(|index| Reverse(SlotLoad { load: 0.0, index }))
        .collect();
    let mut placed: Vec<Option<Assignment>> = vec![None; all.len()];
    for i in order {
        let Reverse(mut lightest) = heap.pop().expect("k0 >= 1");
        let a = slot_assignment(&plan, all[i].id, all[i].energy, lightest.index);
        lightest.load += a.d;
        heap.push(Reverse(lightest));
        placed[i] = Some(a);
    }
    Ok(Policy {
        assignments: placed.into_iter().map(|a| a.expect("placed")).collect(),
        plan,
        algorithm: AlgorithmTag::Greedy,
    })
}

/// A single broken constraint found by [`validate_policy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Non-finite numbers, or a non-positive duration or negative intensity.
    NonFinite {
        id: u64,
    },
    StartsBeforeHorizon {
        id: u64,
        tau: f64,
    },
    EndsAfterHorizon {
        id: u64,
        end: f64,
    },
    DurationTooShort {
        id: u64,
        s: f64,
        ell: f64,
    },
    DurationTooLong {
        id: u64,
        s: f64,
        r: f64,
    },
    EnergyMismatch {
        id: u64,
        expected: f64,
        delivered: f64,
    },
    MissingDemand {
        id: u64,
    },
    DuplicateAssignment {
        id: u64,
    },
    UnknownDemand {
        id: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { id } => write!(f, "demand {id}: non-finite placement"),
            Violation::StartsBeforeHorizon { id, tau } => {
                write!(f, "demand {id}: starts at {tau} < 0")
            }
            Violation::EndsAfterHorizon { id, end } => write!(f, "demand {id}: ends at {end} > 1"),
            Violation::DurationTooShort { id, s, ell } => {
                write!(f, "demand {id}: duration {s} < ell = {ell}")
            }
            Violation::DurationTooLong { id, s, r } => {
                write!(f, "demand {id}: duration {s} > r = {r}")
            }
            Violation::EnergyMismatch {
                id,
                expected,
                delivered,
            } => write!(f, "demand {id}: delivers {delivered}, needs {expected}"),
            Violation::MissingDemand { id } => write!(f, "demand {id}: not scheduled"),
            Violation::DuplicateAssignment { id } => write!(f, "demand {id}: scheduled twice"),
            Violation::UnknownDemand { id } => write!(f, "demand {id}: not in the demand set"),
        }
    }
}

/// Outcome of [`validate_policy`]; empty means feasible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violations.as_slice() {
            [] => f.write_str("feasible"),
            [first, rest @ ..] => {
                write!(f, "{first}")?;
                if !rest.is_empty() {
                    write!(f, " (and {} more)", rest.len())?;
                }
                Ok(())
            }
        }
    }
}

/// Checks a policy against the horizon, the duration bounds and energy
/// conservation, and that every demand is scheduled exactly once.
pub fn validate_policy(
    policy: &Policy,
    demands: &DemandSet,
    params: &SystemParams,
) -> ValidationReport {
    let energy_by_id: HashMap<u64, f64> = demands.iter().map(|d| (d.id, d.energy)).collect();
    let mut seen: HashMap<u64, usize> = HashMap::with_capacity(demands.len());
    let mut violations = Vec::new();

    for a in &policy.assignments {
        let id = a.demand_id;
        *seen.entry(id).or_default() += 1;
        if seen[&id] == 2 {
            violations.push(Violation::DuplicateAssignment { id });
        }
        if !(a.tau.is_finite() && a.s.is_finite() && a.d.is_finite()) {
            violations.push(Violation::NonFinite { id });
            continue;
        }
        if a.tau < -TOLERANCE {
            violations.push(Violation::StartsBeforeHorizon { id, tau: a.tau });
        }
        if a.end() > 1.0 + TOLERANCE {
            violations.push(Violation::EndsAfterHorizon { id, end: a.end() });
        }
        if a.s < params.ell() - TOLERANCE {
            violations.push(Violation::DurationTooShort {
                id,
                s: a.s,
                ell: params.ell(),
            });
        }
        if a.s > params.r() + TOLERANCE {
            violations.push(Violation::DurationTooLong {
                id,
                s: a.s,
                r: params.r(),
            });
        }
        match energy_by_id.get(&id) {
            Some(&expected) => {
                let delivered = a.energy();
                if (delivered - expected).abs() > TOLERANCE * expected.abs().max(1.0) {
                    violations.push(Violation::EnergyMismatch {
                        id,
                        expected,
                        delivered,
                    });
                }
            }
            None => violations.push(Violation::UnknownDemand { id }),
        }
    }
    for d in demands.iter() {
        if !seen.contains_key(&d.id) {
            violations.push(Violation::MissingDemand { id: d.id });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(ell: f64, r: f64) -> SystemParams {
        SystemParams::new(ell, r).unwrap()
    }

    fn set(energies: &[f64]) -> DemandSet {
        DemandSet::from_energies(energies).unwrap()
    }

    fn slot_loads(policy: &Policy) -> Vec<f64> {
        let mut loads = vec![0.0; policy.plan.k0];
        for a in &policy.assignments {
            loads[a.slot_index.unwrap()] += a.d;
        }
        loads
    }

    fn slots(policy: &Policy) -> Vec<usize> {
        policy
            .assignments
            .iter()
            .map(|a| a.slot_index.unwrap())
            .collect()
    }

    #[test]
    fn ideal_stack() {
        let demands = set(&[2.0, 3.0, 5.0]);
        let policy = schedule_ideal_stack(&demands, &p(0.5, 1.0)).unwrap();
        for (a, d) in policy.assignments.iter().zip(demands.iter()) {
            assert_eq!((a.tau, a.s, a.d), (0.0, 1.0, d.energy));
        }
        let single = schedule_ideal_stack(&set(&[1.0]), &p(0.2, 5.0)).unwrap();
        assert_eq!(
            (
                single.assignments[0].tau,
                single.assignments[0].s,
                single.assignments[0].d
            ),
            (0.0, 1.0, 1.0)
        );
        assert!(schedule_ideal_stack(&demands, &p(1.0, 1.0)).is_ok());
        assert!(matches!(
            schedule_ideal_stack(&demands, &p(0.5, 0.9)),
            Err(Error::CaseMismatch { .. })
        ));
    }

    #[test]
    fn ideal_proportional() {
        let demands = set(&[3.0, 3.0, 4.0]);
        let policy = schedule_ideal_proportional(&demands, &p(0.2, 0.5)).unwrap();
        let expected = [(0.0, 0.3), (0.3, 0.3), (0.6, 0.4)];
        for (a, (tau, s)) in policy.assignments.iter().zip(expected) {
            assert_abs_diff_eq!(a.tau, tau, epsilon = 1e-12);
            assert_abs_diff_eq!(a.s, s, epsilon = 1e-12);
            assert_abs_diff_eq!(a.d, 10.0, epsilon = 1e-12);
        }

        let policy = schedule_ideal_proportional(&set(&[5.0, 5.0]), &p(0.5, 0.5)).unwrap();
        assert_eq!(policy.assignments[1].tau, 0.5);
        assert_eq!(policy.assignments[1].d, 10.0);

        assert!(matches!(
            schedule_ideal_proportional(&demands, &p(0.35, 0.5)),
            Err(Error::CaseMismatch { .. })
        ));
    }

    #[test]
    fn psp_near_ideal_hand_simulation() {
        let policy = schedule_psp(&set(&[1.0, 1.0, 1.0]), &p(0.4, 0.5)).unwrap();
        assert_eq!(policy.plan.case, Case::NearIdeal);
        assert_eq!(policy.algorithm, AlgorithmTag::PspFill);
        assert_eq!(slots(&policy), vec![0, 0, 1]);
        assert_eq!(slot_loads(&policy), vec![4.0, 2.0]);
        assert_eq!(policy.assignments[2].tau, 0.5);

        let policy = schedule_psp(&set(&[2.0, 1.0, 1.0]), &p(0.4, 0.5)).unwrap();
        assert_eq!(slots(&policy), vec![0, 1, 1]);
        assert_eq!(slot_loads(&policy), vec![4.0, 4.0]);
    }

    #[test]
    fn psp_single_non_ideal() {
        let policy = schedule_psp(&set(&[1.0]), &p(0.3571, 0.43103)).unwrap();
        assert_eq!(policy.plan.case, Case::NonIdeal);
        let a = policy.assignments[0];
        assert_eq!((a.tau, a.s, a.slot_index), (0.0, 0.43103, Some(0)));
        assert_abs_diff_eq!(a.d, 1.0 / 0.43103, epsilon = 1e-12);
    }

    #[test]
    fn psp_ideal_delegation_prefers_stack() {
        let demands = set(&[3.0, 3.0, 4.0]);
        let policy = schedule_psp(&demands, &p(0.2, 1.0)).unwrap();
        assert_eq!(policy.algorithm, AlgorithmTag::IdealStack);
        let policy = schedule_psp(&demands, &p(0.2, 0.5)).unwrap();
        assert_eq!(policy.algorithm, AlgorithmTag::IdealProportional);
        let policy = schedule_greedy(&demands, &p(0.2, 0.5)).unwrap();
        assert_eq!(policy.algorithm, AlgorithmTag::IdealProportional);
    }

    #[test]
    fn psp_fewer_demands_than_slots() {
        // k0 = 10 slots, two demands: trailing slots stay empty.
        let policy = schedule_psp(&set(&[1.0, 1.0]), &p(0.09, 0.1)).unwrap();
        assert_eq!(policy.plan.k0, 10);
        assert_eq!(slots(&policy), vec![0, 1]);
    }

    #[test]
    fn greedy_hand_simulations() {
        let policy = schedule_greedy(&set(&[2.0, 1.0, 1.0]), &p(0.4, 0.5)).unwrap();
        assert_eq!(slots(&policy), vec![0, 1, 1]);
        assert_eq!(slot_loads(&policy), vec![4.0, 4.0]);

        let policy = schedule_greedy(&set(&[4.0, 1.0, 1.0, 1.0, 1.0]), &p(0.4, 0.5)).unwrap();
        assert_eq!(slot_loads(&policy), vec![8.0, 8.0]);
        assert_eq!(policy.algorithm, AlgorithmTag::Greedy);
    }

    #[test]
    fn greedy_balances_equal_demands() {
        // k0 = ceil(1 / 0.3) = 4 slots, 10 equal demands.
        let policy = schedule_greedy(&set(&[1.0; 10]), &p(0.25, 0.3)).unwrap();
        assert_eq!(policy.plan.k0, 4);
        let loads = slot_loads(&policy);
        let height = 1.0 / policy.plan.s0;
        let spread = loads.iter().cloned().fold(f64::MIN, f64::max)
            - loads.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= height + 1e-12);
        // Ties go to the lowest slot index, so the first four land in slots 0..4.
        assert_eq!(&slots(&policy)[..4], &[0, 1, 2, 3]);
    }

    #[test]
    fn validation_catches_each_violation() {
        let params = p(0.4, 0.5);
        let demands = set(&[1.0, 1.0]);
        let policy = schedule_psp(&demands, &params).unwrap();
        assert!(validate_policy(&policy, &demands, &params).is_feasible());

        let mut short = policy.clone();
        short.assignments[0].s = 0.3;
        short.assignments[0].d = 1.0 / 0.3;
        let report = validate_policy(&short, &demands, &params);
        assert_eq!(
            report.violations,
            vec![Violation::DurationTooShort {
                id: 1,
                s: 0.3,
                ell: 0.4
            }]
        );

        let mut late = policy.clone();
        late.assignments[1].tau = 0.7;
        let report = validate_policy(&late, &demands, &params);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::EndsAfterHorizon { id: 2, .. }
        ));

        let mut wrong_energy = policy.clone();
        wrong_energy.assignments[0].d *= 2.0;
        assert!(matches!(
            validate_policy(&wrong_energy, &demands, &params).violations[..],
            [Violation::EnergyMismatch { id: 1, .. }]
        ));

        let mut dup = policy.clone();
        dup.assignments[1].demand_id = 1;
        let report = validate_policy(&dup, &demands, &params);
        assert!(report
            .violations
            .contains(&Violation::DuplicateAssignment { id: 1 }));
        assert!(report
            .violations
            .contains(&Violation::MissingDemand { id: 2 }));

        let mut unknown = policy;
        unknown.assignments[0].demand_id = 99;
        let report = validate_policy(&unknown, &demands, &params);
        assert!(report
            .violations
            .contains(&Violation::UnknownDemand { id: 99 }));
    }

    #[test]
    fn policy_json_shape() {
        let policy = schedule_psp(&set(&[1.0]), &p(0.4, 0.5)).unwrap();
        let json = serde_json::to_string(&policy.assignments).unwrap();
        assert_eq!(json, r#"[{"id":1,"tau":0.0,"s":0.5,"d":2.0,"slot":0}]"#);
    }
}
