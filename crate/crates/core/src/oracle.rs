//! Independent verification machinery.
//!
//! Nothing here is on the production scheduling path. Each routine reaches its
//! answer by a different route than the code it is used to check:
//!
//! - [`achievable_by_search`] enumerates piece counts instead of using the
//!   ceiling criterion.
//! - [`brute_force_peak`] exhaustively searches a discretized policy space for
//!   tiny instances.
//! - [`build_filling`] / [`verify_filling`] construct fractional row packings of
//!   thin slices and check their row structure.
//! - [`fractional_lower_bound`] derives the peak lower bound from an enumerated
//!   largest coverable horizon.

use serde::{Deserialize, Serialize};

use crate::demand::DemandSet;
use crate::error::{Error, Result};
use crate::region::SystemParams;

/// Relative slack for enumeration comparisons.
const SEARCH_SLACK: f64 = 1e-12;
/// Geometric slack for overlap and coverage tests.
const GEOM_EPS: f64 = 1e-12;
/// Hard cap on instance size for the exhaustive search.
pub const MAX_BRUTE_FORCE_N: usize = 4;

/// True iff some integer `q` in `1..=ceil(w / ell)` has `ell <= w / q <= r`.
pub fn achievable_by_search(w: f64, params: &SystemParams) -> bool {
    if !(w.is_finite() && w > 0.0) {
        return false;
    }
    let (ell, r) = (params.ell(), params.r());
    let max_q = (w / ell).ceil() as u64 + 1;
    (1..=max_q).any(|q| {
        let piece = w / q as f64;
        piece >= ell * (1.0 - SEARCH_SLACK) && piece <= r * (1.0 + SEARCH_SLACK)
    })
}

/// Largest length in `(0, 1]` coverable by durations from `[ell, r]`, found by
/// scanning piece counts: `q` pieces cover exactly `[q * ell, q * r]`.
pub fn coverable_horizon(params: &SystemParams) -> f64 {
    let (ell, r) = (params.ell(), params.r());
    let mut best: f64 = 0.0;
    let mut q = 1u64;
    while q as f64 * ell <= 1.0 + SEARCH_SLACK {
        let reach = q as f64 * r;
        if reach >= 1.0 - SEARCH_SLACK * q as f64 {
            return 1.0;
        }
        best = best.max(reach);
        q += 1;
    }
    best
}

/// Lower bound on the optimal peak: total energy spread over the largest
/// coverable horizon.
pub fn fractional_lower_bound(demands: &DemandSet, params: &SystemParams) -> f64 {
    demands.total() / coverable_horizon(params)
}

/// Discretization of the policy space for [`brute_force_peak`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchConfig {
    pub tau_step: f64,
    pub s_step: f64,
    pub max_n: usize,
    /// Durations added to the grid (kept only when inside `[ell, r]`).
    #[serde(default)]
    pub extra_durations: Vec<f64>,
    /// Start times added to the grid for every duration they fit.
    #[serde(default)]
    pub extra_starts: Vec<f64>,
}

impl GridSearchConfig {
    pub fn new(tau_step: f64, s_step: f64) -> Result<Self> {
        let cfg = Self {
            tau_step,
            s_step,
            max_n: MAX_BRUTE_FORCE_N,
            extra_durations: Vec::new(),
            extra_starts: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_extra_points(mut self, durations: Vec<f64>, starts: Vec<f64>) -> Self {
        self.extra_durations = durations;
        self.extra_starts = starts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, step) in [("tau_step", self.tau_step), ("s_step", self.s_step)] {
            if !(step.is_finite() && step > 0.0 && step <= 1.0) {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be in (0, 1], got {step}"
                )));
            }
        }
        if self.max_n == 0 || self.max_n > MAX_BRUTE_FORCE_N {
            return Err(Error::InvalidGrid(format!(
                "max_n must be in 1..={MAX_BRUTE_FORCE_N}, got {}",
                self.max_n
            )));
        }
        Ok(())
    }
}

/// Result of [`brute_force_peak`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceOutcome {
    /// Minimum peak over every grid policy.
    pub peak: f64,
    /// Budget for how far the grid optimum may sit above the continuous one,
    /// `A_max * s_step / ell^2` plus `tau_step` worth of slack.
    pub grid_error: f64,
    /// Number of (partial) placements evaluated.
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    tau: f64,
    s: f64,
}

fn grid(from: f64, to: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = ((to - from) / step + GEOM_EPS).floor() as usize;
    (0..=count).map(move |k| from + k as f64 * step)
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < GEOM_EPS);
    xs
}

fn candidate_placements(params: &SystemParams, cfg: &GridSearchConfig) -> Vec<Slot> {
    let (ell, r) = (params.ell(), params.r());
    let mut durations: Vec<f64> = grid(ell, r, cfg.s_step).collect();
    durations.push(r);
    durations.extend(
        cfg.extra_durations
            .iter()
            .copied()
            .filter(|&s| s >= ell - GEOM_EPS && s <= r + GEOM_EPS),
    );
    let durations = sorted_unique(durations);

    let mut out = Vec::new();
    // Widest first: low intensities make good incumbents early.
    for &s in durations.iter().rev() {
        let latest = 1.0 - s;
        let mut starts: Vec<f64> = grid(0.0, latest.max(0.0), cfg.tau_step).collect();
        starts.push(latest.max(0.0));
        starts.extend(
            cfg.extra_starts
                .iter()
                .copied()
                .filter(|&t| t >= 0.0 && t + s <= 1.0 + GEOM_EPS),
        );
        out.extend(sorted_unique(starts).into_iter().map(|tau| Slot { tau, s }));
    }
    out
}

struct Search<'a> {
    energies: Vec<f64>,
    candidates: &'a [Slot],
    placed: Vec<(f64, f64, f64)>,
    best: f64,
    floor: f64,
    nodes: u64,
}

impl Search<'_> {
    /// Highest level of the current partial profile on `[start, end)`.
    fn max_level(&self, start: f64, end: f64) -> f64 {
        let level_at = |x: f64| -> f64 {
            self.placed
                .iter()
                .filter(|&&(t, e, _)| t - GEOM_EPS <= x && x < e - GEOM_EPS)
                .map(|p| p.2)
                .sum()
        };
        let mut best = level_at(start);
        for &(t, _, _) in &self.placed {
            if t > start + GEOM_EPS && t < end - GEOM_EPS {
                best = best.max(level_at(t));
            }
        }
        best
    }

    fn descend(&mut self, depth: usize, peak: f64, min_index: usize) {
        if depth == self.energies.len() {
            self.best = self.best.min(peak);
            return;
        }
        let energy = self.energies[depth];
        let tied_with_next = depth + 1 < self.energies.len() && self.energies[depth + 1] == energy;
        for idx in min_index..self.candidates.len() {
            if self.best <= self.floor {
                return;
            }
            let c = self.candidates[idx];
            let d = energy / c.s;
            self.nodes += 1;
            let new_peak = peak.max(d + self.max_level(c.tau, c.tau + c.s));
            if new_peak >= self.best {
                continue;
            }
            self.placed.push((c.tau, c.tau + c.s, d));
            // Equal energies are interchangeable; only visit ordered index tuples.
            self.descend(depth + 1, new_peak, if tied_with_next { idx } else { 0 });
            self.placed.pop();
            if depth + 1 == self.energies.len() && new_peak <= peak {
                // Leaf that does not raise the peak: nothing below can do better.
                return;
            }
        }
    }
}

/// Exact minimum peak over a discretized policy space.
///
/// Durations run over `ell, ell + s_step, ...` plus `r` and any extra
/// durations; starts over `0, tau_step, ...` plus the latest legal start and
/// any extra starts. The search is a depth-first branch and bound that prunes
/// partial placements whose peak already reaches the incumbent, so the result
/// is the true grid minimum.
pub fn brute_force_peak(
    demands: &DemandSet,
    params: &SystemParams,
    cfg: &GridSearchConfig,
) -> Result<BruteForceOutcome> {
    cfg.validate()?;
    if demands.len() > cfg.max_n {
        return Err(Error::InstanceTooLarge {
            n: demands.len(),
            max: cfg.max_n,
        });
    }
    let candidates = candidate_placements(params, cfg);
    let mut energies: Vec<f64> = demands.iter().map(|d| d.energy).collect();
    energies.sort_by(|a, b| b.total_cmp(a));

    // Valid for every policy: the profile integrates to A over [0, 1], and no
    // demand can run below A_i / r.
    let floor = demands.total().max(demands.a_max() / params.r());
    let mut search = Search {
        energies,
        candidates: &candidates,
        placed: Vec::with_capacity(demands.len()),
        best: f64::INFINITY,
        floor,
        nodes: 0,
    };
    search.descend(0, 0.0, 0);

    let ell = params.ell();
    let grid_error = demands.a_max() * cfg.s_step / (ell * ell)
        + demands.a_max() * cfg.tau_step / (ell * ell)
        + 1e-9;
    Ok(BruteForceOutcome {
        peak: search.best,
        grid_error,
        nodes: search.nodes,
    })
}

/// A thin horizontal slice of a demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowRect {
    pub width: f64,
    pub height: f64,
    pub tau: f64,
}

impl NarrowRect {
    pub fn end(&self) -> f64 {
        self.tau + self.width
    }
}

/// Rows of narrow rectangles; each row is sorted by start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filling {
    pub rows: Vec<Vec<NarrowRect>>,
    pub delta: f64,
}

impl Filling {
    pub fn rectangle_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Stacked height: every row contributes `delta`.
    pub fn height(&self) -> f64 {
        self.rows.len() as f64 * self.delta
    }
}

/// Default slice height for fillings of an instance with total energy `total`.
pub fn default_delta(total: f64) -> f64 {
    1e-3 * total
}

/// First-fit row construction with rectangles packed left to right.
pub fn build_filling(widths: &[f64], params: &SystemParams, delta: f64) -> Result<Filling> {
    build_filling_with_gaps(widths, &[], params, delta)
}

/// Like [`build_filling`], but `gaps[i]` asks for idle time before rectangle
/// `i`. Requested gaps are shrunk when honoring them would leave the row unable
/// to take its remaining rectangles; outside the good region that reserve is
/// `(K0 - position) * r`, which keeps every non-last row a filling.
pub fn build_filling_with_gaps(
    widths: &[f64],
    gaps: &[f64],
    params: &SystemParams,
    delta: f64,
) -> Result<Filling> {
    let (ell, r) = (params.ell(), params.r());
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParams(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let per_row = (!crate::region::good_region(params))
        .then(|| crate::region::snapped_floor(1.0 / r) as usize);

    let mut rows: Vec<Vec<NarrowRect>> = Vec::new();
    let mut row: Vec<NarrowRect> = Vec::new();
    let mut cursor = 0.0;
    for (i, &width) in widths.iter().enumerate() {
        if !(width >= ell - crate::TOLERANCE && width <= r + crate::TOLERANCE) {
            return Err(Error::WidthOutOfRange { width, ell, r });
        }
        if cursor + width > 1.0 + GEOM_EPS {
            rows.push(std::mem::take(&mut row));
            cursor = 0.0;
        }
        let reserve = per_row.map_or(0.0, |k0| k0.saturating_sub(row.len() + 1) as f64 * r);
        let max_gap = (1.0 - cursor - width - reserve).max(0.0);
        let gap = gaps.get(i).copied().unwrap_or(0.0).clamp(0.0, max_gap);
        let tau = cursor + gap;
        row.push(NarrowRect {
            width,
            height: delta,
            tau,
        });
        cursor = tau + width;
    }
    if !row.is_empty() {
        rows.push(row);
    }
    Ok(Filling { rows, delta })
}

/// Which structural property a filling row fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum FillingCheck {
    /// A non-last row does not hold exactly `K0` rectangles.
    RectangleCount { found: usize, expected: usize },
    /// The `index`-th (1-based) active interval is not covered by exactly the
    /// `index`-th rectangle.
    ActiveInterval { index: usize, lo: f64, hi: f64 },
    /// Row coverage exceeds `Z*`.
    Coverage { covered: f64, z_star: f64 },
    /// A non-last row still has room for a width-`ell` rectangle.
    GapTooLarge { gap: f64, ell: f64 },
    /// Rectangles overlap, leave `[0, 1]`, or have an illegal width.
    Malformed { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillingViolation {
    pub row: usize,
    #[serde(flatten)]
    pub check: FillingCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillingReport {
    pub rows: usize,
    pub k0: usize,
    pub z_star: f64,
    pub violations: Vec<FillingViolation>,
}

impl FillingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the row structure of a filling outside the good region.
///
/// Every non-last row must hold exactly `K0 = floor(1/r)` rectangles, the
/// intervals `(1 - (K0 - i + 1) * ell, i * ell)` for `i = 1..=K0` must each be
/// covered by the `i`-th rectangle and no other, and the row must leave less
/// than `ell` of idle time. Every row must cover at most `Z*`.
pub fn verify_filling(f: &Filling, params: &SystemParams) -> Result<FillingReport> {
    if crate::region::good_region(params) {
        return Err(Error::Hypothesis(format!(
            "(ell, r) = ({}, {}) is in the good region; row structure is only fixed outside it",
            params.ell(),
            params.r()
        )));
    }
    let (ell, r) = (params.ell(), params.r());
    let k0 = crate::region::snapped_floor(1.0 / r) as usize;
    let z_star = k0 as f64 * r;
    let tol = crate::TOLERANCE;
    let mut violations = Vec::new();
    let last = f.rows.len().saturating_sub(1);

    for (row_idx, row) in f.rows.iter().enumerate() {
        let mut push = |check| {
            violations.push(FillingViolation {
                row: row_idx,
                check,
            })
        };
        for (j, rect) in row.iter().enumerate() {
            if rect.width < ell - tol || rect.width > r + tol {
                push(FillingCheck::Malformed {
                    detail: format!(
                        "rectangle {j} has width {} outside [{ell}, {r}]",
                        rect.width
                    ),
                });
            }
            if rect.tau < -tol || rect.end() > 1.0 + tol {
                push(FillingCheck::Malformed {
                    detail: format!("rectangle {j} spans [{}, {}]", rect.tau, rect.end()),
                });
            }
            if j > 0 && rect.tau < row[j - 1].end() - tol {
                push(FillingCheck::Malformed {
                    detail: format!("rectangle {j} overlaps its predecessor"),
                });
            }
        }
        let covered: f64 = row.iter().map(|r| r.width).sum();
        if covered > z_star + tol {
            push(FillingCheck::Coverage { covered, z_star });
        }
        if row_idx == last {
            continue;
        }
        if row.len() != k0 {
            push(FillingCheck::RectangleCount {
                found: row.len(),
                expected: k0,
            });
        }
        let gap = 1.0 - covered;
        if gap >= ell - tol {
            push(FillingCheck::GapTooLarge { gap, ell });
        }
        for i in 1..=k0 {
            let lo = 1.0 - (k0 - i + 1) as f64 * ell;
            let hi = i as f64 * ell;
            let owner_covers = row
                .get(i - 1)
                .is_some_and(|rect| rect.tau <= lo + tol && rect.end() >= hi - tol);
            let intruder = row
                .iter()
                .enumerate()
                .any(|(j, rect)| j != i - 1 && rect.tau < hi - tol && rect.end() > lo + tol);
            if !owner_covers || intruder {
                push(FillingCheck::ActiveInterval { index: i, lo, hi });
            }
        }
    }
    Ok(FillingReport {
        rows: f.rows.len(),
        k0,
        z_star,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(ell: f64, r: f64) -> SystemParams {
        SystemParams::new(ell, r).unwrap()
    }

    #[test]
    fn search_examples() {
        assert!(achievable_by_search(1.0, &p(0.3, 0.4)));
        assert!(achievable_by_search(0.37, &p(0.37, 0.5)));
        assert!(!achievable_by_search(1.0, &p(0.6, 0.7)));
        assert!(!achievable_by_search(0.0, &p(0.6, 0.7)));
    }

    #[test]
    fn coverable_horizon_examples() {
        assert_abs_diff_eq!(
            coverable_horizon(&p(0.3571, 0.43103)),
            0.86206,
            epsilon = 1e-12
        );
        assert_eq!(coverable_horizon(&p(0.35714, 0.75758)), 1.0);
        assert_abs_diff_eq!(coverable_horizon(&p(0.3, 0.3)), 0.9, epsilon = 1e-12);
        assert_eq!(coverable_horizon(&p(0.25, 0.25)), 1.0);
    }

    #[test]
    fn fractional_bound_examples() {
        let three = DemandSet::from_energies(&[1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            fractional_lower_bound(&three, &p(0.3571, 0.43103)),
            3.0 / 0.86206,
            epsilon = 1e-12
        );
        assert_eq!(fractional_lower_bound(&three, &p(0.4, 0.5)), 3.0);
        let one = DemandSet::from_energies(&[1.0]).unwrap();
        assert_eq!(fractional_lower_bound(&one, &p(1.0, 1.0)), 1.0);
    }

    #[test]
    fn brute_force_examples() {
        let cfg = GridSearchConfig::new(0.05, 0.05).unwrap();
        let one = DemandSet::from_energies(&[1.0]).unwrap();
        let out = brute_force_peak(&one, &p(0.5, 1.0), &cfg).unwrap();
        assert_abs_diff_eq!(out.peak, 1.0, epsilon = 1e-12);

        let two = DemandSet::from_energies(&[1.0, 1.0]).unwrap();
        let out = brute_force_peak(&two, &p(0.5, 1.0), &cfg).unwrap();
        assert_abs_diff_eq!(out.peak, 2.0, epsilon = 1e-12);

        // Z* = 0.7: the two demands cannot both sit side by side inside the
        // horizon, so the best grid policy is r-wide blocks overlapping.
        let cfg = GridSearchConfig::new(0.01, 0.01).unwrap();
        let out = brute_force_peak(&two, &p(0.6, 0.7), &cfg).unwrap();
        assert!(out.peak >= 2.0 / 0.7 - out.grid_error, "{out:?}");
        assert!(out.peak <= 2.0 / 0.7 + out.grid_error, "{out:?}");
    }

    #[test]
    fn brute_force_rejects_large_instances_and_bad_grids() {
        let cfg = GridSearchConfig::new(0.1, 0.1).unwrap();
        let five = DemandSet::from_energies(&[1.0; 5]).unwrap();
        assert!(matches!(
            brute_force_peak(&five, &p(0.5, 1.0), &cfg),
            Err(Error::InstanceTooLarge { n: 5, max: 4 })
        ));
        assert!(GridSearchConfig::new(0.0, 0.1).is_err());
        let mut wide = cfg;
        wide.max_n = 9;
        assert!(wide.validate().is_err());
    }

    #[test]
    fn filling_examples() {
        let params = p(0.3571, 0.43103);
        let f = build_filling(&[0.43103; 4], &params, 1e-3).unwrap();
        assert_eq!(f.rows.len(), 2);
        assert!(f.rows.iter().all(|row| row.len() == 2));
        assert!(verify_filling(&f, &params).unwrap().passed());

        let f = build_filling(&[0.3571], &params, 1e-3).unwrap();
        assert_eq!(f.rows.len(), 1);
        assert!(verify_filling(&f, &params).unwrap().passed());

        let widths = [0.36, 0.43, 0.36, 0.43, 0.36, 0.43];
        let f = build_filling(&widths, &params, 1e-3).unwrap();
        assert!(f.rows[..f.rows.len() - 1].iter().all(|row| row.len() == 2));
        assert!(verify_filling(&f, &params).unwrap().passed());

        assert!(matches!(
            build_filling(&[0.5], &params, 1e-3),
            Err(Error::WidthOutOfRange { .. })
        ));
    }

    #[test]
    fn filling_gaps_are_clamped_to_keep_rows_full() {
        let params = p(0.3571, 0.43103);
        let f = build_filling_with_gaps(
            &[0.36, 0.36, 0.36, 0.36],
            &[0.5, 0.5, 0.0, 0.1],
            &params,
            1e-3,
        )
        .unwrap();
        assert_eq!(f.rows.len(), 2);
        // First gap shrinks to leave room for one more r-wide rectangle.
        assert_abs_diff_eq!(f.rows[0][0].tau, 1.0 - 0.36 - 0.43103, epsilon = 1e-12);
        assert!(verify_filling(&f, &params).unwrap().passed());
    }

    #[test]
    fn verify_detects_violations() {
        let params = p(0.3571, 0.43103);
        let rect = |tau, width| NarrowRect {
            width,
            height: 1e-3,
            tau,
        };
        let short_row = Filling {
            rows: vec![vec![rect(0.0, 0.4)], vec![rect(0.0, 0.4)]],
            delta: 1e-3,
        };
        let report = verify_filling(&short_row, &params).unwrap();
        assert!(report.violations.iter().any(|v| v.row == 0
            && v.check
                == FillingCheck::RectangleCount {
                    found: 1,
                    expected: 2
                }));

        // First rectangle starts after 1 - K0 * ell, leaving part of the first
        // active interval uncovered.
        let gapped = Filling {
            rows: vec![vec![rect(0.29, 0.3571), rect(0.6471, 0.3529)], vec![]],
            delta: 1e-3,
        };
        let report = verify_filling(&gapped, &params).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.check, FillingCheck::ActiveInterval { index: 1, .. })));

        assert!(matches!(
            verify_filling(&short_row, &p(0.4, 0.5)),
            Err(Error::Hypothesis(_))
        ));
    }
}
