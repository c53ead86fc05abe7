//! Energy demands and validated demand sets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single energy requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: u64,
    pub energy: f64,
}

/// A non-empty, ordered set of demands with positive energies and unique ids.
///
/// The aggregates (`total`, `min`, `max`) are computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSet {
    demands: Vec<Demand>,
    total: f64,
    a_min: f64,
    a_max: f64,
}

impl DemandSet {
    pub fn new(demands: Vec<Demand>) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::EmptyInput("demand set"));
        }
        let mut seen = HashSet::with_capacity(demands.len());
        let mut total = 0.0;
        let mut a_min = f64::INFINITY;
        let mut a_max = f64::NEG_INFINITY;
        for d in &demands {
            if !(d.energy.is_finite() && d.energy > 0.0) {
                return Err(Error::InvalidDemand {
                    id: d.id,
                    energy: d.energy,
                });
            }
            if !seen.insert(d.id) {
                return Err(Error::DuplicateDemandId(d.id));
            }
            total += d.energy;
            a_min = a_min.min(d.energy);
            a_max = a_max.max(d.energy);
        }
        Ok(Self {
            demands,
            total,
            a_min,
            a_max,
        })
    }

    /// Builds a set with ids `1..=n` in slice order.
    pub fn from_energies(energies: &[f64]) -> Result<Self> {
        Self::new(
            energies
                .iter()
                .enumerate()
                .map(|(i, &energy)| Demand {
                    id: i as u64 + 1,
                    energy,
                })
                .collect(),
        )
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    /// `A`, the sum of all energies.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn iter(&self) -> impl Iterator<Item = &Demand> {
        self.demands.iter()
    }

    /// Returns a new set with `demand` appended.
    pub fn with_demand(&self, demand: Demand) -> Result<Self> {
        let mut demands = self.demands.clone();
        demands.push(demand);
        Self::new(demands)
    }
}
