//! Multi-objective job selection over a scheduling window.
//!
//! A selection is a bit per window job. Objectives are nodes and burst buffer
//! allocated (plus SSD volume and negated SSD waste when nodes carry local
//! SSDs), all maximized subject to the free capacity of the machine.

mod ga;
mod pareto;
mod problem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ObjectiveVector, SelectionVector};

pub use ga::{
    crossover, evolve_generation, ga_maximize, ga_solve, ga_solve_problem, mutate,
    select_survivors, Chromosome,
};
pub use pareto::{
    brute_force_pareto, brute_force_problem, dominates, generational_distance,
    generational_distance_scaled, objective_scales, pareto_filter, BRUTE_FORCE_LIMIT,
};
pub use problem::{evaluate_objectives, is_feasible, WindowProblem};

/// How infeasible chromosomes are pushed back into the feasible region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairRule {
    /// Clear selected jobs in random order until the selection fits.
    Random,
    /// Clear the job with the largest capacity-normalized demand first.
    LargestFirst,
    /// Random clearing, then add back unselected jobs (random order) that
    /// still fit.
    #[default]
    DropAdd,
}

/// Genetic solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub generations: usize,
    pub population: usize,
    pub mutation_prob: f64,
    pub seed: u64,
    pub repair: RepairRule,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            generations: 500,
            population: 20,
            mutation_prob: 0.0005,
            seed: 0,
            repair: RepairRule::DropAdd,
        }
    }
}

impl GaParams {
    pub fn new(generations: usize, population: usize, seed: u64) -> Self {
        GaParams {
            generations,
            population,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations < 1 {
            return Err(Error::config("ga.generations", "must be at least 1"));
        }
        if self.population < 2 {
            return Err(Error::config("ga.population", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::config("ga.mutation_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Mutually non-dominated selections with their objective values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoSet {
    pub members: Vec<(SelectionVector, ObjectiveVector)>,
}

impl ParetoSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> impl Iterator<Item = &ObjectiveVector> {
        self.members.iter().map(|(_, o)| o)
    }

    /// Distinct objective vectors, sorted.
    pub fn objective_set(&self) -> Vec<Vec<i64>> {
        let mut v: Vec<Vec<i64>> = self.objectives().map(|o| o.as_slice().to_vec()).collect();
        v.sort();
        v.dedup();
        v
    }
}
