use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Job, ObjectiveVector, SelectionVector, SystemConfig, SystemState};

use super::pareto::dominates_unchecked;
use super::{pareto_filter, GaParams, ParetoSet, RepairRule, WindowProblem};

/// A population member with its cached objective values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chromosome {
    pub sel: SelectionVector,
    pub obj: ObjectiveVector,
}

impl Chromosome {
    fn new(sel: SelectionVector, p: &WindowProblem) -> Self {
        let obj = p.evaluate(&sel.bits);
        Chromosome { sel, obj }
    }
}

/// One-point crossover: the children swap tails at `cut`.
pub fn crossover(
    a: &SelectionVector,
    b: &SelectionVector,
    cut: usize,
) -> Result<(SelectionVector, SelectionVector)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let cut = cut.min(a.len());
    let mut c1 = a.bits[..cut].to_vec();
    c1.extend_from_slice(&b.bits[cut..]);
    let mut c2 = b.bits[..cut].to_vec();
    c2.extend_from_slice(&a.bits[cut..]);
    Ok((SelectionVector::new(c1), SelectionVector::new(c2)))
}

/// Flips each bit independently with probability `p_m`.
pub fn mutate<R: Rng + ?Sized>(x: &SelectionVector, p_m: f64, rng: &mut R) -> SelectionVector {
    let p_m = p_m.clamp(0.0, 1.0);
    let mut out = x.clone();
    if p_m == 0.0 {
        return out;
    }
    for bit in &mut out.bits {
        if rng.random_bool(p_m) {
            *bit = !*bit;
        }
    }
    out
}

/// Survivor ranking: newer first, then more nodes, then the lexicographically
/// smaller bit vector.
fn survivor_order(a: &Chromosome, b: &Chromosome) -> Ordering {
    a.sel
        .age
        .cmp(&b.sel.age)
        .then(b.obj.f1().cmp(&a.obj.f1()))
        .then(a.sel.bits.cmp(&b.sel.bits))
}

/// Picks `size` survivors from parents and offspring.
///
/// Non-dominated members pass first; when they exceed `size` the newest are
/// kept, otherwise the rest is filled with the newest dominated members.
/// Identical bit vectors count once (the parent copy is kept) unless there
/// are too few distinct members to fill the population. Surviving parents
/// age by one.
pub fn select_survivors(
    parents: Vec<Chromosome>,
    offspring: Vec<Chromosome>,
    size: usize,
) -> Vec<Chromosome> {
    let n_parents = parents.len();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut distinct: Vec<(bool, Chromosome)> = Vec::new();
    let mut dupes: Vec<(bool, Chromosome)> = Vec::new();
    for (i, c) in parents.into_iter().chain(offspring).enumerate() {
        let from_parent = i < n_parents;
        if seen.insert(c.sel.bits.clone()) {
            distinct.push((from_parent, c));
        } else {
            dupes.push((from_parent, c));
        }
    }

    let front: Vec<bool> = distinct
        .iter()
        .map(|(_, c)| {
            !distinct
                .iter()
                .any(|(_, o)| dominates_unchecked(o.obj.as_slice(), c.obj.as_slice()))
        })
        .collect();
    let (mut set1, mut set2): (Vec<_>, Vec<_>) = distinct
        .into_iter()
        .zip(front)
        .partition(|(_, nd)| *nd);
    let by_order = |a: &((bool, Chromosome), bool), b: &((bool, Chromosome), bool)| {
        survivor_order(&a.0 .1, &b.0 .1)
    };
    set1.sort_by(by_order);
    set2.sort_by(by_order);
    dupes.sort_by(|a, b| survivor_order(&a.1, &b.1));

    set1.into_iter()
        .chain(set2)
        .map(|(c, _)| c)
        .chain(dupes)
        .take(size)
        .map(|(from_parent, mut c)| {
            if from_parent {
                c.sel.age += 1;
            }
            c
        })
        .collect()
}

fn breed<R: Rng + ?Sized>(
    pop: &[Chromosome],
    p: &WindowProblem,
    params: &GaParams,
    rng: &mut R,
) -> Vec<Chromosome> {
    let size = params.population;
    let w = p.len();
    let mut children = Vec::with_capacity(size + 1);
    while children.len() < size {
        let a = &pop[rng.random_range(0..pop.len())].sel;
        let b = &pop[rng.random_range(0..pop.len())].sel;
        let (c1, c2) = if w >= 2 {
            let cut = rng.random_range(1..w);
            crossover(a, b, cut).expect("population shares one length")
        } else {
            (SelectionVector::new(a.bits.clone()), SelectionVector::new(b.bits.clone()))
        };
        for c in [c1, c2] {
            let mut c = mutate(&c, params.mutation_prob, rng);
            c.age = 0;
            p.repair_with(&mut c.bits, params.repair, rng);
            children.push(Chromosome::new(c, p));
        }
    }
    children.truncate(size);
    children
}

/// Produces `P` offspring and returns the next generation of size `P`.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: Vec<Chromosome>,
    p: &WindowProblem,
    params: &GaParams,
    rng: &mut R,
) -> Vec<Chromosome> {
    let offspring = breed(&pop, p, params, rng);
    select_survivors(pop, offspring, params.population)
}

/// `size` random feasible members, distinct where the feasible region
/// allows.
fn initial_population<R: Rng + ?Sized>(
    p: &WindowProblem,
    size: usize,
    repair: RepairRule,
    rng: &mut R,
) -> Vec<Chromosome> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < size {
        let mut bits: Vec<bool> = (0..p.len()).map(|_| rng.random_bool(0.5)).collect();
        p.repair_with(&mut bits, repair, rng);
        tries += 1;
        if !seen.insert(bits.clone()) && tries < 50 * size {
            continue;
        }
        out.push(Chromosome::new(SelectionVector::new(bits), p));
    }
    out
}

/// Approximates the Pareto set of the window with the genetic solver.
pub fn ga_solve(
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
    params: &GaParams,
) -> Result<ParetoSet> {
    let p = WindowProblem::new(window, state, cfg, cfg.ssd_enabled())?;
    Ok(ga_solve_problem(&p, params))
}

pub fn ga_solve_problem(p: &WindowProblem, params: &GaParams) -> ParetoSet {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pop = initial_population(p, params.population, params.repair, &mut rng);
    for _ in 0..params.generations {
        pop = evolve_generation(pop, p, params, &mut rng);
    }
    let mut seen = HashSet::new();
    let unique: Vec<_> = pop
        .into_iter()
        .filter(|c| seen.insert(c.sel.bits.clone()))
        .map(|c| (c.sel, c.obj))
        .collect();
    pareto_filter(unique)
}

/// Single-objective variant of the solver: same operators, elitist survivor
/// selection under `better` (which must order the preferred chromosome
/// first). Returns the best selection seen.
pub fn ga_maximize<F>(p: &WindowProblem, params: &GaParams, better: F) -> Chromosome
where
    F: Fn(&Chromosome, &Chromosome) -> Ordering,
{
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pop = initial_population(p, params.population, params.repair, &mut rng);
    let rank = |a: &Chromosome, b: &Chromosome| better(a, b).then(a.sel.age.cmp(&b.sel.age));
    pop.sort_by(rank);
    for _ in 0..params.generations {
        let offspring = breed(&pop, p, params, &mut rng);
        let n_parents = pop.len();
        let mut seen = HashSet::new();
        let mut next: Vec<(bool, Chromosome)> = Vec::with_capacity(2 * n_parents);
        let mut dupes = Vec::new();
        for (i, c) in pop.into_iter().chain(offspring).enumerate() {
            if seen.insert(c.sel.bits.clone()) {
                next.push((i < n_parents, c));
            } else {
                dupes.push((i < n_parents, c));
            }
        }
        next.sort_by(|a, b| rank(&a.1, &b.1));
        next.extend(dupes);
        pop = next
            .into_iter()
            .take(params.population)
            .map(|(from_parent, mut c)| {
                if from_parent {
                    c.sel.age += 1;
                }
                c
            })
            .collect();
    }
    pop.into_iter()
        .min_by(|a, b| better(a, b))
        .expect("population is never empty")
}
