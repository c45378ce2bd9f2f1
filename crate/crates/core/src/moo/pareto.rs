use crate::error::{Error, Result};
use crate::model::{Job, ObjectiveVector, SelectionVector, SystemConfig, SystemState};

use super::{ParetoSet, WindowProblem};

/// Largest window the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 25;

/// `u` dominates `v` when it is no worse everywhere and better somewhere.
pub fn dominates(u: &ObjectiveVector, v: &ObjectiveVector) -> Result<bool> {
    if u.arity() != v.arity() {
        return Err(Error::ArityMismatch(u.arity(), v.arity()));
    }
    Ok(dominates_unchecked(u.as_slice(), v.as_slice()))
}

pub(crate) fn dominates_unchecked(u: &[i64], v: &[i64]) -> bool {
    let mut strictly = false;
    for (a, b) in u.iter().zip(v) {
        if a < b {
            return false;
        }
        if a > b {
            strictly = true;
        }
    }
    strictly
}

/// Keeps exactly the non-dominated candidates, in input order. Candidates
/// with equal objective values are all kept.
pub fn pareto_filter(candidates: Vec<(SelectionVector, ObjectiveVector)>) -> ParetoSet {
    let keep: Vec<bool> = candidates
        .iter()
        .map(|(_, o)| {
            !candidates
                .iter()
                .any(|(_, p)| dominates_unchecked(p.as_slice(), o.as_slice()))
        })
        .collect();
    let members = candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect();
    ParetoSet { members }
}

/// Exact Pareto set by enumerating every selection of the window.
pub fn brute_force_pareto(
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
) -> Result<ParetoSet> {
    if window.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::WindowTooLarge(window.len(), BRUTE_FORCE_LIMIT));
    }
    let p = WindowProblem::new(window, state, cfg, cfg.ssd_enabled())?;
    brute_force_problem(&p)
}

pub fn brute_force_problem(p: &WindowProblem) -> Result<ParetoSet> {
    let w = p.len();
    if w > BRUTE_FORCE_LIMIT {
        return Err(Error::WindowTooLarge(w, BRUTE_FORCE_LIMIT));
    }
    let mut archive: Vec<(u32, ObjectiveVector)> = Vec::new();
    let mut bits = vec![false; w];
    for mask in 0u32..(1u32 << w) {
        // Cheap capacity pre-check before building the bit vector.
        let mut n = 0u64;
        let mut b = 0u64;
        for i in 0..w {
            if mask >> i & 1 == 1 {
                n += p.nodes[i] as u64;
                b += p.bb[i];
            }
        }
        if n > p.free_nodes as u64 || b > p.free_bb {
            continue;
        }
        for (i, bit) in bits.iter_mut().enumerate() {
            *bit = mask >> i & 1 == 1;
        }
        if p.extension() && p.ssd_waste(&bits).is_none() {
            continue;
        }
        let obj = p.evaluate(&bits);
        if archive
            .iter()
            .any(|(_, a)| dominates_unchecked(a.as_slice(), obj.as_slice()))
        {
            continue;
        }
        archive.retain(|(_, a)| !dominates_unchecked(obj.as_slice(), a.as_slice()));
        archive.push((mask, obj));
    }
    let members = archive
        .into_iter()
        .map(|(mask, obj)| {
            let sel = SelectionVector::new((0..w).map(|i| mask >> i & 1 == 1).collect());
            (sel, obj)
        })
        .collect();
    Ok(ParetoSet { members })
}

/// Per-objective divisors that put nodes, burst buffer and SSD volumes on a
/// common `[0, 1]` scale.
pub fn objective_scales(cfg: &SystemConfig, arity: usize) -> Vec<f64> {
    let n = cfg.total_nodes.max(1) as f64;
    let b = cfg.usable_bb_gb().max(1) as f64;
    let s = cfg.total_ssd_gb().max(1) as f64;
    [n, b, s, s][..arity].to_vec()
}

/// Mean over `s` of the Euclidean distance to the nearest member of
/// `s_star`, in raw objective units.
pub fn generational_distance(s: &ParetoSet, s_star: &ParetoSet) -> Result<f64> {
    let arity = s
        .objectives()
        .next()
        .map(|o| o.arity())
        .ok_or(Error::EmptySet("approximate Pareto set"))?;
    generational_distance_scaled(s, s_star, &vec![1.0; arity])
}

/// Generational distance with each objective divided by `scales[k]`.
pub fn generational_distance_scaled(
    s: &ParetoSet,
    s_star: &ParetoSet,
    scales: &[f64],
) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySet("approximate Pareto set"));
    }
    if s_star.is_empty() {
        return Err(Error::EmptySet("reference Pareto set"));
    }
    let mut total = 0.0;
    for u in s.objectives() {
        let mut best = f64::INFINITY;
        for v in s_star.objectives() {
            if u.arity() != v.arity() {
                return Err(Error::ArityMismatch(u.arity(), v.arity()));
            }
            let d2: f64 = u
                .as_slice()
                .iter()
                .zip(v.as_slice())
                .zip(scales)
                .map(|((a, b), k)| ((a - b) as f64 / k).powi(2))
                .sum();
            best = best.min(d2.sqrt());
        }
        total += best;
    }
    Ok(total / s.len() as f64)
}
