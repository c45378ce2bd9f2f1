use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Job, ObjectiveVector, SelectionVector, SystemConfig, SystemState};

use super::RepairRule;

/// A window snapshot flattened for fast repeated evaluation: per-job demands
/// and the free capacity at the moment of the scheduling tick.
#[derive(Debug, Clone)]
pub struct WindowProblem {
    pub(crate) nodes: Vec<u32>,
    pub(crate) bb: Vec<u64>,
    pub(crate) ssd: Vec<u32>,
    pub(crate) free_nodes: u32,
    pub(crate) free_bb: u64,
    /// Free node counts per SSD capacity, ascending by capacity. `None` when
    /// the SSD objectives are off.
    pub(crate) ssd_classes: Option<Vec<(u32, u32)>>,
    pub(crate) total_nodes: u32,
    pub(crate) total_bb: u64,
    pub(crate) total_ssd: u64,
    repair_order: Vec<usize>,
}

impl WindowProblem {
    pub fn new(
        window: &[Job],
        state: &SystemState,
        cfg: &SystemConfig,
        extension: bool,
    ) -> Result<Self> {
        if extension && !cfg.ssd_enabled() {
            return Err(Error::InvalidParameter(
                "SSD objectives requested but the system has no SSD layout".into(),
            ));
        }
        let ssd_classes = extension.then(|| {
            state
                .free_by_ssd()
                .iter()
                .map(|(&cap, &free)| (cap, free))
                .collect::<Vec<_>>()
        });
        Ok(Self::from_parts(
            window.iter().map(|j| j.nodes_requested).collect(),
            window.iter().map(|j| j.bb_request).collect(),
            if extension {
                window.iter().map(|j| j.ssd_per_node).collect()
            } else {
                vec![0; window.len()]
            },
            state.free_nodes(),
            state.free_bb(),
            ssd_classes,
            cfg.total_nodes,
            cfg.usable_bb_gb(),
            cfg.total_ssd_gb(),
        ))
    }

    /// Builds a two-objective problem directly from demand vectors.
    pub fn from_demands(nodes: Vec<u32>, bb: Vec<u64>, free_nodes: u32, free_bb: u64) -> Self {
        let w = nodes.len();
        Self::from_parts(
            nodes,
            bb,
            vec![0; w],
            free_nodes,
            free_bb,
            None,
            free_nodes,
            free_bb,
            0,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        nodes: Vec<u32>,
        bb: Vec<u64>,
        ssd: Vec<u32>,
        free_nodes: u32,
        free_bb: u64,
        ssd_classes: Option<Vec<(u32, u32)>>,
        total_nodes: u32,
        total_bb: u64,
        total_ssd: u64,
    ) -> Self {
        let n_scale = total_nodes.max(1) as f64;
        let b_scale = total_bb.max(1) as f64;
        let s_scale = total_ssd.max(1) as f64;
        let key = |i: usize| {
            nodes[i] as f64 / n_scale
                + bb[i] as f64 / b_scale
                + ssd[i] as f64 * nodes[i] as f64 / s_scale
        };
        let mut repair_order: Vec<usize> = (0..nodes.len()).collect();
        // Largest demand first; among equals, later window positions go first.
        repair_order.sort_by(|&a, &b| {
            key(b)
                .partial_cmp(&key(a))
                .unwrap_or(Ordering::Equal)
                .then(b.cmp(&a))
        });
        WindowProblem {
            nodes,
            bb,
            ssd,
            free_nodes,
            free_bb,
            ssd_classes,
            total_nodes,
            total_bb,
            total_ssd,
            repair_order,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn extension(&self) -> bool {
        self.ssd_classes.is_some()
    }

    pub fn arity(&self) -> usize {
        if self.extension() {
            4
        } else {
            2
        }
    }

    pub fn free_nodes(&self) -> u32 {
        self.free_nodes
    }

    pub fn free_bb(&self) -> u64 {
        self.free_bb
    }

    /// Free SSD volume on currently idle nodes.
    pub fn free_ssd(&self) -> u64 {
        self.ssd_classes
            .as_ref()
            .map(|c| c.iter().map(|&(cap, n)| cap as u64 * n as u64).sum())
            .unwrap_or(0)
    }

    /// Jointly assigns SSD nodes to the selected jobs, most demanding first,
    /// each taking the smallest sufficient capacity class. Returns the total
    /// waste, or `None` when no assignment exists.
    pub(crate) fn ssd_waste(&self, bits: &[bool]) -> Option<u64> {
        let classes = match &self.ssd_classes {
            Some(c) => c,
            None => return Some(0),
        };
        let mut free: Vec<(u32, u32)> = classes.clone();
        let mut chosen: Vec<usize> = (0..bits.len()).filter(|&i| bits[i]).collect();
        chosen.sort_by(|&a, &b| self.ssd[b].cmp(&self.ssd[a]).then(a.cmp(&b)));
        let mut waste = 0u64;
        for i in chosen {
            let s = self.ssd[i];
            let mut need = self.nodes[i];
            for (cap, avail) in free.iter_mut() {
                if need == 0 {
                    break;
                }
                if *cap < s || *avail == 0 {
                    continue;
                }
                let take = need.min(*avail);
                *avail -= take;
                need -= take;
                waste += (*cap - s) as u64 * take as u64;
            }
            if need > 0 {
                return None;
            }
        }
        Some(waste)
    }

    fn sums(&self, bits: &[bool]) -> (u64, u64) {
        let mut n = 0u64;
        let mut b = 0u64;
        for (i, &on) in bits.iter().enumerate() {
            if on {
                n += self.nodes[i] as u64;
                b += self.bb[i];
            }
        }
        (n, b)
    }

    pub fn is_feasible(&self, bits: &[bool]) -> bool {
        if bits.len() != self.len() {
            return false;
        }
        let (n, b) = self.sums(bits);
        n <= self.free_nodes as u64 && b <= self.free_bb && self.ssd_waste(bits).is_some()
    }

    /// Objective values of a feasible selection.
    pub fn evaluate(&self, bits: &[bool]) -> ObjectiveVector {
        let (n, b) = self.sums(bits);
        if !self.extension() {
            return ObjectiveVector::two(n as i64, b as i64);
        }
        let ssd: u64 = bits
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| self.ssd[i] as u64 * self.nodes[i] as u64)
            .sum();
        let waste = self.ssd_waste(bits).unwrap_or(u64::MAX / 4);
        ObjectiveVector::four(n as i64, b as i64, ssd as i64, -(waste as i64))
    }

    /// Clears selected jobs, largest normalized demand first, until the
    /// selection fits.
    pub fn repair(&self, bits: &mut [bool]) {
        self.clear_until_feasible(bits, self.repair_order.iter().copied());
    }

    /// Clears selected jobs in uniformly random order until the selection
    /// fits.
    pub fn repair_random<R: Rng + ?Sized>(&self, bits: &mut [bool], rng: &mut R) {
        if self.is_feasible(bits) {
            return;
        }
        let mut set: Vec<usize> = (0..bits.len()).filter(|&i| bits[i]).collect();
        set.shuffle(rng);
        self.clear_until_feasible(bits, set.into_iter());
    }

    /// Random drop as in `repair_random`, then tries the unselected jobs in
    /// random order and keeps each one that still fits.
    pub fn repair_drop_add<R: Rng + ?Sized>(&self, bits: &mut [bool], rng: &mut R) {
        self.repair_random(bits, rng);
        let mut unset: Vec<usize> = (0..bits.len()).filter(|&i| !bits[i]).collect();
        unset.shuffle(rng);
        let (mut n, mut b) = self.sums(bits);
        for i in unset {
            let (n2, b2) = (n + self.nodes[i] as u64, b + self.bb[i]);
            if n2 > self.free_nodes as u64 || b2 > self.free_bb {
                continue;
            }
            bits[i] = true;
            if self.ssd_classes.is_some() && self.ssd_waste(bits).is_none() {
                bits[i] = false;
                continue;
            }
            n = n2;
            b = b2;
        }
    }

    pub fn repair_with<R: Rng + ?Sized>(&self, bits: &mut [bool], rule: RepairRule, rng: &mut R) {
        match rule {
            RepairRule::LargestFirst => self.repair(bits),
            RepairRule::Random => self.repair_random(bits, rng),
            RepairRule::DropAdd => self.repair_drop_add(bits, rng),
        }
    }

    fn clear_until_feasible(&self, bits: &mut [bool], order: impl Iterator<Item = usize>) {
        let (mut n, mut b) = self.sums(bits);
        let fits = |n: u64, b: u64, bits: &[bool]| {
            n <= self.free_nodes as u64 && b <= self.free_bb && self.ssd_waste(bits).is_some()
        };
        if fits(n, b, bits) {
            return;
        }
        for i in order {
            if !bits[i] {
                continue;
            }
            bits[i] = false;
            n -= self.nodes[i] as u64;
            b -= self.bb[i];
            if fits(n, b, bits) {
                return;
            }
        }
    }
}

/// Objective values of `x` over `window` given the current allocation.
pub fn evaluate_objectives(
    x: &SelectionVector,
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
    extension: bool,
) -> Result<ObjectiveVector> {
    if x.len() != window.len() {
        return Err(Error::LengthMismatch {
            expected: window.len(),
            got: x.len(),
        });
    }
    let p = WindowProblem::new(window, state, cfg, extension)?;
    if extension && p.ssd_waste(&x.bits).is_none() {
        return Err(Error::InvalidParameter(
            "selection has no valid SSD node assignment".into(),
        ));
    }
    Ok(p.evaluate(&x.bits))
}

/// Whether `x` fits the free nodes, burst buffer and (when the system has
/// SSDs) an SSD-respecting node assignment.
pub fn is_feasible(
    x: &SelectionVector,
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
) -> bool {
    match WindowProblem::new(window, state, cfg, cfg.ssd_enabled()) {
        Ok(p) => p.is_feasible(&x.bits),
        Err(_) => false,
    }
}
