//! Job-selection policies over the scheduling window.
//!
//! Every policy returns a feasible [`SelectionVector`] for the current
//! allocation. Ties are broken toward jobs nearer the front of the window.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Job, ObjectiveVector, SelectionVector, SystemConfig, SystemState};
use crate::moo::{ga_maximize, ga_solve_problem, GaParams, ParetoSet, WindowProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Nodes,
    BurstBuffer,
    Ssd,
    SsdWaste,
}

impl Objective {
    pub fn index(self) -> usize {
        match self {
            Objective::Nodes => 0,
            Objective::BurstBuffer => 1,
            Objective::Ssd => 2,
            Objective::SsdWaste => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Start jobs in window order until the first one that does not fit.
    Naive,
    /// Maximize a weighted sum of capacity-normalized objectives.
    Weighted { weights: Vec<f64> },
    /// Maximize one objective under all capacity constraints.
    Constrained { target: Objective },
    /// Greedy dot-product packing.
    BinPacking,
    /// Genetic Pareto solver plus the tradeoff decision rule.
    Bbsched {
        #[serde(default = "default_multiplier")]
        tradeoff_multiplier: f64,
    },
}

fn default_multiplier() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: PolicyKind,
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl PolicySpec {
    pub fn new(name: impl Into<String>, kind: PolicyKind) -> Self {
        PolicySpec {
            name: name.into(),
            kind,
        }
    }

    pub fn naive() -> Self {
        Self::new("baseline", PolicyKind::Naive)
    }

    pub fn weighted(name: impl Into<String>, weights: &[f64]) -> Self {
        Self::new(
            name,
            PolicyKind::Weighted {
                weights: weights.to_vec(),
            },
        )
    }

    pub fn constrained(name: impl Into<String>, target: Objective) -> Self {
        Self::new(name, PolicyKind::Constrained { target })
    }

    pub fn bin_packing() -> Self {
        Self::new("bin_packing", PolicyKind::BinPacking)
    }

    pub fn bbsched(tradeoff_multiplier: f64) -> Self {
        Self::new(
            "bbsched",
            PolicyKind::Bbsched {
                tradeoff_multiplier,
            },
        )
    }

    /// The comparison set: eight methods for two objectives, seven for four.
    pub fn standard_suite(extension: bool) -> Vec<PolicySpec> {
        if extension {
            vec![
                Self::naive(),
                Self::weighted("weighted", &[0.25, 0.25, 0.25, 0.25]),
                Self::constrained("constrained_cpu", Objective::Nodes),
                Self::constrained("constrained_bb", Objective::BurstBuffer),
                Self::constrained("constrained_ssd", Objective::Ssd),
                Self::bin_packing(),
                Self::bbsched(4.0),
            ]
        } else {
            vec![
                Self::naive(),
                Self::weighted("weighted", &[0.5, 0.5]),
                Self::weighted("weighted_cpu", &[0.8, 0.2]),
                Self::weighted("weighted_bb", &[0.2, 0.8]),
                Self::constrained("constrained_cpu", Objective::Nodes),
                Self::constrained("constrained_bb", Objective::BurstBuffer),
                Self::bin_packing(),
                Self::bbsched(2.0),
            ]
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PolicyKind::Weighted { weights } => {
                if !(weights.len() == 2 || weights.len() == 4) {
                    return Err(Error::config("weights", "expected 2 or 4 weights"));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::config("weights", "weights must be non-negative"));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::config("weights", format!("weights sum to {sum}, not 1")));
                }
            }
            PolicyKind::Bbsched {
                tradeoff_multiplier,
            } if !tradeoff_multiplier.is_finite() || *tradeoff_multiplier <= 0.0 => {
                return Err(Error::config("tradeoff_multiplier", "must be positive"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Runs the policy over the window. `ga` supplies the solver settings (and
/// seed) for the optimizing policies.
pub fn select(
    policy: &PolicySpec,
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
    ga: &GaParams,
) -> Result<SelectionVector> {
    let p = WindowProblem::new(window, state, cfg, cfg.ssd_enabled())?;
    Ok(select_problem(policy, &p, cfg, ga))
}

pub fn select_problem(
    policy: &PolicySpec,
    p: &WindowProblem,
    cfg: &SystemConfig,
    ga: &GaParams,
) -> SelectionVector {
    if p.is_empty() {
        return SelectionVector::zeros(0);
    }
    match &policy.kind {
        PolicyKind::Naive => naive(p),
        PolicyKind::Weighted { weights } => weighted(p, weights, ga),
        PolicyKind::Constrained { target } => constrained(p, *target, ga),
        PolicyKind::BinPacking => bin_packing(p),
        PolicyKind::Bbsched {
            tradeoff_multiplier,
        } => {
            let front = ga_solve_problem(p, ga);
            decide(&front, cfg, *tradeoff_multiplier).expect("solver front is never empty")
        }
    }
}

pub fn select_naive(window: &[Job], state: &SystemState, cfg: &SystemConfig) -> SelectionVector {
    match WindowProblem::new(window, state, cfg, cfg.ssd_enabled()) {
        Ok(p) => naive(&p),
        Err(_) => SelectionVector::zeros(window.len()),
    }
}

fn naive(p: &WindowProblem) -> SelectionVector {
    let mut bits = vec![false; p.len()];
    for i in 0..p.len() {
        bits[i] = true;
        if !p.is_feasible(&bits) {
            bits[i] = false;
            break;
        }
    }
    SelectionVector::new(bits)
}

pub fn select_weighted(
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
    weights: &[f64],
    ga: &GaParams,
) -> Result<SelectionVector> {
    let p = WindowProblem::new(window, state, cfg, cfg.ssd_enabled())?;
    if p.is_empty() {
        return Ok(SelectionVector::zeros(0));
    }
    Ok(weighted(&p, weights, ga))
}

/// Weighted score of a selection: each objective divided by the free amount
/// of its resource, waste by the SSD volume the selection occupies.
pub fn weighted_score(p: &WindowProblem, obj: &ObjectiveVector, weights: &[f64]) -> f64 {
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let occupied_ssd = (obj.f3() - obj.f4()) as f64;
    let terms = [
        ratio(obj.f1() as f64, p.free_nodes() as f64),
        ratio(obj.f2() as f64, p.free_bb() as f64),
        ratio(obj.f3() as f64, p.free_ssd() as f64),
        ratio(obj.f4() as f64, occupied_ssd),
    ];
    weights
        .iter()
        .zip(&terms[..obj.arity()])
        .map(|(w, t)| w * t)
        .sum()
}

fn weighted(p: &WindowProblem, weights: &[f64], ga: &GaParams) -> SelectionVector {
    let best = ga_maximize(p, ga, |a, b| {
        let sa = weighted_score(p, &a.obj, weights);
        let sb = weighted_score(p, &b.obj, weights);
        sb.partial_cmp(&sa)
            .unwrap_or(Ordering::Equal)
            .then(a.sel.cmp_front(&b.sel))
    });
    SelectionVector::new(best.sel.bits)
}

pub fn select_constrained(
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
    target: Objective,
    ga: &GaParams,
) -> Result<SelectionVector> {
    let p = WindowProblem::new(window, state, cfg, cfg.ssd_enabled())?;
    if target.index() >= p.arity() {
        return Err(Error::InvalidParameter(format!(
            "objective {target:?} needs the SSD extension"
        )));
    }
    if p.is_empty() {
        return Ok(SelectionVector::zeros(0));
    }
    Ok(constrained(&p, target, ga))
}

/// Orders by the target objective, then the remaining objectives in index
/// order, then window position.
fn constrained_order(target: usize, a: &ObjectiveVector, b: &ObjectiveVector) -> Ordering {
    let mut ord = b.get(target).cmp(&a.get(target));
    for k in (0..a.arity()).filter(|&k| k != target) {
        ord = ord.then(b.get(k).cmp(&a.get(k)));
    }
    ord
}

fn constrained(p: &WindowProblem, target: Objective, ga: &GaParams) -> SelectionVector {
    let t = target.index().min(p.arity() - 1);
    let best = ga_maximize(p, ga, |a, b| {
        constrained_order(t, &a.obj, &b.obj).then(a.sel.cmp_front(&b.sel))
    });
    SelectionVector::new(best.sel.bits)
}

pub fn select_bin_packing(
    window: &[Job],
    state: &SystemState,
    cfg: &SystemConfig,
) -> SelectionVector {
    match WindowProblem::new(window, state, cfg, cfg.ssd_enabled()) {
        Ok(p) => bin_packing(&p),
        Err(_) => SelectionVector::zeros(window.len()),
    }
}

/// Repeatedly picks the fitting job whose capacity-normalized demand vector
/// has the largest dot product with the normalized free capacity.
fn bin_packing(p: &WindowProblem) -> SelectionVector {
    let n_tot = p.total_nodes.max(1) as f64;
    let b_tot = p.total_bb.max(1) as f64;
    let s_tot = p.total_ssd.max(1) as f64;
    let mut bits = vec![false; p.len()];
    loop {
        let used = p.evaluate(&bits);
        let avail_n = (p.free_nodes as f64 - used.f1() as f64) / n_tot;
        let avail_b = (p.free_bb as f64 - used.f2() as f64) / b_tot;
        let avail_s = if p.extension() {
            (p.free_ssd() as f64 - (used.f3() - used.f4()) as f64) / s_tot
        } else {
            0.0
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..p.len() {
            if bits[i] {
                continue;
            }
            bits[i] = true;
            let fits = p.is_feasible(&bits);
            bits[i] = false;
            if !fits {
                continue;
            }
            let score = p.nodes[i] as f64 / n_tot * avail_n
                + p.bb[i] as f64 / b_tot * avail_b
                + p.ssd[i] as f64 * p.nodes[i] as f64 / s_tot * avail_s;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, _)) => bits[i] = true,
            None => return SelectionVector::new(bits),
        }
    }
}

/// Picks one member of the Pareto set.
///
/// Start from the member with the most nodes (earliest window jobs on ties).
/// Another member replaces it when its gain in percentage points exceeds
/// `multiplier` times its node loss in percentage points; the largest such
/// gain wins. With two objectives the gain is the burst buffer rise. With
/// four it is the burst buffer rise plus the SSD rise plus the percentage
/// reduction in wasted SSD relative to the starting pick.
pub fn decide(
    pareto: &ParetoSet,
    cfg: &SystemConfig,
    multiplier: f64,
) -> Result<SelectionVector> {
    let (pick_sel, pick) = pareto
        .members
        .iter()
        .min_by(|(sa, a), (sb, b)| b.f1().cmp(&a.f1()).then(sa.cmp_front(sb)))
        .ok_or(Error::EmptySet("Pareto set"))?;

    let pct = |v: i64, cap: u64| {
        if cap == 0 {
            0.0
        } else {
            v as f64 * 100.0 / cap as f64
        }
    };
    let n_cap = cfg.total_nodes as u64;
    let b_cap = cfg.usable_bb_gb();
    let s_cap = cfg.total_ssd_gb();

    let mut chosen: Option<(&SelectionVector, f64)> = None;
    for (sel, o) in &pareto.members {
        if std::ptr::eq(sel, pick_sel) {
            continue;
        }
        let loss = pct(pick.f1() - o.f1(), n_cap);
        let mut gain = pct(o.f2() - pick.f2(), b_cap);
        if o.arity() == 4 {
            gain += pct(o.f3() - pick.f3(), s_cap);
            let base_waste = -pick.f4();
            if base_waste > 0 {
                gain += (base_waste + o.f4()) as f64 * 100.0 / base_waste as f64;
            }
        }
        if gain > multiplier * loss {
            let better = match chosen {
                None => true,
                Some((csel, cg)) => gain > cg || (gain == cg && sel.cmp_front(csel).is_lt()),
            };
            if better {
                chosen = Some((sel, gain));
            }
        }
    }
    let sel = chosen.map(|(s, _)| s).unwrap_or(pick_sel);
    Ok(SelectionVector::new(sel.bits.clone()))
}

/// Nodes chosen for a job together with their SSD capacities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAssignment {
    pub nodes: Vec<usize>,
    pub capacities: Vec<u32>,
}

impl NodeAssignment {
    /// Wasted SSD: assigned capacity minus the request, summed over nodes.
    pub fn waste(&self, ssd_per_node: u32) -> u64 {
        self.capacities
            .iter()
            .map(|&c| (c - ssd_per_node) as u64)
            .sum()
    }
}

/// Chooses free nodes for a job, smallest sufficient SSD class first and
/// lowest node index within a class. `None` if too few eligible nodes are
/// free.
pub fn assign_ssd_nodes(job: &Job, state: &SystemState) -> Option<NodeAssignment> {
    assign_nodes(job.nodes_requested, job.ssd_per_node, state)
}

pub(crate) fn assign_nodes(count: u32, ssd: u32, state: &SystemState) -> Option<NodeAssignment> {
    let eligible: u32 = state
        .free_by_ssd()
        .range(ssd..)
        .map(|(_, &n)| n)
        .sum();
    if eligible < count {
        return None;
    }
    let mut out = NodeAssignment {
        nodes: Vec::with_capacity(count as usize),
        capacities: Vec::with_capacity(count as usize),
    };
    let mut need = count as usize;
    for (&cap, &free) in state.free_by_ssd().range(ssd..) {
        if need == 0 {
            break;
        }
        let take = need.min(free as usize);
        for i in state.free_nodes_in_class(cap, take) {
            out.nodes.push(i);
            out.capacities.push(cap);
        }
        need -= take;
    }
    Some(out)
}
