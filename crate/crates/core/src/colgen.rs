//! Column generation over per-content caching sequences.
//!
//! The master LP picks a convex combination of pooled sequences per content
//! under the per-slot capacity rows. Pricing for one content is a shortest
//! path on a DAG whose vertices track, for each slot, whether the content is
//! cached and otherwise the last slot it was cached in. That history is what
//! lets arc weights account for which requests a newly cached slot serves.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::cost::{column_cost_for, Cost};
use crate::error::{Error, Result};
use crate::lpsolve::{self, BasisVar, LpColumn, LpProblem, LpStatus};
use crate::model::{Instance, Request};
use crate::rounding::FixSet;
use crate::scalar::Scalar;
use crate::REDUCED_COST_TOL;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column {
    pub content: usize,
    /// Caching decision per slot.
    pub sequence: Vec<bool>,
    pub cost: Cost,
}

impl Column {
    pub fn new(content: usize, sequence: Vec<bool>, requests: &[Request], instance: &Instance) -> Self {
        let cost = column_cost_for(requests, instance.sizes[content], &sequence, instance);
        Column { content, sequence, cost }
    }
}

/// Vertices of the pricing graph. Slots are 1-based here; slot 0 is the
/// virtual slot before the horizon in which nothing is cached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpVertex {
    Source,
    Sink,
    /// Nothing cached before the horizon.
    Start,
    /// Content cached in `slot`.
    Cached {
        slot: usize,
    },
    /// Content not cached in `slot`; last cached in `last` (0 = never).
    Idle {
        slot: usize,
        last: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpArc<W> {
    pub from: usize,
    pub to: usize,
    pub weight: W,
}

/// Pricing DAG for one content. Vertices are stored in topological order.
#[derive(Debug, Clone)]
pub struct SpGraph<W> {
    pub content: usize,
    pub slots: usize,
    vertices: Vec<SpVertex>,
    removed: Vec<bool>,
    arcs: Vec<SpArc<W>>,
    incoming: Vec<Vec<usize>>,
}

impl<W: Scalar> SpGraph<W> {
    fn offset(slot: usize) -> usize {
        // Source, Start, then slot s contributes s + 1 vertices
        2 + (slot - 1) * slot / 2 + (slot - 1)
    }

    pub fn vertex_index(&self, v: SpVertex) -> Option<usize> {
        let t = self.slots;
        let idx = match v {
            SpVertex::Source => 0,
            SpVertex::Start => 1,
            SpVertex::Cached { slot } if (1..=t).contains(&slot) => Self::offset(slot),
            SpVertex::Idle { slot, last } if (1..=t).contains(&slot) && last < slot => Self::offset(slot) + 1 + last,
            SpVertex::Sink => self.vertices.len() - 1,
            _ => return None,
        };
        Some(idx)
    }

    pub fn vertices(&self) -> &[SpVertex] {
        &self.vertices
    }

    pub fn arcs(&self) -> &[SpArc<W>] {
        &self.arcs
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices not pruned by fixes.
    pub fn active_vertex_count(&self) -> usize {
        self.removed.iter().filter(|r| !**r).count()
    }

    pub fn is_removed(&self, v: SpVertex) -> bool {
        self.vertex_index(v).is_none_or(|i| self.removed[i])
    }

    pub fn arc_weight(&self, from: SpVertex, to: SpVertex) -> Option<W> {
        let (a, b) = (self.vertex_index(from)?, self.vertex_index(to)?);
        self.incoming[b].iter().map(|&k| &self.arcs[k]).find(|arc| arc.from == a).map(|arc| arc.weight)
    }

    fn add_arc(&mut self, from: SpVertex, to: SpVertex, weight: W) {
        let (a, b) = (self.vertex_index(from).unwrap(), self.vertex_index(to).unwrap());
        if self.removed[a] || self.removed[b] {
            return;
        }
        self.incoming[b].push(self.arcs.len());
        self.arcs.push(SpArc { from: a, to: b, weight });
    }
}

/// `gain[o][d]` (1-based, `d` up to `T + 1`): saving from serving, in a slot
/// `>= d`, every request for the content made in slot `o` with deadline `>= d`.
fn gains(requests: &[Request], slots: usize, unit_saving: i64) -> Vec<Vec<i64>> {
    let mut gain = vec![vec![0i64; slots + 2]; slots + 1];
    for r in requests {
        gain[r.origin + 1][r.deadline + 1] += unit_saving;
    }
    for row in gain.iter_mut() {
        for d in (1..=slots).rev() {
            row[d] += row[d + 1];
        }
    }
    gain
}

pub fn build_sp_graph<W: Scalar>(content: usize, pi: &[W], instance: &Instance, fixes: &FixSet) -> SpGraph<W> {
    let requests: Vec<Request> = instance.requests.iter().filter(|r| r.content == content).copied().collect();
    build_sp_graph_for(content, &requests, pi, instance, fixes)
}

/// Builds the pricing graph from the requests for `content` only.
pub fn build_sp_graph_for<W: Scalar>(
    content: usize,
    requests: &[Request],
    pi: &[W],
    instance: &Instance,
    fixes: &FixSet,
) -> SpGraph<W> {
    let t_max = instance.slots;
    assert_eq!(pi.len(), t_max, "dual vector length must equal the number of slots");
    let size = instance.sizes[content] as i64;
    let full_cost = W::from_int(size * instance.cost_server as i64 * requests.len() as i64);
    let update = W::from_int(size * instance.unit_update_cost() as i64);
    let gain = gains(requests, t_max, size * instance.unit_update_cost() as i64);
    let dual = |t: usize| -(W::from_int(size) * pi[t - 1]);

    let mut vertices = vec![SpVertex::Source, SpVertex::Start];
    for slot in 1..=t_max {
        vertices.push(SpVertex::Cached { slot });
        vertices.extend((0..slot).map(|last| SpVertex::Idle { slot, last }));
    }
    vertices.push(SpVertex::Sink);
    let n = vertices.len();
    let mut g = SpGraph {
        content,
        slots: t_max,
        vertices,
        removed: vec![false; n],
        arcs: Vec::new(),
        incoming: vec![Vec::new(); n],
    };

    for (slot, value) in fixes.for_content(content) {
        let t = slot + 1;
        if value {
            // cached in t: no vertex may claim the last cached slot is before t
            for j in t..=t_max {
                for last in 0..t {
                    let i = g.vertex_index(SpVertex::Idle { slot: j, last }).unwrap();
                    g.removed[i] = true;
                }
            }
        } else {
            let i = g.vertex_index(SpVertex::Cached { slot: t }).unwrap();
            g.removed[i] = true;
        }
    }

    g.add_arc(SpVertex::Source, SpVertex::Start, full_cost);
    g.add_arc(SpVertex::Start, SpVertex::Cached { slot: 1 }, update + dual(1) - W::from_int(gain[1][1]));
    g.add_arc(SpVertex::Start, SpVertex::Idle { slot: 1, last: 0 }, W::zero());
    for t in 2..=t_max {
        let cached = SpVertex::Cached { slot: t };
        g.add_arc(SpVertex::Cached { slot: t - 1 }, cached, dual(t) - W::from_int(gain[t][t]));
        // saving of requests made in k+1..=t that are still open at t
        let mut pending = 0i64;
        for k in (0..t - 1).rev() {
            pending += gain[k + 1][t];
            if k == t - 2 {
                pending += gain[t][t];
            }
            g.add_arc(SpVertex::Idle { slot: t - 1, last: k }, cached, update + dual(t) - W::from_int(pending));
        }
        for last in 0..t - 1 {
            g.add_arc(SpVertex::Idle { slot: t - 1, last }, SpVertex::Idle { slot: t, last }, W::zero());
        }
        g.add_arc(SpVertex::Cached { slot: t - 1 }, SpVertex::Idle { slot: t, last: t - 1 }, W::zero());
    }
    g.add_arc(SpVertex::Cached { slot: t_max }, SpVertex::Sink, W::zero());
    for last in 0..t_max {
        g.add_arc(SpVertex::Idle { slot: t_max, last }, SpVertex::Sink, W::zero());
    }
    g
}

#[derive(Clone)]
struct Label<W> {
    dist: W,
    ones: usize,
    prefix: Vec<bool>,
}

impl<W: Scalar> Label<W> {
    fn better_than(&self, other: &Label<W>) -> bool {
        if self.dist < other.dist {
            return true;
        }
        if self.dist > other.dist {
            return false;
        }
        (self.ones, &self.prefix) < (other.ones, &other.prefix)
    }
}

/// Shortest Source-Sink path by relaxation in topological order. Ties go to
/// fewer cached slots, then to the lexicographically smallest sequence.
/// Returns the decoded caching sequence and the path length.
pub fn shortest_path<W: Scalar>(graph: &SpGraph<W>) -> Result<(Vec<bool>, W)> {
    let n = graph.vertices.len();
    let mut labels: Vec<Option<Label<W>>> = vec![None; n];
    labels[0] = Some(Label { dist: W::zero(), ones: 0, prefix: Vec::new() });
    for v in 1..n {
        if graph.removed[v] {
            continue;
        }
        let step = match graph.vertices[v] {
            SpVertex::Cached { .. } => Some(true),
            SpVertex::Idle { .. } => Some(false),
            _ => None,
        };
        let mut best: Option<Label<W>> = None;
        for &k in &graph.incoming[v] {
            let arc = &graph.arcs[k];
            debug_assert!(arc.from < v, "vertices must be stored in topological order");
            let Some(from) = &labels[arc.from] else { continue };
            let mut prefix = from.prefix.clone();
            if let Some(bit) = step {
                prefix.push(bit);
            }
            let cand =
                Label { dist: from.dist + arc.weight, ones: from.ones + usize::from(step == Some(true)), prefix };
            if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                best = Some(cand);
            }
        }
        labels[v] = best;
    }
    match labels.pop().flatten() {
        Some(label) => Ok((label.prefix, label.dist)),
        None => Err(Error::PricingInfeasible { content: graph.content }),
    }
}

/// Pricing for one content: returns the minimizer of
/// `C_f - sum_t l_f * pi_t * x_t` and its value.
pub fn price_content<W: Scalar>(
    content: usize,
    requests: &[Request],
    pi: &[W],
    instance: &Instance,
    fixes: &FixSet,
) -> Result<(Vec<bool>, W)> {
    shortest_path(&build_sp_graph_for(content, requests, pi, instance, fixes))
}

pub type ColumnId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledColumn {
    pub id: ColumnId,
    pub column: Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RmpBasisVar {
    Column(ColumnId),
    Slack(usize),
}

/// Active columns of all contents, deduplicated by `(content, sequence)`.
#[derive(Debug, Clone)]
pub struct ColumnPool {
    entries: Vec<PooledColumn>,
    seen: Vec<HashSet<Vec<bool>>>,
    next_id: ColumnId,
    /// Basis of the last master solve, used to warm-start the next one.
    basis_hint: Option<Vec<RmpBasisVar>>,
}

impl ColumnPool {
    pub fn new(contents: usize) -> Self {
        ColumnPool { entries: Vec::new(), seen: vec![HashSet::new(); contents], next_id: 0, basis_hint: None }
    }

    /// Pool holding the never-cache column of every content.
    pub fn seeded(instance: &Instance) -> Self {
        let mut pool = Self::new(instance.contents());
        for (f, reqs) in instance.requests_by_content().iter().enumerate() {
            pool.add(Column::new(f, vec![false; instance.slots], reqs, instance));
        }
        pool
    }

    /// Adds the column unless an identical sequence is pooled for its content.
    pub fn add(&mut self, column: Column) -> Option<ColumnId> {
        if !self.seen[column.content].insert(column.sequence.clone()) {
            return None;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.entries.push(PooledColumn { id, column });
        Some(id)
    }

    pub fn contains(&self, content: usize, sequence: &[bool]) -> bool {
        self.seen[content].contains(sequence)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PooledColumn] {
        &self.entries
    }

    pub fn columns_for(&self, content: usize) -> impl Iterator<Item = &PooledColumn> {
        self.entries.iter().filter(move |e| e.column.content == content)
    }

    /// Permanently drops every column that violates a fix. Returns how many.
    pub fn discard_incompatible(&mut self, fixes: &FixSet) -> usize {
        let before = self.entries.len();
        let seen = &mut self.seen;
        self.entries.retain(|e| {
            let keep = fixes.admits(e.column.content, &e.column.sequence);
            if !keep {
                seen[e.column.content].remove(&e.column.sequence);
            }
            keep
        });
        before - self.entries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmpSolution {
    /// Pool ids of the columns in the master, aligned with `weights`.
    pub column_ids: Vec<ColumnId>,
    pub weights: Vec<f64>,
    pub pi: Vec<f64>,
    pub beta: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<RmpBasisVar>,
}

impl RmpSolution {
    pub fn weight_of(&self, id: ColumnId) -> Option<f64> {
        self.column_ids.iter().position(|&c| c == id).map(|k| self.weights[k])
    }
}

/// Solves the restricted master over the pool, warm-started from the pool's
/// previous basis where it is still valid.
pub fn solve_rmp(pool: &mut ColumnPool, instance: &Instance) -> Result<RmpSolution> {
    let mut covered = vec![false; instance.contents()];
    for e in &pool.entries {
        covered[e.column.content] = true;
    }
    if let Some(f) = covered.iter().position(|c| !c) {
        return Err(Error::Contract(format!("content {} has no pooled column", f + 1)));
    }

    let problem = LpProblem {
        capacity: vec![instance.capacity as f64; instance.slots],
        groups: instance.contents(),
        columns: pool
            .entries
            .iter()
            .map(|e| {
                let size = instance.sizes[e.column.content] as f64;
                LpColumn {
                    group: e.column.content,
                    cost: e.column.cost as f64,
                    usage: e.column.sequence.iter().enumerate().filter(|(_, &x)| x).map(|(t, _)| (t, size)).collect(),
                }
            })
            .collect(),
    };

    let index: HashMap<ColumnId, usize> = pool.entries.iter().enumerate().map(|(k, e)| (e.id, k)).collect();
    let start = pool.basis_hint.as_ref().map(|hint| warm_basis(hint, pool, &index));
    let lp = lpsolve::solve_lp_from(&problem, start.as_deref())?;
    if lp.status == LpStatus::Infeasible {
        return Err(Error::Contract("restricted master problem is infeasible".into()));
    }
    let basis: Vec<RmpBasisVar> = lp
        .basis
        .iter()
        .map(|b| match *b {
            BasisVar::Column(k) => RmpBasisVar::Column(pool.entries[k].id),
            BasisVar::Slack(t) => RmpBasisVar::Slack(t),
        })
        .collect();
    pool.basis_hint = Some(basis.clone());
    Ok(RmpSolution {
        column_ids: pool.entries.iter().map(|e| e.id).collect(),
        weights: lp.primal,
        pi: lp.pi,
        beta: lp.beta,
        objective: lp.objective,
        basis,
    })
}

/// Maps a previous basis onto the current pool, replacing discarded basic
/// columns by the newest column of each content left without a basic column.
/// The LP falls back to a cold start if the result is not a feasible basis.
fn warm_basis(hint: &[RmpBasisVar], pool: &ColumnPool, index: &HashMap<ColumnId, usize>) -> Vec<BasisVar> {
    let mut out: Vec<BasisVar> = hint
        .iter()
        .filter_map(|b| match b {
            RmpBasisVar::Column(id) => index.get(id).map(|&k| BasisVar::Column(k)),
            RmpBasisVar::Slack(t) => Some(BasisVar::Slack(*t)),
        })
        .collect();
    let missing = hint.len() - out.len();
    if missing == 0 {
        return out;
    }
    let mut has_basic = vec![false; pool.seen.len()];
    for b in &out {
        if let BasisVar::Column(k) = b {
            has_basic[pool.entries[*k].column.content] = true;
        }
    }
    let fill = has_basic
        .iter()
        .enumerate()
        .filter(|(_, has)| !**has)
        .filter_map(|(f, _)| (0..pool.entries.len()).rev().find(|&k| pool.entries[k].column.content == f));
    out.extend(fill.take(missing).map(BasisVar::Column));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgaIteration {
    pub iteration: usize,
    pub objective: f64,
    pub columns_added: usize,
}

#[derive(Debug, Clone)]
pub struct CgaOutcome {
    pub solution: RmpSolution,
    pub rmp_solves: usize,
    pub columns_added: usize,
    /// Smallest reduced cost found in the final pricing round.
    pub min_reduced_cost: f64,
    pub history: Vec<CgaIteration>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CgaOptions {
    /// Cap on master solves; defaults to `10 * F * T`.
    pub max_rmp_solves: Option<usize>,
}

pub fn run_cga(instance: &Instance, fixes: &FixSet, pool: &mut ColumnPool) -> Result<CgaOutcome> {
    run_cga_with(instance, fixes, pool, CgaOptions::default())
}

pub fn run_cga_with(
    instance: &Instance,
    fixes: &FixSet,
    pool: &mut ColumnPool,
    options: CgaOptions,
) -> Result<CgaOutcome> {
    let cap = options.max_rmp_solves.unwrap_or(10 * instance.contents() * instance.slots).max(1);
    let by_content = instance.requests_by_content();
    let mut history = Vec::new();
    let mut added_total = 0;
    let mut best_bound = f64::INFINITY;
    for iteration in 1..=cap {
        let solution = solve_rmp(pool, instance)?;
        best_bound = best_bound.min(solution.objective);

        let priced: Vec<Result<(Column, f64)>> = by_content
            .par_iter()
            .enumerate()
            .map(|(f, reqs)| {
                let (sequence, _) = price_content(f, reqs, &solution.pi, instance, fixes)?;
                let column = Column::new(f, sequence, reqs, instance);
                let size = instance.sizes[f] as f64;
                let dual_use: f64 =
                    column.sequence.iter().zip(&solution.pi).filter(|(&x, _)| x).map(|(_, &p)| size * p).sum();
                let reduced = column.cost as f64 - dual_use - solution.beta[f];
                Ok((column, reduced))
            })
            .collect();

        let mut added = 0;
        let mut min_rc = f64::INFINITY;
        for item in priced {
            let (column, reduced) = item?;
            min_rc = min_rc.min(reduced);
            if reduced < -REDUCED_COST_TOL && pool.add(column).is_some() {
                added += 1;
            }
        }
        added_total += added;
        history.push(CgaIteration { iteration, objective: solution.objective, columns_added: added });
        if added == 0 {
            return Ok(CgaOutcome {
                solution,
                rmp_solves: iteration,
                columns_added: added_total,
                min_reduced_cost: min_rc,
                history,
            });
        }
    }
    Err(Error::Convergence { iterations: cap, best_bound })
}

/// Converged master objective with no fixes: a lower bound on the cost of
/// every capacity-feasible plan.
pub fn lower_bound(instance: &Instance) -> Result<f64> {
    let mut pool = ColumnPool::seeded(instance);
    Ok(run_cga(instance, &FixSet::new(), &mut pool)?.solution.objective)
}
