//! Rounding of fractional master solutions and the repeated column
//! generation driver.
//!
//! Rounding works on the aggregated matrix `z[t][f]`, the total weight of the
//! columns that cache `f` in slot `t`. Each step permanently fixes one or more
//! `(slot, content)` decisions, drops the pooled columns that contradict them,
//! and adds a column per content that caches exactly the slots fixed to one.
//! Column generation is then rerun under the fixes until the master is
//! integral.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use crate::colgen::{run_cga_with, CgaOptions, Column, ColumnPool, RmpSolution};
use crate::cost::{check_capacity, total_cost, CachePlan, Cost};
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::INTEGRALITY_EPS;

/// Permanent caching decisions, `(slot, content) -> cached`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixSet {
    by_content: BTreeMap<usize, BTreeMap<usize, bool>>,
    count: usize,
}

impl FixSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: usize, content: usize) -> Option<bool> {
        self.by_content.get(&content).and_then(|m| m.get(&slot)).copied()
    }

    /// Records a decision. Returns whether it is new; re-fixing to the same
    /// value is a no-op, to the other value an error.
    pub fn fix(&mut self, slot: usize, content: usize, cached: bool) -> Result<bool> {
        let entry = self.by_content.entry(content).or_default();
        match entry.get(&slot) {
            Some(&v) if v == cached => Ok(false),
            Some(_) => Err(Error::Contract(format!(
                "x[{}][{}] is already fixed to {}",
                slot + 1,
                content + 1,
                u8::from(!cached)
            ))),
            None => {
                entry.insert(slot, cached);
                self.count += 1;
                Ok(true)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Fixed `(slot, value)` pairs of one content, by slot.
    pub fn for_content(&self, content: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.by_content.get(&content).into_iter().flat_map(|m| m.iter().map(|(&t, &v)| (t, v)))
    }

    /// All fixes as `(slot, content, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        self.by_content.iter().flat_map(|(&f, m)| m.iter().map(move |(&t, &v)| (t, f, v)))
    }

    /// Whether a caching sequence agrees with every fix of its content.
    pub fn admits(&self, content: usize, sequence: &[bool]) -> bool {
        self.for_content(content).all(|(t, v)| sequence[t] == v)
    }

    /// Volume fixed into the cache in `slot`.
    pub fn fixed_load(&self, slot: usize, instance: &Instance) -> u64 {
        self.by_content.iter().filter(|(_, m)| m.get(&slot) == Some(&true)).map(|(&f, _)| instance.sizes[f]).sum()
    }

    /// Capacity left in `slot` after the contents fixed to one.
    pub fn spare(&self, slot: usize, instance: &Instance) -> i64 {
        instance.capacity as i64 - self.fixed_load(slot, instance) as i64
    }

    /// Sequence caching the content exactly in its slots fixed to one.
    pub fn forced_sequence(&self, content: usize, slots: usize) -> Vec<bool> {
        let mut seq = vec![false; slots];
        for (t, v) in self.for_content(content) {
            seq[t] = v;
        }
        seq
    }
}

/// `z[t][f]`: total master weight of the columns caching `f` in slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZMatrix {
    pub z: Vec<Vec<f64>>,
}

impl ZMatrix {
    pub fn is_binary(&self) -> bool {
        self.z.iter().flatten().all(|&v| v <= INTEGRALITY_EPS || v >= 1.0 - INTEGRALITY_EPS)
    }

    /// Entries strictly between `eps` and `1 - eps`, as `(slot, content, z)`
    /// in slot-major order.
    pub fn fractional(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (t, row) in self.z.iter().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                if v > INTEGRALITY_EPS && v < 1.0 - INTEGRALITY_EPS {
                    out.push((t, f, v));
                }
            }
        }
        out
    }

    pub fn to_plan(&self) -> Result<CachePlan> {
        CachePlan::from_matrix(self.z.iter().map(|row| row.iter().map(|&v| v > 0.5).collect()).collect())
    }
}

pub fn compute_z(solution: &RmpSolution, pool: &ColumnPool, instance: &Instance) -> Result<ZMatrix> {
    let by_id: HashMap<_, _> = pool.entries().iter().map(|e| (e.id, &e.column)).collect();
    let mut z = vec![vec![0.0; instance.contents()]; instance.slots];
    for (id, &w) in solution.column_ids.iter().zip(&solution.weights) {
        let column =
            by_id.get(id).ok_or_else(|| Error::Contract(format!("master solution references unknown column {id}")))?;
        for (t, &x) in column.sequence.iter().enumerate() {
            if x {
                z[t][column.content] += w;
            }
        }
    }
    for v in z.iter_mut().flatten() {
        if *v < 0.0 && *v > -1e-9 {
            *v = 0.0;
        } else if *v > 1.0 && *v < 1.0 + 1e-9 {
            *v = 1.0;
        }
    }
    Ok(ZMatrix { z })
}

/// Whether every column weight is within the integrality tolerance of 0 or 1.
pub fn weights_integral(solution: &RmpSolution) -> bool {
    solution.weights.iter().all(|&w| w <= INTEGRALITY_EPS || w >= 1.0 - INTEGRALITY_EPS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraReport {
    pub fractional: usize,
    pub new_fixes: usize,
    pub discarded: usize,
    pub auxiliary_added: usize,
}

/// One rounding step on a fractional master solution.
///
/// 1. Fix to one every `z >= 1 - eps`.
/// 2. Take the fractional entry nearest zero and the one nearest one (ties:
///    smallest slot, then content).
/// 3. If the first is closer to its bound, fix it to zero. Otherwise fix the
///    second to one if the content fits the spare capacity of its slot, else
///    to zero.
/// 4. Fix to zero every unfixed content larger than the spare capacity of a
///    slot.
/// 5. Drop incompatible columns and add, per content, the column caching
///    exactly its slots fixed to one.
pub fn tra_step(
    solution: &RmpSolution,
    pool: &mut ColumnPool,
    fixes: &mut FixSet,
    instance: &Instance,
) -> Result<TraReport> {
    let z = compute_z(solution, pool, instance)?;
    let fractional = z.fractional();
    if fractional.is_empty() {
        return Err(Error::Contract("rounding step called on an integral master solution".into()));
    }
    let mut new_fixes = 0;

    for (t, row) in z.z.iter().enumerate() {
        for (f, &v) in row.iter().enumerate() {
            if v >= 1.0 - INTEGRALITY_EPS
                && fixes.get(t, f).is_none()
                && instance.sizes[f] as i64 <= fixes.spare(t, instance)
            {
                new_fixes += usize::from(fixes.fix(t, f, true)?);
            }
        }
    }

    let mut nearest_zero = fractional[0];
    let mut nearest_one = fractional[0];
    for &entry in &fractional[1..] {
        if entry.2 < nearest_zero.2 {
            nearest_zero = entry;
        }
        if 1.0 - entry.2 < 1.0 - nearest_one.2 {
            nearest_one = entry;
        }
    }
    let (t, f, decision) = if nearest_zero.2 < 1.0 - nearest_one.2 {
        (nearest_zero.0, nearest_zero.1, false)
    } else {
        let (t, f, _) = nearest_one;
        (t, f, instance.sizes[f] as i64 <= fixes.spare(t, instance))
    };
    new_fixes += usize::from(fixes.fix(t, f, decision)?);

    for t in 0..instance.slots {
        let spare = fixes.spare(t, instance);
        for f in 0..instance.contents() {
            if fixes.get(t, f).is_none() && instance.sizes[f] as i64 > spare {
                new_fixes += usize::from(fixes.fix(t, f, false)?);
            }
        }
    }
    if new_fixes == 0 {
        return Err(Error::Contract("rounding step made no new decision".into()));
    }

    let discarded = pool.discard_incompatible(fixes);
    let by_content = instance.requests_by_content();
    let mut auxiliary_added = 0;
    for (f, reqs) in by_content.iter().enumerate() {
        let seq = fixes.forced_sequence(f, instance.slots);
        auxiliary_added += usize::from(pool.add(Column::new(f, seq, reqs, instance)).is_some());
    }
    Ok(TraReport { fractional: fractional.len(), new_fixes, discarded, auxiliary_added })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcgaIteration {
    pub iteration: usize,
    pub fixes: usize,
    pub fractional: usize,
    pub objective: f64,
    pub rmp_solves: usize,
}

#[derive(Debug, Clone)]
pub struct RcgaOutcome {
    pub plan: CachePlan,
    pub cost: Cost,
    /// Objective of the first, fix-free column generation pass.
    pub lower_bound: f64,
    /// Column generation passes, including the final integral one.
    pub iterations: usize,
    /// Rounding steps taken; at most `F * T`.
    pub rounding_steps: usize,
    /// Passes where weight integrality and z-binarity disagreed.
    pub integrality_mismatches: usize,
    /// Most negative reduced cost left at the end of any pass.
    pub worst_final_reduced_cost: f64,
    pub lower_bound_millis: f64,
    pub trace: Vec<RcgaIteration>,
    pub fixes: FixSet,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RcgaOptions {
    pub cga: CgaOptions,
}

pub fn run_rcga(instance: &Instance) -> Result<RcgaOutcome> {
    run_rcga_with(instance, RcgaOptions::default())
}

pub fn run_rcga_with(instance: &Instance, options: RcgaOptions) -> Result<RcgaOutcome> {
    instance.validate()?;
    let started = Instant::now();
    let mut pool = ColumnPool::seeded(instance);
    let mut fixes = FixSet::new();
    let mut trace = Vec::new();
    let mut lower_bound = None;
    let mut lower_bound_millis = 0.0;
    let mut mismatches = 0;
    let mut worst_rc = f64::INFINITY;
    let mut rounding_steps = 0;

    loop {
        let cga = run_cga_with(instance, &fixes, &mut pool, options.cga)?;
        worst_rc = worst_rc.min(cga.min_reduced_cost);
        if lower_bound.is_none() {
            lower_bound = Some(cga.solution.objective);
            lower_bound_millis = started.elapsed().as_secs_f64() * 1e3;
        }
        let z = compute_z(&cga.solution, &pool, instance)?;
        let binary = z.is_binary();
        if binary != weights_integral(&cga.solution) {
            mismatches += 1;
        }
        let iteration = trace.len() + 1;
        trace.push(RcgaIteration {
            iteration,
            fixes: fixes.len(),
            fractional: z.fractional().len(),
            objective: cga.solution.objective,
            rmp_solves: cga.rmp_solves,
        });
        if binary {
            let plan = z.to_plan()?;
            if let Err(v) = check_capacity(&plan, instance) {
                return Err(Error::Contract(format!("rounded plan violates capacity: {v}")));
            }
            if let Some((t, f, v)) = fixes.iter().find(|&(t, f, v)| plan.is_cached(t, f) != v) {
                return Err(Error::Contract(format!("plan contradicts fix x[{}][{}] = {}", t + 1, f + 1, u8::from(v))));
            }
            let cost = total_cost(&plan, instance)?;
            return Ok(RcgaOutcome {
                plan,
                cost,
                lower_bound: lower_bound.unwrap_or(0.0),
                iterations: iteration,
                rounding_steps,
                integrality_mismatches: mismatches,
                worst_final_reduced_cost: worst_rc,
                lower_bound_millis,
                trace,
                fixes,
            });
        }
        tra_step(&cga.solution, &mut pool, &mut fixes, instance)?;
        rounding_steps += 1;
        if rounding_steps > instance.slots * instance.contents() {
            return Err(Error::Contract("rounding exceeded one step per decision variable".into()));
        }
    }
}
