//! Slot-by-slot greedy baselines: popularity-based caching (PBC) and
//! random-based caching (RBC).
//!
//! Both walk the slots in order with a fresh spare-capacity counter, visit
//! the contents in some order and apply the same three-case update rule:
//! skip what does not fit, keep what was cached in the previous slot, and
//! admit a new content only if it is at least as popular as the least
//! popular previously cached contents that follow it in the ordering and
//! would have to make room for it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{check_capacity, total_cost, CachePlan, Cost};
use crate::error::{Error, Result};
use crate::model::Instance;

/// Added to every weight of the RBC ordering so unrequested contents can
/// still be drawn.
pub const RBC_WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyOutcome {
    pub plan: CachePlan,
    pub cost: Cost,
}

/// `P[t][f]`: number of requests for `f` whose deadline is slot `t`.
pub fn popularity(instance: &Instance) -> Vec<Vec<u64>> {
    let mut p = vec![vec![0; instance.contents()]; instance.slots];
    for r in &instance.requests {
        p[r.deadline][r.content] += 1;
    }
    p
}

/// Decides slot `t` given the visiting order, the previous slot's row and
/// the slot's popularity.
fn greedy_slot(order: &[usize], prev: &[bool], pop: &[u64], instance: &Instance) -> Vec<bool> {
    let mut row = vec![false; instance.contents()];
    let mut spare = instance.capacity;
    for (pos, &f) in order.iter().enumerate() {
        let size = instance.sizes[f];
        if size > spare {
            continue;
        }
        if prev[f] {
            row[f] = true;
            spare -= size;
            continue;
        }
        let mut psi: Vec<usize> = order[pos + 1..].iter().copied().filter(|&i| prev[i]).collect();
        let (mut evicted_pop, mut evicted_size) = (0u64, 0u64);
        while evicted_size <= size && !psi.is_empty() {
            let k = (0..psi.len()).min_by_key(|&k| (pop[psi[k]], psi[k])).unwrap();
            let victim = psi.swap_remove(k);
            evicted_pop += pop[victim];
            evicted_size += instance.sizes[victim];
        }
        if pop[f] >= evicted_pop && pop[f] > 0 {
            row[f] = true;
            spare -= size;
        }
    }
    row
}

fn run_greedy(instance: &Instance, mut order_for: impl FnMut(&[u64]) -> Vec<usize>) -> Result<GreedyOutcome> {
    instance.validate()?;
    let pop = popularity(instance);
    let mut x: Vec<Vec<bool>> = Vec::with_capacity(instance.slots);
    let mut prev = vec![false; instance.contents()];
    for p in &pop {
        let order = order_for(p);
        let row = greedy_slot(&order, &prev, p, instance);
        prev.clone_from(&row);
        x.push(row);
    }
    let plan = CachePlan::from_matrix(x)?;
    if let Err(v) = check_capacity(&plan, instance) {
        return Err(Error::Contract(format!("greedy plan violates capacity: {v}")));
    }
    let cost = total_cost(&plan, instance)?;
    Ok(GreedyOutcome { plan, cost })
}

/// Contents by descending popularity, ties by smaller id.
pub fn popularity_order(pop: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by_key(|&f| (std::cmp::Reverse(pop[f]), f));
    order
}

/// Random ordering without replacement, each draw proportional to
/// `P + RBC_WEIGHT_FLOOR` among the contents left.
pub fn weighted_order<R: Rng>(pop: &[u64], rng: &mut R) -> Vec<usize> {
    // exponential keys: sorting by ln(u)/w descending is sequential weighted sampling
    let mut keyed: Vec<(f64, usize)> = pop
        .iter()
        .enumerate()
        .map(|(f, &p)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / (p as f64 + RBC_WEIGHT_FLOOR), f)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, f)| f).collect()
}

pub fn run_pbc(instance: &Instance) -> Result<GreedyOutcome> {
    run_greedy(instance, popularity_order)
}

pub fn run_rbc(instance: &Instance, seed: u64) -> Result<GreedyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_greedy(instance, |p| weighted_order(p, &mut rng))
}
