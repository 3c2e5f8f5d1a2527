#![allow(dead_code)]

use cachesched::model::{generate_instance, GenParams, Instance, Request};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two slots, sizes (2, 3), capacity 3, c_s = 2, c_b = 1.
pub fn tiny() -> Instance {
    Instance {
        slots: 2,
        users: 2,
        sizes: vec![2, 3],
        capacity: 3,
        cost_server: 2,
        cost_cache: 1,
        requests: vec![
            Request { user: 0, index: 0, content: 0, origin: 0, deadline: 1 },
            Request { user: 1, index: 0, content: 1, origin: 0, deadline: 0 },
            Request { user: 1, index: 1, content: 0, origin: 1, deadline: 1 },
        ],
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance with at most `max_cells` slot-content pairs and at most
/// `max_slots` slots.
pub fn random_instance(seed: u64, max_slots: usize, max_contents: usize, max_cells: usize) -> Instance {
    let mut r = rng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xc0ffee);
    let slots = r.gen_range(1..=max_slots.min(max_cells));
    let contents = r.gen_range(1..=max_contents.min(max_cells / slots).max(1));
    let params = GenParams {
        slots,
        users: r.gen_range(1..=8),
        contents,
        size_range: (1, r.gen_range(1..=8)),
        rho: r.gen_range(0.1..0.9),
        gamma: r.gen_range(0.0..1.5),
        alpha: r.gen_range(0.0..=1.0),
        requests_per_user_range: (0, r.gen_range(1..=5)),
        cost_server: r.gen_range(2..=10),
        cost_cache: 1,
        seed,
    };
    generate_instance(&params).unwrap()
}

/// Instances with `F * T <= 12`.
pub fn desk_instance(seed: u64) -> Instance {
    random_instance(seed, 4, 12, 12)
}

/// Rational duals, mostly non-positive.
pub fn random_duals(r: &mut ChaCha8Rng, slots: usize) -> Vec<Ratio<i64>> {
    (0..slots)
        .map(|_| {
            let num = r.gen_range(0..=60);
            let den = r.gen_range(1..=12);
            let sign = if r.gen_bool(0.15) { 1 } else { -1 };
            Ratio::new(sign * num, den)
        })
        .collect()
}

/// `(cost - reference) / reference`, 0 when both are 0.
pub fn rel_gap(cost: u64, reference: u64) -> f64 {
    if reference == 0 {
        if cost == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (cost as f64 - reference as f64) / reference as f64
    }
}

/// Sorted-sample quantile, nearest rank.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Whether some subset of `items` sums to exactly half their total.
pub fn has_equal_split(items: &[u64]) -> bool {
    let total: u64 = items.iter().sum();
    if total % 2 == 1 {
        return false;
    }
    let half = (total / 2) as usize;
    let mut reach = vec![false; half + 1];
    reach[0] = true;
    for &v in items {
        let v = v as usize;
        for s in (v..=half).rev() {
            reach[s] |= reach[s - v];
        }
    }
    reach[half]
}
