//! Problem instances: data model, random generator, the Partition-reduction
//! constructor and the JSON instance document.
//!
//! Everything is 0-based in memory. The on-disk document is 1-based for user,
//! request index, content and slot ids.

use std::io::{Read, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Request {
    pub user: usize,
    /// Position of the request within its user's request list.
    pub index: usize,
    pub content: usize,
    pub origin: usize,
    pub deadline: usize,
}

impl Request {
    /// Slots in which the request may be served from the cache.
    pub fn window(&self) -> std::ops::RangeInclusive<usize> {
        self.origin..=self.deadline
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub slots: usize,
    pub users: usize,
    pub sizes: Vec<u64>,
    pub capacity: u64,
    pub cost_server: u64,
    pub cost_cache: u64,
    pub requests: Vec<Request>,
}

impl Instance {
    pub fn contents(&self) -> usize {
        self.sizes.len()
    }

    /// Cost of bringing one data unit into the cache, `c_s - c_b`.
    pub fn unit_update_cost(&self) -> u64 {
        self.cost_server - self.cost_cache
    }

    /// Requests grouped by content, in request-list order.
    pub fn requests_by_content(&self) -> Vec<Vec<Request>> {
        let mut out = vec![Vec::new(); self.contents()];
        for r in &self.requests {
            out[r.content].push(*r);
        }
        out
    }

    /// Checks every instance invariant.
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::Param("T must be at least 1".into()));
        }
        if self.cost_server <= self.cost_cache {
            return Err(Error::Param(format!(
                "cost_server ({}) must exceed cost_cache ({})",
                self.cost_server, self.cost_cache
            )));
        }
        if let Some(f) = self.sizes.iter().position(|&l| l == 0) {
            return Err(Error::Param(format!("sizes[{}] must be positive", f + 1)));
        }
        for (i, r) in self.requests.iter().enumerate() {
            check_request(i, r, self)?;
        }
        Ok(())
    }
}

fn check_request(i: usize, r: &Request, inst: &Instance) -> Result<()> {
    let bad = |field: &str, msg: String| Err(Error::Parse(format!("requests[{i}].{field}: {msg}")));
    if r.user >= inst.users {
        return bad("user", format!("user {} outside 1..={}", r.user + 1, inst.users));
    }
    if r.content >= inst.contents() {
        return bad("content", format!("content {} outside 1..={}", r.content + 1, inst.contents()));
    }
    if r.origin >= inst.slots {
        return bad("origin", format!("slot {} outside 1..={}", r.origin + 1, inst.slots));
    }
    if r.deadline >= inst.slots {
        return bad("deadline", format!("slot {} outside 1..={}", r.deadline + 1, inst.slots));
    }
    if r.deadline < r.origin {
        return bad("deadline", format!("deadline {} precedes origin {}", r.deadline + 1, r.origin + 1));
    }
    Ok(())
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    #[serde(rename = "T")]
    pub slots: usize,
    #[serde(rename = "U")]
    pub users: usize,
    #[serde(rename = "F")]
    pub contents: usize,
    pub size_range: (u64, u64),
    pub rho: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub requests_per_user_range: (usize, usize),
    pub cost_server: u64,
    pub cost_cache: u64,
    pub seed: u64,
}

impl GenParams {
    /// Full-scale simulation defaults: T=24, U=600, F=200, sizes in [1,10],
    /// rho=0.5, gamma=0.56, alpha=1, 1..=10 requests per user, c_s=10, c_b=1.
    pub fn full_scale() -> Self {
        GenParams {
            slots: 24,
            users: 600,
            contents: 200,
            size_range: (1, 10),
            rho: 0.5,
            gamma: 0.56,
            alpha: 1.0,
            requests_per_user_range: (1, 10),
            cost_server: 10,
            cost_cache: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Param(m.to_string()));
        if self.slots == 0 {
            return err("T must be at least 1");
        }
        if self.contents == 0 {
            return err("F must be at least 1");
        }
        let (lmin, lmax) = self.size_range;
        if lmin == 0 || lmin > lmax {
            return err("size_range must be a non-empty range of positive sizes");
        }
        let (rmin, rmax) = self.requests_per_user_range;
        if rmin > rmax {
            return err("requests_per_user_range must be non-empty");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return err("rho must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return err("alpha must lie in [0, 1]");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return err("gamma must be a finite non-negative number");
        }
        if self.cost_server <= self.cost_cache {
            return err("cost_server must exceed cost_cache");
        }
        Ok(())
    }
}

/// ZipF request probabilities for ranks `1..=contents`.
pub fn zipf_probabilities(contents: usize, gamma: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=contents).map(|r| (r as f64).powf(-gamma)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws a random instance. Popularity varies over time through an independent
/// random permutation of content ranks in every slot; a request draws a ZipF
/// rank and maps it through the permutation of its origin slot.
pub fn generate_instance(params: &GenParams) -> Result<Instance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (lmin, lmax) = params.size_range;
    let sizes: Vec<u64> = (0..params.contents).map(|_| rng.gen_range(lmin..=lmax)).collect();
    let total: u64 = sizes.iter().sum();
    let capacity = (params.rho * total as f64).round() as u64;

    let rank_to_content: Vec<Vec<usize>> = (0..params.slots)
        .map(|_| {
            let mut perm: Vec<usize> = (0..params.contents).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();
    let zipf = WeightedIndex::new(zipf_probabilities(params.contents, params.gamma))
        .map_err(|e| Error::Param(format!("ZipF weights: {e}")))?;

    let (rmin, rmax) = params.requests_per_user_range;
    let last = params.slots - 1;
    let mut requests = Vec::new();
    for user in 0..params.users {
        let count = rng.gen_range(rmin..=rmax);
        for index in 0..count {
            let origin = rng.gen_range(0..params.slots);
            let rank = zipf.sample(&mut rng);
            let slack = (params.alpha * (last - origin) as f64).floor() as usize;
            let deadline = origin + rng.gen_range(0..=slack);
            requests.push(Request { user, index, content: rank_to_content[origin][rank], origin, deadline });
        }
    }

    Ok(Instance {
        slots: params.slots,
        users: params.users,
        sizes,
        capacity,
        cost_server: params.cost_server,
        cost_cache: params.cost_cache,
        requests,
    })
}

/// Instance from the Partition reduction: one slot, content `f` has size
/// `integers[f]` and is requested by exactly two users, capacity is half the
/// total size (rounded down when the total is odd), `c_s = 2`, `c_b = 1`.
///
/// Caching content `f` then saves exactly `l_f`, so the optimal saving reaches
/// half the total iff the integers admit an equal-sum split.
pub fn build_partition_instance(integers: &[u64]) -> Result<Instance> {
    if integers.is_empty() {
        return Err(Error::Param("partition instance needs at least one integer".into()));
    }
    if integers.contains(&0) {
        return Err(Error::Param("partition integers must be positive".into()));
    }
    let total: u64 = integers.iter().sum();
    let requests = (0..integers.len())
        .flat_map(|f| (0..2).map(move |k| Request { user: 2 * f + k, index: 0, content: f, origin: 0, deadline: 0 }))
        .collect();
    Ok(Instance {
        slots: 1,
        users: 2 * integers.len(),
        sizes: integers.to_vec(),
        capacity: total / 2,
        cost_server: 2,
        cost_cache: 1,
        requests,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    #[serde(rename = "T")]
    slots: usize,
    #[serde(rename = "F")]
    contents: usize,
    #[serde(rename = "U")]
    users: usize,
    capacity: u64,
    cost_server: u64,
    cost_cache: u64,
    sizes: Vec<u64>,
    requests: Vec<RequestDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestDoc {
    user: usize,
    index: usize,
    content: usize,
    origin: usize,
    deadline: usize,
}

pub fn save_instance<W: Write>(instance: &Instance, sink: W) -> Result<()> {
    let doc = InstanceDoc {
        slots: instance.slots,
        contents: instance.contents(),
        users: instance.users,
        capacity: instance.capacity,
        cost_server: instance.cost_server,
        cost_cache: instance.cost_cache,
        sizes: instance.sizes.clone(),
        requests: instance
            .requests
            .iter()
            .map(|r| RequestDoc {
                user: r.user + 1,
                index: r.index + 1,
                content: r.content + 1,
                origin: r.origin + 1,
                deadline: r.deadline + 1,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(sink, &doc).map_err(|e| Error::Io(e.into()))
}

pub fn load_instance<R: Read>(source: R) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_reader(source).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.sizes.len() != doc.contents {
        return Err(Error::Parse(format!("sizes: expected {} entries (F), found {}", doc.contents, doc.sizes.len())));
    }
    let mut requests = Vec::with_capacity(doc.requests.len());
    for (i, r) in doc.requests.iter().enumerate() {
        for (name, v) in [
            ("user", r.user),
            ("index", r.index),
            ("content", r.content),
            ("origin", r.origin),
            ("deadline", r.deadline),
        ] {
            if v == 0 {
                return Err(Error::Parse(format!("requests[{i}].{name}: ids are 1-based")));
            }
        }
        requests.push(Request {
            user: r.user - 1,
            index: r.index - 1,
            content: r.content - 1,
            origin: r.origin - 1,
            deadline: r.deadline - 1,
        });
    }
    let instance = Instance {
        slots: doc.slots,
        users: doc.users,
        sizes: doc.sizes,
        capacity: doc.capacity,
        cost_server: doc.cost_server,
        cost_cache: doc.cost_cache,
        requests,
    };
    instance.validate().map_err(|e| match e {
        Error::Param(m) => Error::Parse(m),
        other => other,
    })?;
    Ok(instance)
}
