//! Feasibility and cost of caching plans.
//!
//! A request is served from the cache in the earliest slot of its window in
//! which the content is cached, otherwise from the server. Any feasible choice
//! of slot yields the same cost, so the earliest-slot rule is used everywhere.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Request};

pub type Cost = u64;

/// Binary caching matrix `x[slot][content]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CachePlan {
    x: Vec<Vec<bool>>,
}

impl CachePlan {
    pub fn empty(slots: usize, contents: usize) -> Self {
        CachePlan { x: vec![vec![false; contents]; slots] }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        Self::empty(instance.slots, instance.contents())
    }

    pub fn from_matrix(x: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(first) = x.first() {
            if x.iter().any(|row| row.len() != first.len()) {
                return Err(Error::Param("caching matrix rows differ in length".into()));
            }
        }
        Ok(CachePlan { x })
    }

    /// Plan caching `sets[t]` (content ids) in slot `t`.
    pub fn from_slot_sets(slots: usize, contents: usize, sets: &[&[usize]]) -> Self {
        let mut plan = Self::empty(slots, contents);
        for (t, set) in sets.iter().enumerate() {
            for &f in set.iter() {
                plan.x[t][f] = true;
            }
        }
        plan
    }

    /// Plan built from one caching sequence per content.
    pub fn from_sequences(slots: usize, sequences: &[Vec<bool>]) -> Self {
        let mut plan = Self::empty(slots, sequences.len());
        for (f, seq) in sequences.iter().enumerate() {
            for (t, &v) in seq.iter().enumerate() {
                plan.x[t][f] = v;
            }
        }
        plan
    }

    pub fn slots(&self) -> usize {
        self.x.len()
    }

    pub fn contents(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn matrix(&self) -> &[Vec<bool>] {
        &self.x
    }

    pub fn is_cached(&self, slot: usize, content: usize) -> bool {
        self.x[slot][content]
    }

    pub fn set(&mut self, slot: usize, content: usize, cached: bool) {
        self.x[slot][content] = cached;
    }

    pub fn sequence(&self, content: usize) -> Vec<bool> {
        self.x.iter().map(|row| row[content]).collect()
    }

    pub fn load(&self, slot: usize, instance: &Instance) -> u64 {
        self.x[slot].iter().zip(&instance.sizes).filter(|(&c, _)| c).map(|(_, &l)| l).sum()
    }

    pub fn check_shape(&self, instance: &Instance) -> Result<()> {
        if self.slots() != instance.slots || (self.slots() > 0 && self.contents() != instance.contents()) {
            return Err(Error::Param(format!(
                "plan is {}x{} but instance is {}x{} (slots x contents)",
                self.slots(),
                self.contents(),
                instance.slots,
                instance.contents()
            )));
        }
        Ok(())
    }

    /// Update matrix of this plan; see [`derive_updates`].
    pub fn updates(&self) -> Vec<Vec<bool>> {
        updates_of(&self.x)
    }
}

fn updates_of(x: &[Vec<bool>]) -> Vec<Vec<bool>> {
    x.iter()
        .enumerate()
        .map(|(t, row)| row.iter().enumerate().map(|(f, &cached)| cached && (t == 0 || !x[t - 1][f])).collect())
        .collect()
}

/// `a[t][f]` is set iff `f` is cached in `t` but not in `t - 1` (the slot
/// before the horizon counts as an empty cache).
pub fn derive_updates(x: &[Vec<bool>], instance: &Instance) -> Result<Vec<Vec<bool>>> {
    if x.len() != instance.slots || x.iter().any(|row| row.len() != instance.contents()) {
        return Err(Error::Param(format!(
            "caching matrix must be {}x{} (slots x contents)",
            instance.slots,
            instance.contents()
        )));
    }
    Ok(updates_of(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Service {
    Cache(usize),
    Server,
}

/// Per-request service decision, aligned with `instance.requests`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadAssignment {
    pub services: Vec<Service>,
}

fn earliest_cached(seq_at: impl Fn(usize) -> bool, r: &Request) -> Service {
    r.window().find(|&t| seq_at(t)).map_or(Service::Server, Service::Cache)
}

pub fn assign_downloads(plan: &CachePlan, instance: &Instance) -> Result<DownloadAssignment> {
    plan.check_shape(instance)?;
    let services = instance.requests.iter().map(|r| earliest_cached(|t| plan.is_cached(t, r.content), r)).collect();
    Ok(DownloadAssignment { services })
}

fn request_cost(service: Service, size: u64, instance: &Instance) -> Cost {
    match service {
        Service::Cache(_) => instance.cost_cache * size,
        Service::Server => instance.cost_server * size,
    }
}

pub fn download_cost(plan: &CachePlan, instance: &Instance) -> Result<Cost> {
    let assignment = assign_downloads(plan, instance)?;
    Ok(instance
        .requests
        .iter()
        .zip(&assignment.services)
        .map(|(r, &s)| request_cost(s, instance.sizes[r.content], instance))
        .sum())
}

pub fn update_cost(plan: &CachePlan, instance: &Instance) -> Result<Cost> {
    plan.check_shape(instance)?;
    let q = instance.unit_update_cost();
    Ok(plan
        .updates()
        .iter()
        .map(|row| row.iter().zip(&instance.sizes).filter(|(&a, _)| a).map(|(_, &l)| l * q).sum::<Cost>())
        .sum())
}

pub fn total_cost(plan: &CachePlan, instance: &Instance) -> Result<Cost> {
    Ok(download_cost(plan, instance)? + update_cost(plan, instance)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacityViolation {
    pub slot: usize,
    pub load: u64,
    pub capacity: u64,
}

impl fmt::Display for CapacityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slot {}: load {} exceeds capacity {}", self.slot + 1, self.load, self.capacity)
    }
}

/// First slot whose cached volume exceeds the capacity, if any.
pub fn check_capacity(plan: &CachePlan, instance: &Instance) -> std::result::Result<(), CapacityViolation> {
    for t in 0..plan.slots() {
        let load = plan.load(t, instance);
        if load > instance.capacity {
            return Err(CapacityViolation { slot: t, load, capacity: instance.capacity });
        }
    }
    Ok(())
}

/// Number of slots in which the sequence brings the content into the cache.
pub fn update_count(sequence: &[bool]) -> u64 {
    sequence.iter().enumerate().filter(|&(t, &v)| v && (t == 0 || !sequence[t - 1])).count() as u64
}

/// Cost attributable to one content under a caching sequence: downloads of
/// the requests for that content plus the content's update cost.
pub fn column_cost_for(requests: &[Request], size: u64, sequence: &[bool], instance: &Instance) -> Cost {
    let downloads: Cost =
        requests.iter().map(|r| request_cost(earliest_cached(|t| sequence[t], r), size, instance)).sum();
    downloads + update_count(sequence) * size * instance.unit_update_cost()
}

pub fn column_cost(content: usize, sequence: &[bool], instance: &Instance) -> Cost {
    let requests: Vec<Request> = instance.requests.iter().filter(|r| r.content == content).copied().collect();
    column_cost_for(&requests, instance.sizes[content], sequence, instance)
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanDoc {
    #[serde(rename = "T")]
    slots: usize,
    #[serde(rename = "F")]
    contents: usize,
    /// Row-major by slot.
    x: Vec<Vec<u8>>,
}

pub fn save_plan<W: Write>(plan: &CachePlan, sink: W) -> Result<()> {
    let doc = PlanDoc {
        slots: plan.slots(),
        contents: plan.contents(),
        x: plan.x.iter().map(|row| row.iter().map(|&v| v as u8).collect()).collect(),
    };
    serde_json::to_writer(sink, &doc).map_err(|e| Error::Io(e.into()))
}

pub fn load_plan<R: Read>(source: R) -> Result<CachePlan> {
    let doc: PlanDoc = serde_json::from_reader(source).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.x.len() != doc.slots {
        return Err(Error::Parse(format!("x: expected {} rows (T), found {}", doc.slots, doc.x.len())));
    }
    let mut x = Vec::with_capacity(doc.slots);
    for (t, row) in doc.x.iter().enumerate() {
        if row.len() != doc.contents {
            return Err(Error::Parse(format!("x[{t}]: expected {} entries (F), found {}", doc.contents, row.len())));
        }
        if let Some(v) = row.iter().find(|&&v| v > 1) {
            return Err(Error::Parse(format!("x[{t}]: entries must be 0 or 1, found {v}")));
        }
        x.push(row.iter().map(|&v| v == 1).collect());
    }
    CachePlan::from_matrix(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny;
    use proptest::prelude::*;

    fn single(slots: usize, seq: &[bool]) -> (Instance, CachePlan) {
        let inst =
            Instance { slots, users: 0, sizes: vec![1], capacity: 1, cost_server: 2, cost_cache: 1, requests: vec![] };
        (inst, CachePlan::from_sequences(slots, &[seq.to_vec()]))
    }

    #[test]
    fn updates_by_definition() {
        for (x, a) in [
            (vec![true, true], vec![true, false]),
            (vec![false, true], vec![false, true]),
            (vec![true, false, true], vec![true, false, true]),
        ] {
            let (inst, plan) = single(x.len(), &x);
            let updates = derive_updates(plan.matrix(), &inst).unwrap();
            let got: Vec<bool> = updates.iter().map(|row| row[0]).collect();
            assert_eq!(got, a);
        }
        let (inst, _) = single(2, &[true, true]);
        assert!(derive_updates(&[vec![true]], &inst).is_err());
    }

    fn one_request(origin: usize, deadline: usize, seq: &[bool]) -> Service {
        let mut inst = single(seq.len(), seq).0;
        inst.users = 1;
        inst.requests = vec![Request { user: 0, index: 0, content: 0, origin, deadline }];
        let plan = CachePlan::from_sequences(seq.len(), &[seq.to_vec()]);
        assign_downloads(&plan, &inst).unwrap().services[0]
    }

    #[test]
    fn earliest_slot_assignment() {
        assert_eq!(one_request(0, 1, &[false, true]), Service::Cache(1));
        assert_eq!(one_request(0, 1, &[true, true]), Service::Cache(0));
        assert_eq!(one_request(1, 1, &[true, false]), Service::Server);
    }

    #[test]
    fn tiny_costs() {
        let inst = tiny();
        let plan = CachePlan::from_slot_sets(2, 2, &[&[1], &[0]]);
        assert_eq!(download_cost(&plan, &inst).unwrap(), 7);
        assert_eq!(update_cost(&plan, &inst).unwrap(), 5);
        assert_eq!(total_cost(&plan, &inst).unwrap(), 12);

        let kept = CachePlan::from_sequences(2, &[vec![true, true], vec![false, false]]);
        assert_eq!(update_cost(&kept, &inst).unwrap(), 2);

        let late = CachePlan::from_slot_sets(2, 2, &[&[], &[0]]);
        assert_eq!(total_cost(&late, &inst).unwrap(), 12);

        let empty = CachePlan::for_instance(&inst);
        assert_eq!(download_cost(&empty, &inst).unwrap(), 14);
        assert_eq!(update_cost(&empty, &inst).unwrap(), 0);
        assert_eq!(total_cost(&empty, &inst).unwrap(), 14);
    }

    #[test]
    fn zero_requests_cost_nothing_to_download() {
        let mut inst = tiny();
        inst.requests.clear();
        assert_eq!(download_cost(&CachePlan::for_instance(&inst), &inst).unwrap(), 0);
    }

    #[test]
    fn capacity_checks() {
        let inst = tiny();
        let over = CachePlan::from_slot_sets(2, 2, &[&[0, 1]]);
        assert_eq!(check_capacity(&over, &inst), Err(CapacityViolation { slot: 0, load: 5, capacity: 3 }));
        assert_eq!(check_capacity(&CachePlan::for_instance(&inst), &inst), Ok(()));
        assert_eq!(check_capacity(&CachePlan::from_slot_sets(2, 2, &[&[1]]), &inst), Ok(()));
    }

    #[test]
    fn column_costs_for_content_one() {
        let inst = tiny();
        assert_eq!(column_cost(0, &[false, false], &inst), 8);
        assert_eq!(column_cost(0, &[false, true], &inst), 6);
        assert_eq!(column_cost(0, &[true, true], &inst), 6);
    }

    #[test]
    fn plan_file_round_trip() {
        let plan = CachePlan::from_slot_sets(2, 3, &[&[1], &[0, 2]]);
        let mut buf = Vec::new();
        save_plan(&plan, &mut buf).unwrap();
        assert_eq!(load_plan(buf.as_slice()).unwrap(), plan);
        assert!(load_plan(r#"{"T":1,"F":2,"x":[[1]]}"#.as_bytes()).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        (1usize..5, 1usize..4, 1u64..4).prop_flat_map(|(slots, contents, cb)| {
            let sizes = proptest::collection::vec(1u64..6, contents);
            let reqs = proptest::collection::vec((0..contents, 0..slots, 0..slots), 0..10);
            (Just(slots), sizes, 1u64..20, Just(cb), reqs).prop_map(|(slots, sizes, capacity, cb, reqs)| Instance {
                slots,
                users: reqs.len(),
                sizes,
                capacity,
                cost_server: cb + 3,
                cost_cache: cb,
                requests: reqs
                    .iter()
                    .enumerate()
                    .map(|(u, &(f, a, b))| Request {
                        user: u,
                        index: 0,
                        content: f,
                        origin: a.min(b),
                        deadline: a.max(b),
                    })
                    .collect(),
            })
        })
    }

    fn arb_plan_for(inst: &Instance) -> impl Strategy<Value = CachePlan> {
        let (t, f) = (inst.slots, inst.contents());
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), f), t)
            .prop_map(|x| CachePlan::from_matrix(x).unwrap())
    }

    proptest! {
        #[test]
        fn objective_decomposes_per_content(
            (inst, plan) in arb_instance().prop_flat_map(|i| { let p = arb_plan_for(&i); (Just(i), p) })
        ) {
            let per_content: Cost = (0..inst.contents()).map(|f| column_cost(f, &plan.sequence(f), &inst)).sum();
            prop_assert_eq!(total_cost(&plan, &inst).unwrap(), per_content);

            let assignment = assign_downloads(&plan, &inst).unwrap();
            for (r, s) in inst.requests.iter().zip(&assignment.services) {
                if let Service::Cache(t) = *s {
                    prop_assert!(r.window().contains(&t));
                    prop_assert!(plan.is_cached(t, r.content));
                }
            }

            let empty_total: Cost = inst.requests.iter().map(|r| inst.cost_server * inst.sizes[r.content]).sum();
            prop_assert_eq!(total_cost(&CachePlan::for_instance(&inst), &inst).unwrap(), empty_total);
        }

        #[test]
        fn caching_more_never_raises_downloads(
            (inst, plan, t, f) in arb_instance().prop_flat_map(|i| {
                let p = arb_plan_for(&i);
                let (ts, fs) = (i.slots, i.contents());
                (Just(i), p, 0..ts, 0..fs)
            })
        ) {
            let requests: Vec<Request> = inst.requests.iter().filter(|r| r.content == f).copied().collect();
            let downloads = |seq: &[bool]| {
                column_cost_for(&requests, inst.sizes[f], seq, &inst)
                    - update_count(seq) * inst.sizes[f] * inst.unit_update_cost()
            };
            let mut seq = plan.sequence(f);
            let before = downloads(&seq);
            seq[t] = true;
            prop_assert!(downloads(&seq) <= before);
        }
    }
}
