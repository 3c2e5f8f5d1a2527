//! Parameter sweeps comparing the lower bound, RCGA and the two greedy
//! baselines on generated instances.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colgen::lower_bound;
use crate::error::{Error, Result};
use crate::greedy::{run_pbc, run_rbc};
use crate::model::{generate_instance, GenParams};
use crate::rounding::run_rcga;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweptParam {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "T")]
    Slots,
    #[serde(rename = "U")]
    Users,
    #[serde(rename = "F")]
    Contents,
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "gamma")]
    Gamma,
}

impl SweptParam {
    pub fn name(self) -> &'static str {
        match self {
            SweptParam::Alpha => "alpha",
            SweptParam::Slots => "T",
            SweptParam::Users => "U",
            SweptParam::Contents => "F",
            SweptParam::Rho => "rho",
            SweptParam::Gamma => "gamma",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &GenParams, value: f64) -> Result<GenParams> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Param(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        let mut p = base.clone();
        match self {
            SweptParam::Alpha => p.alpha = value,
            SweptParam::Rho => p.rho = value,
            SweptParam::Gamma => p.gamma = value,
            SweptParam::Slots => p.slots = count()?,
            SweptParam::Users => p.users = count()?,
            SweptParam::Contents => p.contents = count()?,
        }
        p.validate()?;
        Ok(p)
    }
}

fn default_replications() -> usize {
    5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: GenParams,
    pub param: SweptParam,
    pub values: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// When false the millis column is written as 0, making the CSV
    /// reproducible byte for byte.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Param("replications must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Param("sweep needs at least one value".into()));
        }
        for &v in &self.values {
            self.param.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Lb,
    Rcga,
    Pbc,
    Rbc,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Lb, Algo::Rcga, Algo::Pbc, Algo::Rbc];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Lb => "lb",
            Algo::Rcga => "rcga",
            Algo::Pbc => "pbc",
            Algo::Rbc => "rbc",
        }
    }
}

/// One algorithm on one generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub value: f64,
    pub replication: usize,
    pub seed: u64,
    pub algo: Algo,
    /// `None` when the run failed.
    pub cost: Option<f64>,
    pub gap: Option<f64>,
    pub millis: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlgoSummary {
    pub mean_cost: f64,
    pub mean_gap: f64,
    pub mean_millis: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Indexed like [`Algo::ALL`].
    pub algos: [AlgoSummary; 4],
}

impl SweepRow {
    pub fn get(&self, algo: Algo) -> &AlgoSummary {
        &self.algos[algo as usize]
    }
}

/// Convergence details of one RCGA run in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RcgaRunStats {
    pub value: f64,
    pub replication: usize,
    pub slots: usize,
    pub contents: usize,
    pub iterations: usize,
    pub rounding_steps: usize,
    pub integrality_mismatches: usize,
    pub worst_final_reduced_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: SweptParam,
    pub records: Vec<SweepRecord>,
    pub rows: Vec<SweepRow>,
    /// One entry per successful RCGA run, in record order.
    pub rcga_runs: Vec<RcgaRunStats>,
}

impl SweepResult {
    /// Iterations where weight integrality and z-binarity disagreed, summed
    /// over all RCGA runs.
    pub fn integrality_mismatches(&self) -> usize {
        self.rcga_runs.iter().map(|r| r.integrality_mismatches).sum()
    }
}

/// Relative deviation from the lower bound. A zero bound gives 0 for a
/// zero cost and `f64::INFINITY` otherwise.
pub fn gap(cost: f64, lb: f64) -> f64 {
    if lb.abs() <= 1e-9 {
        if cost.abs() <= 1e-9 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (cost - lb) / lb
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

struct PointResult {
    records: Vec<SweepRecord>,
    stats: Option<RcgaRunStats>,
}

fn run_point(spec: &SweepSpec, value: f64, replication: usize) -> PointResult {
    let seed = spec.base_seed + replication as u64;
    let record = |algo, cost: Option<f64>, millis: f64, error: Option<String>| SweepRecord {
        value,
        replication,
        seed,
        algo,
        cost,
        gap: None,
        millis: if spec.record_timing { millis } else { 0.0 },
        error,
    };
    let instance = spec.param.apply(&spec.base, value).and_then(|mut p| {
        p.seed = seed;
        generate_instance(&p)
    });
    let instance = match instance {
        Ok(i) => i,
        Err(e) => {
            let msg = e.to_string();
            return PointResult {
                records: Algo::ALL.iter().map(|&a| record(a, None, 0.0, Some(msg.clone()))).collect(),
                stats: None,
            };
        }
    };

    let mut records = Vec::with_capacity(4);
    let mut stats = None;
    let (rcga, rcga_ms) = timed(|| run_rcga(&instance));
    match &rcga {
        Ok(out) => {
            stats = Some(RcgaRunStats {
                value,
                replication,
                slots: instance.slots,
                contents: instance.contents(),
                iterations: out.iterations,
                rounding_steps: out.rounding_steps,
                integrality_mismatches: out.integrality_mismatches,
                worst_final_reduced_cost: out.worst_final_reduced_cost,
            });
            records.push(record(Algo::Lb, Some(out.lower_bound), out.lower_bound_millis, None));
            records.push(record(Algo::Rcga, Some(out.cost as f64), rcga_ms, None));
        }
        Err(e) => {
            let (lb, lb_ms) = timed(|| lower_bound(&instance));
            records.push(match lb {
                Ok(v) => record(Algo::Lb, Some(v), lb_ms, None),
                Err(le) => record(Algo::Lb, None, lb_ms, Some(le.to_string())),
            });
            records.push(record(Algo::Rcga, None, rcga_ms, Some(e.to_string())));
        }
    }
    let (pbc, pbc_ms) = timed(|| run_pbc(&instance));
    records.push(match pbc {
        Ok(o) => record(Algo::Pbc, Some(o.cost as f64), pbc_ms, None),
        Err(e) => record(Algo::Pbc, None, pbc_ms, Some(e.to_string())),
    });
    let (rbc, rbc_ms) = timed(|| run_rbc(&instance, seed));
    records.push(match rbc {
        Ok(o) => record(Algo::Rbc, Some(o.cost as f64), rbc_ms, None),
        Err(e) => record(Algo::Rbc, None, rbc_ms, Some(e.to_string())),
    });

    let lb = records[0].cost;
    for r in &mut records {
        r.gap = match (r.cost, lb) {
            (Some(c), Some(l)) => Some(gap(c, l)),
            _ => None,
        };
    }
    PointResult { records, stats }
}

/// Runs every (value, replication) point in parallel. Records come back
/// sorted by value, then replication, then algorithm.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    let jobs: Vec<(f64, usize)> = values.iter().flat_map(|&v| (0..spec.replications).map(move |r| (v, r))).collect();
    let points: Vec<PointResult> = jobs.par_iter().map(|&(v, r)| run_point(spec, v, r)).collect();

    let rcga_runs = points.iter().filter_map(|p| p.stats.clone()).collect();
    let records: Vec<SweepRecord> = points.into_iter().flat_map(|p| p.records).collect();
    let rows = values
        .iter()
        .map(|&value| {
            let mut algos = [AlgoSummary::default(); 4];
            for algo in Algo::ALL {
                let of: Vec<&SweepRecord> = records.iter().filter(|r| r.value == value && r.algo == algo).collect();
                let ok: Vec<&SweepRecord> = of.iter().copied().filter(|r| r.cost.is_some()).collect();
                let mean =
                    |xs: Vec<f64>| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
                algos[algo as usize] = AlgoSummary {
                    mean_cost: mean(ok.iter().filter_map(|r| r.cost).collect()),
                    mean_gap: mean(ok.iter().filter_map(|r| r.gap).collect()),
                    mean_millis: mean(ok.iter().map(|r| r.millis).collect()),
                    failures: of.len() - ok.len(),
                };
            }
            SweepRow { value, algos }
        })
        .collect();
    Ok(SweepResult { param: spec.param, records, rows, rcga_runs })
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// CSV with header `param,value,replication,seed,algo,cost,gap,millis`.
/// Failed runs have `failed` in the cost column and an empty gap.
pub fn write_csv<W: Write>(result: &SweepResult, mut sink: W) -> Result<()> {
    writeln!(sink, "param,value,replication,seed,algo,cost,gap,millis")?;
    for r in &result.records {
        let cost = r.cost.map_or_else(|| "failed".to_string(), fmt_num);
        let gap = r.gap.map_or_else(String::new, fmt_num);
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{:.3}",
            result.param.name(),
            r.value,
            r.replication,
            r.seed,
            r.algo.name(),
            cost,
            gap,
            r.millis
        )?;
    }
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        assert!((gap(112.0, 100.0) - 0.12).abs() < 1e-12);
        assert_eq!(gap(100.0, 100.0), 0.0);
        assert_eq!(gap(5.0, 0.0), f64::INFINITY);
        assert_eq!(gap(0.0, 0.0), 0.0);
    }

    fn small_spec() -> SweepSpec {
        SweepSpec {
            base: GenParams { slots: 4, users: 12, contents: 5, ..GenParams::full_scale() },
            param: SweptParam::Rho,
            values: vec![0.5, 0.2],
            replications: 2,
            base_seed: 9,
            record_timing: false,
        }
    }

    #[test]
    fn sweep_is_order_stable_and_reproducible() {
        let spec = small_spec();
        let a = run_sweep(&spec).unwrap();
        let keys: Vec<_> = a.records.iter().map(|r| (r.value, r.replication, r.algo)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        assert_eq!(keys, sorted);
        assert_eq!(a.records.len(), 2 * 2 * 4);

        let csv = |r: &SweepResult| {
            let mut buf = Vec::new();
            write_csv(r, &mut buf).unwrap();
            buf
        };
        assert_eq!(csv(&a), csv(&run_sweep(&spec).unwrap()));
        let text = String::from_utf8(csv(&a)).unwrap();
        assert!(text.starts_with("param,value,replication,seed,algo,cost,gap,millis\nrho,0.2,0,9,lb,"));
    }

    #[test]
    fn rows_respect_bound() {
        let res = run_sweep(&small_spec()).unwrap();
        for row in &res.rows {
            assert_eq!(row.get(Algo::Lb).mean_gap, 0.0);
            for algo in [Algo::Rcga, Algo::Pbc, Algo::Rbc] {
                assert!(row.get(algo).mean_gap >= -1e-9);
                assert_eq!(row.get(algo).failures, 0);
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = small_spec();
        spec.param = SweptParam::Slots;
        spec.values = vec![2.5];
        assert!(matches!(spec.validate(), Err(Error::Param(_))));
        spec.values = vec![3.0];
        spec.replications = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_uses_parameter_names() {
        let json = r#"{"base": {"T": 3, "U": 5, "F": 4, "size_range": [1, 10], "rho": 0.5, "gamma": 0.56,
            "alpha": 1.0, "requests_per_user_range": [1, 10], "cost_server": 10, "cost_cache": 1, "seed": 0},
            "param": "alpha", "values": [0, 1]}"#;
        let spec: SweepSpec = serde_json::from_str(json).unwrap();
        assert_eq!((spec.param, spec.replications, spec.record_timing), (SweptParam::Alpha, 5, true));
    }
}
