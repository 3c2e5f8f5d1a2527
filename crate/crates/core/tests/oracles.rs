mod common;

use cachesched::colgen::{lower_bound, run_cga, solve_rmp, Column, ColumnPool};
use cachesched::cost::{check_capacity, total_cost, CachePlan};
use cachesched::exact::{export_lp, partition_via_caching, solve_exact, DEFAULT_EXACT_LIMIT};
use cachesched::lpsolve::{solve_lp, LpColumn, LpProblem};
use cachesched::model::build_partition_instance;
use cachesched::FixSet;
use common::*;
use rand::Rng;

#[test]
fn exact_beats_random_feasible_plans() {
    let mut checked = 0;
    for seed in 0..60u64 {
        let inst = desk_instance(seed);
        let best = solve_exact(&inst, DEFAULT_EXACT_LIMIT).unwrap();
        assert!(check_capacity(&best.plan, &inst).is_ok());
        assert_eq!(total_cost(&best.plan, &inst).unwrap(), best.cost);
        let mut r = rng(seed);
        for _ in 0..200 {
            let x = (0..inst.slots).map(|_| (0..inst.contents()).map(|_| r.gen_bool(0.4)).collect()).collect();
            let plan = CachePlan::from_matrix(x).unwrap();
            if check_capacity(&plan, &inst).is_ok() {
                assert!(best.cost <= total_cost(&plan, &inst).unwrap());
                checked += 1;
            }
        }
    }
    assert!(checked >= 1000, "only {checked} feasible samples");
}

#[test]
fn lower_bound_below_exact() {
    for seed in 0..200u64 {
        let inst = desk_instance(seed);
        let lb = lower_bound(&inst).unwrap();
        let opt = solve_exact(&inst, DEFAULT_EXACT_LIMIT).unwrap().cost as f64;
        assert!(lb <= opt + 1e-6 * opt.max(1.0), "seed {seed}: {lb} > {opt}");
    }
}

/// Master LP over every sequence of every content.
fn full_master_value(inst: &cachesched::Instance) -> f64 {
    let by = inst.requests_by_content();
    let mut columns = Vec::new();
    for f in 0..inst.contents() {
        for code in 0..1u32 << inst.slots {
            let seq: Vec<bool> = (0..inst.slots).map(|t| code >> t & 1 == 1).collect();
            let col = Column::new(f, seq.clone(), &by[f], inst);
            columns.push(LpColumn {
                group: f,
                cost: col.cost as f64,
                usage: (0..inst.slots).filter(|&t| seq[t]).map(|t| (t, inst.sizes[f] as f64)).collect(),
            });
        }
    }
    let problem = LpProblem { capacity: vec![inst.capacity as f64; inst.slots], groups: inst.contents(), columns };
    solve_lp(&problem).unwrap().objective
}

#[test]
fn converged_master_equals_full_master() {
    let inst = tiny();
    let cga = run_cga(&inst, &FixSet::new(), &mut ColumnPool::seeded(&inst)).unwrap();
    let full = full_master_value(&inst);
    assert!((cga.solution.objective - full).abs() < 1e-6);
    assert!(cga.solution.objective <= 12.0 + 1e-9);
    for seed in 0..60u64 {
        let inst = random_instance(seed, 4, 4, 16);
        let lb = lower_bound(&inst).unwrap();
        let full = full_master_value(&inst);
        assert!((lb - full).abs() <= 1e-6 * full.max(1.0), "seed {seed}: {lb} vs {full}");
    }
}

#[test]
fn rmp_solution_is_feasible_for_the_pool() {
    let inst = tiny();
    let mut pool = ColumnPool::seeded(&inst);
    run_cga(&inst, &FixSet::new(), &mut pool).unwrap();
    let sol = solve_rmp(&mut pool, &inst).unwrap();
    for f in 0..2 {
        let total: f64 = pool.columns_for(f).map(|c| sol.weight_of(c.id).unwrap_or(0.0)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    assert!(sol.pi.iter().all(|&p| p <= 1e-9));
}

#[test]
fn partition_answers_match_subset_sum() {
    for seed in 0..80u64 {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let items: Vec<u64> = (0..n).map(|_| r.gen_range(1..=15)).collect();
        let inst = build_partition_instance(&items).unwrap();
        assert_eq!(inst.requests.len(), 2 * n);
        let side = partition_via_caching(&items, DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(side.is_some(), has_equal_split(&items), "{items:?}");
        if let Some(side) = side {
            let s: u64 = side.iter().map(|&i| items[i]).sum();
            assert_eq!(2 * s, items.iter().sum::<u64>());
        }
    }
}

#[test]
fn lp_export_shape() {
    let inst = desk_instance(3);
    let mut buf = Vec::new();
    export_lp(&inst, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cap_rows = text.lines().filter(|l| l.trim_start().starts_with("cap_")).count();
    assert_eq!(cap_rows, inst.slots);
    let y_vars: usize = inst.requests.iter().map(|r| r.window().count()).sum();
    let binaries = text.split("Binaries").nth(1).unwrap();
    assert_eq!(binaries.split_whitespace().filter(|w| w.starts_with("y_")).count(), y_vars);
    assert_eq!(binaries.split_whitespace().filter(|w| w.starts_with("x_")).count(), inst.slots * inst.contents());
    assert!(text.lines().all(|l| l.len() < 256));
}
