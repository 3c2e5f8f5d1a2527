//! Exhaustive oracles for tiny instances and an LP-format writer for the
//! integer program, so larger instances can be handed to an external solver.

use std::io::Write;

use crate::cost::{column_cost_for, CachePlan, Cost};
use crate::error::{Error, Result};
use crate::model::{build_partition_instance, Instance};
use crate::rounding::FixSet;
use crate::scalar::Scalar;

/// Default cap on the number of candidate plans, `2^(F*T)`.
pub const DEFAULT_EXACT_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactSolution {
    pub plan: CachePlan,
    pub cost: Cost,
    /// Complete plans evaluated after capacity pruning.
    pub evaluated: u64,
}

/// Globally optimal plan by enumeration. Per slot only capacity-feasible
/// subsets are tried; plans are visited in lexicographic (slot-major) order
/// and the first optimum is kept.
pub fn solve_exact(instance: &Instance, limit: u128) -> Result<ExactSolution> {
    instance.validate()?;
    let (slots, contents) = (instance.slots, instance.contents());
    let bits = slots * contents;
    let size = if bits >= 128 { u128::MAX } else { 1u128 << bits };
    if size > limit {
        return Err(Error::TooLarge { size, limit });
    }
    // content f sits at bit (F-1-f), so ascending masks are lexicographic rows
    let bit = |f: usize| 1u32 << (contents - 1 - f);
    let feasible: Vec<u32> = (0..1u32 << contents)
        .filter(|&mask| {
            let load: u64 = (0..contents).filter(|&f| mask & bit(f) != 0).map(|f| instance.sizes[f]).sum();
            load <= instance.capacity
        })
        .collect();
    let by_content = instance.requests_by_content();

    struct Search<'a> {
        instance: &'a Instance,
        by_content: &'a [Vec<crate::model::Request>],
        feasible: &'a [u32],
        contents: usize,
        chosen: Vec<u32>,
        seq: Vec<bool>,
        best: Option<(Cost, Vec<u32>)>,
        evaluated: u64,
    }

    impl Search<'_> {
        fn leaf_cost(&mut self) -> Cost {
            let mut cost = 0;
            for f in 0..self.contents {
                let b = 1u32 << (self.contents - 1 - f);
                for (t, &m) in self.chosen.iter().enumerate() {
                    self.seq[t] = m & b != 0;
                }
                cost += column_cost_for(&self.by_content[f], self.instance.sizes[f], &self.seq, self.instance);
            }
            cost
        }

        fn go(&mut self, slot: usize) {
            if slot == self.instance.slots {
                self.evaluated += 1;
                let cost = self.leaf_cost();
                if self.best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    self.best = Some((cost, self.chosen.clone()));
                }
                return;
            }
            for &mask in self.feasible {
                self.chosen.push(mask);
                self.go(slot + 1);
                self.chosen.pop();
            }
        }
    }

    let mut search = Search {
        instance,
        by_content: &by_content,
        feasible: &feasible,
        contents,
        chosen: Vec::with_capacity(slots),
        seq: vec![false; slots],
        best: None,
        evaluated: 0,
    };
    search.go(0);
    let (cost, masks) = search.best.expect("the empty plan is always feasible");
    let x = masks.iter().map(|&m| (0..contents).map(|f| m & bit(f) != 0).collect()).collect();
    Ok(ExactSolution { plan: CachePlan::from_matrix(x)?, cost, evaluated: search.evaluated })
}

/// Minimizes `C_f - sum_t l_f * pi_t * x_t` over every sequence of content
/// `f` that agrees with the fixes. Ties go to fewer cached slots, then the
/// lexicographically smallest sequence.
pub fn solve_subproblem_bruteforce<W: Scalar>(
    content: usize,
    pi: &[W],
    instance: &Instance,
    fixes: &FixSet,
) -> (Vec<bool>, W) {
    let slots = instance.slots;
    assert!(slots <= 24, "brute-force pricing is limited to 24 slots");
    assert_eq!(pi.len(), slots, "one dual per slot");
    let requests: Vec<_> = instance.requests.iter().filter(|r| r.content == content).copied().collect();
    let size = instance.sizes[content];
    let l = W::from_int(size as i64);
    let mut best: Option<(W, u32, Vec<bool>)> = None;
    // bit (T-1-t) is slot t so ascending codes are lexicographic
    for code in 0..1u32 << slots {
        let seq: Vec<bool> = (0..slots).map(|t| code >> (slots - 1 - t) & 1 == 1).collect();
        if !fixes.admits(content, &seq) {
            continue;
        }
        let mut value = W::from_int(column_cost_for(&requests, size, &seq, instance) as i64);
        for (t, &p) in pi.iter().enumerate() {
            if seq[t] {
                value = value - l * p;
            }
        }
        let ones = code.count_ones();
        let better = match &best {
            None => true,
            Some((v, o, _)) => value < *v || (value == *v && ones < *o),
        };
        if better {
            best = Some((value, ones, seq));
        }
    }
    let (value, _, seq) = best.expect("fixes of one content are always satisfiable");
    (seq, value)
}

/// Solves the Partition question for `integers` through the caching
/// reduction. Returns the indices on the cached side of an equal split, or
/// `None` when there is none.
pub fn partition_via_caching(integers: &[u64], limit: u128) -> Result<Option<Vec<usize>>> {
    let instance = build_partition_instance(integers)?;
    let total: u64 = integers.iter().sum();
    let server_only = 2 * total * instance.cost_server;
    let solution = solve_exact(&instance, limit)?;
    let gain = server_only - solution.cost;
    if 2 * gain == total {
        Ok(Some((0..integers.len()).filter(|&f| solution.plan.is_cached(0, f)).collect()))
    } else {
        Ok(None)
    }
}

struct LpWriter<W: Write> {
    sink: W,
}

impl<W: Write> LpWriter<W> {
    /// Writes `name: terms rel rhs`, wrapping long expressions.
    fn row(&mut self, name: &str, terms: &[(i64, String)], tail: &str) -> std::io::Result<()> {
        write!(self.sink, " {name}:")?;
        let mut width = name.len() + 2;
        for (i, (coef, var)) in terms.iter().enumerate() {
            let sign = if *coef < 0 { "-" } else { "+" };
            let mag = coef.unsigned_abs();
            let piece = match (i, *coef < 0, mag) {
                (0, false, 1) => format!(" {var}"),
                (0, false, _) => format!(" {mag} {var}"),
                (_, _, 1) => format!(" {sign} {var}"),
                _ => format!(" {sign} {mag} {var}"),
            };
            if width + piece.len() > 200 {
                write!(self.sink, "\n  ")?;
                width = 2;
            }
            width += piece.len();
            write!(self.sink, "{piece}")?;
        }
        writeln!(self.sink, " {tail}")
    }
}

fn x_name(t: usize, f: usize) -> String {
    format!("x_{}_{}", t + 1, f + 1)
}

fn a_name(t: usize, f: usize) -> String {
    format!("a_{}_{}", t + 1, f + 1)
}

/// Writes the integer program in CPLEX LP format. Variables are
/// `x_t_f`, `a_t_f` and `y_u_r_t`, all 1-based. The objective carries the
/// server-only cost as a constant.
pub fn export_lp<W: Write>(instance: &Instance, sink: W) -> Result<()> {
    instance.validate()?;
    let (slots, contents) = (instance.slots, instance.contents());
    let saving = (instance.cost_server - instance.cost_cache) as i64;
    let y_name = |u: usize, r: usize, t: usize| format!("y_{}_{}_{}", u + 1, r + 1, t + 1);
    let mut w = LpWriter { sink };

    writeln!(w.sink, "\\ cache update scheduling, T={slots} F={contents} U={}", instance.users)?;
    writeln!(w.sink, "Minimize")?;
    let mut obj: Vec<(i64, String)> = Vec::new();
    for t in 0..slots {
        for f in 0..contents {
            obj.push((instance.sizes[f] as i64 * saving, a_name(t, f)));
        }
    }
    for r in &instance.requests {
        for t in r.window() {
            obj.push((-(instance.sizes[r.content] as i64) * saving, y_name(r.user, r.index, t)));
        }
    }
    obj.retain(|(c, _)| *c != 0);
    let constant: u64 = instance.requests.iter().map(|r| instance.sizes[r.content] * instance.cost_server).sum();
    if obj.is_empty() {
        obj.push((0, x_name(0, 0)));
    }
    w.row("obj", &obj, &format!("+ {constant}"))?;

    writeln!(w.sink, "Subject To")?;
    for t in 0..slots {
        let terms: Vec<_> = (0..contents).map(|f| (instance.sizes[f] as i64, x_name(t, f))).collect();
        w.row(&format!("cap_{}", t + 1), &terms, &format!("<= {}", instance.capacity))?;
    }
    for f in 0..contents {
        w.row(&format!("upd_1_{}", f + 1), &[(1, a_name(0, f)), (-1, x_name(0, f))], "= 0")?;
        for t in 1..slots {
            let (tt, ff) = (t + 1, f + 1);
            w.row(
                &format!("updlo_{tt}_{ff}"),
                &[(1, a_name(t, f)), (-1, x_name(t, f)), (1, x_name(t - 1, f))],
                ">= 0",
            )?;
            w.row(&format!("updprev_{tt}_{ff}"), &[(1, a_name(t, f)), (1, x_name(t - 1, f))], "<= 1")?;
            w.row(&format!("updcur_{tt}_{ff}"), &[(1, a_name(t, f)), (-1, x_name(t, f))], "<= 0")?;
        }
    }
    for r in &instance.requests {
        let (u, k) = (r.user + 1, r.index + 1);
        for t in r.window() {
            w.row(
                &format!("serve_{u}_{k}_{}", t + 1),
                &[(1, y_name(r.user, r.index, t)), (-1, x_name(t, r.content))],
                "<= 0",
            )?;
        }
        let terms: Vec<_> = r.window().map(|t| (1, y_name(r.user, r.index, t))).collect();
        w.row(&format!("once_{u}_{k}"), &terms, "<= 1")?;
    }

    writeln!(w.sink, "Binaries")?;
    let mut names: Vec<String> = Vec::new();
    for t in 0..slots {
        for f in 0..contents {
            names.push(x_name(t, f));
            names.push(a_name(t, f));
        }
    }
    for r in &instance.requests {
        names.extend(r.window().map(|t| y_name(r.user, r.index, t)));
    }
    for chunk in names.chunks(10) {
        writeln!(w.sink, " {}", chunk.join(" "))?;
    }
    writeln!(w.sink, "End")?;
    w.sink.flush()?;
    Ok(())
}
