use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cachesched::colgen::lower_bound;
use cachesched::cost::{check_capacity, download_cost, load_plan, save_plan, total_cost, update_cost, CachePlan};
use cachesched::exact::{export_lp, solve_exact, DEFAULT_EXACT_LIMIT};
use cachesched::experiments::{gap, run_sweep, write_csv, Algo, SweepSpec};
use cachesched::greedy::{run_pbc, run_rbc};
use cachesched::model::{generate_instance, load_instance, save_instance, GenParams, Instance};
use cachesched::{run_rcga, Error};
use clap::{Parser, Subcommand, ValueEnum};

/// Cache update scheduling under delivery deadlines and a capacity limit.
#[derive(Parser)]
#[command(name = "cachesched", version)]
struct Cli {
    /// Worker threads for parallel pricing and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve an instance and write the plan.
    Solve {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        instance: PathBuf,
        /// Plan output path (default: <instance stem>.plan.json next to the instance).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Seed for the random greedy ordering.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest plan space the exact solver may enumerate.
        #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
        limit: u128,
    },
    /// Run a parameter sweep described by a JSON spec and write a CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the integer program in LP format.
    ExportLp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a plan for capacity feasibility and recompute its cost.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Rcga,
    Pbc,
    Rbc,
    Exact,
    Lb,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long = "slots", visible_alias = "T", default_value_t = 24)]
    slots: usize,
    #[arg(long = "users", visible_alias = "U", default_value_t = 600)]
    users: usize,
    #[arg(long = "contents", visible_alias = "F", default_value_t = 200)]
    contents: usize,
    #[arg(long, default_value_t = 1)]
    size_min: u64,
    #[arg(long, default_value_t = 10)]
    size_max: u64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.56)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    requests_min: usize,
    #[arg(long, default_value_t = 10)]
    requests_max: usize,
    #[arg(long, default_value_t = 10)]
    cost_server: u64,
    #[arg(long, default_value_t = 1)]
    cost_cache: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    User(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_user_error() {
            Failure::User(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::User(e.to_string())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    load_instance(open(path)?).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn default_plan_path(instance: &Path) -> PathBuf {
    let stem = instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "instance".into());
    instance.with_file_name(format!("{stem}.plan.json"))
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn gen(args: GenArgs) -> Result<(), Failure> {
    let params = GenParams {
        slots: args.slots,
        users: args.users,
        contents: args.contents,
        size_range: (args.size_min, args.size_max),
        rho: args.rho,
        gamma: args.gamma,
        alpha: args.alpha,
        requests_per_user_range: (args.requests_min, args.requests_max),
        cost_server: args.cost_server,
        cost_cache: args.cost_cache,
        seed: args.seed,
    };
    let instance = generate_instance(&params)?;
    match args.out {
        Some(path) => save_instance(&instance, create(&path)?)?,
        None => save_instance(&instance, io::stdout().lock())?,
    }
    Ok(())
}

fn solve(
    algo: AlgoArg,
    instance_path: &Path,
    plan_path: Option<PathBuf>,
    seed: u64,
    limit: u128,
) -> Result<(), Failure> {
    let instance = read_instance(instance_path)?;
    let start = Instant::now();
    let (name, plan, cost, lb): (&str, Option<CachePlan>, f64, Option<f64>) = match algo {
        AlgoArg::Rcga => {
            let out = run_rcga(&instance)?;
            (Algo::Rcga.name(), Some(out.plan), out.cost as f64, Some(out.lower_bound))
        }
        AlgoArg::Lb => {
            let lb = lower_bound(&instance)?;
            (Algo::Lb.name(), None, lb, Some(lb))
        }
        AlgoArg::Pbc => {
            let out = run_pbc(&instance)?;
            (Algo::Pbc.name(), Some(out.plan), out.cost as f64, None)
        }
        AlgoArg::Rbc => {
            let out = run_rbc(&instance, seed)?;
            (Algo::Rbc.name(), Some(out.plan), out.cost as f64, None)
        }
        AlgoArg::Exact => {
            let out = solve_exact(&instance, limit)?;
            ("exact", Some(out.plan), out.cost as f64, None)
        }
    };
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let lb = match lb {
        Some(v) => Some(v),
        None => lower_bound(&instance).ok(),
    };
    if let Some(plan) = &plan {
        if let Err(v) = check_capacity(plan, &instance) {
            return Err(Failure::Solver(format!("{name} produced an infeasible plan: {v}")));
        }
        let path = plan_path.unwrap_or_else(|| default_plan_path(instance_path));
        let mut sink = create(&path)?;
        save_plan(plan, &mut sink)?;
        sink.flush()?;
    }
    let (lb_text, gap_text) = match lb {
        Some(l) => (fmt_value(l), fmt_value(gap(cost, l))),
        None => ("na".into(), "na".into()),
    };
    let cost_text = if plan.is_some() { format!("{}", cost as u64) } else { fmt_value(cost) };
    println!("algo={name} cost={cost_text} lb={lb_text} gap={gap_text} millis={millis:.3}");
    Ok(())
}

fn sweep(spec_path: &Path, out: &Path) -> Result<(), Failure> {
    let spec: SweepSpec = serde_json::from_reader(open(spec_path)?)
        .map_err(|e| Failure::User(format!("{}: {e}", spec_path.display())))?;
    let result = run_sweep(&spec)?;
    write_csv(&result, create(out)?)?;
    for row in &result.rows {
        let parts: Vec<String> = Algo::ALL
            .iter()
            .map(|&a| {
                let s = row.get(a);
                format!("{}={:.2}({:.2}%)", a.name(), s.mean_cost, 100.0 * s.mean_gap)
            })
            .collect();
        println!("{}={} {}", result.param.name(), row.value, parts.join(" "));
    }
    let failures: usize = result.rows.iter().flat_map(|r| r.algos.iter()).map(|s| s.failures).sum();
    if failures > 0 {
        eprintln!("{failures} runs failed; see the CSV");
    }
    Ok(())
}

fn export(instance_path: &Path, out: &Path) -> Result<(), Failure> {
    let instance = read_instance(instance_path)?;
    export_lp(&instance, create(out)?)?;
    Ok(())
}

fn verify(instance_path: &Path, plan_path: &Path) -> Result<(), Failure> {
    let instance = read_instance(instance_path)?;
    let plan = load_plan(open(plan_path)?).map_err(|e| Failure::User(format!("{}: {e}", plan_path.display())))?;
    plan.check_shape(&instance).map_err(|e| Failure::User(e.to_string()))?;
    if let Err(v) = check_capacity(&plan, &instance) {
        return Err(Failure::User(format!("infeasible plan: {v}")));
    }
    println!(
        "feasible=true cost={} download={} update={}",
        total_cost(&plan, &instance)?,
        download_cost(&plan, &instance)?,
        update_cost(&plan, &instance)?
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::User("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Solver(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve { algo, instance, plan, seed, limit } => solve(algo, &instance, plan, seed, limit),
        Command::Sweep { spec, out } => sweep(&spec, &out),
        Command::ExportLp { instance, out } => export(&instance, &out),
        Command::Verify { instance, plan } => verify(&instance, &plan),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(2)
        }
    }
}
