use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use simba_core::geometry::build_adjacency_graph;
use simba_core::guide::SimbaKind;
use simba_core::ltlf::{compile_to_dfa, export_dot, export_dot_named, parse_formula, PropTable};
use simba_core::planner::{
    bench_csv, prepare, run_benchmark, solve, validate_monte_carlo, PlanError, PlannerConfig,
    Solution, Variant,
};
use simba_core::scenario::{load_scenario, PropsFile, Scenario};
use simba_core::task::{prune_letters, PrunedDfa};

#[derive(Parser)]
#[command(name = "simba", version, about = "Belief-space planning for LTLf tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GuideArg {
    Sba,
    Geo,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a formula to a minimal DFA.
    Compile {
        formula: String,
        /// JSON with `propositions` (and optionally `regions`).
        #[arg(long)]
        props: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Print automaton statistics as JSON.
        #[arg(long)]
        stats: bool,
        /// Write the pruned automaton (needs `regions` in the props file).
        #[arg(long)]
        dump_pruned_dot: Option<PathBuf>,
    },
    /// Search for a plan satisfying the scenario's formula.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, value_enum)]
        simba: Option<GuideArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tree_out: Option<PathBuf>,
        /// Guide path, JSON (or CSV when the name ends in `.csv`).
        #[arg(long)]
        guide_out: Option<PathBuf>,
        /// Trajectory table of the solution.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        dump_pruned_dot: Option<PathBuf>,
        /// Epoch logs as JSON lines on stderr.
        #[arg(long)]
        log_json: bool,
        /// Planner configuration JSON.
        #[arg(long, env = "SIMBA_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Monte-Carlo check of a plan against its asserted propositions.
    Validate {
        scenario: PathBuf,
        plan: PathBuf,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario in a directory under several planner variants.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "no-guide,geo-simba,sba-simba")]
        variants: Vec<String>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 30.0)]
        limit: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, env = "SIMBA_CONFIG")]
        config: Option<PathBuf>,
    },
}

enum Failure {
    NoSolution(String),
    Usage(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::NoSolution(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::NoSolution(m) | Failure::Usage(m) | Failure::Infeasible(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn plan_failure(e: PlanError) -> Failure {
    match e {
        PlanError::Infeasible(_) => Failure::Infeasible(e.to_string()),
        other => usage(other),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let s = load_scenario(path).map_err(usage)?;
    for w in &s.warnings {
        eprintln!("warning: {}: {w}", s.name);
    }
    Ok(s)
}

fn load_config(path: Option<&Path>) -> Result<PlannerConfig, Failure> {
    match path {
        None => Ok(PlannerConfig::default()),
        Some(p) => {
            let text = read(p)?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn pruned_dot(pruned: &PrunedDfa) -> String {
    let dashed: Vec<usize> = pruned.sink().into_iter().collect();
    export_dot_named(pruned.automaton(), "pruned", &dashed)
}

fn compile(
    formula: &str,
    props_path: &Path,
    dot: Option<&Path>,
    stats: bool,
    pruned_out: Option<&Path>,
) -> Result<(), Failure> {
    let file: PropsFile = serde_json::from_str(&read(props_path)?)
        .map_err(|e| usage(format!("{}: {e}", props_path.display())))?;
    let props = PropTable::new(file.propositions.clone());
    let ast = parse_formula(formula, &props).map_err(usage)?;
    let dfa = compile_to_dfa(&ast).map_err(usage)?;
    if let Some(path) = dot {
        write(path, &export_dot(&dfa))?;
    }
    let mut pruned_letters = None;
    if let Some(path) = pruned_out {
        let dim = file.regions.iter().find_map(|r| r.dim()).unwrap_or(0);
        let regions = file
            .regions
            .iter()
            .map(|r| r.polytope(dim))
            .collect::<Result<Vec<_>, _>>()
            .map_err(usage)?;
        let adjacency = build_adjacency_graph(&regions).map_err(usage)?;
        let pruned = prune_letters(&dfa, &props, &regions, &adjacency);
        write(path, &pruned_dot(&pruned))?;
        pruned_letters = Some(pruned.blocked_letters());
    }
    if stats {
        let report = serde_json::json!({
            "alphabet": dfa.alphabet().names(),
            "states": dfa.num_states(),
            "transitions": dfa.num_transitions(),
            "accepting": dfa.accepting_states().collect::<Vec<_>>(),
            "pruned_letters": pruned_letters,
        });
        println!("{report}");
    } else {
        println!(
            "{}: {} states, {} transitions",
            ast,
            dfa.num_states(),
            dfa.num_transitions()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn plan(
    scenario_path: &Path,
    seed: Option<u64>,
    time_limit: Option<f64>,
    simba: Option<GuideArg>,
    out: Option<&Path>,
    tree_out: Option<&Path>,
    guide_out: Option<&Path>,
    csv: Option<&Path>,
    pruned_out: Option<&Path>,
    log_json: bool,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let scenario = load(scenario_path)?;
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = time_limit {
        cfg.time_limit = t;
    }
    match simba {
        Some(GuideArg::Sba) => cfg.simba = Some(SimbaKind::Sba),
        Some(GuideArg::Geo) => cfg.simba = Some(SimbaKind::Geometric),
        Some(GuideArg::None) => cfg.simba = None,
        None => {}
    }
    if let Some(path) = pruned_out {
        let (pruned, _) = prepare(&scenario).map_err(plan_failure)?;
        write(path, &pruned_dot(&pruned))?;
    }
    let result = solve(&scenario, &cfg).map_err(plan_failure)?;
    if log_json {
        for entry in &result.log {
            eprintln!("{}", serde_json::to_string(entry).expect("log entries serialize"));
        }
    }
    if let (Some(path), Some(tree)) = (tree_out, &result.belief_tree) {
        let snap = tree.snapshot(&result.pruned);
        write(path, &serde_json::to_string_pretty(&snap).expect("snapshot serializes"))?;
    }
    if let (Some(path), Some(guide)) = (guide_out, &result.guide) {
        let text = if path.extension().is_some_and(|e| e == "csv") {
            guide.to_csv()
        } else {
            serde_json::to_string_pretty(guide).expect("guide serializes")
        };
        write(path, &text)?;
    }
    let Some(solution) = result.solution else {
        return Err(Failure::NoSolution(format!(
            "no solution within {:.1}s ({} epochs, {} belief vertices)",
            cfg.time_limit, result.stats.epochs, result.stats.belief_vertices
        )));
    };
    eprintln!(
        "solved: {} steps, {} epochs, {} belief vertices, {:.3}s",
        solution.plan.len(),
        solution.stats.epochs,
        solution.stats.belief_vertices,
        result.wall_time.as_secs_f64()
    );
    if let Some(path) = csv {
        write(path, &solution.to_csv(scenario.system.dt))?;
    }
    let text = serde_json::to_string_pretty(&solution).expect("solution serializes");
    match out {
        Some(path) => write(path, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn validate(
    scenario_path: &Path,
    plan_path: &Path,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let scenario = load(scenario_path)?;
    let solution: Solution = serde_json::from_str(&read(plan_path)?)
        .map_err(|e| usage(format!("{}: {e}", plan_path.display())))?;
    let report = validate_monte_carlo(&scenario, &solution, trials, seed).map_err(plan_failure)?;
    if let Some(path) = out {
        write(path, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    let flagged: Vec<_> = report.flagged().collect();
    for e in &flagged {
        println!(
            "flagged: step {} {} frequency {:.4} < level {:.4}",
            e.step, e.prop, e.frequency, e.level
        );
    }
    println!(
        "{} trials, {} asserted propositions, {} flagged",
        trials,
        report.entries.len(),
        flagged.len()
    );
    if flagged.is_empty() {
        Ok(())
    } else {
        Err(Failure::NoSolution("plan failed Monte-Carlo validation".into()))
    }
}

fn bench(
    dir: &Path,
    variants: &[String],
    trials: usize,
    limit: f64,
    seed: u64,
    csv: Option<&Path>,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let variants = variants
        .iter()
        .map(|v| Variant::parse(v).ok_or_else(|| usage(format!("unknown variant `{v}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let scenarios = paths
        .iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = load_config(config)?;
    cfg.seed = seed;
    let rows = run_benchmark(&scenarios, &variants, trials, limit, &cfg);
    let table = bench_csv(&rows);
    print!("{table}");
    if let Some(path) = csv {
        write(path, &table)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compile {
            formula,
            props,
            dot,
            stats,
            dump_pruned_dot,
        } => compile(&formula, &props, dot.as_deref(), stats, dump_pruned_dot.as_deref()),
        Command::Plan {
            scenario,
            seed,
            time_limit,
            simba,
            out,
            tree_out,
            guide_out,
            csv,
            dump_pruned_dot,
            log_json,
            config,
        } => plan(
            &scenario,
            seed,
            time_limit,
            simba,
            out.as_deref(),
            tree_out.as_deref(),
            guide_out.as_deref(),
            csv.as_deref(),
            dump_pruned_dot.as_deref(),
            log_json,
            config.as_deref(),
        ),
        Command::Validate {
            scenario,
            plan,
            trials,
            seed,
            out,
        } => validate(&scenario, &plan, trials, seed, out.as_deref()),
        Command::Bench {
            dir,
            variants,
            trials,
            limit,
            seed,
            csv,
            config,
        } => bench(&dir, &variants, trials, limit, seed, csv.as_deref(), config.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
