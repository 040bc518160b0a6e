//! The epoch loop tying the layers together, plus Monte-Carlo validation of
//! returned plans and a small benchmark harness.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{simulate_from_belief, Belief, NominalPlan};
use crate::geometry::{build_adjacency_graph, GeometryError, Labeler};
use crate::guide::{
    biased_sample, guide_tree, plan_guide, segment_for, GuideModel, GuidePath, Lift, SimbaKind,
};
use crate::ltlf::{compile_to_dfa, Alphabet, CompileError, StateId, Symbol};
use crate::scenario::Scenario;
use crate::task::{prune_letters, PrunedDfa, TaskError};
use crate::tree::{extract_plan, BeliefTree, Budget, FullModel, GrowOutcome, TreeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("specification is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

impl From<TaskError> for PlanError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Infeasible { blocked } if blocked.is_empty() => {
                PlanError::Infeasible("no accepting state is reachable".into())
            }
            TaskError::Infeasible { blocked } => PlanError::Infeasible(format!(
                "no accepting state is reachable once the letters {} are pruned",
                blocked.join(" ")
            )),
        }
    }
}

/// Planner settings. Per-epoch budgets are given in seconds but enforced as
/// extension counts (`seconds × extensions_per_second`) so that a seeded run
/// is reproducible; only `time_limit` reads the clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Guide layer budget per epoch, seconds.
    pub guide_budget: f64,
    /// Belief search budget per epoch, seconds.
    pub search_budget: f64,
    /// Overall wall-clock limit, seconds.
    pub time_limit: f64,
    pub extensions_per_second: f64,
    /// Probability of sampling near the guide.
    pub bias: f64,
    /// Starting bias radius; twice the per-step displacement bound if unset.
    pub initial_radius: Option<f64>,
    pub radius_growth: f64,
    /// Propagation steps per extension.
    pub n_prop: usize,
    pub seed: u64,
    /// Guide model; `None` searches without a guide.
    pub simba: Option<SimbaKind>,
    pub max_epochs: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            guide_budget: 1.0,
            search_budget: 1.0,
            time_limit: 120.0,
            extensions_per_second: 2000.0,
            bias: 0.75,
            initial_radius: None,
            radius_growth: 1.5,
            n_prop: crate::tree::DEFAULT_N_PROP,
            seed: 0,
            simba: Some(SimbaKind::Sba),
            max_epochs: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Config(m.to_string()));
        // A zero guide budget leaves the belief search unbiased.
        if !(self.guide_budget >= 0.0 && self.guide_budget.is_finite()) {
            return bad("guide_budget must be non-negative");
        }
        if !(self.search_budget > 0.0 && self.search_budget.is_finite()) {
            return bad("search_budget must be positive");
        }
        if !(self.extensions_per_second >= 1.0) {
            return bad("extensions_per_second must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.bias) {
            return bad("bias must lie in [0, 1]");
        }
        if !(self.radius_growth >= 1.0) {
            return bad("radius_growth must be at least 1");
        }
        if self.initial_radius.is_some_and(|d| !(d > 0.0)) {
            return bad("initial_radius must be positive");
        }
        if self.n_prop == 0 {
            return bad("n_prop must be at least 1");
        }
        if self.time_limit.is_nan() || self.time_limit < 0.0 {
            return bad("time_limit must be non-negative");
        }
        Ok(())
    }

    /// Extension count standing in for a budget of `seconds`.
    pub fn extensions(&self, seconds: f64) -> usize {
        (seconds * self.extensions_per_second).ceil().max(0.0) as usize
    }
}

/// Deterministic summary of a search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub epochs: usize,
    pub belief_vertices: usize,
    pub guide_vertices: usize,
    pub belief_attempts: usize,
    pub guide_attempts: usize,
    pub pruned_label_hits: usize,
}

/// A plan whose label word satisfies the formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scenario: String,
    pub formula: String,
    pub alphabet: Vec<String>,
    pub plan: NominalPlan,
    pub beliefs: Vec<Belief>,
    /// True propositions of `L(b_k)` for each step.
    pub labels: Vec<Vec<String>>,
    /// Automaton state after each label.
    pub run: Vec<StateId>,
    pub stats: SearchStats,
}

impl Solution {
    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.alphabet.iter().cloned())
    }

    pub fn word(&self) -> Vec<Symbol> {
        let alphabet = self.alphabet();
        self.labels
            .iter()
            .map(|l| alphabet.symbol(l.iter().map(String::as_str)))
            .collect()
    }

    /// Trajectory table: `step,time,mean_i…,sigma_i…,lambda_i…,label,q`
    /// where `sigma_i`/`lambda_i` are diagonals of `Σ⁺`/`Λ⁺` and `label` joins
    /// the true propositions with `|`.
    pub fn to_csv(&self, dt: f64) -> String {
        let n = self.beliefs.first().map_or(0, |b| b.mean.len());
        let mut out = String::from("step,time");
        for prefix in ["mean", "sigma", "lambda"] {
            for i in 0..n {
                out.push_str(&format!(",{prefix}_{i}"));
            }
        }
        out.push_str(",label,q\n");
        for (k, b) in self.beliefs.iter().enumerate() {
            out.push_str(&format!("{k},{}", k as f64 * dt));
            for v in b.mean.iter() {
                out.push_str(&format!(",{v}"));
            }
            for v in b.est_cov.diagonal().iter() {
                out.push_str(&format!(",{v}"));
            }
            for v in b.mean_cov.diagonal().iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{}\n", self.labels[k].join("|"), self.run[k]));
        }
        out
    }
}

/// Per-epoch record for logs and the weight-feedback checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub task_plan: Vec<StateId>,
    /// `w(q)` of each task-plan state when the plan was chosen.
    pub weights: Vec<f64>,
    pub guide_found: bool,
    pub guide_len: usize,
    pub radius: f64,
    pub belief_vertices: usize,
    /// Per-state counters after the epoch.
    pub cov: Vec<usize>,
    pub numsel: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: Option<Solution>,
    pub stats: SearchStats,
    pub log: Vec<EpochLog>,
    pub guide: Option<GuidePath>,
    pub belief_tree: Option<BeliefTree>,
    pub pruned: PrunedDfa,
    pub wall_time: Duration,
}

/// Compiles and prunes the scenario's automaton.
pub fn prepare(scenario: &Scenario) -> Result<(PrunedDfa, Labeler), PlanError> {
    let dfa = compile_to_dfa(&scenario.formula)?;
    let adjacency = build_adjacency_graph(&scenario.regions)?;
    let labeler = Labeler::new(
        dfa.alphabet(),
        &scenario.props,
        &scenario.regions,
        &scenario.system.workspace,
    )?;
    Ok((prune_letters(&dfa, &scenario.props, &scenario.regions, &adjacency), labeler))
}

fn root_error(e: TreeError) -> PlanError {
    match e {
        TreeError::Label(m) => PlanError::Config(m),
        other => PlanError::Infeasible(other.to_string()),
    }
}

/// Runs epochs of task planning, guide search, and biased belief search
/// until an accepting vertex is found or the time limit passes.
pub fn solve(scenario: &Scenario, config: &PlannerConfig) -> Result<SolveResult, PlanError> {
    config.validate()?;
    let started = Instant::now();
    let deadline = started + Duration::from_secs_f64(config.time_limit.min(1e9));
    let (mut pruned, labeler) = prepare(scenario)?;
    pruned.checked_dist_from_acc()?;

    let sys = &scenario.system;
    let full = FullModel::new(sys, &labeler);
    let mut tree = BeliefTree::new(&full, &pruned, scenario.initial.clone()).map_err(root_error)?;
    let root_q = tree.root().q;

    let simba = config.simba.map(|kind| {
        let mut model = scenario.simba.clone();
        model.kind = kind;
        model
    });
    let guide_model = simba.as_ref().map(|m| GuideModel::new(sys, &labeler, m));
    let mut guide_tree_state = match &guide_model {
        Some(m) => Some(guide_tree(m, &pruned, &scenario.initial).map_err(root_error)?),
        None => None,
    };

    let lift = Lift::new(&scenario.simba, &sys.state_bounds);
    let cap = sys.state_bounds.select(&scenario.simba.projection).diameter();
    let mut radius = config
        .initial_radius
        .unwrap_or(2.0 * sys.max_step_displacement())
        .min(cap);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut guide_rng = ChaCha8Rng::seed_from_u64(config.seed);
    guide_rng.set_stream(1);

    let mut guide: Option<GuidePath> = None;
    let mut log = Vec::new();
    let mut stats = SearchStats::default();
    let mut solution = None;

    let timed_out = |stats: &mut SearchStats, tree: &BeliefTree, g: &Option<BeliefTree>| {
        stats.belief_vertices = tree.len();
        stats.belief_attempts = tree.stats.attempts;
        stats.pruned_label_hits = tree.stats.pruned_label_hits
            + g.as_ref().map_or(0, |g| g.stats.pruned_label_hits);
        stats.guide_vertices = g.as_ref().map_or(0, BeliefTree::len);
        stats.guide_attempts = g.as_ref().map_or(0, |g| g.stats.attempts);
    };

    if let Some(id) = tree.accepting() {
        let extracted = extract_plan(&tree, sys, &pruned, id);
        timed_out(&mut stats, &tree, &guide_tree_state);
        solution = Some(make_solution(scenario, &pruned, extracted, stats.clone()));
    }

    while solution.is_none()
        && config.time_limit > 0.0
        && config.max_epochs.is_none_or(|m| stats.epochs < m)
        && Instant::now() < deadline
    {
        stats.epochs += 1;
        let plan = pruned.plan_task_from(root_q)?;
        let weights = plan
            .run
            .iter()
            .map(|&q| pruned.state_weight(q).unwrap_or(0.0))
            .collect();

        if let (Some(model), Some(gt)) = (&guide_model, guide_tree_state.as_mut()) {
            let budget = Budget {
                extensions: config.extensions(config.guide_budget),
                deadline: Some(deadline),
            };
            if let Some(path) = plan_guide(model, gt, &pruned, &plan, config.n_prop, budget, &mut guide_rng)
            {
                guide = Some(path);
            }
        }

        let budget = Budget {
            extensions: config.extensions(config.search_budget),
            deadline: Some(deadline),
        };
        let mut sampler = |q: StateId, r: &mut ChaCha8Rng| {
            let segment = guide.as_ref().map_or(&[][..], |g| segment_for(q, g));
            biased_sample(segment, radius, config.bias, &lift, r)
        };
        let outcome = tree.grow(&full, &pruned, &plan, config.n_prop, budget, &mut sampler, &mut rng);

        for (q, count) in tree.coverage().into_iter().enumerate() {
            pruned.stats[q].cov = count;
        }
        log.push(EpochLog {
            epoch: stats.epochs,
            task_plan: plan.run.clone(),
            weights,
            guide_found: guide.is_some(),
            guide_len: guide.as_ref().map_or(0, GuidePath::len),
            radius,
            belief_vertices: tree.len(),
            cov: pruned.stats.iter().map(|s| s.cov).collect(),
            numsel: pruned.stats.iter().map(|s| s.numsel).collect(),
        });
        timed_out(&mut stats, &tree, &guide_tree_state);

        match outcome {
            GrowOutcome::Accepted(id) => {
                let extracted = extract_plan(&tree, sys, &pruned, id);
                solution = Some(make_solution(scenario, &pruned, extracted, stats.clone()));
            }
            GrowOutcome::TimedOut => break,
            GrowOutcome::Exhausted => radius = (radius * config.radius_growth).min(cap),
        }
    }
    timed_out(&mut stats, &tree, &guide_tree_state);

    Ok(SolveResult {
        solution,
        stats,
        log,
        guide,
        belief_tree: Some(tree),
        pruned,
        wall_time: started.elapsed(),
    })
}

fn make_solution(
    scenario: &Scenario,
    pruned: &PrunedDfa,
    extracted: crate::tree::ExtractedPlan,
    stats: SearchStats,
) -> Solution {
    let alphabet = pruned.alphabet();
    Solution {
        scenario: scenario.name.clone(),
        formula: scenario.formula.to_string(),
        alphabet: alphabet.names().to_vec(),
        plan: extracted.plan,
        beliefs: extracted.beliefs,
        labels: extracted
            .word
            .iter()
            .map(|&s| alphabet.true_names(s).into_iter().map(String::from).collect())
            .collect(),
        run: extracted.run,
        stats,
    }
}

/// Empirical frequency of one asserted proposition at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEntry {
    pub step: usize,
    pub prop: String,
    pub level: f64,
    pub frequency: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub trials: usize,
    pub entries: Vec<McEntry>,
}

impl McReport {
    pub fn flagged(&self) -> impl Iterator<Item = &McEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

/// Executes the plan `trials` times in closed loop and, for every step and
/// every proposition the plan's word asserts there, counts how often the
/// underlying event held for the true state. An entry is flagged when the
/// frequency falls below `level - 3·sqrt(level·(1-level)/trials)`.
pub fn validate_monte_carlo(
    scenario: &Scenario,
    solution: &Solution,
    trials: usize,
    seed: u64,
) -> Result<McReport, PlanError> {
    let alphabet = solution.alphabet();
    let labeler = Labeler::new(
        &alphabet,
        &scenario.props,
        &scenario.regions,
        &scenario.system.workspace,
    )?;
    let word = solution.word();
    let asserted: Vec<(usize, usize)> = word
        .iter()
        .enumerate()
        .flat_map(|(k, s)| (0..alphabet.len()).filter(move |&b| s.has(b)).map(move |b| (k, b)))
        .collect();
    let start = &solution.beliefs[0];
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(t as u64)));
            let rollout = simulate_from_belief(&scenario.system, &solution.plan, start, &mut rng);
            asserted
                .iter()
                .map(|&(k, b)| labeler.event_holds(b, &rollout.true_states[k]) as usize)
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![0; asserted.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let entries = asserted
        .iter()
        .zip(counts)
        .map(|(&(k, b), c)| {
            let level = labeler.level(b);
            let frequency = if trials == 0 { 1.0 } else { c as f64 / trials as f64 };
            let se = (level * (1.0 - level) / trials.max(1) as f64).sqrt();
            McEntry {
                step: k,
                prop: alphabet.names()[b].clone(),
                level,
                frequency,
                flagged: trials > 0 && frequency < level - 3.0 * se,
            }
        })
        .collect();
    Ok(McReport { trials, entries })
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `i` under master seed `master`.
pub fn trial_seed(master: u64, i: usize) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(i as u64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "no-guide")]
    NoGuide,
    #[serde(rename = "geo-simba")]
    Geo,
    #[serde(rename = "sba-simba")]
    Sba,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NoGuide, Variant::Geo, Variant::Sba];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoGuide => "no-guide",
            Variant::Geo => "geo-simba",
            Variant::Sba => "sba-simba",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "no-guide" | "none" => Some(Variant::NoGuide),
            "geo-simba" | "geo" => Some(Variant::Geo),
            "sba-simba" | "sba" => Some(Variant::Sba),
            _ => None,
        }
    }

    pub fn simba(self) -> Option<SimbaKind> {
        match self {
            Variant::NoGuide => None,
            Variant::Geo => Some(SimbaKind::Geometric),
            Variant::Sba => Some(SimbaKind::Sba),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub variant: Variant,
    pub trials: usize,
    pub successes: usize,
    pub success_pct: f64,
    /// Failures count as `limit`.
    pub mean_time: f64,
    pub sem_time: f64,
}

/// Runs every scenario × variant for `trials` seeds (in parallel) with the
/// given time limit.
pub fn run_benchmark(
    scenarios: &[Scenario],
    variants: &[Variant],
    trials: usize,
    limit: f64,
    base: &PlannerConfig,
) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    if trials == 0 {
        return rows;
    }
    for scenario in scenarios {
        for &variant in variants {
            let times: Vec<Option<f64>> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let config = PlannerConfig {
                        seed: trial_seed(base.seed, i),
                        time_limit: limit,
                        simba: variant.simba(),
                        ..base.clone()
                    };
                    match solve(scenario, &config) {
                        Ok(SolveResult {
                            solution: Some(_),
                            wall_time,
                            ..
                        }) => Some(wall_time.as_secs_f64().min(limit)),
                        _ => None,
                    }
                })
                .collect();
            rows.push(bench_row(&scenario.name, variant, &times, limit));
        }
    }
    rows
}

fn bench_row(scenario: &str, variant: Variant, times: &[Option<f64>], limit: f64) -> BenchRow {
    let n = times.len();
    let successes = times.iter().filter(|t| t.is_some()).count();
    let clamped: Vec<f64> = times.iter().map(|t| t.unwrap_or(limit)).collect();
    let mean = clamped.iter().sum::<f64>() / n as f64;
    let sem = if n > 1 {
        let var = clamped.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    BenchRow {
        scenario: scenario.to_string(),
        variant,
        trials: n,
        successes,
        success_pct: 100.0 * successes as f64 / n as f64,
        mean_time: mean,
        sem_time: sem,
    }
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("scenario,variant,trials,successes,success_pct,mean_time_s,sem_time_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.1},{:.4},{:.4}\n",
            r.scenario,
            r.variant.name(),
            r.trials,
            r.successes,
            r.success_pct,
            r.mean_time,
            r.sem_time
        ));
    }
    out
}
