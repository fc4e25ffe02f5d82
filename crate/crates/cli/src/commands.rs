use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rulefuse::ensemble::{train_bagged_ensemble, BaggingConfig, TreeEnsemble};
use rulefuse::extract::{extract_rules, stats, ModelStats, RuleFormat, DEFAULT_ZERO_TOLERANCE};
use rulefuse::penalties::{PenaltyConfig, PenaltyKind};
use rulefuse::problem::FitProblem;
use rulefuse::solver::{
    gbcd_solve, path_solve, select_model, PathConfig, PathResult, Selection, SolveResult,
    SolverConfig,
};
use rulefuse::synth::friedman1;
use rulefuse::Dataset;

use crate::Failure;

/// What a command produced, for the manifest.
pub struct Outputs {
    pub primary: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub deterministic: Vec<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyArg {
    L1,
    Mcp,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::L1 => PenaltyKind::L1,
            PenaltyArg::Mcp => PenaltyKind::Mcp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionArg {
    Greedy,
    Cyclic,
    Random,
}

impl From<SelectionArg> for Selection {
    fn from(s: SelectionArg) -> Self {
        match s {
            SelectionArg::Greedy => Selection::Greedy,
            SelectionArg::Cyclic => Selection::Cyclic,
            SelectionArg::Random => Selection::Random,
        }
    }
}

fn load_data(path: &Path, target: &str) -> Result<Dataset, Failure> {
    Dataset::from_csv(path, target)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn load_ensemble(path: &Path) -> Result<TreeEnsemble, Failure> {
    TreeEnsemble::load_json(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn check_features(ensemble: &TreeEnsemble, data: &Dataset, path: &Path) -> Result<(), Failure> {
    if ensemble.n_features() != data.n_features() {
        return Err(Failure::invalid(format!(
            "feature-count mismatch: ensemble expects {} features, {} has {}",
            ensemble.n_features(),
            path.display(),
            data.n_features()
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Writes a Friedman #1 dataset as CSV.
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<Outputs, Failure> {
    let data = friedman1(args.rows, args.noise, args.seed)?;
    data.to_csv(&args.out, &args.target)?;
    eprintln!(
        "wrote {} ({} rows, {} features)",
        args.out.display(),
        data.n_rows(),
        data.n_features()
    );
    Ok(Outputs {
        primary: args.out.clone(),
        inputs: vec![],
        deterministic: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

/// Trains a bagged ensemble of regression trees.
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    /// Fraction of features tried at each split.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub feature_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit every tree on the full data instead of a bootstrap sample.
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long, default_value = "ensemble.json")]
    pub out: PathBuf,
}

pub fn train(args: &TrainArgs) -> Result<Outputs, Failure> {
    let data = load_data(&args.data, &args.target)?;
    let cfg = BaggingConfig {
        n_trees: args.trees,
        max_depth: args.depth,
        min_leaf: args.min_leaf,
        feature_subsample: args.feature_frac,
        bootstrap: !args.no_bootstrap,
        seed: args.seed,
    };
    let ensemble = train_bagged_ensemble(&data, &cfg)?;
    ensemble.save_json(&args.out)?;
    eprintln!(
        "wrote {} ({} trees, {} leaves)",
        args.out.display(),
        ensemble.n_trees(),
        ensemble.n_leaves()
    );
    Ok(Outputs {
        primary: args.out.clone(),
        inputs: vec![args.data.clone()],
        deterministic: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

/// Computes a warm-started regularization path.
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct PathArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Fraction of rows held out for validation (seeded split); 0 disables it.
    #[arg(long, default_value_t = 0.2)]
    pub valid_frac: f64,
    /// Separate validation CSV; overrides --valid-frac.
    #[arg(long)]
    pub valid_data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Mcp)]
    pub penalty: PenaltyArg,
    #[arg(long, default_value_t = 1.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda_f_ratio: f64,
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub min_ratio: f64,
    #[arg(long, value_enum, default_value_t = SelectionArg::Greedy)]
    pub selection: SelectionArg,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Cap on block updates per grid point.
    #[arg(long)]
    pub max_updates: Option<usize>,
    /// Start every grid point from zero.
    #[arg(long)]
    pub cold_start: bool,
    /// Seeds the validation split and random block selection.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "path.json")]
    pub out: PathBuf,
}

/// Seeded split into (train, validation) with `ceil(frac * n)` validation rows.
fn split(data: &Dataset, frac: f64, seed: u64) -> Result<(Dataset, Dataset), Failure> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Failure::invalid(format!(
            "--valid-frac must be in [0, 1), got {frac}"
        )));
    }
    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_valid = (frac * data.n_rows() as f64).ceil() as usize;
    let (valid, train) = order.split_at(n_valid);
    let (mut valid, mut train) = (valid.to_vec(), train.to_vec());
    valid.sort_unstable();
    train.sort_unstable();
    if train.is_empty() {
        return Err(Failure::invalid(
            "validation split leaves no training rows".to_string(),
        ));
    }
    Ok((data.subset(&train)?, data.subset(&valid)?))
}

pub fn path(args: &PathArgs) -> Result<Outputs, Failure> {
    let ensemble = load_ensemble(&args.ensemble)?;
    let data = load_data(&args.data, &args.target)?;
    check_features(&ensemble, &data, &args.data)?;
    let mut inputs = vec![args.ensemble.clone(), args.data.clone()];
    let (train, valid) = match &args.valid_data {
        Some(p) => {
            let valid = load_data(p, &args.target)?;
            check_features(&ensemble, &valid, p)?;
            inputs.push(p.clone());
            (data, Some(valid))
        }
        None if args.valid_frac > 0.0 => {
            let (t, v) = split(&data, args.valid_frac, args.seed)?;
            (t, Some(v))
        }
        None => (data, None),
    };

    let problem = FitProblem::new(&ensemble, &train)?;
    let held = valid
        .as_ref()
        .map(|v| problem.held_out(&ensemble, v))
        .transpose()?;
    let cfg = PathConfig {
        kind: args.penalty.into(),
        n_grid: args.grid,
        lambda_min_ratio: args.min_ratio,
        lambda_f_ratio: args.lambda_f_ratio,
        gamma: args.gamma,
        warm_start: !args.cold_start,
    };
    let solver = SolverConfig {
        tolerance: args.tolerance,
        max_block_updates: args.max_updates,
        rng_seed: args.seed,
        ..SolverConfig::default().with_selection(args.selection.into())
    };
    let mut result = path_solve(
        &problem.matrix,
        &problem.target,
        &cfg,
        &solver,
        held.as_ref().map(|h| h.as_validation()),
    )?;
    result.intercept = problem.intercept;
    write_text(&args.out, &result.to_json_string()?)?;
    let unconverged = result.points.iter().filter(|p| !p.converged).count();
    eprintln!(
        "wrote {} ({} points, {} block updates, {unconverged} unconverged)",
        args.out.display(),
        result.points.len(),
        result.total_block_updates()
    );
    Ok(Outputs {
        primary: args.out.clone(),
        inputs,
        deterministic: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

/// Picks a model from a path and writes its rules and statistics.
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub max_rules: usize,
    /// CSV on which to report test MSE and R^2.
    #[arg(long, requires = "target")]
    pub test_data: Option<PathBuf>,
    /// Response column of --test-data.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOLERANCE)]
    pub zero_tol: f64,
    /// Writes `<prefix>.rules.json`, `<prefix>.rules.txt` and `<prefix>.stats.json`.
    #[arg(long, default_value = "model")]
    pub out_prefix: PathBuf,
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    path_index: usize,
    lambda_s: f64,
    lambda_f: f64,
    validation_mse: Option<f64>,
    #[serde(flatten)]
    stats: &'a ModelStats,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn extract(args: &ExtractArgs) -> Result<Outputs, Failure> {
    let ensemble = load_ensemble(&args.ensemble)?;
    let text = fs::read_to_string(&args.path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", args.path.display())))?;
    let path = PathResult::from_json_str(&text, &ensemble.leaf_offsets())
        .map_err(|e| Failure::invalid(format!("{}: {e}", args.path.display())))?;
    let index = select_model(&path, args.max_rules)?;
    let point = &path.points[index];
    let rule_set = extract_rules(&ensemble, &point.weights, args.zero_tol, path.intercept)?;

    let mut inputs = vec![args.ensemble.clone(), args.path.clone()];
    let test = match (&args.test_data, &args.target) {
        (Some(p), Some(target)) => {
            let data = load_data(p, target)?;
            check_features(&ensemble, &data, p)?;
            inputs.push(p.clone());
            Some(data)
        }
        _ => None,
    };
    let model_stats = stats(&ensemble, &rule_set, test.as_ref())?;

    let json = with_suffix(&args.out_prefix, ".rules.json");
    let txt = with_suffix(&args.out_prefix, ".rules.txt");
    let stats_path = with_suffix(&args.out_prefix, ".stats.json");
    rule_set.save(&json, RuleFormat::Json)?;
    rule_set.save(&txt, RuleFormat::Text)?;
    let doc = StatsDoc {
        path_index: index,
        lambda_s: point.lambda_s,
        lambda_f: point.lambda_f,
        validation_mse: point.validation_mse,
        stats: &model_stats,
    };
    let doc = serde_json::to_string_pretty(&doc).map_err(|e| Failure::invalid(e.to_string()))?;
    write_text(&stats_path, &doc)?;
    eprintln!(
        "selected path point {index}: {} rules, {} internal nodes; wrote {}",
        model_stats.n_rules,
        model_stats.n_internal_nodes,
        json.display()
    );
    Ok(Outputs {
        primary: json.clone(),
        inputs,
        deterministic: vec![json, txt, stats_path],
        seed: None,
    })
}

/// Compares greedy and cyclic block selection on one problem.
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Mcp)]
    pub penalty: PenaltyArg,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_s: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda_f: f64,
    #[arg(long, default_value_t = 1.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long)]
    pub max_updates: Option<usize>,
    #[arg(long, default_value = "bench.json")]
    pub out: PathBuf,
    /// Objective traces of both runs.
    #[arg(long, default_value = "bench_traces.csv")]
    pub traces: PathBuf,
}

#[derive(Debug, Serialize)]
struct BenchRun {
    final_objective: f64,
    n_block_updates: usize,
    converged: bool,
    wall_time_seconds: f64,
    /// First block-update count at which the objective is within 1% of the target.
    updates_to_target: usize,
    seconds_to_target: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    target_objective: f64,
    /// Cyclic over greedy updates to target; absent when greedy needs none.
    update_ratio: Option<f64>,
    greedy: BenchRun,
    cyclic: BenchRun,
}

fn updates_to(result: &SolveResult, target: f64) -> usize {
    result
        .objective_trace
        .iter()
        .find(|(_, v)| *v <= target)
        .map_or(result.n_block_updates, |&(k, _)| k)
}

pub fn bench(args: &BenchArgs) -> Result<Outputs, Failure> {
    let ensemble = load_ensemble(&args.ensemble)?;
    let data = load_data(&args.data, &args.target)?;
    check_features(&ensemble, &data, &args.data)?;
    let problem = FitProblem::new(&ensemble, &data)?;
    let cfg = match args.penalty {
        PenaltyArg::L1 => PenaltyConfig::l1(args.lambda_s, args.lambda_f),
        PenaltyArg::Mcp => PenaltyConfig::mcp(args.lambda_s, args.gamma, args.lambda_f),
    };
    let solver = |selection: Selection, cap: Option<usize>| SolverConfig {
        tolerance: args.tolerance,
        max_block_updates: cap,
        ..SolverConfig::default().with_selection(selection)
    };
    let run = |selection: Selection| -> Result<SolveResult, Failure> {
        Ok(gbcd_solve(
            &problem.matrix,
            &problem.target,
            &cfg,
            &solver(selection, args.max_updates),
            None,
        )?)
    };
    let (greedy, cyclic) = (run(Selection::Greedy)?, run(Selection::Cyclic)?);
    let best = greedy.final_objective.min(cyclic.final_objective);
    let target = best + 0.01 * best.abs();

    // Runs are deterministic, so a rerun capped at the crossing point times it exactly.
    let report_for = |selection: Selection, r: &SolveResult| -> Result<BenchRun, Failure> {
        let k = updates_to(r, target);
        let started = Instant::now();
        gbcd_solve(
            &problem.matrix,
            &problem.target,
            &cfg,
            &solver(selection, Some(k)),
            None,
        )?;
        Ok(BenchRun {
            final_objective: r.final_objective,
            n_block_updates: r.n_block_updates,
            converged: r.converged,
            wall_time_seconds: r.wall_time.as_secs_f64(),
            updates_to_target: k,
            seconds_to_target: started.elapsed().as_secs_f64(),
        })
    };
    let report = BenchReport {
        target_objective: target,
        update_ratio: None,
        greedy: report_for(Selection::Greedy, &greedy)?,
        cyclic: report_for(Selection::Cyclic, &cyclic)?,
    };
    let report = BenchReport {
        update_ratio: (report.greedy.updates_to_target > 0).then(|| {
            report.cyclic.updates_to_target as f64 / report.greedy.updates_to_target as f64
        }),
        ..report
    };

    let mut csv = String::from("selection,block_updates,objective\n");
    for (name, r) in [("greedy", &greedy), ("cyclic", &cyclic)] {
        for (k, v) in &r.objective_trace {
            csv.push_str(&format!("{name},{k},{v}\n"));
        }
    }
    write_text(&args.traces, &csv)?;
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| Failure::invalid(e.to_string()))?;
    let mut file = fs::File::create(&args.out)
        .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", args.out.display())))?;
    writeln!(file, "{text}").map_err(|e| Failure::invalid(e.to_string()))?;
    eprintln!(
        "greedy {} vs cyclic {} block updates to reach {target:.6}",
        report.greedy.updates_to_target, report.cyclic.updates_to_target
    );
    Ok(Outputs {
        primary: args.out.clone(),
        inputs: vec![args.ensemble.clone(), args.data.clone()],
        deterministic: vec![args.traces.clone()],
        seed: None,
    })
}
