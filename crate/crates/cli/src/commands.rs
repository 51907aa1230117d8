use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eop_core::estimator::{eop_plugin, eop_vanilla_average, eop_without_replacement, EopCurve};
use eop_core::io::{
    emit_figure, read_curve, read_key_values, read_ranking, read_runs, read_scores, write_curve, write_runs,
    write_scores, FigureOptions, RunRecord,
};
use eop_core::metrics::{spearman_rho, ValueMap};
use eop_core::report::{aggregate_seeds, apply_metric, budget_table, group_by_algorithm, PolicyValue, Sampling};
use eop_core::selection::{
    simulate_selection_rounds, simulate_uniform_rounds, uniform_regret_eop, Replacement, SelectionStrategy,
};
use eop_testbed::{run_pipeline, PipelineConfig};

use crate::config::ReportConfig;
use crate::neorl::{self, ImportArgs};

fn file_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn only_environment(records: Vec<RunRecord>, environment: Option<&str>) -> Result<Vec<RunRecord>> {
    match environment {
        Some(env) => {
            let kept: Vec<RunRecord> = records.into_iter().filter(|r| r.environment == env).collect();
            if kept.is_empty() {
                bail!("environment `{env}` not present in the runs");
            }
            Ok(kept)
        }
        None => Ok(records),
    }
}

fn policy_values(cfg: &ReportConfig, records: &[RunRecord]) -> Result<Vec<PolicyValue>> {
    let mut values = aggregate_seeds(records, cfg.aggregation);
    apply_metric(&mut values, cfg.metric)?;
    Ok(values)
}

fn estimate(sample: &eop_core::ValueSample, budget: usize, sampling: Sampling) -> Result<EopCurve> {
    Ok(match sampling {
        Sampling::WithReplacement => eop_plugin(sample, budget)?,
        Sampling::WithoutReplacement => eop_without_replacement(sample, budget)?,
    })
}

pub fn curve(cfg: &ReportConfig, runs: Option<PathBuf>, out_dir: Option<PathBuf>, sampling: Sampling) -> Result<()> {
    let records = read_runs(&cfg.input(runs, "runs")?)?;
    let out_dir = cfg.output_dir(out_dir)?;
    let groups = group_by_algorithm(&policy_values(cfg, &records)?)?;
    for g in &groups {
        let budget = cfg.budget_max.unwrap_or(g.sample.len());
        let curve = estimate(&g.sample, budget, sampling)
            .with_context(|| format!("{} on {}", g.algorithm, g.environment))?;
        let path = out_dir.join(format!(
            "{}__{}.csv",
            file_component(&g.environment),
            file_component(&g.algorithm)
        ));
        write_curve(&path, &curve)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub struct RegretArgs {
    pub runs: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub strategies: Vec<String>,
    pub environment: Option<String>,
    pub uniform_sampling: Sampling,
    pub rounds: usize,
}

pub fn regret(cfg: &ReportConfig, args: RegretArgs) -> Result<()> {
    let records = read_runs(&cfg.input(args.runs, "runs")?)?;
    let rounds = read_scores(&cfg.input(args.scores, "scores")?)?;
    let out_dir = cfg.output_dir(args.out_dir)?;
    let records = only_environment(records, args.environment.as_deref())?;
    let environments: BTreeSet<&str> = records.iter().map(|r| r.environment.as_str()).collect();
    if environments.len() > 1 {
        bail!("runs hold several environments; choose one with --environment");
    }

    let values: Vec<PolicyValue> = aggregate_seeds(&records, cfg.aggregation);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.value), hi.max(p.value)));
    if lo == hi {
        bail!("degenerate value range");
    }
    let raw: ValueMap = values.iter().map(|p| (p.policy_id(), p.value)).collect();
    let normalized: ValueMap = values.iter().map(|p| (p.policy_id(), (p.value - lo) / (hi - lo))).collect();
    let n = values.len();
    let budget = cfg.budget_max.unwrap_or(n);

    let mut strategies = if !args.strategies.is_empty() {
        args.strategies
    } else {
        cfg.strategies.clone()
    };
    if strategies.is_empty() {
        strategies.push("uniform".into());
        strategies.extend(rounds[0].table.methods().map(|(m, _)| m.to_string()));
    }
    let tables: Vec<_> = rounds.iter().map(|r| r.table.clone()).collect();
    for name in &strategies {
        let curve = if name == "uniform" {
            match args.uniform_sampling {
                Sampling::WithReplacement => uniform_regret_eop(&raw, budget)?,
                Sampling::WithoutReplacement => {
                    let sim = simulate_uniform_rounds(&normalized, args.rounds, budget.min(n), Replacement::Without, cfg.seed)?;
                    eop_vanilla_average(&sim, budget.min(n))?
                }
            }
        } else {
            if tables[0].direction(name).is_none() {
                bail!("unknown strategy `{name}`; expected uniform or a score method");
            }
            let strategy = SelectionStrategy::ByScore(name.clone());
            let sim = simulate_selection_rounds(&tables, &normalized, &strategy, budget.min(n), Replacement::Without)?;
            eop_vanilla_average(&sim, budget.min(n))?
        };
        let path = out_dir.join(format!("regret_{}.csv", file_component(name)));
        write_curve(&path, &curve)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn spearman(reference: &Path, others: &[PathBuf]) -> Result<()> {
    let truth = read_ranking(reference)?;
    for other in others {
        let rho = spearman_rho(&truth, &read_ranking(other)?).with_context(|| other.display().to_string())?;
        println!("{rho:.2}");
    }
    Ok(())
}

pub fn simulate(cfg: &ReportConfig, pipeline: &Path, out_dir: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let out_dir = cfg.output_dir(out_dir)?;
    let kv = read_key_values(pipeline).with_context(|| pipeline.display().to_string())?;
    let mut config = PipelineConfig::from_key_values(&kv).with_context(|| pipeline.display().to_string())?;
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    let output = run_pipeline(&config)?;

    let runs_path = out_dir.join("runs.csv");
    let scores_path = out_dir.join("scores.csv");
    let hyper_path = out_dir.join("hyperparams.csv");
    write_runs(&runs_path, &output.runs)?;
    write_scores(&scores_path, &output.rounds)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["algorithm", "hyperparam_id", "parameter", "value"])?;
    for h in &output.assignments {
        for (name, value) in &h.params {
            writer.write_record([h.algorithm.as_str(), h.id.as_str(), name.as_str(), &value.to_string()])?;
        }
    }
    let bytes = writer.into_inner().context("flushing hyperparameter table")?;
    fs::write(&hyper_path, bytes).with_context(|| hyper_path.display().to_string())?;
    for p in [runs_path, scores_path, hyper_path] {
        println!("{}", p.display());
    }
    Ok(())
}

fn default_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.rsplit_once("__") {
        Some((_, alg)) => alg.to_string(),
        None => stem,
    }
}

pub fn plot(
    curves: &[PathBuf],
    out: &Path,
    labels: &[String],
    title: Option<String>,
    y_label: Option<String>,
) -> Result<()> {
    if !labels.is_empty() && labels.len() != curves.len() {
        bail!("{} labels given for {} curves", labels.len(), curves.len());
    }
    let series = curves
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let label = labels.get(i).cloned().unwrap_or_else(|| default_label(path));
            Ok((label, read_curve(path)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut opts = FigureOptions {
        title,
        ..FigureOptions::default()
    };
    if let Some(y) = y_label {
        opts.y_label = y;
    }
    emit_figure(out, &series, &opts)?;
    println!("{}", out.display());
    Ok(())
}

pub fn table(
    cfg: &ReportConfig,
    runs: Option<PathBuf>,
    budgets: &[usize],
    sampling: Sampling,
    environment: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    if budgets.is_empty() || budgets.contains(&0) {
        bail!("budgets must be positive");
    }
    let records = only_environment(read_runs(&cfg.input(runs, "runs")?)?, environment.as_deref())?;
    let groups = group_by_algorithm(&policy_values(cfg, &records)?)?;
    let text = budget_table(&groups, budgets, sampling)?.to_string();
    print!("{text}");
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        }
        fs::write(&path, &text).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

pub fn import_neorl(args: &ImportArgs) -> Result<()> {
    let records = neorl::import(args)?;
    write_runs(&args.out, &records)?;
    println!("{}", args.out.display());
    Ok(())
}
