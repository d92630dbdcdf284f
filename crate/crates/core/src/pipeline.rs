//! Simulation-study pipeline: per-replication simulate, fit, discrepancy,
//! evaluation and decision steps, a worker pool over replications, and the
//! cross-replication report.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PolicySettings, StudyConfig};
use crate::dataset::{event_time_quantile, train_test_split, Grouping, Horizon, SurvivalDataset};
use crate::decision::{decision_report, DecisionPolicy, DecisionReport, Outcome};
use crate::discrepancy::{discrepancy_report, study_summary, GroupDiscrepancy, ReplicationPoint, StudySummary};
use crate::error::{Error, Result};
use crate::estimators::{CifModel, FittedModel, ModelKind};
use crate::io::{self, fmt_real, SplitInfo};
use crate::metrics::{group_metric_diff, EvalReport};
use crate::sim::{generate_replication, GroundTruthRow};

pub fn data_file(k: u64) -> String {
    format!("data_{k}.csv")
}

pub fn truth_file(k: u64) -> String {
    format!("truth_{k}.csv")
}

pub fn model_file(kind: ModelKind, k: u64) -> String {
    format!("model_{kind}_{k}.json")
}

fn tagged(stem: &str, tag: Option<u64>, ext: &str) -> String {
    match tag {
        Some(k) => format!("{stem}_{k}.{ext}"),
        None => format!("{stem}.{ext}"),
    }
}

/// Development/test split seed of replication `k`.
pub fn split_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k)
}

/// Horizons at the given quantile levels of `data`'s uncensored event times.
pub fn quantile_horizons(data: &SurvivalDataset, levels: &[f64]) -> Result<Vec<Horizon>> {
    levels.iter().map(|&q| event_time_quantile(data, q)).collect()
}

/// Fits `kind` on the development portion of `data`.
pub fn fit_step(data: &SurvivalDataset, kind: ModelKind, cause: u8, split: SplitInfo) -> Result<FittedModel> {
    let (dev, _) = train_test_split(data.len(), split.dev_fraction, split.seed);
    FittedModel::fit(kind, &data.subset(&dev)?, cause)
}

/// Held-out subjects for models fitted under `split` (everyone when no split
/// was recorded), with their indices into `data`.
pub fn held_out(data: &SurvivalDataset, split: Option<SplitInfo>) -> Result<(SurvivalDataset, Vec<usize>)> {
    let test = match split {
        Some(s) => train_test_split(data.len(), s.dev_fraction, s.seed).1,
        None => (0..data.len()).collect(),
    };
    Ok((data.subset(&test)?, test))
}

/// Split shared by two models; they must have been fitted on the same portion.
pub fn common_split(a: Option<SplitInfo>, b: Option<SplitInfo>) -> Result<Option<SplitInfo>> {
    if a != b {
        return Err(Error::InvalidInput("models were fitted on different development splits".into()));
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonDiscrepancy {
    pub horizon: Horizon,
    pub empirical_mean: f64,
    pub theoretical_mean: f64,
    pub empirical_group: GroupDiscrepancy,
    pub theoretical_group: GroupDiscrepancy,
}

impl HorizonDiscrepancy {
    pub fn point(&self) -> ReplicationPoint {
        ReplicationPoint {
            empirical_l: self.empirical_mean,
            theoretical_l: self.theoretical_mean,
            empirical_gap: self.empirical_group.gap[1],
            theoretical_gap: self.theoretical_group.gap[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationDiscrepancy {
    pub replication: u64,
    pub cause: u8,
    pub competing_model: ModelKind,
    pub naive_model: ModelKind,
    pub horizons: Vec<HorizonDiscrepancy>,
}

/// Discrepancy of the naive against the competing model on held-out
/// subjects, at quantile horizons of their event times.
pub fn discrepancy_step(
    competing: &FittedModel,
    naive: &FittedModel,
    test: &SurvivalDataset,
    test_truth: &[GroundTruthRow],
    levels: &[f64],
    replication: u64,
) -> Result<ReplicationDiscrepancy> {
    let cause = competing.cause();
    if naive.cause() != cause {
        return Err(Error::InvalidInput("models target different causes".into()));
    }
    let horizons = quantile_horizons(test, levels)?
        .iter()
        .map(|h| {
            let r = discrepancy_report(naive, competing, test, test_truth, h, cause)?;
            Ok(HorizonDiscrepancy {
                horizon: r.horizon,
                empirical_mean: r.empirical_mean,
                theoretical_mean: r.theoretical_mean,
                empirical_group: r.empirical_group,
                theoretical_group: r.theoretical_group,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReplicationDiscrepancy {
        replication,
        cause,
        competing_model: competing.kind(),
        naive_model: naive.kind(),
        horizons,
    })
}

pub fn evaluation_step(
    competing: &FittedModel,
    naive: &FittedModel,
    test: &SurvivalDataset,
    levels: &[f64],
    grouping: Grouping,
) -> Result<Vec<EvalReport>> {
    let horizons = quantile_horizons(test, levels)?;
    group_metric_diff(competing, naive, test, &horizons, &grouping.assign(test)?)
}

pub fn decision_step(
    competing: &FittedModel,
    naive: &FittedModel,
    test: &SurvivalDataset,
    policy: &PolicySettings,
    grouping: Grouping,
) -> Result<DecisionReport> {
    let horizon = event_time_quantile(test, policy.horizon)?;
    let policy = DecisionPolicy::new(policy.threshold, horizon, policy.age_covariate, policy.min_age)?;
    let groups = grouping.assign(test)?;
    decision_report(competing, naive, test, &policy, Some(&groups))
}

const DISCREPANCY_HEADER: [&str; 11] = [
    "replication",
    "horizon",
    "t",
    "empirical_l",
    "theoretical_l",
    "empirical_gap",
    "theoretical_gap",
    "empirical_mean_g0",
    "empirical_mean_g1",
    "theoretical_mean_g0",
    "theoretical_mean_g1",
];

fn discrepancy_rows(r: &ReplicationDiscrepancy) -> Vec<Vec<String>> {
    r.horizons
        .iter()
        .map(|h| {
            let p = h.point();
            let mut row = vec![r.replication.to_string(), h.horizon.label.clone()];
            row.extend(
                [
                    h.horizon.t,
                    p.empirical_l,
                    p.theoretical_l,
                    p.empirical_gap,
                    p.theoretical_gap,
                    h.empirical_group.mean[0],
                    h.empirical_group.mean[1],
                    h.theoretical_group.mean[0],
                    h.theoretical_group.mean[1],
                ]
                .map(fmt_real),
            );
            row
        })
        .collect()
}

pub fn write_discrepancy(dir: &Path, r: &ReplicationDiscrepancy) -> Result<Vec<String>> {
    let json = format!("discrepancy_{}.json", r.replication);
    let csv = format!("discrepancy_{}.csv", r.replication);
    io::write_json(dir.join(&json), r)?;
    io::write_csv(dir.join(&csv), &DISCREPANCY_HEADER, &discrepancy_rows(r))?;
    Ok(vec![json, csv])
}

pub fn write_evaluation(dir: &Path, reports: &[EvalReport], tag: Option<u64>) -> Result<Vec<String>> {
    let json = tagged("evaluation", tag, "json");
    let csv = tagged("evaluation", tag, "csv");
    io::write_json(dir.join(&json), reports)?;
    let mut rows = Vec::new();
    for r in reports {
        let mut push = |model: &str, group: &str, s: &crate::metrics::Scores| {
            rows.push(vec![
                model.to_string(),
                r.horizon.label.clone(),
                fmt_real(r.horizon.t),
                group.to_string(),
                fmt_real(s.td_brier),
                fmt_real(s.td_ci),
            ]);
        };
        push("competing", "all", &r.competing);
        push("naive", "all", &r.non_competing);
        for g in &r.groups {
            push("competing", &g.group.to_string(), &g.competing);
            push("naive", &g.group.to_string(), &g.non_competing);
        }
    }
    io::write_csv(dir.join(&csv), &["model", "horizon", "t", "group", "td_brier", "td_ci"], &rows)?;
    Ok(vec![json, csv])
}

pub fn write_decision(dir: &Path, report: &DecisionReport, tag: Option<u64>) -> Result<Vec<String>> {
    let json = tagged("decision", tag, "json");
    let csv = tagged("decision", tag, "csv");
    io::write_json(dir.join(&json), report)?;
    let mut rows = Vec::new();
    for s in &report.strata {
        let group = s.group.map_or_else(|| "all".to_string(), |g| g.to_string());
        for (model, tab) in [("competing", &s.competing), ("naive", &s.non_competing)] {
            for (arm, fractions) in [("treated", &tab.treated), ("untreated", &tab.untreated)] {
                for (o, f) in Outcome::ALL.iter().zip(fractions) {
                    rows.push(vec![
                        model.to_string(),
                        group.clone(),
                        arm.to_string(),
                        o.name().to_string(),
                        fmt_real(*f),
                    ]);
                }
            }
        }
    }
    io::write_csv(dir.join(&csv), &["model", "group", "arm", "outcome", "fraction"], &rows)?;
    Ok(vec![json, csv])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub replication: u64,
    pub artifacts: Vec<String>,
    pub seconds: f64,
}

/// Reproducibility record for a run directory. Written before the first
/// replication starts and rewritten as each one finishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub jobs: usize,
    pub horizon_rule: String,
    pub split_rule: String,
    pub config: StudyConfig,
    pub replications: Vec<ManifestEntry>,
    pub total_seconds: Option<f64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct ManifestWriter {
    path: PathBuf,
    manifest: Mutex<RunManifest>,
}

impl ManifestWriter {
    fn start(dir: &Path, command: &str, config: &StudyConfig, jobs: usize) -> Result<Self> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.sim.seed,
            jobs,
            horizon_rule: "quantiles of the uncensored held-out event times, computed per replication".into(),
            split_rule: format!(
                "development fraction {} drawn with seed (seed + replication)",
                config.study.dev_fraction
            ),
            config: config.clone(),
            replications: Vec::new(),
            total_seconds: None,
        };
        let path = dir.join(MANIFEST_FILE);
        io::write_json(&path, &manifest)?;
        Ok(Self {
            path,
            manifest: Mutex::new(manifest),
        })
    }

    fn record(&self, entry: ManifestEntry) -> Result<()> {
        let mut m = self.manifest.lock().unwrap_or_else(|e| e.into_inner());
        m.replications.push(entry);
        m.replications.sort_by_key(|e| e.replication);
        io::write_json(&self.path, &*m)
    }

    fn finish(&self, seconds: f64) -> Result<()> {
        let mut m = self.manifest.lock().unwrap_or_else(|e| e.into_inner());
        m.total_seconds = Some(seconds);
        io::write_json(&self.path, &*m)
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `f` for replications `0..n` on `jobs` workers; results keep replication order.
fn for_each_replication<T: Send>(
    jobs: usize,
    n: usize,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    pool.install(|| (0..n as u64).into_par_iter().map(f).collect())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `data_{k}.csv` and `truth_{k}.csv`.
pub fn simulate_replication(config: &StudyConfig, dir: &Path, k: u64) -> Result<(SurvivalDataset, Vec<GroundTruthRow>, Vec<String>)> {
    let (data, truth) = generate_replication(&config.sim, k)?;
    io::save_dataset(&data, None, dir.join(data_file(k)))?;
    io::save_dataset(&data, Some(&truth.rows), dir.join(truth_file(k)))?;
    Ok((data, truth.rows, vec![data_file(k), truth_file(k)]))
}

pub fn simulate_study(config: &StudyConfig, dir: &Path, jobs: usize) -> Result<()> {
    config.validate()?;
    prepare_dir(dir)?;
    let clock = Instant::now();
    let manifest = ManifestWriter::start(dir, "simulate", config, jobs)?;
    for_each_replication(jobs, config.sim.replications, |k| {
        let start = Instant::now();
        let (_, _, artifacts) = simulate_replication(config, dir, k)?;
        manifest.record(ManifestEntry {
            replication: k,
            artifacts,
            seconds: start.elapsed().as_secs_f64(),
        })
    })?;
    manifest.finish(clock.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub censored_fraction: f64,
    pub fit_iterations: [usize; 2],
    pub discrepancy: ReplicationDiscrepancy,
    pub evaluation: Vec<EvalReport>,
    pub decision: DecisionReport,
}

/// The whole pipeline for replication `k`, writing every artifact into `dir`.
pub fn run_replication(config: &StudyConfig, dir: &Path, k: u64) -> Result<(ReplicationOutcome, Vec<String>)> {
    let s = &config.study;
    let (data, truth, mut artifacts) = simulate_replication(config, dir, k)?;
    let split = SplitInfo {
        seed: split_seed(config.sim.seed, k),
        dev_fraction: s.dev_fraction,
    };
    let competing = fit_step(&data, s.competing_model, s.cause, split)?;
    let naive = fit_step(&data, s.naive_model, s.cause, split)?;
    for m in [&competing, &naive] {
        let name = model_file(m.kind(), k);
        io::save_model(m, Some(split), dir.join(&name))?;
        artifacts.push(name);
    }
    let (test, test_idx) = held_out(&data, Some(split))?;
    let test_truth: Vec<GroundTruthRow> = test_idx.iter().map(|&i| truth[i].clone()).collect();
    let grouping: Grouping = s.group.parse()?;

    let discrepancy = discrepancy_step(&competing, &naive, &test, &test_truth, &s.horizons, k)?;
    artifacts.extend(write_discrepancy(dir, &discrepancy)?);
    let evaluation = evaluation_step(&competing, &naive, &test, &s.horizons, grouping)?;
    artifacts.extend(write_evaluation(dir, &evaluation, Some(k))?);
    let decision = decision_step(&competing, &naive, &test, &config.policy, grouping)?;
    artifacts.extend(write_decision(dir, &decision, Some(k))?);

    let iterations = |m: &FittedModel| m.diagnostics().map_or(0, |d| d.iterations);
    let censored = data.subjects().iter().filter(|s| s.event.is_censored()).count();
    Ok((
        ReplicationOutcome {
            replication: k,
            censored_fraction: censored as f64 / data.len() as f64,
            fit_iterations: [iterations(&competing), iterations(&naive)],
            discrepancy,
            evaluation,
            decision,
        },
        artifacts,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub replications: Vec<ReplicationOutcome>,
    pub report: StudyReport,
}

/// Simulates, fits and analyses every replication on `jobs` workers, then
/// writes the cross-replication report.
pub fn run_study(config: &StudyConfig, dir: &Path, jobs: usize) -> Result<StudyOutcome> {
    config.validate()?;
    if config.sim.replications < 2 {
        return Err(Error::Config("a study needs at least two replications".into()));
    }
    prepare_dir(dir)?;
    let clock = Instant::now();
    let manifest = ManifestWriter::start(dir, "study", config, jobs)?;
    let replications = for_each_replication(jobs, config.sim.replications, |k| {
        let start = Instant::now();
        let (outcome, artifacts) = run_replication(config, dir, k)?;
        manifest.record(ManifestEntry {
            replication: k,
            artifacts,
            seconds: start.elapsed().as_secs_f64(),
        })?;
        Ok(outcome)
    })?;
    let discrepancies: Vec<ReplicationDiscrepancy> =
        replications.iter().map(|r| r.discrepancy.clone()).collect();
    let report = build_report(&discrepancies, config.sim.seed)?;
    write_report(dir, &report)?;
    manifest.finish(clock.elapsed().as_secs_f64())?;
    Ok(StudyOutcome { replications, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub label: String,
    pub summary: StudySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub competing_model: ModelKind,
    pub naive_model: ModelKind,
    pub cause: u8,
    pub replications: Vec<u64>,
    pub horizons: Vec<HorizonSummary>,
}

impl StudyReport {
    pub fn horizon(&self, label: &str) -> Option<&StudySummary> {
        self.horizons.iter().find(|h| h.label == label).map(|h| &h.summary)
    }
}

/// Pools per-replication discrepancies into RMSE, bootstrap SD and slope
/// summaries per horizon.
pub fn build_report(reports: &[ReplicationDiscrepancy], bootstrap_seed: u64) -> Result<StudyReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidInput("no replication reports".into()))?;
    if reports.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two replication reports, found {}",
            reports.len()
        )));
    }
    let labels: Vec<String> = first.horizons.iter().map(|h| h.horizon.label.clone()).collect();
    for r in reports {
        let same = r.horizons.iter().map(|h| &h.horizon.label).eq(labels.iter());
        if !same || r.competing_model != first.competing_model || r.naive_model != first.naive_model || r.cause != first.cause {
            return Err(Error::InvalidInput(format!(
                "replication {} does not match the layout of replication {}",
                r.replication, first.replication
            )));
        }
    }
    let horizons = labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let points: Vec<ReplicationPoint> = reports.iter().map(|r| r.horizons[i].point()).collect();
            Ok(HorizonSummary {
                label: label.clone(),
                summary: study_summary(&points, bootstrap_seed)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StudyReport {
        competing_model: first.competing_model,
        naive_model: first.naive_model,
        cause: first.cause,
        replications: reports.iter().map(|r| r.replication).collect(),
        horizons,
    })
}

/// Writes `report.json`, the RMSE table `report.csv` and the plot-ready
/// `points.csv` (one row per replication and horizon).
pub fn write_report(dir: &Path, report: &StudyReport) -> Result<()> {
    io::write_json(dir.join("report.json"), report)?;
    let mut header = vec!["model".to_string()];
    let mut row = vec![report.competing_model.to_string()];
    for h in &report.horizons {
        let s = &h.summary;
        for (name, est) in [("rmse_l", s.rmse_l), ("rmse_gap", s.rmse_gap)] {
            header.push(format!("{name}_{}", h.label));
            header.push(format!("{name}_{}_sd", h.label));
            row.push(fmt_real(est.rmse));
            row.push(fmt_real(est.bootstrap_sd));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_csv(dir.join("report.csv"), &header_refs, &[row])?;

    let mut rows = Vec::new();
    for h in &report.horizons {
        for (k, p) in report.replications.iter().zip(&h.summary.points) {
            let mut r = vec![k.to_string(), h.label.clone()];
            r.extend([p.empirical_l, p.theoretical_l, p.empirical_gap, p.theoretical_gap].map(fmt_real));
            rows.push(r);
        }
    }
    io::write_csv(
        dir.join("points.csv"),
        &["replication", "horizon", "empirical_l", "theoretical_l", "empirical_gap", "theoretical_gap"],
        &rows,
    )
}

/// Reads every `discrepancy_{k}.json` in `dir`, ordered by `k`.
pub fn load_discrepancies(dir: &Path) -> Result<Vec<ReplicationDiscrepancy>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix("discrepancy_")
            .and_then(|r| r.strip_suffix(".json"))
            .and_then(|k| k.parse().ok())
        {
            found.push((k, path));
        }
    }
    if found.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no discrepancy_<k>.json reports in {}",
            dir.display()
        )));
    }
    found.sort();
    found.iter().map(|(_, p)| io::read_json(p)).collect()
}

/// Rebuilds the cross-replication report from a run directory.
pub fn report_dir(dir: &Path, bootstrap_seed: u64) -> Result<StudyReport> {
    let report = build_report(&load_discrepancies(dir)?, bootstrap_seed)?;
    write_report(dir, &report)?;
    Ok(report)
}
