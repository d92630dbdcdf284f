//! Acceptance checks. Each test prints one `PASS` or `FAIL` line.
//!
//! Run with `cargo test -p competing-risks --test acceptance -- --nocapture`.

use std::cell::{Cell, RefCell};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use competing_risks::config::StudyConfig;
use competing_risks::dataset::{EventCode, Subject, SurvivalDataset};
use competing_risks::discrepancy::{latent_ordering_check, theoretical_discrepancy};
use competing_risks::estimators::{aalen_johansen, censoring_survival, fit_cox, fit_fine_gray, kaplan_meier};
use competing_risks::pipeline::{self, StudyOutcome};
use competing_risks::sim::{replication_rng, GompertzParams, GroundTruthRow};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

type Outcome = Result<String, String>;

fn verdict(id: u32, name: &str, outcome: Outcome) {
    match outcome {
        Ok(detail) => println!("PASS [{id:>2}] {name}: {detail}"),
        Err(detail) => {
            println!("FAIL [{id:>2}] {name}: {detail}");
            panic!("acceptance check {id} ({name}) failed: {detail}");
        }
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn truth_row(w1: f64, w2: f64, ws: f64) -> GroundTruthRow {
    GroundTruthRow {
        id: "0".into(),
        group: 0,
        w1,
        w2,
        ws,
        wc: 0.0,
        latent_time: 0.0,
        latent_cause: 1,
        censor_time: f64::INFINITY,
    }
}

/// Time at which the latent target-cause distribution reaches probability `q`.
fn target_quantile(row: &GroundTruthRow, q: f64) -> f64 {
    row.cause_params(1)
        .inverse_cumulative_hazard(-(-q).ln_1p())
        .unwrap()
}

#[test]
fn a01_discrepancy_equals_latent_ordering_probability() {
    let samples = 100_000;
    let worst = Cell::new(0.0f64);
    let rng = RefCell::new(replication_rng(2718, 0));
    let params = (
        (-3.0f64..1.6).prop_map(f64::exp),
        (-3.0f64..1.6).prop_map(f64::exp),
        0.0f64..3.0,
    );
    let result = runner(50).run(&params, |(w1, w2, ws)| {
        let row = truth_row(w1, w2, ws);
        for q in [0.25, 0.99] {
            let t = target_quantile(&row, q);
            let check = latent_ordering_check(std::slice::from_ref(&row), 1, t, samples, &mut *rng.borrow_mut())[0];
            worst.set(worst.get().max(check.gap));
            prop_assert!(
                check.gap < 0.02,
                "w=({w1:.3},{w2:.3},{ws:.3}) t={t:.4}: closed form {:.4} vs simulated {:.4}",
                check.lhs,
                check.rhs
            );
        }
        Ok(())
    });
    let outcome = match result {
        Ok(()) => Ok(format!("50 parameterizations x 2 horizons, max |gap| = {:.4} < 0.02", worst.get())),
        Err(e) => Err(e.to_string()),
    };
    verdict(1, "closed-form discrepancy matches latent simulation", outcome);
}

#[test]
fn a02_exponential_closed_form() {
    let row = truth_row(1.0, 1.0, 0.0);
    let at_ln2 = theoretical_discrepancy(&row, 1, 2f64.ln());
    let at_inf = theoretical_discrepancy(&row, 1, f64::INFINITY);
    let at_large = theoretical_discrepancy(&row, 1, 1e6);
    let ok = (at_ln2 - 0.25).abs() <= 1e-6 && (at_inf - 0.5).abs() <= 1e-6 && (at_large - 0.5).abs() <= 1e-6;
    let detail = format!("t = ln 2: {at_ln2:.10}, t = inf: {at_inf:.10}, t = 1e6: {at_large:.10}");
    verdict(2, "exponential closed form", if ok { Ok(detail) } else { Err(detail) });
}

/// One study run shared by the RMSE, sign and slope checks.
fn study() -> &'static StudyOutcome {
    static STUDY: OnceLock<(tempfile::TempDir, StudyOutcome)> = OnceLock::new();
    &STUDY
        .get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            let mut config = StudyConfig::default();
            config.sim.n = 10_000;
            config.sim.replications = 10;
            let outcome = pipeline::run_study(&config, dir.path(), pipeline::default_jobs()).unwrap();
            (dir, outcome)
        })
        .1
}

#[test]
fn a03_rmse_against_theory() {
    let report = &study().report;
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, bound) in [("q1", 0.05), ("q0.5", 0.08)] {
        let s = report.horizon(label).expect("horizon present");
        ok &= s.rmse_l.rmse <= bound;
        lines.push(format!(
            "{label}: RMSE(L) = {:.4} ± {:.4} (bound {bound})",
            s.rmse_l.rmse, s.rmse_l.bootstrap_sd
        ));
    }
    let detail = lines.join("; ");
    verdict(3, "RMSE of empirical vs theoretical discrepancy", if ok { Ok(detail) } else { Err(detail) });
}

#[test]
fn a04_naive_estimate_overestimates() {
    let points = &study().report.horizon("q1").expect("horizon present").points;
    let positive = points.iter().filter(|p| p.empirical_l > 0.0).count();
    let detail = format!(
        "mean empirical L at q1 positive in {positive} of {} replications (need 9)",
        points.len()
    );
    let ok = points.len() == 10 && positive >= 9;
    verdict(4, "sign of the naive bias", if ok { Ok(detail) } else { Err(detail) });
}

#[test]
fn a05_group_gap_slope() {
    let report = &study().report;
    let mut lines = Vec::new();
    let mut ok = true;
    for label in ["q0.5", "q1"] {
        let s = report.horizon(label).expect("horizon present");
        let slope = s.slope_gap;
        ok &= slope.is_some_and(|b| (0.5..=1.5).contains(&b));
        lines.push(format!("{label}: slope = {}", slope.map_or("undefined".into(), |b| format!("{b:.3}"))));
    }
    let detail = format!("{} (required in [0.5, 1.5] at each horizon)", lines.join(", "));
    verdict(5, "group gap slope of empirical on theoretical", if ok { Ok(detail) } else { Err(detail) });
}

fn dataset(times: &[f64], events: &[u8], covariates: Option<&[Vec<f64>]>) -> SurvivalDataset {
    let p = covariates.map_or(0, |c| c[0].len());
    let subjects = times
        .iter()
        .zip(events)
        .enumerate()
        .map(|(i, (&time, &e))| Subject {
            id: i.to_string(),
            covariates: covariates.map_or_else(Vec::new, |c| c[i].clone()),
            group: 0,
            time,
            event: EventCode(e),
        })
        .collect();
    SurvivalDataset::new(subjects, events.iter().copied().max().unwrap_or(0).max(1), p).unwrap()
}

#[test]
fn a06_aalen_johansen_matches_joint_frequency() {
    let strategy = (1usize..=50).prop_flat_map(|n| {
        (
            proptest::collection::vec((1u32..20).prop_map(|t| f64::from(t) / 2.0), n),
            proptest::collection::vec(0u8..=2, n),
        )
    });
    let checked = Cell::new(0usize);
    let worst = Cell::new(0.0f64);
    let result = runner(100).run(&strategy, |(times, events)| {
        let kept: Vec<usize> = (0..times.len()).filter(|&i| events[i] != 0).collect();
        if kept.is_empty() {
            return Ok(());
        }
        let t: Vec<f64> = kept.iter().map(|&i| times[i]).collect();
        let e: Vec<u8> = kept.iter().map(|&i| events[i]).collect();
        let d = dataset(&t, &e, None);
        let n = t.len() as f64;
        for cause in 1..=2u8 {
            let f = aalen_johansen(&d, cause);
            for &s in &t {
                let freq = t.iter().zip(&e).filter(|(ti, ei)| **ti <= s && **ei == cause).count() as f64 / n;
                let err = (f.eval(s) - freq).abs();
                worst.set(worst.get().max(err));
                prop_assert!(err <= 1e-12, "cause {cause} at {s}: {} vs {freq}", f.eval(s));
            }
        }
        checked.set(checked.get() + 1);
        Ok(())
    });
    let outcome = match result {
        Ok(()) => Ok(format!("{} uncensored datasets, max error {:.1e}", checked.get(), worst.get())),
        Err(e) => Err(e.to_string()),
    };
    verdict(6, "Aalen-Johansen equals empirical joint frequency", outcome);
}

fn single_risk(seed: u64) -> SurvivalDataset {
    let mut rng = replication_rng(seed, 7);
    let n = 200;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for xi in &x {
        let rate = (0.5 * xi[0] - 0.3 * xi[1]).exp();
        let t: f64 = Exp::new(rate).unwrap().sample(&mut rng);
        let c: f64 = Exp::new(0.4).unwrap().sample(&mut rng);
        times.push(t.min(c));
        events.push(u8::from(t <= c));
    }
    dataset(&times, &events, Some(&x))
}

#[test]
fn a07_estimator_reductions_without_competing_events() {
    let mut beta_gap = 0.0f64;
    let mut curve_gap = 0.0f64;
    let mut failure = None;
    for seed in 0..20 {
        let d = single_risk(seed);
        let (cox, fg) = match (fit_cox(&d, 1), fit_fine_gray(&d, 1)) {
            (Ok(c), Ok(f)) => (c, f),
            (c, f) => {
                failure = Some(format!("seed {seed}: fit failed ({:?}, {:?})", c.err(), f.err()));
                break;
            }
        };
        for (a, b) in cox.beta.iter().zip(&fg.beta) {
            beta_gap = beta_gap.max((a - b).abs());
        }
        let aj = aalen_johansen(&d, 1);
        let km = kaplan_meier(&d, 1);
        for s in d.subjects() {
            curve_gap = curve_gap.max((aj.eval(s.time) - (1.0 - km.eval(s.time))).abs());
        }
    }
    let detail = format!("20 datasets: max |beta_FG - beta_Cox| = {beta_gap:.1e}, max |AJ - (1 - KM)| = {curve_gap:.1e}");
    let outcome = match failure {
        Some(f) => Err(f),
        None if beta_gap <= 1e-8 && curve_gap <= 1e-12 => Ok(detail),
        None => Err(detail),
    };
    verdict(7, "Fine-Gray reduces to Cox and AJ to 1 - KM", outcome);
}

#[test]
fn a08_hand_fixtures() {
    let mut problems = Vec::new();
    let mut expect = |what: &str, got: f64, want: f64| {
        if got != want {
            problems.push(format!("{what}: got {got}, want {want}"));
        }
    };
    let s = kaplan_meier(&dataset(&[1.0, 2.0, 3.0], &[1, 0, 1], None), 1);
    expect("KM [1,2,3]/[1,0,1] at 0.5", s.eval(0.5), 1.0);
    expect("KM at 1", s.eval(1.0), 2.0 / 3.0);
    expect("KM at 2.9", s.eval(2.9), 2.0 / 3.0);
    expect("KM at 3", s.eval(3.0), 0.0);
    let s = kaplan_meier(&dataset(&[1.0, 2.0], &[2, 1], None), 1);
    expect("KM [1,2]/[2,1] at 1.5", s.eval(1.5), 1.0);
    expect("KM [1,2]/[2,1] at 2", s.eval(2.0), 0.0);
    let ecdf = kaplan_meier(&dataset(&[3.0, 1.0, 2.0, 1.0], &[1, 1, 1, 1], None), 1);
    expect("KM no censoring at 1", 1.0 - ecdf.eval(1.0), 0.5);
    expect("KM no censoring at 2", 1.0 - ecdf.eval(2.0), 0.75);
    let g = censoring_survival(&dataset(&[1.0, 2.0, 3.0], &[1, 1, 1], None));
    expect("G without censoring", g.eval(10.0), 1.0);
    let g = censoring_survival(&dataset(&[1.0, 2.0], &[0, 1], None));
    expect("G [1,2]/[0,1] at 0.5", g.eval(0.5), 1.0);
    expect("G [1,2]/[0,1] at 1", g.eval(1.0), 0.5);
    expect("G [1,2]/[0,1] at 5", g.eval(5.0), 0.5);
    let g = censoring_survival(&dataset(&[3.0, 3.0, 3.0], &[0, 0, 0], None));
    expect("G all censored at 2.9", g.eval(2.9), 1.0);
    expect("G all censored at 3", g.eval(3.0), 0.0);

    let mut rng = replication_rng(2024, 0);
    let mut times = Vec::new();
    let mut x = Vec::new();
    for i in 0..20_000 {
        let g = f64::from(i % 2);
        times.push(Exp::new(1.0 + g).unwrap().sample(&mut rng));
        x.push(vec![g]);
    }
    let d = dataset(&times, &vec![1; times.len()], Some(&x));
    let beta = fit_cox(&d, 1).map(|m| m.beta[0]);
    match &beta {
        Ok(b) if (b - 2f64.ln()).abs() > 0.05 => problems.push(format!("Cox beta {b:.4} not within 0.05 of ln 2")),
        Err(e) => problems.push(format!("Cox fit failed: {e}")),
        Ok(_) => {}
    }
    let detail = match &beta {
        Ok(b) => format!("step-function fixtures exact; hazard-ratio-2 beta = {b:.4} (ln 2 = {:.4})", 2f64.ln()),
        Err(_) => String::new(),
    };
    let outcome = if problems.is_empty() { Ok(detail) } else { Err(problems.join("; ")) };
    verdict(8, "hand fixtures", outcome);
}

fn crstudy(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_crstudy"))
        .args(args)
        .output()
        .expect("run crstudy");
    assert!(
        out.status.success(),
        "crstudy {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn a09_decision_pipeline_on_ingested_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_string_lossy().into_owned();
    crstudy(&["simulate", "--replications", "1", "--out", &p("sim")]);
    let data = p("sim/data_0.csv");
    crstudy(&["fit", &data, "--model", "finegray", "--out", &p("fg.json")]);
    crstudy(&["fit", &data, "--model", "cox", "--out", &p("cox.json")]);
    let (fg, cox, eval, decide) = (p("fg.json"), p("cox.json"), p("eval"), p("decide"));
    let pair = ["--competing", fg.as_str(), "--naive", cox.as_str()];
    let mut args = vec!["evaluate", "--data", &data, "--out", &eval];
    args.extend(pair);
    crstudy(&args);
    let mut args = vec!["decide", "--data", &data, "--out", &decide];
    args.extend(pair);
    crstudy(&args);
    let strict = p("decide_half");
    let mut args = vec!["decide", "--data", &data, "--threshold", "0.5", "--out", &strict];
    args.extend(pair);
    crstudy(&args);

    let mut problems = Vec::new();
    let mut reader = csv::Reader::from_path(d.join("eval/evaluation.csv")).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let ci: f64 = record[5].parse().unwrap();
        rows += 1;
        if !(0.0..=1.0).contains(&ci) {
            problems.push(format!("td_ci {ci} outside [0, 1]"));
        }
    }
    let overtreatment = |report: &serde_json::Value, model: &str| {
        report["strata"][0][model]["overtreatment"].as_f64().unwrap()
    };
    let strict = json(&d.join("decide_half/decision.json"));
    let (half_c, half_nc) = (overtreatment(&strict, "competing"), overtreatment(&strict, "non_competing"));
    if half_nc < half_c {
        problems.push(format!("threshold 0.5: naive overtreatment {half_nc:.4} below competing {half_c:.4}"));
    }
    let report = json(&d.join("decide/decision.json"));
    let all = &report["strata"][0];
    let over_c = all["competing"]["overtreatment"].as_f64().unwrap();
    let over_nc = all["non_competing"]["overtreatment"].as_f64().unwrap();
    let treated = (
        all["competing"]["treated_fraction"].as_f64().unwrap(),
        all["non_competing"]["treated_fraction"].as_f64().unwrap(),
    );
    if over_nc < over_c {
        problems.push(format!("naive overtreatment {over_nc:.4} below competing {over_c:.4}"));
    }
    let detail = format!(
        "{rows} evaluation rows; at {}: overtreatment naive {over_nc:.4} >= competing {over_c:.4} (treated fractions {:.4} / {:.4}); threshold 0.5: naive {half_nc:.4} >= competing {half_c:.4}",
        report["policy"]["horizon"]["label"].as_str().unwrap_or("?"),
        treated.1,
        treated.0
    );
    verdict(9, "decision direction on simulated CSV", if problems.is_empty() { Ok(detail) } else { Err(problems.join("; ")) });
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != pipeline::MANIFEST_FILE)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn a10_worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("jobs1");
    let eight = dir.path().join("jobs8");
    for (out, jobs) in [(&one, "1"), (&eight, "8")] {
        crstudy(&["study", "--replications", "3", "--jobs", jobs, "--out", &out.to_string_lossy()]);
    }
    let (a, b) = (tree_bytes(&one), tree_bytes(&eight));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let outcome = if a.len() == b.len() && differing.is_empty() {
        Ok(format!("{} files byte-identical across --jobs 1 and --jobs 8", names.len()))
    } else {
        Err(format!("{} vs {} files; differing: {differing:?}", a.len(), b.len()))
    };
    verdict(10, "determinism across worker counts", outcome);
}

#[test]
fn gompertz_quantile_helper_is_consistent() {
    let row = truth_row(0.7, 1.0, 0.4);
    let t = target_quantile(&row, 0.25);
    let cdf = GompertzParams::new(0.7, 0.4).unwrap().cdf(t);
    assert!((cdf - 0.25).abs() < 1e-12);
}
