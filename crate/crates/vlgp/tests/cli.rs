use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use vlgp::benchmark::{self, Suite};
use vlgp::config::{BenchmarkConfig, RunConfig};
use vlgp::data::read_dataset;
use vlgp::model::Model;
use vlgp_core::math::{mean, sample_variance};
use vlgp_core::predict::{crps, latent_samples, log_score, rmse};
use vlgp_core::simulate::{simulate, SimulationConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlgp"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).env_remove("VLGP_THREADS").args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Numeric columns of a CSV written by the binary, by header name.
fn columns(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let names: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let mut cols = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        for (c, f) in cols.iter_mut().zip(rec.unwrap().iter()) {
            c.push(f.parse::<f64>().unwrap());
        }
    }
    (names, cols)
}

fn col<'a>(t: &'a (Vec<String>, Vec<Vec<f64>>), name: &str) -> &'a [f64] {
    let i = t.0.iter().position(|n| n == name).unwrap_or_else(|| panic!("no column {name}"));
    &t.1[i]
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn simulate_is_reproducible_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "c.json", r#"{"simulate": {"n": 100, "seed": 5}}"#);
    ok(d, &["simulate", "--config", "c.json", "--out", "a.csv"]);
    ok(d, &["simulate", "--config", "c.json", "--out", "b.csv", "--truth", "bt.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.truth.csv")).unwrap(), fs::read(d.join("bt.csv")).unwrap());
    let data = read_dataset(&d.join("a.csv")).unwrap();
    assert_eq!(data.n(), 100);
    assert!(data.y.unwrap().iter().all(|&v| v == 0.0 || v == 1.0));
    let truth = columns(&d.join("a.truth.csv"));
    assert_eq!(truth.0, vec!["b", "mu"]);
}

#[test]
fn simulated_field_variance_is_plausible() {
    for seed in 0..20 {
        let sim = simulate(&SimulationConfig { n: 2000, seed, ..SimulationConfig::default() }).unwrap();
        let v = sample_variance(&sim.b);
        assert!((0.5..=1.6).contains(&v), "seed {seed}: sample variance {v}");
    }
}

#[test]
fn config_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "bad.json", "{\n  \"simulate\": {\"n\": 10, \"flavour\": 1}\n}\n");
    let o = run(d, &["simulate", "--config", "bad.json", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("flavour") && err.contains("line 2"), "{err}");
    let o = run(d, &["benchmark", "--suite", "nope", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(d, &["fit"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin().current_dir(d).env("VLGP_THREADS", "zero").args(["simulate", "--out", "x.csv"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_row_exits_3_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "d.csv", "s1,s2,y\n0.1,0.2,1\n0.3,0.4,0\n0.5,abc,1\n");
    let o = run(d, &["fit", "--data", "d.csv", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3"), "{err}");
    write(d, "e.csv", "s1,s2,y\n0.1,0.2,1\n0.3,0.4,2\n");
    let o = run(d, &["fit", "--data", "e.csv", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(d, &["fit", "--data", "missing.csv", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fit_reload_evaluate_reproduces_final_objective() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "c.json", r#"{"simulate": {"n": 300, "seed": 2}, "fit": {"m": 10, "max_iter": 15}}"#);
    ok(d, &["simulate", "--config", "c.json", "--out", "d.csv"]);
    ok(d, &["fit", "--config", "c.json", "--data", "d.csv", "--out", "m.json"]);
    let text = fs::read_to_string(d.join("m.json")).unwrap();
    let model = Model::from_json(&text, "m.json").unwrap();
    assert_eq!(model.format, 1);
    assert_eq!(model.to_json(), text, "model file round-trips");
    let out = ok(d, &["evaluate", "--model", "m.json", "--data", "d.csv"]);
    let f: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert_eq!(f, model.trace.last().unwrap().objective);
    assert_eq!(f, model.objective);
    // a different training file is refused
    write(d, "c2.json", r#"{"simulate": {"n": 300, "seed": 3}}"#);
    ok(d, &["simulate", "--config", "c2.json", "--out", "other.csv"]);
    let o = run(d, &["evaluate", "--model", "m.json", "--data", "other.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn predict_records_method_and_scores_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "c.json",
        r#"{"simulate": {"n": 400, "seed": 7}, "holdout": 80, "fit": {"m": 10, "max_iter": 10},
            "predict": {"variance": "lanczos", "rank": 50, "variant": "l1", "score_samples": 500, "response_samples": 500}}"#,
    );
    ok(d, &["simulate", "--config", "c.json", "--out", "d.csv", "--pred", "p.csv"]);
    ok(d, &["fit", "--config", "c.json", "--data", "d.csv", "--out", "m.json"]);
    ok(
        d,
        &[
            "predict", "--config", "c.json", "--model", "m.json", "--data", "d.csv", "--pred", "p.csv", "--out",
            "pr.csv", "--truth", "p.truth.csv", "--scores", "s.csv",
        ],
    );
    let text = fs::read_to_string(d.join("pr.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# ") && first.contains("lanczos,k=50,variant=l1"), "{first}");
    let pr = columns(&d.join("pr.csv"));
    assert_eq!(pr.0, vec!["s1", "s2", "latent_mean", "latent_var", "response_mean", "response_var"]);
    let truth = columns(&d.join("p.truth.csv"));
    let y = columns(&d.join("p.csv"));
    let (mean, var) = (col(&pr, "latent_mean"), col(&pr, "latent_var"));
    let mu = col(&truth, "mu");
    let mut scores = std::collections::BTreeMap::new();
    for line in fs::read_to_string(d.join("s.csv")).unwrap().lines().skip(2) {
        let (k, v) = line.split_once(',').unwrap();
        scores.insert(k.to_string(), v.parse::<f64>().unwrap());
    }
    assert_eq!(scores["latent_rmse"], rmse(mean, mu).unwrap());
    assert_eq!(scores["latent_log_score"], log_score(mean, var, mu).unwrap());
    let draws = latent_samples(mean, var, 500, 0).unwrap();
    assert_eq!(scores["latent_crps"], crps(&draws, mu).unwrap());
    assert_eq!(scores["response_rmse"], rmse(col(&pr, "response_mean"), col(&y, "y")).unwrap());
    assert!(scores.contains_key("response_crps"));
}

#[test]
fn predictions_at_training_locations_track_the_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let n = 200;
    write(
        d,
        "c.json",
        r#"{"simulate": {"n": 200, "seed": 4}, "fit": {"m": 60, "max_iter": 0, "init": {"variance": 1.0, "range": 0.05}},
            "predict": {"variance": "exact", "m": 60, "response": "none"}}"#,
    );
    ok(d, &["simulate", "--config", "c.json", "--out", "d.csv"]);
    ok(d, &["fit", "--config", "c.json", "--data", "d.csv", "--out", "m.json"]);
    // training locations nudged off the data, which prediction rejects as duplicates
    let data = read_dataset(&d.join("d.csv")).unwrap();
    let mut text = String::from("s1,s2\n");
    for i in 0..n {
        let p = data.locations.point(i);
        text.push_str(&format!("{:.17e},{:.17e}\n", p[0] + 1e-6, p[1]));
    }
    write(d, "p.csv", &text);
    ok(d, &["predict", "--config", "c.json", "--model", "m.json", "--data", "d.csv", "--pred", "p.csv", "--out", "pr.csv"]);
    let pr = columns(&d.join("pr.csv"));
    let model = Model::load(&d.join("m.json")).unwrap();
    let problem = model.problem(&data).unwrap();
    let (_, state) = model.evaluate(&problem).unwrap();
    let mode = problem.structure.to_original(&state.mode);
    let r = correlation(col(&pr, "latent_mean"), &mode);
    assert!(r > 0.99, "correlation {r}");
}

#[test]
fn empty_benchmark_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "c.json", r#"{"benchmark": {"replicates": 0}}"#);
    for suite in Suite::ALL {
        let out = format!("{}.csv", suite.name());
        ok(d, &["benchmark", "--config", "c.json", "--suite", suite.name(), "--out", &out]);
        assert_eq!(fs::read_to_string(d.join(&out)).unwrap(), format!("{}\n", benchmark::HEADER));
    }
}

#[test]
fn benchmark_rows_have_summaries() {
    let cfg = BenchmarkConfig {
        n: 300,
        replicates: 4,
        probes: vec![5],
        preconditioners: vec![vlgp_core::precond::PreconditionerKind::Vadu],
        ..BenchmarkConfig::default()
    };
    let rows = benchmark::run(Suite::Preconditioners, &cfg).unwrap();
    let vadu: Vec<_> = rows.iter().filter(|r| r.method == "vadu:t=5").collect();
    assert_eq!(vadu.len(), 5);
    let vals: Vec<f64> = vadu[..4].iter().map(|r| r.value).collect();
    assert_eq!(vadu[4].replicate, None);
    assert_eq!(vadu[4].value, mean(&vals));
    assert_eq!(vadu[4].variance, Some(sample_variance(&vals)));
    let mut buf = Vec::new();
    benchmark::write_rows(&mut buf, Suite::Preconditioners, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().any(|l| l.starts_with("preconditioners,vadu:t=5,summary,nll,")));
}

#[test]
fn pipeline_on_500_points_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "c.json", r#"{"simulate": {"n": 600, "seed": 1}, "holdout": 100, "predict": {"samples": 200}}"#);
    let t = Instant::now();
    ok(d, &["simulate", "--config", "c.json", "--out", "d.csv", "--pred", "p.csv"]);
    ok(d, &["fit", "--config", "c.json", "--data", "d.csv", "--out", "m.json"]);
    ok(d, &["predict", "--config", "c.json", "--model", "m.json", "--data", "d.csv", "--pred", "p.csv", "--out", "pr.csv"]);
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 30.0, "pipeline took {secs:.1}s");
}

#[test]
fn desk_fit_at_2000_points() {
    let cfg = RunConfig::default();
    let sim = simulate(&SimulationConfig { n: 2000, seed: 11, ..SimulationConfig::default() }).unwrap();
    let data = vlgp::data::Dataset { locations: sim.locations, y: Some(sim.y), x: Vec::new(), p: 0 };
    let t = Instant::now();
    let model = vlgp::commands::fit_dataset(&cfg, &data).unwrap();
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 60.0, "fit took {secs:.1}s");
    assert!(model.variance > 0.0 && model.range > 0.0);
}
