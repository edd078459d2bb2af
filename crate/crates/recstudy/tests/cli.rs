mod support;

use std::path::Path;
use std::process::Command;

use recstudy::service::model::StudyMode;
use recstudy::service::ExportFormat;
use serde_json::Value;
use support::*;

fn recstudy(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_recstudy"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ingest_prints_versioned_stats() {
    let fx = Fixture::new();
    let (ok, out, err) = recstudy(&["ingest", "--dataset", p(fx.path()), "--recs", p(&fx.recs)]);
    assert!(ok, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "recstudy.dataset-stats/1");
    assert_eq!(v["stats"]["users"], 4);
    assert_eq!(v["stats"]["items"], 6);
    assert!(err.contains("alpha"));
}

#[test]
fn ingest_reports_line_of_bad_rating() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.csv");
    std::fs::write(&f, "userId,movieId,rating,timestamp\n1,296,9.0,0\n").unwrap();
    let (ok, _, err) = recstudy(&["ingest", "--dataset", p(&f)]);
    assert!(!ok);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn gen_recs_is_deterministic_and_loadable() {
    let fx = Fixture::new();
    let out = fx.path().join("demo.csv");
    let args = [
        "gen-recs",
        "--dataset",
        p(fx.path()),
        "--list",
        "pop=top-popularity",
        "--list",
        "rnd=random-unseen:3",
        "--n",
        "2",
        "--out",
        p(&out),
    ];
    assert!(recstudy(&args).0);
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(recstudy(&args).0);
    assert_eq!(first, std::fs::read_to_string(&out).unwrap());
    assert!(first.starts_with("algorithm,userId,rank,itemId\n"));
    let (ok, _, err) = recstudy(&["ingest", "--dataset", p(fx.path()), "--recs", p(&out)]);
    assert!(ok, "{err}");
    let (ok, _, err) = recstudy(&["gen-recs", "--dataset", p(fx.path()), "--list", "pop=top-popularity", "--n", "3"]);
    assert!(!ok && err.contains("two"), "{err}");
    let (ok, _, err) = recstudy(&["gen-recs", "--dataset", p(fx.path()), "--list", "a=top-popularity", "--list", "b=top-popularity", "--n", "3"]);
    assert!(!ok && err.contains("user"), "{err}");
}

#[test]
fn simulate_then_data_layer() {
    let fx = Fixture::new();
    let report = fx.path().join("sim.json");
    let csv = fx.path().join("sim.csv");
    let (ok, _, err) = recstudy(&[
        "simulate", "--dataset", p(fx.path()), "--recs", p(&fx.recs), "--k", "6",
        "--min-overlap", "1", "--sample", "4", "--seed", "7", "--out", p(&report), "--csv", p(&csv),
    ]);
    assert!(ok, "{err}");
    let v = read_json(&report);
    assert_eq!(v["schema"], "recstudy.simulation/1");
    assert_eq!(v["report"]["summary"]["tie_inclusive_accuracy"], 1.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);

    let dl = fx.path().join("dl.json");
    let (ok, _, err) = recstudy(&["data-layer", "--in", p(&report), "--out", p(&dl)]);
    assert!(ok, "{err}");
    let v = read_json(&dl);
    assert_eq!(v["schema"], "recstudy.data-layer/1");
    assert_eq!(v["report"]["summary"]["mean"], 1.0);
    assert_eq!(v["report"]["scored"], 4);

    let (ok, _, err) = recstudy(&[
        "simulate", "--dataset", p(fx.path()), "--k", "6", "--noise", "gaussian", "--sigma=-1",
    ]);
    assert!(!ok && err.contains("noise"), "{err}");
    let (ok, _, _) = recstudy(&[
        "simulate", "--dataset", p(fx.path()), "--k", "6", "--min-overlap", "1", "--sample", "u2,u3",
        "--measure", "imad", "--tie-policy", "strict", "--noise", "drop", "--drop", "0.3",
    ]);
    assert!(ok);
}

#[test]
fn list_metrics_report_and_csv() {
    let fx = Fixture::new();
    let csv = fx.path().join("lm.csv");
    let (ok, out, err) = recstudy(&["list-metrics", "--dataset", p(fx.path()), "--recs", p(&fx.recs), "--csv", p(&csv)]);
    assert!(ok, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "recstudy.list-metrics/1");
    assert_eq!(v["report"]["aggregates"].as_array().unwrap().len(), 2);
    for m in v["report"]["lists"].as_array().unwrap() {
        let d = m["diversity"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&d));
        assert!(m["novelty"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 8);
}

#[test]
fn study_export_feeds_data_and_human_layers() {
    let fx = Fixture::new();
    let dep = deploy(3);
    let mut spec = fx.spec(&["a@lab.org", "b@lab.org", "c@lab.org"]);
    spec.mode = StudyMode::MappingValidation;
    spec.dimensions.clear();
    let id = dep.service.create_study(spec).unwrap().study_id;
    dep.service.start_study(&id).unwrap();
    for (i, s) in dep.service.sessions(&id).unwrap().iter().enumerate() {
        let q = dep.service.get_questionnaire(&s.token).unwrap().questionnaire.unwrap();
        dep.service
            .submit_initial(&s.token, answers_as_user(&q, TOY_RATINGS, i as u32 + 1))
            .unwrap();
        if i < 2 {
            let q = dep.service.get_questionnaire(&s.token).unwrap().questionnaire.unwrap();
            dep.service.submit_final(&s.token, complete_final(&q, 6 + i as u8, 0)).unwrap();
        }
    }
    dep.service.close_study(&id).unwrap();
    let export = fx.path().join("results.json");
    std::fs::write(&export, dep.service.export_results(&id, ExportFormat::Json).unwrap()).unwrap();

    let (ok, out, err) = recstudy(&["data-layer", "--in", p(&export), "--measure", "cosine"]);
    assert!(ok, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["source"], "recstudy.results/1");
    assert_eq!(v["report"]["records"], 3);
    assert_eq!(v["report"]["summary"]["min"], 1.0);

    let (ok, out, err) = recstudy(&["human-layer", "--in", p(&export)]);
    assert!(ok, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "recstudy.human-layer/1");
    assert_eq!(v["participants"].as_array().unwrap().len(), 2);
    // User 1 rated 4 items, user 2 rated 4: 4 answers of 6 and 4 of 7.
    assert_eq!(v["overall"]["count"], 8);
    assert_eq!(v["overall"]["mean"], 6.5);
    assert_eq!(v["overall"]["top2_box"], 1.0);
    assert_eq!(v["distribution"], serde_json::json!([0, 0, 0, 0, 0, 4, 4]));
}
