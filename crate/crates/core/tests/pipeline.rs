mod common;

use std::fs;
use std::process::Command;

use common::{read, twelve_image_records, Fixture};
use lineup_core::corpus::{write_jsonl, EmbeddingRecord};
use lineup_core::pipeline::{self, PipelineError};

#[test]
fn twelve_image_fixture_accuracy() {
    let fx = Fixture::new(&twelve_image_records());
    let eval = pipeline::run_evaluate(&fx.config()).unwrap();
    assert_eq!(eval.summary.evaluated, 12);
    assert_eq!(eval.summary.successes, 9);
    assert_eq!(eval.summary.accuracy, Some(0.75));
    for r in &eval.results {
        let d = r.lineup.source.as_str().starts_with('d');
        assert_eq!(r.success, !d, "{}", r.lineup.source);
        if d {
            assert_eq!(r.probe_rank, 5);
        }
    }
    let csv = read(&fx.output.join("results.csv"));
    assert_eq!(csv.lines().count(), 13);
    assert_eq!(read(&fx.output.join("lineups.jsonl")).lines().count(), 12);
}

#[test]
fn singleton_identities_report_no_eligible_sources() {
    let recs: Vec<EmbeddingRecord> = (0..8)
        .map(|i| {
            let mut v = vec![0.0f32; 8];
            v[i] = 1.0;
            EmbeddingRecord::new(format!("img{i}").as_str(), format!("id{i}"), v)
        })
        .collect();
    let fx = Fixture::new(&recs);
    let eval = pipeline::run_evaluate(&fx.config()).unwrap();
    assert!(eval.results.is_empty());
    assert_eq!(eval.summary.status, "no eligible sources");
    assert_eq!(eval.summary.accuracy, None);
    assert_eq!(eval.summary.skipped.len(), 8);
    assert!(read(&fx.output.join("accuracy.json")).contains("no eligible sources"));
}

#[test]
fn reruns_are_byte_identical() {
    let fx = Fixture::new(&twelve_image_records());
    let mut cfg = fx.config();
    pipeline::run_evaluate(&cfg).unwrap();
    let first: Vec<String> = ["lineups.jsonl", "results.csv", "accuracy.json"]
        .iter()
        .map(|f| read(&fx.output.join(f)))
        .collect();
    cfg.paths.output = Some(fx.path("out2"));
    pipeline::run_evaluate(&cfg).unwrap();
    for (name, before) in ["lineups.jsonl", "results.csv", "accuracy.json"].iter().zip(first) {
        assert_eq!(read(&fx.path("out2").join(name)), before, "{name}");
    }
}

#[test]
fn data_error_leaves_no_outputs() {
    let fx = Fixture::new(&twelve_image_records());
    fs::write(
        &fx.embeddings,
        "{\"image_id\": \"a\", \"identity_id\": \"x\", \"vector\": [1.0]}\nnot json\n",
    )
    .unwrap();
    let err = pipeline::run_evaluate(&fx.config()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains(":2:"), "{err}");
    assert!(!fx.output.join("results.csv").exists());
}

#[test]
fn identity_restoration_leaves_everything_unchanged() {
    let fx = Fixture::new(&twelve_image_records());
    let mut cfg = fx.config();
    cfg.paths.model = Some(fx.constant_model(0.9, 0.5));
    cfg.paths.restored_embeddings = Some(fx.embeddings.clone());
    cfg.restoration.command = Some("cp {input} {output}".into());
    let out = pipeline::run_predict_and_restore(&cfg).unwrap();
    let restore = out.restore.unwrap();
    assert_eq!(restore.failed, 0);
    assert_eq!(restore.invoked, 12);
    let cmp = out.comparison.unwrap();
    assert_eq!(cmp.overall.total, 12);
    assert_eq!(cmp.overall.unchanged.count, 12);
    assert!(read(&fx.output.join("outcomes_overall.csv")).contains("Rank Unchanged,12,100.0"));
    assert!(fx.output.join("restored/a1.pgm").exists());
}

#[test]
fn failing_hook_marks_lineups_and_trips_threshold() {
    let fx = Fixture::new(&twelve_image_records());
    let mut cfg = fx.config();
    cfg.paths.model = Some(fx.constant_model(0.9, 0.5));
    cfg.paths.restored_embeddings = Some(fx.embeddings.clone());
    cfg.restoration.command = Some("exit 1; {input} {output}".into());
    let err = pipeline::run_predict_and_restore(&cfg).unwrap_err();
    assert!(matches!(
        err,
        PipelineError::HookFailures {
            failed: 12,
            invoked: 12,
            ..
        }
    ));
    assert_eq!(err.exit_code(), 3);
    // reports are still written; every lineup is a failed restoration
    let overall = read(&fx.output.join("outcomes_overall.csv"));
    assert!(overall.contains("Failed Restoration,12,100.0"), "{overall}");

    cfg.restoration.max_failure_fraction = 1.0;
    let out = pipeline::run_predict_and_restore(&cfg).unwrap();
    assert_eq!(out.comparison.unwrap().overall.failed_restorations.count, 12);
}

#[test]
fn perturbed_restoration_matches_hand_count() {
    let fx = Fixture::new(&twelve_image_records());
    // Restored d2 and d3 point along d1. Only the d1 lineup moves: its probe
    // goes from rank 5 to rank 0. Sources always use original vectors, so the
    // d2 and d3 lineups still see their probe at -0.5.
    let mut restored = twelve_image_records();
    for r in restored.iter_mut() {
        if r.image_id.as_str() == "d2" || r.image_id.as_str() == "d3" {
            r.vector = vec![0.0, 0.0, 0.0, 1.0, 0.0];
        }
    }
    let restored_path = fx.path("restored.jsonl");
    write_jsonl(&restored_path, &restored).unwrap();
    let mut cfg = fx.config();
    cfg.paths.model = Some(fx.constant_model(0.9, 0.5));
    cfg.paths.restored_embeddings = Some(restored_path);
    let cmp = pipeline::run_predict_and_restore(&cfg).unwrap().comparison.unwrap();
    assert_eq!(cmp.overall.improvements.count, 1);
    assert_eq!(cmp.overall.degradations.count, 0);
    assert_eq!(cmp.overall.unchanged.count, 11);
    assert_eq!(cmp.overall.success_conversions.count, 1);
    assert_eq!(cmp.failed_before.total, 3);
    assert_eq!(cmp.failed_before.improvements.count, 1);
    assert_eq!(cmp.success_before.total, 9);
    let hist = read(&fx.output.join("rank_changes.csv"));
    assert!(hist.contains("\n5,1,8.3\n"), "{hist}");
    assert!(hist.contains("\n0,11,91.7\n"), "{hist}");
}

#[test]
fn only_predicted_failures_are_restored() {
    let fx = Fixture::new(&twelve_image_records());
    let mut cfg = fx.config();
    cfg.paths.model = Some(fx.constant_model(0.3, 0.5));
    cfg.paths.restored_embeddings = Some(fx.embeddings.clone());
    cfg.restoration.command = Some("cp {input} {output}".into());
    let out = pipeline::run_predict_and_restore(&cfg).unwrap();
    assert!(out.predictions.iter().all(|p| !p.predicted_failure));
    assert_eq!(out.restore.unwrap().invoked, 0);
    assert_eq!(out.comparison.unwrap().overall.total, 0);
    assert!(read(&fx.output.join("outcomes_overall.csv")).contains("Total Analyzed,0,0.0"));
}

#[test]
fn features_table_has_one_row_per_lineup() {
    let fx = Fixture::new(&twelve_image_records());
    let data = pipeline::run_features(&fx.config()).unwrap();
    assert_eq!(data.len(), 12);
    assert_eq!(data.failures(), 3);
    assert_eq!(data.dim(), 5 + 42);
    let csv = read(&fx.output.join("features.csv"));
    assert!(csv.starts_with("image_id,label,emb_0,"));
    assert_eq!(csv.lines().count(), 13);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lineup"))
}

#[test]
fn cli_exit_codes_and_overrides() {
    let fx = Fixture::new(&twelve_image_records());
    let out = fx.output.to_str().unwrap();
    let emb = fx.embeddings.to_str().unwrap();

    let ok = cli()
        .args([
            "evaluate",
            "--output",
            out,
            "--paths.embeddings",
            emb,
            "--lineup.seed=3",
        ])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("accuracy 0.7500"));
    assert!(read(&fx.output.join("accuracy.json")).contains("\"seed\": 3"));

    let usage = cli().args(["evaluate", "--output", out]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    let bad_key = cli()
        .args(["evaluate", "--output", out, "--lineup.nope", "1"])
        .output()
        .unwrap();
    assert_eq!(bad_key.status.code(), Some(1));
    let bad_sub = cli().args(["frobnicate"]).output().unwrap();
    assert_eq!(bad_sub.status.code(), Some(1));

    let broken = fx.path("broken.jsonl");
    fs::write(
        &broken,
        "{\"image_id\": \"\", \"identity_id\": \"x\", \"vector\": [1.0]}\n",
    )
    .unwrap();
    let data = cli()
        .args([
            "evaluate",
            "--output",
            out,
            "--paths.embeddings",
            broken.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(data.status.code(), Some(2));

    let model = fx.constant_model(0.9, 0.5);
    let hook = cli()
        .args([
            "restore",
            "--output",
            out,
            "--paths.embeddings",
            emb,
            "--paths.images",
            fx.images.to_str().unwrap(),
            "--paths.model",
            model.to_str().unwrap(),
            "--restoration.command",
            "exit 7; {input} {output}",
        ])
        .output()
        .unwrap();
    assert_eq!(hook.status.code(), Some(3), "{}", String::from_utf8_lossy(&hook.stderr));
}

#[test]
fn config_file_with_overrides() {
    let fx = Fixture::new(&twelve_image_records());
    let cfg_path = fx.path("config.json");
    fs::write(
        &cfg_path,
        serde_json::json!({
            "paths": {"embeddings": fx.embeddings, "output": fx.output},
            "lineup": {"seed": 11, "batch_size": 7}
        })
        .to_string(),
    )
    .unwrap();
    let run = cli()
        .args([
            "lineups",
            "--config",
            cfg_path.to_str().unwrap(),
            "--lineup.batch_size",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = read(&fx.output.join("lineups.jsonl"));
    assert!(manifest.lines().all(|l| l.contains("\"seed\":11")));
}
