mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::data;

fn lddkit(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lddkit"));
    cmd.args(args).env_remove("LDDKIT_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("LDDKIT_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn extract(out: &Path) -> Output {
    lddkit(
        &[
            "extract",
            "--src", s(&data("source.txt")),
            "--tgt", s(&data("target.txt")),
            "--conllu", s(&data("fixture.conllu")),
            "--align", s(&data("align.txt")),
            "--phenomena", "particle,reflexive,prep_stranding,reorder",
            "--source-lang", "en",
        ],
        Some(out),
    )
}

#[test]
fn extract_uses_env_out_dir_and_writes_set_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = extract(tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let set = tmp.path().join("sets/particle_d2");
    let instances = fs::read_to_string(set.join("instances.jsonl")).unwrap();
    assert_eq!(
        instances.lines().next().unwrap(),
        r#"{"record_id":1,"phenomenon":"particle","head_index":2,"dep_index":5,"distance":2}"#
    );
    assert_eq!(fs::read_to_string(set.join("source.txt")).unwrap().lines().count(), 3);
    let sizes = fs::read_to_string(tmp.path().join("sizes.tsv")).unwrap();
    assert!(sizes.starts_with("phenomenon\tAll\t>=1\t>=2\t>=3\t>=5\nparticle\t6\t5\t3\t1\t-\n"), "{sizes}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["subcommand"], "extract");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn prep_stranding_without_language_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lddkit(
        &[
            "extract",
            "--src", s(&data("source.txt")),
            "--tgt", s(&data("target.txt")),
            "--conllu", s(&data("fixture.conllu")),
            "--phenomena", "prep_stranding",
            "--out-dir", s(tmp.path()),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--source-lang"), "{err}");
}

#[test]
fn missing_and_mismatched_inputs_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.txt");
    let o = lddkit(&["evaluate", "--hyp", s(&missing), "--ref", s(&data("target.txt"))], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("input not found"));

    let short = tmp.path().join("short.txt");
    fs::write(&short, "a b c\n").unwrap();
    let o = lddkit(&["evaluate", "--hyp", s(&short), "--ref", s(&data("target.txt"))], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line count mismatch"));
}

#[test]
fn evaluate_report_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(extract(tmp.path()).status.success());
    let eval = tmp.path().join("eval");
    let o = lddkit(
        &[
            "evaluate",
            "--hyp", s(&data("hyp.txt")),
            "--ref", s(&data("target.txt")),
            "--challenge", s(&tmp.path().join("sets/particle_d0")),
            "--challenge", s(&tmp.path().join("sets/reorder_t5")),
            "--metrics", "bleu,ribes",
            "--out-dir", s(&eval),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(eval.join("report.tsv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "phenomenon\tmin_distance\tn_sentences\tbleu\tribes\tspearman");
    assert!(lines.next().unwrap().starts_with("baseline\t-\t20\t"));
    assert!(lines.next().unwrap().starts_with("particle\t0\t6\t"));
    assert!(lines.next().unwrap().starts_with("reorder\t5\t2\t"));
    // Single slice per phenomenon: no rank correlation column.
    let table = fs::read_to_string(eval.join("table.tsv")).unwrap();
    assert!(table.starts_with("phenomenon\tAll\t>=5\n"), "{table}");
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval.join("evaluation.json")).unwrap()).unwrap();
    let bleu = &json["baseline"]["metrics"][0];
    for key in ["metric", "score", "precisions", "bp", "hyp_len", "ref_len", "n_sentences"] {
        assert!(bleu.get(key).is_some(), "missing {key}");
    }

    let o = lddkit(&["report", "--input", s(&eval.join("evaluation.json")), "--format", "json"], None);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
}

#[test]
fn permute_writes_sidecar_and_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src.txt");
    let tgt = tmp.path().join("tgt.txt");
    let line = |n: usize| (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    let lines: Vec<String> = [5, 5, 3, 5, 7].iter().map(|&n| line(n)).collect();
    fs::write(&src, lines.join("\n") + "\n").unwrap();
    fs::write(&tgt, lines.join("\n") + "\n").unwrap();
    let out = tmp.path().join("perm");
    let o = lddkit(
        &[
            "permute", "--src", s(&src), "--tgt", s(&tgt), "--sigma", "reverse",
            "--holdout", "1", "--seed", "4", "--out-dir", s(&out),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("permutation.txt")).unwrap(), "4 3 2 1 0\n");
    let permuted = fs::read_to_string(out.join("source.txt")).unwrap();
    assert_eq!(permuted.lines().count(), 3);
    assert_eq!(permuted.lines().next().unwrap(), "w4 w3 w2 w1 w0");
    assert_eq!(fs::read_to_string(out.join("test.source.txt")).unwrap().lines().count(), 1);
    assert_eq!(
        fs::read_to_string(out.join("length_histogram.tsv")).unwrap(),
        "length\tcount\n3\t1\n5\t3\n7\t1\n"
    );

    let o = lddkit(
        &["permute", "--src", s(&src), "--tgt", s(&tgt), "--out-dir", s(&out)],
        None,
    );
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no source sentence has length 18"));
    assert_eq!(fs::read_to_string(out.join("source.txt")).unwrap(), "");
}
