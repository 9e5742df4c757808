use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chipower(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chipower"))
        .current_dir(dir)
        .args(args)
        .env_remove("CHIPOWER_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "id,a,b,c,d\n\
                     s1,1,2,3,4\n\
                     s2,2,2,1,5\n\
                     s3,4,1,1,1\n\
                     s4,3,3,2,1\n\
                     s5,1,5,2,2\n";

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "small.csv", SMALL);
    write(dir, "negative.csv", "a,b\n1,2\n3,-4\n");
    write(dir, "flat.csv", "a,b,c\n1,2,3\n2,4,6\n3,6,9\n");
    write(dir, "zeros.csv", "a,b,c\n1,0,3\n2,4,6\n3,6,9\n");

    let code = |args: &[&str]| chipower(dir, args).status.code().unwrap();
    assert_eq!(code(&["lra", "small.csv", "--row-labels"]), 0);
    assert_eq!(code(&["--help"]), 0);
    // usage
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(
        code(&["ca", "small.csv", "--row-labels", "--lambda", "1.5"]),
        1
    );
    assert_eq!(code(&["coherence", "small.csv", "--lambda", "0.5"]), 1);
    assert_eq!(
        code(&["transform", "small.csv", "--kind", "clr", "--lambda", "0.5"]),
        1
    );
    assert_eq!(
        code(&["isometry", "small.csv", "--row-labels", "--grid", "0.5,0.5"]),
        1
    );
    // data
    assert_eq!(code(&["lra", "missing.csv"]), 2);
    assert_eq!(code(&["lra", "negative.csv"]), 2);
    assert_eq!(code(&["lra", "zeros.csv"]), 2);
    assert_eq!(
        code(&[
            "fit",
            "small.csv",
            "--row-labels",
            "--response",
            "y",
            "--lambda",
            "0.5"
        ]),
        2
    );
    // numerical: proportional rows leave no logratio geometry to match
    assert_eq!(code(&["isometry", "flat.csv", "--grid", "1,0.5"]), 3);
}

#[test]
fn transform_writes_what_it_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "small.csv", SMALL);
    let out = chipower(
        dir,
        &[
            "transform",
            "small.csv",
            "--row-labels",
            "--kind",
            "chipower",
            "--lambda",
            "0.5",
            "--out-dir",
            "t",
        ],
    );
    let doc = json(&out);
    assert_eq!(doc["command"], "transform");
    assert_eq!(doc["config"]["transform"]["lambda"], 0.5);
    assert_eq!(doc["result"]["summary"]["descriptor"]["kind"], "chi-power");
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("t/transform.json")).unwrap())
            .unwrap();
    assert_eq!(saved, doc);

    let values = doc["result"]["values"].as_array().unwrap();
    let table = std::fs::read_to_string(dir.join("t/transformed.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("sample,"));
    for (line, row) in lines.zip(values) {
        let cells: Vec<&str> = line.split(',').collect();
        for (cell, v) in cells[1..].iter().zip(row.as_array().unwrap()) {
            assert_eq!(cell.parse::<f64>().unwrap(), v.as_f64().unwrap());
        }
    }
}

#[test]
fn ca_at_one_is_pca_of_chipower_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "small.csv", SMALL);
    let ca = json(&chipower(
        dir,
        &["ca", "small.csv", "--row-labels", "--dims", "3"],
    ));
    let pca = json(&chipower(
        dir,
        &[
            "pca",
            "small.csv",
            "--row-labels",
            "--kind",
            "chipower",
            "--lambda",
            "1",
            "--dims",
            "3",
        ],
    ));
    let a = ca["result"]["summary"]["singular_values"]
        .as_array()
        .unwrap();
    let b = pca["result"]["summary"]["singular_values"]
        .as_array()
        .unwrap();
    for (x, y) in a.iter().zip(b).take(3) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn zero_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let synth = json(&chipower(
        dir,
        &[
            "synth", "--seed", "2", "--rows", "30", "--parts", "12", "--spread", "1.5", "--output",
            "raw.csv",
        ],
    ));
    assert_eq!(synth["result"]["zeros"], 0);
    let inject = json(&chipower(
        dir,
        &[
            "zeros",
            "inject",
            "raw.csv",
            "--row-labels",
            "--fraction",
            "0.1",
            "--output",
            "z.csv",
        ],
    ));
    assert_eq!(inject["command"], "zeros-inject");
    assert_eq!(inject["result"]["zeros"], 36);

    let apply = json(&chipower(
        dir,
        &[
            "zeros",
            "apply",
            "z.csv",
            "--row-labels",
            "--strategy",
            "replace:0.5",
            "--output",
            "r.csv",
        ],
    ));
    assert_eq!(apply["result"]["zeros_before"], 36);
    assert_eq!(apply["result"]["zeros_after"], 0);

    let report = json(&chipower(
        dir,
        &[
            "zeros",
            "report",
            "z.csv",
            "--row-labels",
            "--out-dir",
            "rep",
        ],
    ));
    let rows = report["result"]["strategies"].as_array().unwrap();
    assert_eq!(rows[0]["strategy"], "none");
    assert_eq!(rows[0]["zeros"], 36);
    assert!(rows[0]["logratio_variance"].is_null());
    for r in &rows[1..] {
        assert_eq!(r["zeros"], 0);
        assert!(r["logratio_variance"].as_f64().unwrap() > 0.0);
    }
    assert!(dir.join("rep/zeros.csv").exists());

    let iso = json(&chipower(
        dir,
        &[
            "isometry",
            "z.csv",
            "--row-labels",
            "--grid",
            "0.1:1:0.1",
            "--logratio-zeros",
            "add:1",
            "--refine",
        ],
    ));
    let scan = &iso["result"]["scan"];
    assert_eq!(scan["lambdas"].as_array().unwrap().len(), 10);
    assert_eq!(scan["lambdas"][7], 0.3);
    assert!(
        iso["result"]["refined"]["correlation"].as_f64().unwrap()
            >= scan["optimal_correlation"].as_f64().unwrap()
    );
}

#[test]
fn supervised_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    json(&chipower(
        dir,
        &[
            "synth",
            "--seed",
            "4",
            "--rows",
            "80",
            "--parts",
            "10",
            "--response-effect",
            "3",
            "--output",
            "d.csv",
        ],
    ));
    let fit = json(&chipower(
        dir,
        &[
            "fit",
            "d.csv",
            "--row-labels",
            "--response",
            "y",
            "--lambda",
            "0.5",
            "--out-dir",
            "fit",
        ],
    ));
    let labels: Vec<String> = fit["result"]["model"]["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l.as_str().unwrap().to_string())
        .collect();
    assert!(!labels.is_empty());
    assert!(fit["result"]["model"]["standardization"].is_object());
    assert!(dir.join("fit/model.json").exists());

    let effect = json(&chipower(
        dir,
        &[
            "effect",
            "d.csv",
            "--row-labels",
            "--ignore",
            "y",
            "--model",
            "fit/model.json",
            "--part",
            &labels[0],
            "--multiplier",
            "2",
        ],
    ));
    let effects = effect["result"]["effects"].as_array().unwrap();
    assert_eq!(effects.len(), 2);
    assert_eq!(effects[0]["before"], effects[1]["before"]);

    // the full report works as a model file too
    let stability = json(&chipower(
        dir,
        &[
            "stability",
            "d.csv",
            "--row-labels",
            "--response",
            "y",
            "--model",
            "fit/fit.json",
            "--fractions",
            "0.5,1",
            "--replicates",
            "3",
            "--seed",
            "1",
        ],
    ));
    let fractions = stability["result"]["fractions"].as_array().unwrap();
    assert_eq!(fractions.len(), 2);
    assert_eq!(fractions[1]["subset_size"], 10);

    let flipped = json(&chipower(
        dir,
        &[
            "fit",
            "d.csv",
            "--row-labels",
            "--response",
            "y",
            "--positive",
            "0",
            "--lambda",
            "0.5",
        ],
    ));
    assert_eq!(flipped["result"]["response"]["class_labels"][1], "0");
    let auc = |doc: &Value| doc["result"]["metrics"]["auc"].as_f64().unwrap();
    assert!((auc(&fit) - auc(&flipped)).abs() < 1e-9);
}

#[test]
fn thread_setting_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "small.csv", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_chipower"))
        .current_dir(tmp.path())
        .args(["lra", "small.csv", "--row-labels"])
        .env("CHIPOWER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
