use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spforge"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn records() -> PathBuf {
    data("synthetic_records.jsonl")
}

fn embeddings() -> PathBuf {
    data("synthetic_embeddings.jsonl")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spforge-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn corpus_args<'a>(cmd: &'a mut Command) -> &'a mut Command {
    cmd.arg("--records").arg(records()).arg("--embeddings").arg(embeddings())
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(bin().args(["ablate", "--bogus"]))), 1);
    assert_eq!(code(&run(bin().arg("frobnicate"))), 1);
    assert_eq!(code(&run(&mut bin())), 1);
    assert_eq!(code(&run(bin().args(["ablate", "--seed", "seven"]))), 1);
    assert_eq!(code(&run(corpus_args(bin().arg("fuse")).args(["--with-severity", "--without-severity"]))), 1);
    // Required input missing.
    assert_eq!(code(&run(bin().args(["ablate", "--embeddings"]).arg(embeddings()))), 1);
    assert_eq!(code(&run(bin().args(["ablate", "--help"]))), 0);
}

#[test]
fn missing_embedding_exits_2_naming_the_id() {
    let dir = scratch("missing");
    let path = dir.join("r.jsonl");
    let mut text: String = std::fs::read_to_string(records()).unwrap().lines().take(5).map(|l| format!("{l}\n")).collect();
    text.push_str("{\"story_id\":\"orphan-1\",\"story_text\":\"x\",\"severity\":1,\"story_point\":3}\n");
    std::fs::write(&path, text).unwrap();
    let out = run(bin().arg("ablate").arg("--records").arg(&path).arg("--embeddings").arg(embeddings()));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("orphan-1"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn bad_data_exits_2_and_missing_file_exits_3() {
    let dir = scratch("bad");
    let path = dir.join("r.jsonl");
    std::fs::write(&path, "{\"story_id\":\"a\",\"story_text\":\"x\",\"severity\":1,\"story_point\":4}\n").unwrap();
    assert_eq!(code(&run(bin().arg("split").arg("--records").arg(&path))), 2);
    assert_eq!(code(&run(bin().args(["split", "--records", "/definitely/not/here.jsonl"]))), 3);
    assert_eq!(code(&run(bin().arg("split").arg("--records").arg(records()).args(["--test-fraction", "1.5"]))), 2);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn split_train_predict_evaluate_chain() {
    let dir = scratch("chain");
    let split_path = dir.join("split.json");
    let model = dir.join("model.json");
    let out = run(bin().arg("split").arg("--records").arg(records()).args(["--seed", "3", "--out"]).arg(&split_path));
    assert_eq!(code(&out), 0);
    let split: Value = serde_json::from_str(&std::fs::read_to_string(&split_path).unwrap()).unwrap();
    assert_eq!(split["test"].as_array().unwrap().len(), 22);

    let report = json(&run(corpus_args(bin().arg("train"))
        .arg("--split-file")
        .arg(&split_path)
        .arg("--model")
        .arg(&model)
        .arg("--without-severity")));
    assert_eq!(report["include_severity"], false);
    assert_eq!(report["train_ids"], split["train"]);

    let preds = run(corpus_args(bin().arg("predict")).arg("--model").arg(&model).arg("--split-file").arg(&split_path));
    assert!(preds.status.success());
    let lines: Vec<Value> = preds.stdout.lines().map(|l| serde_json::from_str(&l.unwrap()).unwrap()).collect();
    assert_eq!(lines.len(), 22);
    assert!(lines.iter().all(|p| p["predicted_sp"].is_u64() && p["actual_sp"].is_u64()));

    let eval = json(&run(corpus_args(bin().arg("evaluate")).arg("--model").arg(&model).arg("--split-file").arg(&split_path)));
    assert_eq!(eval["n_instances"], 22);
    let hits = lines.iter().filter(|p| p["predicted_sp"] == p["actual_sp"]).count();
    assert_eq!(eval["accuracy"].as_f64().unwrap(), hits as f64 / 22.0);

    // A model trained without severity must not accept a different layout.
    let bad_model = dir.join("bad.json");
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    m["column_names"].as_array_mut().unwrap().pop();
    std::fs::write(&bad_model, m.to_string()).unwrap();
    assert_eq!(code(&run(corpus_args(bin().arg("predict")).arg("--model").arg(&bad_model))), 2);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = scratch("config");
    let cfg = dir.join("config.json");
    let body = serde_json::json!({
        "records": records(),
        "embeddings": embeddings(),
        "seed": 4,
        "train": {"n_estimators": 5, "early_stopping_rounds": 0}
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let from_file = json(&run(bin().arg("ablate").arg("--config").arg(&cfg)));
    assert_eq!(from_file["config"]["seed"], 4);
    assert_eq!(from_file["config"]["train"]["n_estimators"], 5);
    assert_eq!(from_file["with_severity"]["rounds_completed"], 5);

    let flagged = json(&run(bin().arg("ablate").arg("--config").arg(&cfg).args(["--seed", "9", "--test-fraction", "0.3"])));
    assert_eq!(flagged["config"]["seed"], 9);
    assert_eq!(flagged["config"]["train"]["seed"], 9);
    assert_eq!(flagged["config"]["test_fraction"], 0.3);
    assert_eq!(flagged["split"]["test"].as_array().unwrap().len(), 33);

    std::fs::write(&cfg, r#"{"seeed": 1}"#).unwrap();
    assert_eq!(code(&run(bin().arg("ablate").arg("--config").arg(&cfg))), 2);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn correlate_and_fuse_shapes() {
    let with = json(&run(corpus_args(bin().arg("correlate"))));
    assert_eq!(with["variables"].as_array().unwrap().len(), 4);
    assert_eq!(with["variables"][3], "Severity_Encoded");
    let without = json(&run(corpus_args(bin().arg("correlate")).arg("--without-severity")));
    assert_eq!(without["matrix"].as_array().unwrap().len(), 3);

    let m = json(&run(corpus_args(bin().arg("fuse"))));
    assert_eq!(m["n_cols"], 16 + 8 + 1);
    assert_eq!(m["column_names"][24], "severity");
    let m = json(&run(corpus_args(bin().arg("fuse")).arg("--without-severity")));
    assert_eq!(m["n_cols"], 24);
}

#[test]
fn table5_evaluation() {
    let diff = json(&run(bin().args(["evaluate", "--table5"])));
    let acc = |arm: &str| diff[arm]["accuracy"].as_f64().unwrap();
    assert_eq!(acc("with_severity"), 14.0 / 22.0);
    assert_eq!(acc("without_severity"), 17.0 / 22.0);
}

fn mock_bugzilla() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            reader.read_line(&mut request).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
            }
            let path = request.split_whitespace().nth(1).unwrap_or("");
            let (status, body) = if path.starts_with("/rest/bug?id=620552") {
                (200, r#"{"bugs":[{"id":620552,"summary":"Bugzilla cannot connect to Oracle 11G RAC","severity":"major"}]}"#)
            } else if path.starts_with("/rest/bug/620552/attachment") {
                (200, r#"{"bugs":{"620552":[]}}"#)
            } else {
                (404, r#"{"error":true,"code":101}"#)
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    format!("http://{addr}")
}

fn write_annotations(dir: &Path) -> PathBuf {
    let path = dir.join("sp.csv");
    std::fs::write(&path, "id,story_point\n620552,2\n999,3\n").unwrap();
    path
}

#[test]
fn ingest_uses_env_url() {
    let dir = scratch("ingest");
    let ann = write_annotations(&dir);
    let out_path = dir.join("records.jsonl");
    let out = run(bin()
        .arg("ingest")
        .arg("--annotations")
        .arg(&ann)
        .arg("--out")
        .arg(&out_path)
        .env("SPFORGE_BUGZILLA_URL", mock_bugzilla()));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rec: Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(rec["story_text"], "Bugzilla cannot connect to Oracle 11G RAC");
    assert_eq!(rec["story_point"], 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"not_found\":[999]"));

    let no_url = run(bin().arg("ingest").arg("--annotations").arg(&ann).env_remove("SPFORGE_BUGZILLA_URL"));
    assert_eq!(code(&no_url), 1);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn ingest_unreachable_host_exits_3() {
    let dir = scratch("unreachable");
    let ann = write_annotations(&dir);
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = run(bin()
        .arg("ingest")
        .arg("--annotations")
        .arg(&ann)
        .env("SPFORGE_BUGZILLA_URL", format!("http://127.0.0.1:{port}")));
    assert_eq!(code(&out), 3);
    std::fs::remove_dir_all(dir).unwrap();
}
