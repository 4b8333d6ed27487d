use std::fs;
use std::path::Path;

use serde_json::Value;

use metakey::cli::{run, Output};

fn cmd(ws: &Path, args: &[&str]) -> (Output, Value) {
    let mut full = vec!["metakey", "--workspace", ws.to_str().unwrap()];
    full.extend_from_slice(args);
    let out = run(full);
    let v: Value = serde_json::from_str(out.stdout.trim()).expect("stdout is JSON");
    (out, v)
}

fn init(dir: &Path) -> std::path::PathBuf {
    let ws = dir.join("ws");
    let (out, v) = cmd(&ws, &["init", "--seed", "3"]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    assert_eq!(v["users"], serde_json::json!([0, 1]));
    ws
}

#[test]
fn store_get_share_accept_audit() {
    let dir = tempfile::tempdir().unwrap();
    let ws = init(dir.path());
    let input = dir.path().join("in.bin");
    let data: Vec<u8> = (0..3000u32).map(|i| (i * 7 % 251) as u8).collect();
    fs::write(&input, &data).unwrap();

    let (out, v) = cmd(&ws, &["store", input.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    let file_id = v["file_id"].as_str().unwrap().to_string();

    let got = dir.path().join("got.bin");
    let (out, _) = cmd(&ws, &["get", &file_id, got.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    assert_eq!(fs::read(&got).unwrap(), data);

    let grant = dir.path().join("g.grant");
    let (out, _) = cmd(&ws, &["share", &file_id, "--to", "1", "--out", grant.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stdout);

    let accepted = dir.path().join("acc.bin");
    let (out, v) = cmd(&ws, &["accept", grant.to_str().unwrap(), accepted.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    assert_eq!(v["receiver"], 1);
    assert_eq!(fs::read(&accepted).unwrap(), data);

    let (out, v) = cmd(&ws, &["audit"]);
    assert_eq!(out.code, 0);
    assert_eq!(v["blocks"], 3);
}

#[test]
fn audit_reports_edited_block() {
    let dir = tempfile::tempdir().unwrap();
    let ws = init(dir.path());
    let input = dir.path().join("in.bin");
    fs::write(&input, b"hello").unwrap();
    for _ in 0..3 {
        assert_eq!(cmd(&ws, &["store", input.to_str().unwrap()]).0.code, 0);
    }
    let chain_path = ws.join("chain.jsonl");
    let text = fs::read_to_string(&chain_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut block: Value = serde_json::from_str(&lines[2]).unwrap();
    block["timestamp"] = Value::from(block["timestamp"].as_u64().unwrap() + 100);
    lines[2] = block.to_string();
    fs::write(&chain_path, lines.join("\n") + "\n").unwrap();

    let (out, v) = cmd(&ws, &["audit"]);
    assert_ne!(out.code, 0);
    assert_eq!(v["code"], "verification_failed");
    assert_eq!(v["height"], 2);

    // Other commands refuse to run on a broken ledger.
    let (out, v) = cmd(&ws, &["store", input.to_str().unwrap()]);
    assert_ne!(out.code, 0);
    assert_eq!(v["height"], 2);
}

#[test]
fn errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let (out, v) = cmd(&ws, &["audit"]);
    assert_ne!(out.code, 0);
    assert_eq!(v["code"], "not_initialized");

    init(dir.path());
    let (out, v) = cmd(&ws, &["init"]);
    assert_ne!(out.code, 0);
    assert_eq!(v["code"], "already_initialized");

    let (_, v) = cmd(&ws, &["get", "zz", "x"]);
    assert_eq!(v["code"], "usage");
    let (_, v) = cmd(&ws, &["get", &"ab".repeat(32), "x"]);
    assert_eq!(v["code"], "not_found");
    let (_, v) = cmd(&ws, &["share", &"ab".repeat(32), "--to", "7"]);
    assert_eq!(v["code"], "unknown_user");

    fs::write(ws.join(".lock"), b"").unwrap();
    let (out, v) = cmd(&ws, &["audit"]);
    assert_eq!(out.code, 0, "audit only reads");
    assert_eq!(v["ok"], true);
    let (_, v) = cmd(&ws, &["get", &"ab".repeat(32), "x"]);
    assert_eq!(v["code"], "locked");

    let (out, v) = cmd(&ws, &["bogus"]);
    assert_eq!(out.code, 2);
    assert_eq!(v["code"], "usage");
}

#[test]
fn attack_matrix_table() {
    let dir = tempfile::tempdir().unwrap();
    let (out, v) = cmd(&dir.path().join("unused"), &["attack", "matrix", "--seed", "5"]);
    assert_eq!(out.code, 0);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for row in rows {
        assert_eq!(row["s_derivable"], false);
        for key in ["coalition", "plain_derivable", "feasible", "missing_link"] {
            assert!(row.get(key).is_some());
        }
    }
}

#[test]
fn demo_differs_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = cmd(dir.path(), &["demo", "--seed", "1"]);
    let (_, b) = cmd(dir.path(), &["demo", "--seed", "2"]);
    assert_eq!(a["recovered"], true);
    assert_ne!(a["trace"], b["trace"]);
}
