mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

use common::*;

fn warp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warp"))
        .args(args)
        .current_dir(dir)
        .env_remove("XDG_CONFIG_HOME")
        .env("HOME", dir)
        .output()
        .unwrap()
}

fn fixture_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let m = mini();
    let text = format!(
        "[cache]\nenabled = false\n[generator.hypothesis]\nkind = \"replay\"\ndir = {:?}\n[generator.synthesis]\nkind = \"replay\"\ndir = {:?}\n[sources]\nfixtures = {:?}\n{extra}",
        m.join("replay/core"),
        m.join("replay/synthesis"),
        m.join("web"),
    );
    let path = dir.join("warp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_reports_and_applies() {
    let project = Project::new(SEMICOLON);
    let cfg = tempfile::tempdir().unwrap();
    let config = fixture_config(cfg.path(), "");
    let out = warp(&["--config", config.to_str().unwrap(), "run", "--", "gcc", "-c", "main.c"], &project.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("main.c:6: expected ',' or ';' before 'for'"), "{stdout}");
    assert!(stdout.contains("#1 s1-1-1"), "{stdout}");
    assert!(stdout.contains("+    int total = 0;"), "{stdout}");
    assert!(!project.compiles());

    let out = warp(&["--config", config.to_str().unwrap(), "run", "--apply", "--json", "--", "gcc -c main.c"], &project.path());
    let session: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(session["status"], "Applied");
    assert!(project.compiles());

    let out = warp(&["--config", config.to_str().unwrap(), "run", "--", "gcc", "-c", "main.c"], &project.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("Idle: build succeeded"));
}

#[test]
fn credentials_in_config_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path(), "[sources.github]\nbase_url = \"https://api.github.com\"\ntoken = \"ghp_x\"\n");
    let out = warp(&["--config", config.to_str().unwrap(), "run", "--", "true"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sources.github.token") && err.contains("WARP_GH_KEY"), "{err}");

    std::fs::write(&config, "[server]\nbind = \"127.0.0.1:1\"\nhost = \"x\"\n").unwrap();
    let out = warp(&["--config", config.to_str().unwrap(), "serve"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("host"));

    let out = warp(&["serve"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = mini().join("dataset.jsonl");
    let report = dir.path().join("out/report.txt");
    let out = warp(
        &["eval", "--dataset", dataset.to_str().unwrap(), "--systems", "oracle,null,ide-std,warp-full", "--report", report.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("System"));
    assert_eq!(text, String::from_utf8_lossy(&out.stdout));
    let got: Value = serde_json::from_str(&std::fs::read_to_string(report.with_extension("json")).unwrap()).unwrap();
    let golden: Value = serde_json::from_str(&std::fs::read_to_string(mini().join("golden_report.json")).unwrap()).unwrap();
    assert_eq!(got["dataset_hash"], golden["dataset_hash"]);
    for row in got["rows"].as_array().unwrap() {
        let want = golden["rows"].as_array().unwrap().iter().find(|r| r["system"] == row["system"]).unwrap();
        assert_eq!(row, want, "{}", row["system"]);
    }

    let out = warp(&["eval", "--dataset", dataset.to_str().unwrap(), "--systems", "gpt", "--report", "x.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown system"));
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    let extra = format!("[server]\nbind = \"127.0.0.1:0\"\n[store]\npath = {:?}\n", dir.path().join("sessions.jsonl"));
    let config = fixture_config(dir.path(), &extra);
    let mut child = Command::new(env!("CARGO_BIN_EXE_warp"))
        .args(["--config", config.to_str().unwrap(), "serve"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().to_string();
    let mut conn = TcpStream::connect(&addr).unwrap();
    write!(conn, "GET /api/sessions HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    conn.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.ends_with("\r\n\r\n[]"), "{resp}");
}
