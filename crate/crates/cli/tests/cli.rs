use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn ckn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckn"))
        .args(args)
        .current_dir(dir)
        .env_remove("CKN_SNAPSHOT")
        .output()
        .expect("ckn runs")
}

fn ckn_stdin(dir: &Path, args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ckn"))
        .args(args)
        .current_dir(dir)
        .env_remove("CKN_SNAPSHOT")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("ckn runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// A temp dir holding a built snapshot of the named fixture.
fn built(name: &str) -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("kb.json");
    let out = ckn(
        dir.path(),
        &[
            "build",
            fixture(name).to_str().unwrap(),
            "--out",
            snap.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    (dir, snap.to_str().unwrap().to_string())
}

#[test]
fn build_reports_zero_errors() {
    let dir = TempDir::new().unwrap();
    std::fs::copy(
        fixture("royal_elephant.ckn"),
        dir.path().join("royal_elephant.ckn"),
    )
    .unwrap();
    let out = ckn(dir.path(), &["build", "royal_elephant.ckn"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("\n0 errors\n"));
    assert!(dir.path().join("royal_elephant.snapshot.json").exists());
}

#[test]
fn build_rejects_sc_self_edge() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.ckn"), "sc A A;\n").unwrap();
    let out = ckn(dir.path(), &["build", "bad.ckn"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("SC is irreflexive"),
        "{}",
        stderr(&out)
    );
    assert!(!dir.path().join("bad.snapshot.json").exists());
}

#[test]
fn build_reports_parse_errors_with_location() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.ckn"), "ako A B;\nfrobnicate X;\n").unwrap();
    let out = ckn(dir.path(), &["check", "bad.ckn"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.ckn:2:1: error: unknown keyword `frobnicate`"));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = ckn(dir.path(), &["build", "missing.ckn"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot read missing.ckn"));
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    assert_eq!(ckn(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        ckn(dir.path(), &["--max-depth", "0", "check", "x"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ckn(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn query_q1_derivative() {
    let (dir, snap) = built("royal_elephant.ckn");
    let out = ckn(
        dir.path(),
        &[
            "query",
            "q1",
            "--cat",
            "ako",
            "Teeth#Elephant",
            "Organ#Animal",
            "--snapshot",
            &snap,
        ],
    );
    assert_eq!(stdout(&out), "true\n");
}

#[test]
fn query_q3_chain() {
    let (dir, snap) = built("chain.ckn");
    let out = ckn(
        dir.path(),
        &[
            "--snapshot",
            &snap,
            "query",
            "q3",
            "Presence#Human",
            "Presence#Mouse",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "Presence#Human -> Presence#Mouse: -\n  \
         Presence#Human -[-]-> Presence#Elephant -[+]-> Presence#Mouse  => -\n"
    );
}

#[test]
fn query_errors() {
    let (dir, snap) = built("chain.ckn");
    let run = |args: &[&str]| {
        let mut full = vec!["--snapshot", &snap, "query"];
        full.extend_from_slice(args);
        ckn(dir.path(), &full)
    };
    assert_eq!(run(&["q3", "A", "A"]).status.code(), Some(1));
    let unknown = run(&["q3", "Presence#Human", "Nope"]);
    assert_eq!(unknown.status.code(), Some(3));
    assert!(stderr(&unknown).contains("unknown concept `Nope`"));
    assert_eq!(run(&["q3", "Bad##", "X"]).status.code(), Some(1));
    assert_eq!(
        run(&["q1", "--cat", "kindof", "A", "B"]).status.code(),
        Some(1)
    );
}

#[test]
fn query_needs_a_knowledge_base() {
    let dir = TempDir::new().unwrap();
    let out = ckn(dir.path(), &["query", "q1", "--cat", "ako", "A", "B"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no knowledge base"));
}

#[test]
fn snapshot_from_environment() {
    let (dir, snap) = built("royal_elephant.ckn");
    let out = Command::new(env!("CARGO_BIN_EXE_ckn"))
        .args(["query", "q2", "--cat", "ako", "Elephant", "--descendants"])
        .current_dir(dir.path())
        .env("CKN_SNAPSHOT", &snap)
        .output()
        .unwrap();
    assert_eq!(
        stdout(&out),
        "PinkTail_Royal_Elephant#Thailand\nRoyal_Elephant\nRoyal_Elephant#Thailand\n"
    );
}

#[test]
fn snapshot_version_mismatch_is_rejected() {
    let (dir, snap) = built("chain.ckn");
    let text = std::fs::read_to_string(&snap).unwrap();
    std::fs::write(&snap, text.replace("\"version\": 1", "\"version\": 7")).unwrap();
    let out = ckn(
        dir.path(),
        &[
            "--snapshot",
            &snap,
            "query",
            "q3",
            "Presence#Human",
            "Presence#Mouse",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("version 7"));
}

#[test]
fn snapshot_is_byte_deterministic() {
    let (_a, snap_a) = built("royal_elephant.ckn");
    let (_b, snap_b) = built("royal_elephant.ckn");
    assert_eq!(
        std::fs::read(snap_a).unwrap(),
        std::fs::read(snap_b).unwrap()
    );
}

#[test]
fn json_output_is_versioned_and_deterministic() {
    let (dir, snap) = built("parallel.ckn");
    let args = [
        "--format",
        "json",
        "--snapshot",
        &snap,
        "query",
        "q3",
        "Presence#King#Thailand",
        "Presence#Mouse#Thailand",
    ];
    let first = stdout(&ckn(dir.path(), &args));
    assert_eq!(first, stdout(&ckn(dir.path(), &args)));
    let doc: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(doc["schema"], "ckn-query");
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["query"]["form"], "q3");
    assert_eq!(doc["result"]["net"], "a");
    assert_eq!(doc["result"]["paths"].as_array().unwrap().len(), 2);
}

#[test]
fn kb_files_can_replace_a_snapshot() {
    let dir = TempDir::new().unwrap();
    let out = ckn(
        dir.path(),
        &[
            "query",
            "q4",
            "Presence#Human",
            "--affects",
            "--kb",
            fixture("chain.ckn").to_str().unwrap(),
        ],
    );
    assert_eq!(stdout(&out), "- Presence#Elephant\n- Presence#Mouse\n");
}

fn formulate(dir: &Path, context: &str, out: &str) -> Output {
    ckn(
        dir,
        &[
            "--kb",
            fixture("tourist.ckn").to_str().unwrap(),
            "formulate",
            "--decision",
            "Bring_Camera#Tourist",
            "--value",
            "Utility#Tourist",
            "--context",
            context,
            "--out",
            out,
            "--dot",
            &format!("{out}.dot"),
        ],
    )
}

#[test]
fn formulate_writes_model_files() {
    let dir = TempDir::new().unwrap();
    let out = formulate(dir.path(), "Thailand", "thai.json");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("9 nodes (1 decision, 1 value, 7 chance), 9 arcs\n"));
    assert!(text.contains("Bring_Camera#Tourist#Thailand -> Utility#Tourist#Thailand: a\n"));

    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("thai.json")).unwrap())
            .unwrap();
    let values = model["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|n| n["kind"] == "value")
        .count();
    assert_eq!(values, 1);
    let dot = std::fs::read_to_string(dir.path().join("thai.json.dot")).unwrap();
    assert_eq!(dot.matches("shape=diamond").count(), 1);

    let exported = ckn(dir.path(), &["export", "thai.json", "--to", "dot"]);
    assert_eq!(stdout(&exported), dot);
}

#[test]
fn formulate_depends_on_the_context() {
    let dir = TempDir::new().unwrap();
    let arcs = |text: String, country: &str| -> Vec<String> {
        text.lines()
            .skip_while(|l| *l != "arcs:")
            .skip(1)
            .take_while(|l| l.starts_with("  "))
            .map(|l| l.replace(country, "C"))
            .collect()
    };
    let thai = arcs(
        stdout(&formulate(dir.path(), "Thailand", "a.json")),
        "Thailand",
    );
    let other = arcs(
        stdout(&formulate(dir.path(), "Elsewhere", "b.json")),
        "Elsewhere",
    );
    assert!(thai.contains(&"  Presence#Human#C -[+]-> Presence#Royal_Elephant#C".to_string()));
    assert!(other.contains(&"  Presence#Human#C -[-]-> Presence#Royal_Elephant#C".to_string()));
    assert_ne!(thai, other);
}

#[test]
fn formulate_with_bad_value() {
    let dir = TempDir::new().unwrap();
    let out = ckn(
        dir.path(),
        &[
            "--kb",
            fixture("tourist.ckn").to_str().unwrap(),
            "formulate",
            "--decision",
            "Bring_Camera#Tourist",
            "--value",
            "Happiness",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown concept `Happiness`"));
    assert!(!dir.path().join("model.json").exists());
}

#[test]
fn repl_matches_batch_answers() {
    let (dir, snap) = built("royal_elephant.ckn");
    let script = [
        "q2 --cat ako Elephant --descendants",
        "q1 --cat ako \"Teeth#Elephant\" \"Organ#Animal\"",
        "q3 Presence#Human Presence#Royal_Elephant --sign +",
        "q4 Presence#Human --affects",
    ];
    let mut batch = String::new();
    for line in script {
        let mut args = vec!["--snapshot", snap.as_str(), "query"];
        let words = shlex::split(line).unwrap();
        args.extend(words.iter().map(String::as_str));
        let out = ckn(dir.path(), &args);
        assert!(out.status.success(), "{line}: {}", stderr(&out));
        batch.push_str(&stdout(&out));
    }
    let input = format!("{}\n\n:quit\nq1 --cat ako A B\n", script.join("\n"));
    let repl = ckn_stdin(dir.path(), &["--snapshot", &snap, "repl"], &input);
    assert_eq!(repl.status.code(), Some(0));
    assert_eq!(stdout(&repl), batch);
}

#[test]
fn repl_reports_errors_and_continues() {
    let (dir, snap) = built("chain.ckn");
    let input = "bogus\nq3 Nope Presence#Mouse\nq3 Presence#Human Presence#Mouse\n";
    let repl = ckn_stdin(dir.path(), &["--snapshot", &snap, "repl"], input);
    assert_eq!(repl.status.code(), Some(0));
    assert!(stdout(&repl).starts_with("Presence#Human -> Presence#Mouse: -\n"));
    let err = stderr(&repl);
    assert!(err.contains("unrecognized subcommand 'bogus'"));
    assert!(err.contains("unknown concept `Nope`"));
}
