use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use msgstat::harness::{ingest_captured, run_corpus, write_captured, ManifestEntry};
use msgstat::matrix::build_relation_matrix;
use msgstat::{CorpusManifest, Error, MessageCatalog, MessagePattern, ParserSpec, PatternKind};

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn parser(name: &str, exe: &Path, timeout: Duration) -> ParserSpec {
    ParserSpec {
        name: name.into(),
        command: exe.display().to_string(),
        args: vec!["{file}".into()],
        timeout,
    }
}

fn pattern(row: usize, parser: &str, regex: &str) -> MessagePattern {
    MessagePattern {
        row_index: row,
        parser: parser.into(),
        regex: regex.into(),
        description: String::new(),
        kind: PatternKind::Regex,
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    manifest: CorpusManifest,
    catalog: MessageCatalog,
}

fn fixture(slow_timeout: Duration) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let echo = script(d, "echo_parser", r#"echo "Type error : Invalid variant type" >&2"#);
    let cat = script(d, "cat_parser", r#"cat "$1" >&2; exit 3"#);
    let slow = script(d, "slow_parser", "echo partial >&2; sleep 30; echo late >&2");
    let mut entries = Vec::new();
    for i in 1..=2 {
        let f = d.join(format!("file{i}.pdf"));
        fs::write(&f, format!("line from file {i}\nbad xref\n")).unwrap();
        entries.push(ManifestEntry {
            file_id: i,
            path: f,
            ground_truth: None,
        });
    }
    let catalog = MessageCatalog::new(
        vec![
            parser("echo", &echo, Duration::from_secs(10)),
            parser("cat", &cat, Duration::from_secs(10)),
            parser("slow", &slow, slow_timeout),
        ],
        vec![
            pattern(1, "echo", "^Type error"),
            pattern(2, "cat", "xref"),
            pattern(3, "cat", ".+"),
            pattern(4, "slow", "partial"),
        ],
    )
    .unwrap();
    Fixture {
        _dir: dir,
        manifest: CorpusManifest::new("t", entries).unwrap(),
        catalog,
    }
}

#[test]
fn two_files_three_parsers_six_runs() {
    let fx = fixture(Duration::from_millis(300));
    let runs = run_corpus(&fx.manifest, &fx.catalog, 2).unwrap();
    assert_eq!(runs.len(), 6);
    let keys: Vec<(usize, &str)> = runs.iter().map(|r| (r.file_id, r.parser.as_str())).collect();
    assert_eq!(
        keys,
        vec![(1, "cat"), (1, "echo"), (1, "slow"), (2, "cat"), (2, "echo"), (2, "slow")]
    );

    let echo = &runs[1];
    assert_eq!(echo.stderr_text, "Type error : Invalid variant type\n");
    assert_eq!(echo.exit_code, Some(0));

    let cat = &runs[3];
    assert_eq!(cat.stderr_text, fs::read_to_string(&fx.manifest.entries[1].path).unwrap());
    assert_eq!(cat.exit_code, Some(3));

    for slow in [&runs[2], &runs[5]] {
        assert!(slow.timed_out);
        assert_eq!(slow.exit_code, None);
        assert!(slow.duration < Duration::from_secs(10));
        assert!(!slow.stderr_text.contains("late"));
    }

    let m = build_relation_matrix("t", &runs, &fx.catalog).unwrap();
    assert_eq!(m.get(0, 0), 1);
    assert_eq!(m.get(1, 0), 1);
    assert_eq!(m.get(2, 0), 1);
}

#[test]
fn parallelism_does_not_change_results() {
    let fx = fixture(Duration::from_millis(200));
    let strip = |runs: Vec<msgstat::ParserRun>| {
        runs.into_iter()
            .map(|r| (r.file_id, r.parser, r.exit_code, r.stderr_text, r.timed_out))
            .collect::<Vec<_>>()
    };
    let serial = strip(run_corpus(&fx.manifest, &fx.catalog, 1).unwrap());
    let parallel = strip(run_corpus(&fx.manifest, &fx.catalog, 4).unwrap());
    assert_eq!(serial, parallel);
    assert!(run_corpus(&fx.manifest, &fx.catalog, 0).is_err());
}

#[test]
fn missing_executable_fails_before_running() {
    let fx = fixture(Duration::from_millis(200));
    let mut parsers = fx.catalog.parsers().to_vec();
    parsers[0].command = "/definitely/not/here".into();
    let catalog = MessageCatalog::new(parsers, fx.catalog.patterns().to_vec()).unwrap();
    match run_corpus(&fx.manifest, &catalog, 2) {
        Err(Error::MissingExecutable { parser, .. }) => assert_eq!(parser, "echo"),
        other => panic!("expected MissingExecutable, got {other:?}"),
    }
}

#[test]
fn captured_logs_round_trip() {
    let fx = fixture(Duration::from_millis(200));
    let runs = run_corpus(&fx.manifest, &fx.catalog, 3).unwrap();
    let logs = tempfile::tempdir().unwrap();
    write_captured(logs.path(), &runs).unwrap();
    let got = ingest_captured(logs.path(), &fx.manifest, &fx.catalog).unwrap();
    assert!(got.warnings.is_empty(), "{:?}", got.warnings);
    assert_eq!(got.runs.len(), runs.len());
    for (a, b) in runs.iter().zip(&got.runs) {
        assert_eq!((a.file_id, &a.parser, a.exit_code, &a.stderr_text, a.timed_out),
                   (b.file_id, &b.parser, b.exit_code, &b.stderr_text, b.timed_out));
    }
    assert_eq!(
        build_relation_matrix("t", &runs, &fx.catalog).unwrap(),
        build_relation_matrix("t", &got.runs, &fx.catalog).unwrap()
    );
}

#[test]
fn ingest_layout_rules() {
    let fx = fixture(Duration::from_millis(200));
    let logs = tempfile::tempdir().unwrap();
    fs::write(logs.path().join("f000001.cat.stderr"), "bad xref\nsomething\n").unwrap();
    let got = ingest_captured(logs.path(), &fx.manifest, &fx.catalog).unwrap();
    assert_eq!(got.runs.len(), 6);
    assert_eq!(got.runs[0].stderr_text.lines().count(), 2);
    assert_eq!(got.warnings.len(), 5);

    fs::write(logs.path().join("notes.txt"), "").unwrap();
    match ingest_captured(logs.path(), &fx.manifest, &fx.catalog) {
        Err(Error::Layout(p)) => assert!(p.ends_with("notes.txt")),
        other => panic!("expected a layout error, got {other:?}"),
    }
}
