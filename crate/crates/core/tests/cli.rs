use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crvx::eval::{gen_curves, with_prefix, CurveModel};
use crvx::io::write_dataset;

fn crvx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crvx")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixtures(dir: &Path) {
    write_dataset(&gen_curves(25, 1..=3, 2, 1, CurveModel::GaussWalk), dir.join("data.txt")).unwrap();
    write_dataset(
        &with_prefix(gen_curves(6, 1..=3, 2, 2, CurveModel::GaussWalk), "q"),
        dir.join("queries.txt"),
    )
    .unwrap();
    write_dataset(
        &with_prefix(gen_curves(2, 1..=3, 3, 3, CurveModel::GaussWalk), "q"),
        dir.join("queries3d.txt"),
    )
    .unwrap();
}

#[test]
fn build_then_query() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let idx = dir.path().join("i.crvx");
    let data = dir.path().join("data.txt");
    let o = crvx(&[
        "build",
        "--data",
        s(&data),
        "--p",
        "1",
        "--eps",
        "0.5",
        "--reps",
        "3",
        "--k",
        "8",
        "--seed",
        "4",
        "--out",
        s(&idx),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .starts_with("index n=25 m=3 d=2 k=8 effective_p=1 repetitions=3"));
    assert!(String::from_utf8(o.stderr).unwrap().contains("built in"));

    let queries = dir.path().join("queries.txt");
    let a = crvx(&["query", "--index", s(&idx), "--query", s(&queries)]);
    assert_eq!(code(&a), 0);
    let out = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(out.lines().count(), 6);
    for (i, line) in out.lines().enumerate() {
        let f: Vec<&str> = line.split(' ').collect();
        assert_eq!(f[0], format!("q{i:05}"));
        assert!(f[1].starts_with('c'));
        assert!(f[2].parse::<f64>().unwrap() >= 0.0);
        assert!(f[3].starts_with("probes="));
    }
    // identical invocations print identical bytes
    assert_eq!(crvx(&["query", "--index", s(&idx), "--query", s(&queries)]).stdout, a.stdout);
    for flag in ["--dfd", "--dtw"] {
        assert_eq!(code(&crvx(&["query", "--index", s(&idx), "--query", s(&queries), flag])), 0);
    }
    assert_eq!(
        code(&crvx(&[
            "query",
            "--index",
            s(&idx),
            "--query",
            s(&queries),
            "--dfd",
            "--dtw"
        ])),
        1
    );
}

#[test]
fn rebuilds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let data = dir.path().join("data.txt");
    let (a, b) = (dir.path().join("a.crvx"), dir.path().join("b.crvx"));
    for out in [&a, &b] {
        let o = crvx(&[
            "build",
            "--data",
            s(&data),
            "--p",
            "inf",
            "--eps",
            "0.25",
            "--reps",
            "2",
            "--k",
            "4",
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn eval_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let data = dir.path().join("data.txt");
    let queries = dir.path().join("queries.txt");
    let args = [
        "eval",
        "--data",
        s(&data),
        "--queries",
        s(&queries),
        "--p",
        "2",
        "--eps",
        "0.5",
        "--reps",
        "2",
        "--k",
        "6",
    ];
    let a = crvx(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(crvx(&args).stdout, a.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# crvx-eval v1\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("query ")).count(), 6);
    assert!(text.lines().last().unwrap().starts_with("summary queries=6 "));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let data = dir.path().join("data.txt");
    let out = dir.path().join("i.crvx");
    let base = ["build", "--data", s(&data), "--out", s(&out)];
    for extra in [
        vec!["--p", "1", "--eps", "0.9"],
        vec!["--p", "0.5", "--eps", "0.5"],
        vec!["--p", "x", "--eps", "0.5"],
        vec!["--p", "1", "--eps", "0.5", "--backend", "tree"],
        vec!["--p", "1", "--eps", "0.5", "--reps", "0"],
        vec!["--p", "1"],
    ] {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        let o = crvx(&args);
        assert_eq!(code(&o), 1, "{extra:?}");
        assert!(!o.stderr.is_empty());
    }
    assert!(!out.exists());
    assert_eq!(code(&crvx(&["frobnicate"])), 1);
    assert_eq!(code(&crvx(&[])), 1);
    assert_eq!(code(&crvx(&["--help"])), 0);
    assert_eq!(code(&crvx(&["build", "--help"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let data = dir.path().join("data.txt");
    let idx = dir.path().join("i.crvx");
    assert_eq!(
        code(&crvx(&[
            "build",
            "--data",
            s(&data),
            "--p",
            "1",
            "--eps",
            "0.5",
            "--k",
            "4",
            "--out",
            s(&idx)
        ])),
        0
    );

    let q3 = dir.path().join("queries3d.txt");
    let o = crvx(&["query", "--index", s(&idx), "--query", s(&q3)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("dimension mismatch"));

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "# nothing\n").unwrap();
    assert_eq!(
        code(&crvx(&[
            "build",
            "--data",
            s(&empty),
            "--p",
            "1",
            "--eps",
            "0.5",
            "--out",
            s(&idx)
        ])),
        2
    );

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "a 1 1 0\nb 1 1 zero\n").unwrap();
    let o = crvx(&["build", "--data", s(&bad), "--p", "1", "--eps", "0.5", "--out", s(&idx)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 2"));

    let missing = dir.path().join("missing.txt");
    assert_eq!(
        code(&crvx(&[
            "build",
            "--data",
            s(&missing),
            "--p",
            "1",
            "--eps",
            "0.5",
            "--out",
            s(&idx)
        ])),
        2
    );

    let junk = dir.path().join("junk.crvx");
    fs::write(&junk, b"not an index").unwrap();
    let queries = dir.path().join("queries.txt");
    assert_eq!(code(&crvx(&["query", "--index", s(&junk), "--query", s(&queries)])), 2);

    let long = dir.path().join("long.txt");
    fs::write(&long, "q 2 4 0 0 1 1 2 2 3 3\n").unwrap();
    let o = crvx(&["query", "--index", s(&idx), "--query", s(&long)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn quick_selftest_passes() {
    let o = crvx(&["selftest", "--quick"]);
    let out = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(code(&o), 0, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS ")));
    assert!(out.contains("metric_oracle"));
}
