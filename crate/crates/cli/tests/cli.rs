use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn cdbg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdbg"))
        .args(args)
        .output()
        .unwrap()
}

fn shared_prefix_args<'a>(extra: &[&'a str], a: &'a str, b: &'a str) -> Vec<&'a str> {
    let mut v = vec!["construct", "-k", "2", "--single-strand", "-f", "10"];
    v.extend_from_slice(extra);
    v.push(a);
    v.push(b);
    v
}

#[test]
fn shared_prefix_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.gfa");
    let (a, b) = (data("a.fa"), data("b.fa"));
    let args = shared_prefix_args(
        &["-o", out.to_str().unwrap()],
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    );
    let res = cdbg(&args);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let golden = std::fs::read(data("shared_prefix_single.gfa")).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), golden);
    assert!(golden.starts_with(b"H\tVN:Z:1.0\tKL:i:2\n"));
}

#[test]
fn workers_do_not_change_output() {
    let (a, b) = (data("a.fa"), data("b.fa"));
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    for format in ["gfa1", "junctions"] {
        let one = cdbg(&shared_prefix_args(&["--format", format, "-t", "1"], a, b));
        let eight = cdbg(&shared_prefix_args(
            &["--format", format, "-t", "8", "-r", "3"],
            a,
            b,
        ));
        assert!(one.status.success());
        assert_eq!(one.stdout, eight.stdout);
    }
}

#[test]
fn junction_tsv_and_side_reports() {
    let dir = tempfile::tempdir().unwrap();
    let marks = dir.path().join("marks.tsv");
    let loads = dir.path().join("loads.tsv");
    let report = dir.path().join("report.tsv");
    let (a, b) = (data("a.fa"), data("b.fa"));
    let args = shared_prefix_args(
        &[
            "--format",
            "junctions",
            "-r",
            "2",
            "--mark-counts",
            marks.to_str().unwrap(),
            "--partition-loads",
            loads.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ],
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    );
    let res = cdbg(&args);
    assert!(res.status.success());
    let tsv = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<&str> = tsv.lines().collect();
    assert_eq!(
        rows[0],
        "seq_id\tsegment_index\toffset\tjunction_id\tstrand"
    );
    assert_eq!(
        &rows[1..4],
        ["a\t0\t0\t0\t+", "a\t0\t4\t1\t+", "a\t0\t7\t2\t+"]
    );
    assert_eq!(rows.len(), 7);
    let marks = std::fs::read_to_string(marks).unwrap();
    assert_eq!(marks, "pass\tmarks\ninitial\t16\nfirst\t6\nsecond\t6\n");
    assert_eq!(std::fs::read_to_string(loads).unwrap().lines().count(), 3);
    assert!(std::fs::read_to_string(report)
        .unwrap()
        .contains("junctions\t3\n"));
}

#[test]
fn manifest_and_n_splitting() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.fa"), ">x desc\nacgtNNacg\n").unwrap();
    std::fs::write(dir.path().join("list.txt"), "# inputs\nx.fa\n").unwrap();
    let manifest = dir.path().join("list.txt");
    let res = cdbg(&[
        "construct",
        "-k",
        "3",
        "--format",
        "junctions",
        "-s",
        manifest.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let tsv = String::from_utf8(res.stdout).unwrap();
    // segment 0 is ACGT at offset 0, segment 1 is ACG at record offset 6
    assert!(tsv.contains("x\t1\t6\t"), "{tsv}");
}

#[test]
fn estimate_prints_closed_forms() {
    let res = cdbg(&["estimate", "-h", "4", "-E", "1048576", "-b", "8388608"]);
    assert!(res.status.success());
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(out.contains("q\t0.023969\n"), "{out}");
    assert!(out.contains("p\t0.135465\n"), "{out}");
    let res = cdbg(&["estimate", "-E", "10", "-b", "1024", "--budget", "63"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn oracle_subcommand_agrees_with_construct() {
    let (a, b) = (data("a.fa"), data("b.fa"));
    let res = cdbg(&[
        "oracle",
        "-k",
        "2",
        "--single-strand",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let mut s_lines: Vec<String> = String::from_utf8(res.stdout)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with('S'))
        .map(|l| l.split('\t').take(4).collect::<Vec<_>>().join("\t"))
        .collect();
    s_lines.sort();
    let golden = std::fs::read_to_string(data("shared_prefix_single.gfa")).unwrap();
    let mut expected: Vec<String> = golden
        .lines()
        .filter(|l| l.starts_with('S'))
        .map(|l| l.split('\t').take(4).collect::<Vec<_>>().join("\t"))
        .collect();
    expected.sort();
    assert_eq!(s_lines, expected);
}

#[test]
fn exit_codes() {
    assert_eq!(cdbg(&["construct"]).status.code(), Some(1));
    assert_eq!(
        cdbg(&["construct", "-k", "0", "x.fa"]).status.code(),
        Some(1)
    );
    assert_eq!(
        cdbg(&["construct", "-k", "3", "-f", "5", "x.fa"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        cdbg(&["construct", "-k", "3", "/nonexistent/x.fa"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fa");
    std::fs::write(&bad, ">\nACGT\n").unwrap();
    assert_eq!(
        cdbg(&["construct", "-k", "3", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let (a, b) = (data("a.fa"), data("b.fa"));
    let res = cdbg(&shared_prefix_args(
        &["--max-table-keys", "2"],
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    ));
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("rounds"));
    assert_eq!(cdbg(&["--help"]).status.code(), Some(0));
}
