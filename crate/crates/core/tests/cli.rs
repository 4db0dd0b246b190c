//! Black-box tests of the sbmf binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use sbmf::matrix::{parse_matrix_market, Symmetry};
use sbmf::SparseMatrix;

fn sbmf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbmf"))
}

fn sample_matrix() -> SparseMatrix {
    SparseMatrix::from_coords(
        60,
        60,
        Symmetry::General,
        (0..400u32).map(|i| ((i * 7919) % 60, (i * 104729) % 60)),
    )
    .unwrap()
}

fn write_sample(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("sample.mtx");
    fs::write(&path, sample_matrix().to_matrix_market(None)).unwrap();
    path
}

#[test]
fn encode_verify_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = write_sample(dir.path());
    let sbm = dir.path().join("sample.sbm");
    let back = dir.path().join("back.mtx");

    let status = sbmf()
        .args([
            "encode",
            mtx.to_str().unwrap(),
            "-o",
            sbm.to_str().unwrap(),
            "--precision",
            "64",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let status = sbmf().args(["verify", sbm.to_str().unwrap()]).status().unwrap();
    assert!(status.success());

    let status = sbmf()
        .args(["decode", sbm.to_str().unwrap(), "-o", back.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());

    let decoded = parse_matrix_market(&fs::read_to_string(&back).unwrap())
        .unwrap()
        .matrix;
    assert_eq!(decoded, sample_matrix());
}

#[test]
fn verify_rejects_corrupted_container() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = write_sample(dir.path());
    let sbm = dir.path().join("sample.sbm");
    sbmf()
        .args([
            "encode",
            mtx.to_str().unwrap(),
            "-o",
            sbm.to_str().unwrap(),
            "--scheme",
            "adaptive",
            "--size",
            "8x8",
            "--precision",
            "32",
        ])
        .status()
        .unwrap();
    let mut bytes = fs::read(&sbm).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&sbm, bytes).unwrap();
    let out = sbmf().args(["verify", sbm.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn analyze_reports_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = write_sample(dir.path());
    let out = sbmf()
        .args(["analyze", mtx.to_str().unwrap(), "--sizes", "b8", "--precision", "32"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["rows"], 60);
    assert!(json["precisions"][0]["optimal_bits"].as_u64().unwrap() > 0);
    // 8 schemes x 8 sizes
    assert_eq!(json["precisions"][0]["cells"].as_array().unwrap().len(), 64);
}

#[test]
fn corpus_and_rank_run_from_list() {
    let dir = tempfile::tempdir().unwrap();
    let mut list = String::from("id,kind,path\n");
    for i in 0..4u32 {
        let a = SparseMatrix::from_coords(
            50,
            50,
            Symmetry::General,
            (0..300u32).map(move |j| ((j * 13 + i * 7) % 50, (j * 31 + i) % 50)),
        )
        .unwrap();
        let name = format!("m{i}.mtx");
        fs::write(dir.path().join(&name), a.to_matrix_market(None)).unwrap();
        list.push_str(&format!("m{i},test,{name}\n"));
    }
    let list_path = dir.path().join("corpus.csv");
    fs::write(&list_path, list).unwrap();

    let report = dir.path().join("report");
    let status = sbmf()
        .args([
            "corpus",
            "--list",
            list_path.to_str().unwrap(),
            "-o",
            report.to_str().unwrap(),
            "--trials",
            "5",
            "--subset-size",
            "3",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(report.join("manifest.json").exists());
    assert!(report.join("block_size_ranking_b64.csv").exists());

    let out = sbmf()
        .args(["rank", "--list", list_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // header + 64 sizes x 2 precisions
    assert_eq!(text.lines().count(), 129);
}

#[test]
fn usage_errors_exit_2() {
    let out = sbmf().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = sbmf().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_1() {
    let out = sbmf().args(["verify", "/nonexistent/file.sbm"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = sbmf()
        .args(["analyze", "/nonexistent/file.mtx"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn offline_fetch_miss_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = sbmf()
        .args([
            "fetch",
            "HB/bcsstk01",
            "--offline",
            "--cache-dir",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offline"));
}
