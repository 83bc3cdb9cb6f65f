use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mfs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfs"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run mfs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = mfs(args, dir);
    assert!(
        out.status.success(),
        "mfs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], dir: &Path) -> String {
    let out = mfs(args, dir);
    assert!(!out.status.success(), "mfs {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn write_impulse(dir: &Path) {
    fs::write(
        dir.join("impulse.pgm"),
        "P2\n3 3\n255\n0 0 0\n0 10 0\n0 0 0\n",
    )
    .unwrap();
}

#[test]
fn signature_of_flat_image() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        &[
            "synth", "constant", "--width", "8", "--height", "8", "--level", "90", "--out",
            "flat.pgm",
        ],
        d,
    );
    let csv = ok(&["signature", "flat.pgm", "--delta-max", "3"], d);
    assert_eq!(csv, "delta,area,fd\n1,64.0,\n2,64.0,2.0\n3,64.0,2.0\n");

    ok(
        &[
            "signature",
            "flat.pgm",
            "--delta-max",
            "3",
            "--variant",
            "quotient",
            "--out",
            "sig.csv",
        ],
        d,
    );
    assert_eq!(fs::read_to_string(d.join("sig.csv")).unwrap(), csv);
}

#[test]
fn signature_preconditions() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_impulse(d);
    let err = fails(&["signature", "impulse.pgm", "--delta-max", "1"], d);
    assert!(err.contains("delta-max"), "{err}");
    let err = fails(&["signature", "missing.pgm"], d);
    assert!(err.contains("missing.pgm"), "{err}");
    fails(&["signature", "impulse.pgm", "--variant", "median"], d);
}

#[test]
fn impulse_signature_values() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_impulse(d);
    let csv = ok(&["signature", "impulse.pgm", "--delta-max", "2"], d);
    let first = csv.lines().nth(1).unwrap();
    assert_eq!(first, "1,31.5,");
}

fn corpus(d: &Path, name: &str, tiles: &str, seed: &str) {
    ok(
        &[
            "synth",
            "corpus",
            "--tile-size",
            "32",
            "--tiles",
            tiles,
            "--seed",
            seed,
            "--out",
            name,
        ],
        d,
    );
}

#[test]
fn train_is_deterministic_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    corpus(d, "train", "2", "1");
    let stats = ok(
        &["train", "train", "--delta-max", "6", "--out", "a.json"],
        d,
    );
    let mut lines = stats.lines();
    assert_eq!(
        lines.next(),
        Some("label,mean_of_means,mean_of_stds,n_tiles")
    );
    let labels: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["board", "fbm", "noise"]);

    ok(
        &["train", "train", "--delta-max", "6", "--out", "b.json"],
        d,
    );
    let a = fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, fs::read(d.join("b.json")).unwrap());

    let model: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(model["delta_max"], 6);
    assert_eq!(model["tile_size"], 32);
    assert_eq!(model["classes"].as_array().unwrap().len(), 3);
}

#[test]
fn train_rejects_bad_corpora() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    corpus(d, "train", "1", "1");
    fs::create_dir(d.join("train/empty")).unwrap();
    let err = fails(&["train", "train", "--out", "m.json"], d);
    assert!(err.contains("\"empty\""), "{err}");
    assert!(!d.join("m.json").exists());

    fs::remove_dir(d.join("train/empty")).unwrap();
    ok(
        &[
            "synth",
            "constant",
            "--width",
            "16",
            "--height",
            "16",
            "--level",
            "3",
            "--out",
            "train/board/small.pgm",
        ],
        d,
    );
    let err = fails(&["train", "train", "--out", "m.json"], d);
    assert!(err.contains("mixed tile sizes"), "{err}");

    fs::remove_file(d.join("train/board/small.pgm")).unwrap();
    fails(
        &["train", "train", "--tile-size", "64", "--out", "m.json"],
        d,
    );
    fails(
        &["train", "train", "--delta-max", "1", "--out", "m.json"],
        d,
    );
}

#[test]
fn classify_training_tile_and_wrong_size() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    corpus(d, "train", "1", "1");
    ok(&["train", "train", "--out", "m.json"], d);

    let text = ok(&["classify", "m.json", "train/fbm/fbm_000.pgm"], d);
    assert!(text.starts_with("train/fbm/fbm_000.pgm: fbm\n"), "{text}");
    assert!(
        text.lines().nth(1).unwrap().trim_end().ends_with(" 0.0"),
        "{text}"
    );

    let csv = ok(
        &[
            "classify",
            "--format",
            "csv",
            "m.json",
            "train/board/board_000.pgm",
        ],
        d,
    );
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "tile,predicted,tie,rank,label,distance");
    assert_eq!(rows[1], "train/board/board_000.pgm,board,false,1,board,0.0");
    assert_eq!(rows.len(), 4);

    ok(
        &[
            "synth",
            "constant",
            "--width",
            "16",
            "--height",
            "16",
            "--level",
            "3",
            "--out",
            "small.pgm",
        ],
        d,
    );
    let err = fails(&["classify", "m.json", "small.pgm"], d);
    assert!(err.contains("16x16"), "{err}");
}

#[test]
fn classify_holdout_fbm() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    corpus(d, "train", "4", "1");
    corpus(d, "test", "1", "500");
    ok(&["train", "train", "--out", "m.json"], d);
    let csv = ok(
        &[
            "classify",
            "--format",
            "csv",
            "m.json",
            "test/fbm/fbm_000.pgm",
        ],
        d,
    );
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(1), Some("fbm"));
}

#[test]
fn evaluate_reports_matrix() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    corpus(d, "train", "1", "1");
    ok(&["train", "train", "--out", "m.json"], d);

    let report = ok(&["evaluate", "m.json", "train", "--out", "matrix.csv"], d);
    assert!(report.contains("accuracy: 3/3 = 1.0"), "{report}");
    let csv = fs::read_to_string(d.join("matrix.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["training", "board", "fbm", "noise"]);
    for (k, row) in rows[1..].iter().enumerate() {
        assert_eq!(row[k + 1], "0.0");
    }

    corpus(d, "test", "2", "200");
    let report = ok(&["evaluate", "m.json", "test"], d);
    assert!(!report.contains("MISMATCH"), "{report}");
    assert_eq!(report, ok(&["evaluate", "m.json", "test"], d));
}

#[test]
fn evaluate_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    corpus(d, "train", "1", "1");
    ok(&["train", "train", "--out", "m.json"], d);

    fs::create_dir(d.join("empty")).unwrap();
    fails(&["evaluate", "m.json", "empty"], d);

    fs::create_dir_all(d.join("other/lake")).unwrap();
    fs::copy(d.join("train/fbm/fbm_000.pgm"), d.join("other/lake/a.pgm")).unwrap();
    let err = fails(&["evaluate", "m.json", "other"], d);
    assert!(err.contains("lake"), "{err}");
}

#[test]
fn tiles_and_synth() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        &[
            "synth", "fbm", "--size", "129", "--hurst", "0.4", "--seed", "3", "--out", "f.pgm",
        ],
        d,
    );
    let a = fs::read(d.join("f.pgm")).unwrap();
    ok(
        &[
            "synth", "fbm", "--size", "129", "--hurst", "0.4", "--seed", "3", "--out", "g.pgm",
        ],
        d,
    );
    assert_eq!(a, fs::read(d.join("g.pgm")).unwrap());
    assert!(a.starts_with(b"P5\n129 129\n255\n"));

    let msg = ok(&["tiles", "f.pgm", "--tile-size", "64", "--out", "t"], d);
    assert!(msg.starts_with("4 tiles"), "{msg}");
    assert!(d.join("t/f_y00064_x00000.pgm").exists());
    let msg = ok(
        &[
            "tiles",
            "f.pgm",
            "--tile-size",
            "64",
            "--stride",
            "32",
            "--out",
            "t2",
        ],
        d,
    );
    assert!(msg.starts_with("9 tiles"), "{msg}");
    fails(&["tiles", "f.pgm", "--tile-size", "256", "--out", "t3"], d);

    fails(
        &[
            "synth", "fbm", "--size", "100", "--hurst", "0.4", "--out", "x.pgm",
        ],
        d,
    );
    fails(
        &[
            "synth",
            "checkerboard",
            "--lo",
            "9",
            "--hi",
            "9",
            "--out",
            "x.pgm",
        ],
        d,
    );
    ok(
        &[
            "synth",
            "checkerboard",
            "--width",
            "2",
            "--height",
            "2",
            "--period",
            "1",
            "--out",
            "cb.pgm",
        ],
        d,
    );
    assert_eq!(
        fs::read(d.join("cb.pgm")).unwrap(),
        b"P5\n2 2\n255\n\xff\x00\x00\xff"
    );
}

#[test]
fn help_documents_number_format() {
    let tmp = TempDir::new().unwrap();
    let help = ok(&["--help"], tmp.path());
    assert!(help.contains("shortest decimal form"));
    for cmd in [
        "signature",
        "train",
        "classify",
        "evaluate",
        "synth",
        "tiles",
    ] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
}
