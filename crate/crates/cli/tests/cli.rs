//! End-to-end runs of the `tncs` binary on the bundled digit fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tncs::data::save_model;
use tncs::{Mps, QubitState};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn tncs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tncs"))
        .args(args)
        .env("TNCS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.split_whitespace()
        .find_map(|w| w.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key}= in {text:?}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains a small 7x7 model on the first few threes.
fn train_small(dir: &TempDir) -> PathBuf {
    let model = dir.path().join("three.mps");
    let out = tncs(&[
        "train",
        "--images",
        path_str(&fixture("train-images.idx")),
        "--labels",
        path_str(&fixture("train-labels.idx")),
        "--class",
        "3",
        "--downscale",
        "4",
        "--limit",
        "40",
        "--chi",
        "4",
        "--tau",
        "0.2",
        "--sweeps",
        "2",
        "--out",
        path_str(&model),
    ]);
    let text = stdout(&out);
    let nll: f64 = field(&text, "final_nll").parse().unwrap();
    assert!(nll.is_finite() && nll > 0.0);
    assert!(field(&text, "chi").parse::<usize>().unwrap() <= 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep"));
    model
}

fn test_data_args() -> Vec<String> {
    vec![
        "--images".into(),
        fixture("test-images.idx").display().to_string(),
        "--labels".into(),
        fixture("test-labels.idx").display().to_string(),
        "--class".into(),
        "3".into(),
    ]
}

fn with(base: &[&str], extra: &[String]) -> Vec<String> {
    base.iter()
        .map(|s| s.to_string())
        .chain(extra.iter().cloned())
        .collect()
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    tncs(&refs)
}

#[test]
fn train_encode_decode_bench_and_protocol() {
    let dir = TempDir::new().unwrap();
    let model = train_small(&dir);
    let model_s = path_str(&model);

    // encode / decode with both decoders
    let msg = dir.path().join("msg");
    let text = stdout(&run(&with(
        &[
            "encode",
            "--model",
            model_s,
            "--image-index",
            "0",
            "--strategy",
            "eo",
            "--nf",
            "10",
            "--out",
            path_str(&msg),
        ],
        &test_data_args(),
    )));
    assert_eq!(field(&text, "sent"), "10");
    for name in ["phi.mps", "plan.txt", "sent.txt", "meta.txt"] {
        assert!(msg.join(name).is_file(), "missing {name}");
    }
    for decoder in ["postselect", "oneshot"] {
        let pgm = dir.path().join(format!("{decoder}.pgm"));
        let text = stdout(&tncs(&[
            "decode",
            "--msg",
            path_str(&msg),
            "--decoder",
            decoder,
            "--seed",
            "3",
            "--out",
            path_str(&pgm),
        ]));
        assert_eq!(field(&text, "decoded"), "39");
        let img = tncs::data::read_pgm(&pgm).unwrap();
        assert_eq!((img.width(), img.height()), (7, 7));
    }

    // variance ordering needs the training set
    let vo = dir.path().join("vo");
    let out = run(&with(
        &[
            "encode",
            "--model",
            model_s,
            "--image-index",
            "1",
            "--strategy",
            "vo",
            "--nf",
            "5",
            "--out",
            path_str(&vo),
        ],
        &test_data_args(),
    ));
    assert_eq!(out.status.code(), Some(2));

    // benchmark
    let csv = dir.path().join("bench.csv");
    let text = stdout(&tncs(&[
        "bench",
        "--model",
        model_s,
        "--test-images",
        path_str(&fixture("test-images.idx")),
        "--test-labels",
        path_str(&fixture("test-labels.idx")),
        "--train-images",
        path_str(&fixture("train-images.idx")),
        "--train-labels",
        path_str(&fixture("train-labels.idx")),
        "--class",
        "3",
        "--limit",
        "5",
        "--strategies",
        "eo,vo,ro",
        "--nf-grid",
        "0:10:5",
        "--csv",
        path_str(&csv),
    ]));
    let written = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, written);
    let lines: Vec<&str> = written.lines().collect();
    assert_eq!(lines[0], tncs::bench::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 3 * 3);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 9);
        assert_eq!(cols[2], "postselect");
        assert_eq!(cols[3], "4");
    }

    // q-sparsity
    let profile = dir.path().join("profile.csv");
    let text = stdout(&tncs(&[
        "qsparsity",
        "--model",
        model_s,
        "--csv",
        path_str(&profile),
    ]));
    let log2: f64 = field(&text, "log2_qsparsity").parse().unwrap();
    assert!(log2.is_finite());
    assert_eq!(field(&text, "sites"), "49");
    let rows = std::fs::read_to_string(&profile).unwrap();
    assert_eq!(rows.lines().count(), 1 + 49);

    // encrypted exchange agrees with the plain one
    let text = stdout(&run(&with(
        &[
            "protocol-demo",
            "--model",
            model_s,
            "--image-index",
            "2",
            "--nf",
            "8",
            "--salt",
            "c0ffee",
        ],
        &test_data_args(),
    )));
    assert!(text.starts_with("salt=c0ffee\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("site=")).count(), 8);
    assert_eq!(field(&text, "identical"), "true");
    assert_eq!(field(&text, "psnr_encrypted"), field(&text, "psnr_plain"));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = TempDir::new().unwrap();
    let images = fixture("test-images.idx");
    let labels = fixture("test-labels.idx");

    // unparsable arguments
    assert_eq!(tncs(&["train"]).status.code(), Some(2));
    // bad thread count
    let out = Command::new(env!("CARGO_BIN_EXE_tncs"))
        .args(["qsparsity", "--model", "x", "--csv", "y"])
        .env("TNCS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // missing file
    let missing = dir.path().join("absent.mps");
    let csv = dir.path().join("q.csv");
    let out = tncs(&[
        "qsparsity",
        "--model",
        path_str(&missing),
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // corrupt model file
    let junk = dir.path().join("junk.mps");
    std::fs::write(&junk, b"not a model").unwrap();
    let out = tncs(&[
        "qsparsity",
        "--model",
        path_str(&junk),
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // labels file used as images
    let out = tncs(&[
        "train",
        "--images",
        path_str(&labels),
        "--labels",
        path_str(&labels),
        "--out",
        path_str(&dir.path().join("m.mps")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // a |1...1> model cannot produce a dark pixel
    let blank = dir.path().join("blank.mps");
    save_model(&Mps::product_state(&[QubitState::ONE; 49]), &blank).unwrap();
    let out = tncs(&[
        "encode",
        "--model",
        path_str(&blank),
        "--images",
        path_str(&images),
        "--labels",
        path_str(&labels),
        "--image-index",
        "0",
        "--strategy",
        "ro",
        "--nf",
        "49",
        "--out",
        path_str(&dir.path().join("msg")),
    ]);
    assert_eq!(out.status.code(), Some(5));

    // model geometry that no downscaling reaches
    let odd = dir.path().join("odd.mps");
    save_model(&Mps::product_state(&[QubitState::ZERO; 50]), &odd).unwrap();
    let out = tncs(&[
        "encode",
        "--model",
        path_str(&odd),
        "--images",
        path_str(&images),
        "--labels",
        path_str(&labels),
        "--image-index",
        "0",
        "--nf",
        "1",
        "--out",
        path_str(&dir.path().join("msg2")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
