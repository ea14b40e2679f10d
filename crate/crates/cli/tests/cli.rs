use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modesift::seqio::{write_sequence, SequenceFormat};
use modesift::synth::{burst_sequence, write_face_corpus, FaceCorpusSpec};

fn modesift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modesift"))
        .args(args)
        .env_remove("MODESIFT_THREADS")
        .output()
        .expect("binary runs")
}

fn modesift_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modesift"))
        .args(args)
        .env("MODESIFT_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn burst_file(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let path = dir.join(format!("{name}.msq"));
    write_sequence(&burst_sequence(10, 10, 30, 200.0, seed), &path, SequenceFormat::RawTensor).unwrap();
    path
}

fn small_corpus(dir: &Path) -> PathBuf {
    let spec = FaceCorpusSpec {
        n_subjects: 3,
        clips_per_subject: 3,
        rows: 20,
        cols: 20,
        min_frames: 20,
        max_frames: 24,
        ..Default::default()
    };
    write_face_corpus(&spec, dir).unwrap();
    dir.join("manifest.csv")
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn default_sweep_has_400_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let input = burst_file(tmp.path(), "clip", 1);
    let out_dir = tmp.path().join("sweep");
    let out = modesift(&["dmdsp-sweep", "--input", s(&input), "--output", s(&out_dir)]);
    assert_ok(&out);
    let text = String::from_utf8(read(&out_dir.join("sweep.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "gamma,nnz,percent_preserved,loss,performance_loss_pct");
    assert_eq!(lines.count(), 400);
    assert!(out_dir.join("run_config.json").exists());
}

#[test]
fn sampling_is_byte_identical_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let a = burst_file(tmp.path(), "a", 2);
    let b = burst_file(tmp.path(), "b", 3);
    for strategy in ["ss", "ra", "us"] {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "4"].iter().enumerate() {
            let dir = tmp.path().join(format!("{strategy}{run}"));
            let out = modesift_env(
                &[
                    "sample",
                    "--input",
                    s(&a),
                    s(&b),
                    "--output",
                    s(&dir),
                    "--strategy",
                    strategy,
                    "--percent",
                    "45",
                    "--seed",
                    "7",
                ],
                threads,
            );
            assert_ok(&out);
            outputs.push(["a.msq", "a.json", "b.msq", "b.json"].map(|f| read(&dir.join(f))));
        }
        assert_eq!(outputs[0], outputs[1], "strategy {strategy}");
    }
}

#[test]
fn evaluate_reports_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&tmp.path().join("corpus"));
    let mut reports = Vec::new();
    for (i, threads) in ["1", "4", "2"].iter().enumerate() {
        let dir = tmp.path().join(format!("eval{i}"));
        let out = modesift_env(
            &[
                "evaluate",
                "--manifest",
                s(&manifest),
                "--strategy",
                "ss",
                "--normalize",
                "--output",
                s(&dir),
            ],
            threads,
        );
        assert_ok(&out);
        reports.push((read(&dir.join("report.json")), read(&dir.join("report.md"))));
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn imported_predictions_rescore() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&tmp.path().join("corpus"));
    let first = tmp.path().join("first");
    assert_ok(&modesift(&["evaluate", "--manifest", s(&manifest), "--output", s(&first)]));
    let second = tmp.path().join("second");
    let preds = first.join("predictions.csv");
    assert_ok(&modesift(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--classifier",
        "import",
        "--predictions",
        s(&preds),
        "--output",
        s(&second),
    ]));
    let a: serde_json::Value = serde_json::from_slice(&read(&first.join("report.json"))).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&read(&second.join("report.json"))).unwrap();
    assert_eq!(a["pooled"], b["pooled"]);
}

#[test]
fn config_file_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let input = burst_file(tmp.path(), "clip", 4);
    let first = tmp.path().join("first");
    assert_ok(&modesift(&[
        "lbptop",
        "--input",
        s(&input),
        "--blocks",
        "3",
        "--radii",
        "1,2,2",
        "--normalize",
        "--output",
        s(&first),
    ]));
    let config = first.join("run_config.json");
    let second = tmp.path().join("second");
    assert_ok(&modesift(&["lbptop", "--config", s(&config), "--output", s(&second)]));
    assert_eq!(read(&first.join("features.csv")), read(&second.join("features.csv")));

    let mut a: serde_json::Value = serde_json::from_slice(&read(&config)).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&read(&second.join("run_config.json"))).unwrap();
    assert_eq!(a["lbp"]["radii"], serde_json::json!([1, 2, 2]));
    a["output"] = b["output"].clone();
    assert_eq!(a, b);
}

#[test]
fn stdout_when_no_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let a = burst_file(tmp.path(), "a", 5);
    let b = burst_file(tmp.path(), "b", 6);
    let out = modesift(&["spectrum", "--input", s(&a), s(&b)]);
    assert_ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# energy is the raw sum"));
    assert_eq!(text.lines().nth(1).unwrap(), "bin_lo_hz,bin_hi_hz,energy");
    assert_eq!(text.lines().count(), 2 + 100);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = burst_file(tmp.path(), "clip", 8);

    let unknown = modesift(&["sample", "--input", s(&input), "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("--bogus"));

    let missing = modesift(&["dmd"]);
    assert_eq!(missing.status.code(), Some(2));
    let err = String::from_utf8_lossy(&missing.stderr);
    assert!(err.contains("--input") && err.contains("Usage: modesift dmd"), "{err}");

    let no_output = modesift(&["sample", "--input", s(&input)]);
    assert_eq!(no_output.status.code(), Some(2));

    let absent = modesift(&["dmd", "--input", s(&tmp.path().join("absent.msq"))]);
    assert_eq!(absent.status.code(), Some(1));

    let short = modesift(&["lbptop", "--input", s(&input), "--radii", "1,1,15"]);
    assert_eq!(short.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&short.stderr).contains("LBP-TOP needs at least 31"));

    assert_eq!(modesift(&["--help"]).status.code(), Some(0));
}

#[test]
fn inputs_are_not_modified() {
    let tmp = tempfile::tempdir().unwrap();
    let input = burst_file(tmp.path(), "clip", 9);
    let before = read(&input);
    let out_dir = tmp.path().join("out");
    for args in [
        vec!["ingest", "--resize", "8,8"],
        vec!["tim", "--frames", "12"],
        vec!["dmd"],
        vec!["temporal", "--profile", "uniform"],
        vec!["temporal", "--profile", "sparse"],
        vec!["gamma-curve"],
    ] {
        let mut full = args.clone();
        full.extend(["--input", s(&input), "--output", s(&out_dir)]);
        assert_ok(&modesift(&full));
    }
    assert_eq!(read(&input), before);
    let tim_out = modesift::seqio::load_sequence(&out_dir.join("clip.msq"), SequenceFormat::RawTensor).unwrap();
    assert_eq!(tim_out.n_frames(), 12);
    assert!(out_dir.join("temporal.csv").exists() && out_dir.join("dmd.json").exists());
}
