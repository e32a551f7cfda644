use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vem::interchange::{FILES, NOISE_CEILING};
use vem::report::read_report;

fn vem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vem")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen-synth", "--out", s(dir), "--n-samples", "300"];
    args.extend_from_slice(extra);
    let out = vem(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    files.sort();
    files
}

fn train_stage1(data: &Path, out: &Path) {
    let r = vem(&["train", "--data", s(data), "--out", s(out), "--set", "epochs=2"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
}

#[test]
fn gen_synth_is_deterministic_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    gen(&a, &["--seed", "4"]);
    gen(&b, &["--seed", "4"]);
    gen(&c, &["--seed", "5"]);
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| v.into_iter().map(|(p, b)| (p.file_name().unwrap().to_owned(), b)).collect::<Vec<_>>();
    assert_eq!(strip(snapshot(&a)), strip(snapshot(&b)));
    assert_ne!(strip(snapshot(&a)), strip(snapshot(&c)));
    for name in FILES {
        assert!(a.join(name).exists(), "{name}");
    }
    let out = vem(&["validate-data", s(&a)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("300 samples"));
}

#[test]
fn zero_voxel_noise_gives_unit_ceilings() {
    let tmp = tempfile::tempdir().unwrap();
    for width in ["32", "64"] {
        let dir = tmp.path().join(width);
        gen(&dir, &["--noise-std-voxel", "0", "--value-width", width]);
        let bytes = fs::read(dir.join(NOISE_CEILING)).unwrap();
        let ones: Vec<u8> = match width {
            "32" => 1.0f32.to_le_bytes().repeat(64),
            _ => 1.0f64.to_le_bytes().repeat(64),
        };
        assert_eq!(bytes, ones);
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert_eq!(code(&vem(&[])), 2);
    assert_eq!(code(&vem(&["frobnicate"])), 2);
    assert_eq!(code(&vem(&["gen-synth", "--out", s(&data), "--bogus"])), 2);
    assert_eq!(code(&vem(&["gen-synth", "--out", s(&data), "--n-samples", "0"])), 2);
    assert_eq!(code(&vem(&["gen-synth", "--out", s(&data), "--value-width", "16"])), 2);
    gen(&data, &[]);
    let out = vem(&["train", "--stage", "2", "--data", s(&data), "--out", s(&tmp.path().join("c"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--from"));
    assert_eq!(code(&vem(&["train", "--stage", "3", "--data", s(&data), "--out", "x"])), 2);
    assert_eq!(code(&vem(&["train", "--data", s(&data), "--out", "x", "--set", "nope=1"])), 2);
    assert_eq!(code(&vem(&["grad-check", "--batch", "0"])), 2);
}

#[test]
fn runtime_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vem(&["validate-data", s(&tmp.path().join("missing"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("manifest.json"));
}

#[test]
fn train_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, &[]);
    let before = snapshot(&data);

    let c1 = tmp.path().join("s1");
    train_stage1(&data, &c1);
    assert!(c1.join("checkpoint.json").exists());
    let log = fs::read_to_string(tmp.path().join("s1.log")).unwrap();
    assert_eq!(log.lines().count(), 2);
    for line in log.lines() {
        assert_eq!(line.split(',').count(), 4);
    }

    let c2 = tmp.path().join("s2");
    let log2 = tmp.path().join("stage2.txt");
    let out = vem(&[
        "train", "--stage", "2", "--from", s(&c1), "--data", s(&data), "--out", s(&c2), "--log", s(&log2), "--set", "epochs=1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("validation m ="));
    assert_eq!(fs::read_to_string(&log2).unwrap().lines().count(), 1);

    let (r1, r2, rj) = (tmp.path().join("r1.csv"), tmp.path().join("r2.csv"), tmp.path().join("r.json"));
    let out = vem(&["eval", "--checkpoint", s(&c2), "--data", s(&data), "--split", "test", "--out", s(&r1)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&vem(&["eval", "--checkpoint", s(&c2), "--data", s(&data), "--split", "test", "--out", s(&r2)])), 0);
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());

    let printed: f64 = stdout(&out)
        .lines()
        .find_map(|l| l.strip_prefix("m = "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(printed, read_report(&r1).unwrap().overall_m);
    assert_eq!(code(&vem(&["eval", "--checkpoint", s(&c2), "--data", s(&data), "--split", "test", "--out", s(&rj)])), 0);
    assert_eq!(read_report(&rj).unwrap(), read_report(&r1).unwrap());

    assert_eq!(code(&vem(&["eval", "--checkpoint", s(&c2), "--data", s(&data), "--out", "r.txt"])), 2);
    assert_eq!(snapshot(&data), before);
}

#[test]
fn eval_names_mismatched_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, other) = (tmp.path().join("d"), tmp.path().join("o"));
    gen(&data, &[]);
    gen(&other, &["--n-vertices", "40"]);
    let c = tmp.path().join("c");
    train_stage1(&data, &c);
    let out = vem(&["eval", "--checkpoint", s(&c), "--data", s(&other), "--out", s(&tmp.path().join("r.csv"))]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("n_vertices 64") && err.contains("n_vertices 40"), "{err}");
}

#[test]
fn ablate_rows_and_medians() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen(&data, &[]);
    let c = tmp.path().join("c");
    train_stage1(&data, &c);
    let out_path = tmp.path().join("ab.csv");
    let out = vem(&[
        "ablate", "--data", s(&data), "--from", s(&c), "--lambdas", "1,0.1,1e-2,1e-3", "--seeds", "0,1", "--out", s(&out_path), "--set",
        "epochs=1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(&out_path).unwrap();
    assert!(reader.headers().unwrap().iter().eq(["kind", "lambda", "seed", "m"]));
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let runs: Vec<_> = rows.iter().filter(|r| &r[0] == "run").collect();
    let medians: Vec<_> = rows.iter().filter(|r| &r[0] == "median").collect();
    assert_eq!(runs.len(), 4 * 2);
    assert_eq!(medians.len(), 4);
    for m in medians {
        let lambda: f64 = m[1].parse().unwrap();
        let mut vals: Vec<f64> = runs
            .iter()
            .filter(|r| r[1].parse::<f64>().unwrap() == lambda)
            .map(|r| r[3].parse().unwrap())
            .collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(m[3].parse::<f64>().unwrap(), 0.5 * (vals[0] + vals[1]));
    }

    let single = tmp.path().join("one.csv");
    let out = vem(&[
        "ablate", "--data", s(&data), "--from", s(&c), "--lambdas", "1e-3", "--seeds", "7", "--out", s(&single), "--set", "epochs=1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&single).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("run,")).count(), 1);
}

#[test]
fn grad_check_passes_and_catches_corruption() {
    let out = vem(&["grad-check"]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("stage 1 head.projection.weight"));
    assert!(text.contains("stage 2 align.weight"));

    let out = vem(&["grad-check", "--corrupt-gradient", "align.weight"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("stage 2 align.weight"));

    assert_eq!(code(&vem(&["grad-check", "--corrupt-gradient", "no.such.tensor"])), 2);
    let out = vem(&["grad-check", "--batch", "1"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn grad_check_on_a_dataset_directory_with_one_config() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    gen(&data, &[]);
    let cfg = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk_stage2.conf");
    let out = vem(&["grad-check", "--config", s(&cfg), "--data", s(&data)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("stage 1"));
}
