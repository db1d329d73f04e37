mod common;

use std::path::Path;
use std::process::{Command, Output};

use pooldrop::experiment::read_metrics_csv;
use pooldrop::network::Checkpoint;

const ARCH: &str = "1x28x28-4C5-2P2-6C5-2P2-10N";

fn pooldrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pooldrop")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy_data() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_toy_mnist(dir.path(), 200, 60);
    dir
}

fn train_csv(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--arch",
        ARCH,
        "--epochs",
        "3",
        "--data-dir",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "timing=false",
        "--set",
        "learning_rate=0.05",
    ];
    args.extend_from_slice(extra);
    pooldrop(&args)
}

#[test]
fn count_prints_table_and_ratio() {
    let o = pooldrop(&["count"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("t,b_maxdrop,b_stochastic\n1,2.000000000000,1.000000000000\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 64);
    assert!(text.contains("regions = 24576"));
    assert!(text.contains("(log10 2381.66"), "{text}");
}

#[test]
fn count_rejects_overlapping_windows() {
    let o = pooldrop(&["count", "--window", "3", "--stride", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: stride 2 differs from window 3"));
    let o = pooldrop(&["count", "--r", "3", "--s", "5", "--t", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let o = pooldrop(&["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn train_is_deterministic_and_round_trips() {
    let data = toy_data();
    let out = tempfile::tempdir().unwrap();
    let (a, b) = (out.path().join("a.csv"), out.path().join("b.csv"));
    for path in [&a, &b] {
        let o = train_csv(data.path(), path, &["--test-modes", "max,prob_weighted"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("epoch,learning_rate,train_loss,train_error,test_error_max,test_error_prob_weighted,wall_seconds\n"));
    let rows = read_metrics_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.wall_seconds == 0.0));
    assert!(rows[2].train_loss < rows[0].train_loss, "{rows:?}");
}

#[test]
fn extra_test_modes_do_not_change_training() {
    let data = toy_data();
    let out = tempfile::tempdir().unwrap();
    let (one, four) = (out.path().join("one.csv"), out.path().join("four.csv"));
    let drop = ["--set", "train_pooling=max_dropout", "--set", "pool_retain=0.5"];
    let mut args = vec!["--test-modes", "max"];
    args.extend_from_slice(&drop);
    assert!(train_csv(data.path(), &one, &args).status.success());
    let mut args = vec!["--test-modes", "max,scaled_max,prob_weighted,stochastic_weighted"];
    args.extend_from_slice(&drop);
    assert!(train_csv(data.path(), &four, &args).status.success());
    let one = read_metrics_csv(std::fs::File::open(one).unwrap()).unwrap();
    let four = read_metrics_csv(std::fs::File::open(four).unwrap()).unwrap();
    for (x, y) in one.iter().zip(&four) {
        assert_eq!((x.train_loss, x.train_error), (y.train_loss, y.train_error));
        assert_eq!(x.test_errors[0], y.test_errors[0]);
    }
}

#[test]
fn eval_every_leaves_gaps() {
    let data = toy_data();
    let out = tempfile::tempdir().unwrap();
    let path = out.path().join("m.csv");
    let o = train_csv(data.path(), &path, &["--set", "eval_every=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_metrics_csv(std::fs::File::open(&path).unwrap()).unwrap();
    let evaluated: Vec<bool> = rows.iter().map(|r| r.test_errors[0].1.is_some()).collect();
    // epoch 2 by the interval, epoch 3 because it is the last
    assert_eq!(evaluated, [false, true, true]);
}

#[test]
fn checkpoint_is_written() {
    let data = toy_data();
    let out = tempfile::tempdir().unwrap();
    let ck = out.path().join("net.pdck");
    let o = train_csv(
        data.path(),
        &out.path().join("m.csv"),
        &["--checkpoint", ck.to_str().unwrap(), "--seed", "4"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let loaded = Checkpoint::load(&ck).unwrap();
    assert_eq!(loaded.arch.to_string(), ARCH);
    assert_eq!((loaded.seed, loaded.epoch), (4, 3));
    assert_eq!(loaded.params.len(), loaded.arch.param_count());
}

#[test]
fn sweep_with_full_retention_matches_across_modes() {
    let data = toy_data();
    let out = tempfile::tempdir().unwrap();
    let path = out.path().join("sweep.csv");
    let o = pooldrop(&[
        "sweep",
        "--arch",
        ARCH,
        "--epochs",
        "2",
        "--data-dir",
        data.path().to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
        "--retain-ps",
        "1.0,0.5",
        "--stochastic",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pool_retain,train_pooling,test_pooling,final_test_error");
    assert_eq!(lines.len(), 1 + 3 + 3 + 1);
    let errs: Vec<&str> = lines[1..4].iter().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert!(lines[1].starts_with("1,max_dropout,max,"));
    assert!(errs.iter().all(|e| *e == errs[0]), "{text}");
    assert!(lines[7].starts_with(",stochastic,stochastic_weighted,"));
}

#[test]
fn validation_errors_exit_before_training() {
    let data = toy_data();
    let dir = data.path().to_str().unwrap();
    let o = pooldrop(&["train", "--arch", "1x28x28-6Q5-10N", "--data-dir", dir]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("position 9"), "{}", stderr(&o));

    let o = pooldrop(&["train", "--data-dir", dir, "--set", "momentum=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("momentum"));

    let o = pooldrop(&["train", "--data-dir", dir, "--set", "colour=blue"]);
    assert_eq!(o.status.code(), Some(2));

    let o = pooldrop(&["train", "--arch", "1x28x28-6C5-7N", "--data-dir", dir]);
    assert_eq!(o.status.code(), Some(2), "7 classes cannot fit MNIST");

    let o = pooldrop(&["train", "--data-dir", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent"));

    let o = pooldrop(&["train", "--data-dir", dir, "--subset", "100000"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn config_file_and_overrides() {
    let data = toy_data();
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "# toy run\narch = {ARCH}\ndata_dir = {}\nepochs = 1\ntiming = false\ntest_modes = scaled_max\n",
            data.path().display()
        ),
    )
    .unwrap();
    let o = pooldrop(&["train", "--config", conf.to_str().unwrap(), "--epochs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_metrics_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(stdout(&o).starts_with("epoch,learning_rate,train_loss,train_error,test_error_scaled_max,"));
}

#[test]
fn inspect_data_reports_counts() {
    let data = toy_data();
    let o = pooldrop(&["inspect-data", "--data-dir", data.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("train: 200 examples of [1, 28, 28], 10 classes"), "{text}");
    assert!(text.contains("test: 60 examples"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let cfg = pooldrop::experiment::ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
