use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const IDENTITY: &str = "FKBX 1\nlayers 1\ninput 2\ndense 2 linear 0\nb 0 0\nW 1 0\nW 0 1\n";

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn fkb(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkb"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn assert_error(out: &Output, code: i32) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", stderr(out));
    let err = stderr(out);
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(out.stdout.is_empty());
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn validate_identity_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("id.fkbx");
    fs::write(&model, IDENTITY).unwrap();
    let out = fkb(&[&"validate", &model]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "OK 1 2 2\n");

    let truncated = dir.path().join("cut.fkbx");
    fs::write(&truncated, &IDENTITY[..IDENTITY.len() - 8]).unwrap();
    let out = fkb(&[&"validate", &truncated]);
    assert_error(&out, 1);
    assert!(stderr(&out).contains("line"));

    assert_error(&fkb(&[&"validate", &dir.path().join("missing.fkbx")]), 2);
}

#[test]
fn predict_identity_round_trips_rows() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("id.fkbx");
    fs::write(&model, IDENTITY).unwrap();
    let input = dir.path().join("in.csv");
    fs::write(&input, "a,b\r\n1,2\r\n3,4\r\n").unwrap();
    let first = dir.path().join("out1.csv");
    let out = fkb(&[&"predict", &model, &"--input", &input, &"--output", &first]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(read_csv(&first), [[1.0, 2.0], [3.0, 4.0]]);

    let second = dir.path().join("out2.csv");
    assert!(fkb(&[&"predict", &model, &"--input", &first, &"--output", &second]).status.success());
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "1,2,3\n").unwrap();
    assert_error(&fkb(&[&"predict", &model, &"--input", &wide, &"--output", &second]), 1);
    assert_error(&fkb(&[&"predict", &model, &"--input", &dir.path().join("none.csv"), &"--output", &second]), 2);
}

#[test]
fn train_zero_rate_leaves_model_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let model = core_fixture("xor_init.fkbx");
    let out_model = dir.path().join("out.fkbx");
    let out = fkb(&[
        &"train", &model, &"--data", &core_fixture("xor.csv"), &"--lr", &"0", &"--epochs", &"1", &"--out", &out_model,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read(&model).unwrap(), fs::read(&out_model).unwrap());
    let log = stdout(&out);
    assert!(log.starts_with("epoch 1 loss "), "{log}");
}

#[test]
fn train_linear_fixture_converges() {
    let dir = tempfile::tempdir().unwrap();
    let trained = dir.path().join("trained.fkbx");
    let out = fkb(&[
        &"train",
        &core_fixture("linear_init.fkbx"),
        &"--data",
        &core_fixture("linear.csv"),
        &"--lr",
        &"0.05",
        &"--epochs",
        &"200",
        &"--batch",
        &"1",
        &"--loss",
        &"mse",
        &"--seed",
        &"0",
        &"--out",
        &trained,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 200);
    let last: f64 = lines[199].rsplit(' ').next().unwrap().parse().unwrap();
    assert!(last < 1e-4, "{last}");

    // the trained model should reproduce y = 2x + 1
    let input = dir.path().join("x.csv");
    fs::write(&input, "0.5\n-1\n").unwrap();
    let preds = dir.path().join("y.csv");
    assert!(fkb(&[&"predict", &trained, &"--input", &input, &"--output", &preds]).status.success());
    for (row, expected) in read_csv(&preds).iter().zip([2.0, -1.0]) {
        assert!((row[0] - expected).abs() < 1e-2);
    }
}

#[test]
fn train_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out_model = dir.path().join("out.fkbx");
    let data = core_fixture("xor.csv");
    let model = core_fixture("xor_init.fkbx");
    assert_error(&fkb(&[&"train", &model, &"--data", &data, &"--loss", &"crossentropy", &"--out", &out_model]), 1);
    assert_error(&fkb(&[&"train", &model, &"--data", &data, &"--loss", &"huber", &"--out", &out_model]), 1);
    assert!(!out_model.exists());
}

fn ensemble_dir(n: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..n {
        fs::write(dir.path().join(format!("m{i}.fkbx")), IDENTITY).unwrap();
    }
    dir
}

#[test]
fn ensemble_of_identities() {
    let models = ensemble_dir(3);
    let work = tempfile::tempdir().unwrap();
    let input = work.path().join("in.csv");
    fs::write(&input, "1,2\n3,4\n-0.5,8\n").unwrap();
    let run = |name: &str, noise: &str, seed: &str| {
        let path = work.path().join(name);
        let out = fkb(&[&"ensemble", &models.path(), &"--input", &input, &"--output", &path, &"--noise", &noise, &"--seed", &seed]);
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read(path).unwrap()
    };
    let exact = run("exact.csv", "0", "0");
    assert_eq!(read_csv(&work.path().join("exact.csv")), [[1.0, 2.0], [3.0, 4.0], [-0.5, 8.0]]);
    assert!(!exact.is_empty());

    let a = run("a.csv", "0.1", "5");
    let b = run("b.csv", "0.1", "5");
    let c = run("c.csv", "0.1", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn ensemble_errors() {
    let empty = tempfile::tempdir().unwrap();
    let input = empty.path().join("in.csv");
    fs::write(&input, "1,2\n").unwrap();
    let output = empty.path().join("out.csv");
    assert_error(&fkb(&[&"ensemble", &empty.path(), &"--input", &input, &"--output", &output]), 1);
    let missing = empty.path().join("nope");
    assert_error(&fkb(&[&"ensemble", &missing, &"--input", &input, &"--output", &output]), 2);
}

#[test]
fn summary_lists_layers() {
    let out = fkb(&[&"summary", &core_fixture("xor_init.fkbx")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("tanh") && text.contains("sigmoid"), "{text}");
    assert!(text.contains("parameters 33"), "{text}");
}
