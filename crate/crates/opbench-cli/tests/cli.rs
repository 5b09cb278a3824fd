//! End-to-end subcommand tests against the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn opbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opbench"))
        .current_dir(dir)
        .args(args)
        .env_remove("OPBENCH_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) {
    let base = format!(
        "seed = 7\n\
         [data]\n\
         problem = advection\n\
         points = 40\n\
         n = 24\n\
         path = data.opbl\n\
         [model]\n\
         arch = pca_net\n\
         size = 8\n\
         d_u = 8\n\
         d_v = 8\n\
         path = model.opbm\n\
         [train]\n\
         epochs = 4\n\
         batch = 8\n\
         n = 16\n\
         {extra}"
    );
    std::fs::write(dir.join("opbench.cfg"), base).unwrap();
}

#[test]
fn gen_data_is_deterministic_and_rerunnable() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = opbench(dir.path(), &["gen-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.path().join("data.opbl")).unwrap();
    let out = opbench(dir.path(), &["gen-data"]);
    assert!(out.status.success());
    let second = std::fs::read(dir.path().join("data.opbl")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn seed_env_var_changes_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    assert!(opbench(dir.path(), &["gen-data"]).status.success());
    let base = std::fs::read(dir.path().join("data.opbl")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_opbench"))
        .current_dir(dir.path())
        .args(["gen-data"])
        .env("OPBENCH_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    let other = std::fs::read(dir.path().join("data.opbl")).unwrap();
    assert_ne!(base, other);
}

#[test]
fn train_then_evaluate_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    assert!(opbench(dir.path(), &["gen-data"]).status.success());
    let out = opbench(dir.path(), &["train"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("model.opbm").exists());
    let out = opbench(dir.path(), &["evaluate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("train error"), "{text}");
    assert!(text.contains("test error"), "{text}");
    assert!(text.contains("worst case index"), "{text}");
}

#[test]
fn sweep_and_report_produce_csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "[sweep]\narchs = pca_net\nsizes = 8\nn_list = 8, 16\nseeds = 0, 1\nout_dir = results\ndump_cases = false\n",
    );
    assert!(opbench(dir.path(), &["gen-data"]).status.success());
    let out = opbench(dir.path(), &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results/results.csv")).unwrap();
    assert!(csv.starts_with("problem,arch,size,N,seed,params,flops,"));
    // 4 per-seed rows + 2 mean rows + header
    assert_eq!(csv.lines().count(), 7);
    let out = opbench(dir.path(), &["report"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains(",mean,"), "{text}");
}

#[test]
fn misspelled_config_key_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("opbench.cfg"),
        "[data]\nproblem = advection\npionts = 40\n",
    )
    .unwrap();
    let out = opbench(dir.path(), &["gen-data"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("pionts"), "{err}");
}

#[test]
fn structural_problem_directs_to_import() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("opbench.cfg"),
        "[data]\nproblem = structural_import\nn = 4\npath = data.opbl\n",
    )
    .unwrap();
    let out = opbench(dir.path(), &["gen-data"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("import"), "{err}");
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = opbench(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
}
