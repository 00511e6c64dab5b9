use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_weno-decmdp"));
    c.env_remove("WENO_DECMDP_OUT");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).expect("manifest exists")
}

fn tiny_train(seed: &str, episodes: &str, out: &Path) -> Output {
    run(
        &[
            "train", "--preset", "desk", "--n", "16", "--steps", "5", "--dt", "1e-3", "--ics", "sod",
            "--episodes", episodes, "--seed", seed, "--progress", "0",
        ],
        out,
    )
}

#[test]
fn solve_writes_snapshots_and_a_finished_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--ic", "sod", "--n", "32", "--steps", "20", "--snapshot-every", "10"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("solve-sod-n32");
    for step in [0, 10, 20] {
        let csv = std::fs::read_to_string(dir.join(format!("solve-sod-n32_t{step}.csv"))).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "x,rho,rho_u,rho_E");
        assert_eq!(csv.lines().count(), 33);
        assert!(dir.join(format!("solve-sod-n32_t{step}.svg")).exists());
    }
    let m = manifest(&dir);
    assert!(m.contains("manifest.status = ok"));
    assert!(m.contains("solve-sod-n32_t20.csv"));
    assert!(m.contains("solve.n = 32"));
}

#[test]
fn zero_steps_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--ic", "sod", "--steps", "0"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_names_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["solve", "--ic", "no-such-ic"], tmp.path())), 2);
    assert_eq!(code(&run(&["train", "--reward", "nope", "--episodes", "1"], tmp.path())), 2);
    assert_eq!(code(&run(&["train", "--preset", "huge"], tmp.path())), 2);
    assert_eq!(code(&run(&["eval"], tmp.path())), 2);
}

#[test]
fn blow_up_exits_3_after_the_manifest_was_written() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--ic", "sod", "--n", "64", "--dt", "0.5", "--steps", "50"], tmp.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("solve-sod-n64");
    let m = manifest(&dir);
    assert!(m.contains("manifest.status = failed"));
    assert!(m.contains("solve.dt = 0.5"));
    assert!(dir.join("solve-sod-n64_t0.csv").exists());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["solve", "--ic", "sod", "--n", "16", "--steps", "2"])
        .env("WENO_DECMDP_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("solve-sod-n16/manifest.txt").exists());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("run.conf");
    std::fs::write(&conf, "solve.n = 24\nsolve.steps = 3\nsolve.ic = lax\n").unwrap();
    let o = run(&["solve", "--config", conf.to_str().unwrap(), "--n", "20"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&tmp.path().join("solve-lax-n20"));
    assert!(m.contains("solve.n = 20"));
    assert!(m.contains("solve.steps = 3"));
}

#[test]
fn manifest_replays_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run(&["solve", "--ic", "sod2", "--n", "16", "--steps", "7"], &a)), 0);
    let m = a.join("solve-sod2-n16/manifest.txt");
    assert_eq!(code(&run(&["solve", "--config", m.to_str().unwrap()], &b)), 0);
    let name = "solve-sod2-n16/solve-sod2-n16_t7.csv";
    assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
}

#[test]
fn training_is_reproducible_and_prefix_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, eps) in [(&a, "4"), (&b, "4"), (&c, "8")] {
        let o = tiny_train("7", eps, dir);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let log = |d: &Path| std::fs::read_to_string(d.join("train-rl-weno-s7/train_log.csv")).unwrap();
    let (la, lb, lc) = (log(&a), log(&b), log(&c));
    assert_eq!(la.lines().next().unwrap(), "episode,return,grad_norm,clipped,diverged");
    assert_eq!(la, lb);
    assert_eq!(la.lines().count(), 5);
    assert_eq!(lc.lines().take(5).collect::<Vec<_>>(), la.lines().collect::<Vec<_>>());
    let ck = |d: &Path| std::fs::read(d.join("train-rl-weno-s7/checkpoint.txt")).unwrap();
    assert_eq!(ck(&a), ck(&b));
    assert!(a.join("train-rl-weno-s7/reward_curve.svg").exists());
}

#[test]
fn eval_reads_a_trained_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tiny_train("1", "2", tmp.path())), 0);
    let ck = tmp.path().join("train-rl-weno-s1/checkpoint.txt");
    let o = run(&["eval", "--checkpoint", ck.to_str().unwrap(), "--ics", "sod", "--ns", "32"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("eval-euler-train-rl-weno-s1");
    let report = std::fs::read_to_string(dir.join("eval_report.txt")).unwrap();
    assert!(report.contains("sod"));
    let table = std::fs::read_to_string(dir.join("error_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn eval_of_weno_against_itself_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["eval", "--policy", "weno", "--ics", "sod", "--ns", "32"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("eval-euler-weno");
    let table = std::fs::read_to_string(dir.join("error_table.csv")).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], row[2], "{table}");
    let report = std::fs::read_to_string(dir.join("eval_report.txt")).unwrap();
    assert!(report.lines().any(|l| l == "sod.n32.l2_agent_weno = 0e0"), "{report}");
}

#[test]
fn verify_runs_a_single_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--only", "simplex"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.contains("PASS simplex"), "{stdout}");
    assert_eq!(code(&run(&["verify", "--only", "bogus"], tmp.path())), 2);
}
