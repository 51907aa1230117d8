use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn eop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eop")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn spearman_on_ranking_fixture() {
    let out = eop(&[
        "spearman",
        path(&fixture("ranking_true.csv")),
        path(&fixture("ranking_1.csv")),
        path(&fixture("ranking_2.csv")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "0.76\n-0.02\n");
}

#[test]
fn table_prints_bc_row_with_dashes() {
    let out = eop(&["table", path(&fixture("hopper_bc_runs.csv")), "--sampling", "without-replacement"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("algorithm B=1 B=2 B=3 B=4 B=8 B=15 B=30 final N\n"), "{text}");
    assert!(text.contains("\nBC 1794 2057 2179 - - - - 2179 3\n"), "{text}");
}

#[test]
fn table_custom_budgets_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("nested/table.txt");
    let out = eop(&[
        "table",
        path(&fixture("hopper_bc_runs.csv")),
        "--budgets",
        "1,3,5",
        "--out",
        path(&out_file),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&out_file).unwrap(), stdout(&out));
    assert!(stdout(&out).contains("\nBC 1794 2055 - 2179 3\n"));
}

#[test]
fn malformed_runs_fail_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let header = "algorithm,environment,hyperparam_id,seed,value\n";
    let nan = write(dir.path(), "nan.csv", &format!("{header}BC,e,h0,0,1\nBC,e,h1,0,NaN\n"));
    let out = eop(&["table", path(&nan)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr(&out), "error: non-finite value at line 3\n");

    let dup = write(dir.path(), "dup.csv", &format!("{header}BC,e,h0,0,1\nBC,e,h1,0,2\nBC,e,h0,0,3\n"));
    let err = stderr(&eop(&["curve", path(&dup), "--out-dir", path(dir.path())]));
    assert!(err.starts_with("error: line 4: duplicate"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let missing = write(dir.path(), "cols.csv", "algorithm,environment,value\nBC,e,1\n");
    let err = stderr(&eop(&["table", path(&missing)]));
    assert!(err.contains("line 1: header"), "{err}");
}

#[test]
fn empty_scores_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let runs = write(
        dir.path(),
        "runs.csv",
        "algorithm,environment,hyperparam_id,seed,value\nBC,e,h0,0,1\nBC,e,h1,0,2\n",
    );
    let scores = write(dir.path(), "scores.csv", "round,policy_id,method,score,direction\n");
    let out = eop(&["regret", "--runs", path(&runs), "--scores", path(&scores), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr(&out), "error: no rows\n");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = eop(&["table", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr(&out).lines().count(), 1);
    assert!(stderr(&out).contains("--frobnicate"));
}

#[test]
fn best_behavioral_needs_reference() {
    let out = eop(&["table", path(&fixture("hopper_bc_runs.csv")), "--metric", "best-behavioral"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--v-best"));
    let out = eop(&[
        "table",
        path(&fixture("hopper_bc_runs.csv")),
        "--metric",
        "best-behavioral",
        "--v-best",
        "-5",
    ]);
    assert!(stderr(&out).contains("supply offset"), "{}", stderr(&out));
    let out = eop(&[
        "table",
        path(&fixture("hopper_bc_runs.csv")),
        "--metric",
        "best-behavioral",
        "--v-best",
        "2179",
        "--budgets",
        "3",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\nBC 0 0 3\n"), "{}", stdout(&out));
}

#[test]
fn report_config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("hopper_bc_runs.csv"), dir.path().join("runs.csv")).unwrap();
    let cfg = write(dir.path(), "report.cfg", "# report\nruns = runs.csv\nout_dir = curves\nbudget_max = 5\n");
    let out = eop(&["--config", path(&cfg), "curve"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let curve = fs::read_to_string(dir.path().join("curves/Hopper-v3-medium-1000__BC.csv")).unwrap();
    assert_eq!(curve.lines().count(), 6);
    assert!(curve.starts_with("budget,mean,std,n\n1,1794,"));

    let out = eop(&["--config", path(&cfg), "--budget-max", "2", "curve"]);
    assert!(out.status.success());
    let curve = fs::read_to_string(dir.path().join("curves/Hopper-v3-medium-1000__BC.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);

    let bad = write(dir.path(), "bad.cfg", "runs = runs.csv\ncolour = blue\n");
    let err = stderr(&eop(&["--config", path(&bad), "curve"]));
    assert!(err.contains("line 2: unknown report key `colour`"), "{err}");
}

#[test]
fn simulate_curve_plot_regret_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = eop(&["simulate", path(&fixture("pipeline_small.cfg")), "--out-dir", path(&sim)]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["runs.csv", "scores.csv", "hyperparams.csv"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let runs = fs::read_to_string(sim.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 6 * 2);

    let curves = dir.path().join("curves");
    let out = eop(&["curve", path(&sim.join("runs.csv")), "--out-dir", path(&curves), "--metric", "min-max"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let files: Vec<String> = stdout(&out).lines().map(str::to_string).collect();
    assert_eq!(files.len(), 2);

    let fig = dir.path().join("fig.svg");
    let mut args = vec!["plot", "--out", path(&fig)];
    args.extend(files.iter().map(String::as_str));
    let out = eop(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = fs::read_to_string(&fig).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">BC<") && svg.contains(">ConservativeQ<"));

    let regret = dir.path().join("regret");
    let out = eop(&[
        "regret",
        "--runs",
        path(&sim.join("runs.csv")),
        "--scores",
        path(&sim.join("scores.csv")),
        "--out-dir",
        path(&regret),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for s in ["uniform", "fqe", "td_error", "action_difference"] {
        let text = fs::read_to_string(regret.join(format!("regret_{s}.csv"))).unwrap();
        let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(last[0], 12.0, "{s}");
        if s == "uniform" {
            assert!(last[1] > 0.99 && last[1] < 1.0, "{s}: {last:?}");
        } else {
            assert_eq!(last[1], 1.0, "{s}");
        }
    }
}

#[test]
fn regret_strategies_and_uniform_modes() {
    let dir = tempfile::tempdir().unwrap();
    let runs = write(
        dir.path(),
        "runs.csv",
        "algorithm,environment,hyperparam_id,seed,value\nA,e,h0,0,0\nA,e,h1,0,1\nA,e,h2,0,2\nA,e,h3,0,3\n",
    );
    let scores = write(
        dir.path(),
        "scores.csv",
        "round,policy_id,method,score,direction\n\
         0,A:h0,fqe,3,higher\n0,A:h1,fqe,2,higher\n0,A:h2,fqe,1,higher\n0,A:h3,fqe,0,higher\n",
    );
    let base = ["regret", "--runs", path(&runs), "--scores", path(&scores), "--out-dir", path(dir.path())];
    let out = eop(&[&base[..], &["--strategies", "fqe,uniform"]].concat());
    assert!(out.status.success(), "{}", stderr(&out));
    // worst-first ranking over {0,1,2,3}
    let fqe = fs::read_to_string(dir.path().join("regret_fqe.csv")).unwrap();
    let means: Vec<f64> = fqe.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    assert!(means.iter().zip(want).all(|(m, w)| (m - w).abs() < 1e-12), "{means:?}");
    let uniform = fs::read_to_string(dir.path().join("regret_uniform.csv")).unwrap();
    assert!(uniform.lines().nth(1).unwrap().starts_with("1,0.5,"));

    let out = eop(&[&base[..], &["--strategies", "uniform", "--uniform-sampling", "without-replacement", "--rounds", "2000"]].concat());
    assert!(out.status.success(), "{}", stderr(&out));
    let uniform = fs::read_to_string(dir.path().join("regret_uniform.csv")).unwrap();
    assert!(uniform.lines().last().unwrap().starts_with("4,1,0,"), "{uniform}");

    let out = eop(&[&base[..], &["--strategies", "oracle"]].concat());
    assert!(stderr(&out).contains("unknown strategy `oracle`"));
}

#[test]
fn import_neorl_maps_columns() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        dir.path(),
        "hopper.csv",
        "algo,hp,seed,return,notes\nbc,0,0,1390.5,x\nbc,1,0,1813,y\ncql,0,1,1773,z\n",
    );
    let out_file = dir.path().join("runs.csv");
    let out = eop(&[
        "import-neorl",
        path(&src),
        "--out",
        path(&out_file),
        "--environment",
        "Hopper-v3",
        "--algorithm-column",
        "algo",
        "--hyperparam-column",
        "hp",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(&out_file).unwrap(),
        "algorithm,environment,hyperparam_id,seed,value\n\
         bc,Hopper-v3,0,0,1390.5\nbc,Hopper-v3,1,0,1813\ncql,Hopper-v3,0,1,1773\n"
    );

    let out = eop(&["import-neorl", path(&src), "--out", path(&out_file), "--environment", "H"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing column `algorithm`"), "{}", stderr(&out));
}

#[test]
fn plot_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("c");
    assert!(eop(&["curve", path(&fixture("hopper_bc_runs.csv")), "--out-dir", path(&curves), "--budget-max", "10"])
        .status
        .success());
    let curve = curves.join("Hopper-v3-medium-1000__BC.csv");
    let a = dir.path().join("a.svg");
    let b = dir.path().join("b.svg");
    for out in [&a, &b] {
        assert!(eop(&["plot", path(&curve), "--out", path(out), "--title", "Hopper"]).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
