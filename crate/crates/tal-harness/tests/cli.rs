//! End-to-end tests of the harness binary: exit codes, validation
//! diagnostics, output layout, idempotent reruns, and failure reports.

use std::path::Path;
use std::process::{Command, Output};

fn harness(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tal-harness"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn version_and_list_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let v = harness(&["version"], dir.path());
    assert_eq!(code(&v), 0);
    assert!(stdout(&v).starts_with("tal-harness "));

    let l = harness(&["list"], dir.path());
    assert_eq!(code(&l), 0);
    let text = stdout(&l);
    assert!(text.contains("fig2-cartpole-q2"));
    assert!(text.contains("fig5-actiongap"));
}

#[test]
fn embedded_specs_validate() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig2-cartpole-q2", "fig5-actiongap"] {
        let out = harness(&["validate", name], dir.path());
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert!(stdout(&out).contains("is valid"));
    }
}

#[test]
fn unknown_spec_and_bad_spec_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = harness(&["validate", "no-such-spec"], dir.path());
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("tal-harness list"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "name = \"x\"\nkind = \"cartpole-training\"\nseeds = [0]\nwhoops = 1\n",
    )
    .unwrap();
    let out = harness(&["validate", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("whoops"), "{}", stderr(&out));

    let empty_seeds = dir.path().join("empty-seeds.toml");
    std::fs::write(
        &empty_seeds,
        "name = \"x\"\nkind = \"cartpole-training\"\nseeds = []\n\n\
         [[schemes]]\nlabel = \"tal\"\nvariant = \"tal\"\nq = 2.0\nalpha = 0.03\n",
    )
    .unwrap();
    let out = harness(&["validate", empty_seeds.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("seeds"), "{}", stderr(&out));

    let bad_family = dir.path().join("bad-family.toml");
    std::fs::write(
        &bad_family,
        "name = \"x\"\nkind = \"cartpole-training\"\nseeds = [0]\n\n\
         [[schemes]]\nlabel = \"tal\"\nvariant = \"tal\"\nq = 1.0\nalpha = 0.03\n\
         realization = \"approximate\"\n",
    )
    .unwrap();
    let out = harness(&["validate", bad_family.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("approximate"), "{}", stderr(&out));
}

#[test]
fn chain_experiment_runs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().join("runs");
    let first = harness(
        &["run", "fig5-actiongap", "--out", out_arg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&first), 0, "{}", stderr(&first));

    let exp = out_arg.join("fig5-actiongap");
    let expect = [
        "beta-0-trace.csv",
        "beta-0-gaps.csv",
        "beta-0.3-trace.csv",
        "beta-0.3-gaps.csv",
        "beta-0.6-trace.csv",
        "beta-0.6-gaps.csv",
        "beta-0.9-trace.csv",
        "beta-0.9-gaps.csv",
        "aggregate.csv",
        "action-gaps.svg",
        "manifest.json",
    ];
    for f in expect {
        assert!(exp.join(f).exists(), "missing {f}");
    }
    let aggregate = std::fs::read_to_string(exp.join("aggregate.csv")).unwrap();
    assert!(aggregate.starts_with("beta,mean_gap\n"));
    assert_eq!(aggregate.lines().count(), 5);
    // Gap means must increase with the advantage scale.
    let means: Vec<f64> = aggregate
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for pair in means.windows(2) {
        assert!(pair[1] > pair[0], "gap means not increasing: {means:?}");
    }

    let svg_before = std::fs::read(exp.join("action-gaps.svg")).unwrap();
    let second = harness(
        &["run", "fig5-actiongap", "--out", out_arg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    let svg_after = std::fs::read(exp.join("action-gaps.svg")).unwrap();
    assert_eq!(svg_before, svg_after, "rerun must be byte-identical");
}

const TINY_CARTPOLE: &str = r#"
name = "tiny-cartpole"
kind = "cartpole-training"
seeds = [0, 1]

[agent]
total_steps = 400
learning_starts = 64
batch_size = 16
buffer_capacity = 1000
target_period = 100
record_period = 100
hidden = 16
probe_count = 8

[[schemes]]
label = "tal"
variant = "tal"
q = 2.0
alpha = 0.03
beta = 0.99

[[schemes]]
label = "tsallis-dqn"
variant = "value-iteration"
q = 2.0
alpha = 0.03
"#;

#[test]
fn cartpole_experiment_runs_skips_and_overrides_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("tiny.toml");
    std::fs::write(&spec_path, TINY_CARTPOLE).unwrap();
    let out_arg = dir.path().join("runs");

    let first = harness(
        &[
            "run",
            spec_path.to_str().unwrap(),
            "--out",
            out_arg.to_str().unwrap(),
            "--jobs",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let exp = out_arg.join("tiny-cartpole");
    for cell in [
        "tal/seed-0.csv",
        "tal/seed-1.csv",
        "tal/aggregate.csv",
        "tsallis-dqn/seed-0.csv",
        "tsallis-dqn/seed-1.csv",
        "tsallis-dqn/aggregate.csv",
    ] {
        assert!(exp.join(cell).exists(), "missing {cell}");
    }
    assert!(exp.join("returns.svg").exists());
    assert!(exp.join("action-gaps.svg").exists());
    let manifest = std::fs::read_to_string(exp.join("manifest.json")).unwrap();
    assert!(manifest.contains("tal/seed-0"));
    let curve = std::fs::read_to_string(exp.join("tal/seed-0.csv")).unwrap();
    assert!(curve.starts_with("step,episode_return_mean,action_gap_mean\n"));
    assert_eq!(curve.lines().count(), 1 + 4, "400 steps / record 100");

    // Aggregate columns must equal an independent recomputation from the
    // per-seed files.
    let field = |text: &str, row: usize, col: usize| -> f64 {
        text.lines()
            .nth(row)
            .unwrap()
            .split(',')
            .nth(col)
            .unwrap()
            .parse()
            .unwrap()
    };
    let curve1 = std::fs::read_to_string(exp.join("tal/seed-1.csv")).unwrap();
    let aggregate = std::fs::read_to_string(exp.join("tal/aggregate.csv")).unwrap();
    assert!(aggregate.starts_with("step,return_mean,return_std,gap_mean,gap_std\n"));
    for row in 1..=4 {
        for (seed_col, mean_col, std_col) in [(1, 1, 2), (2, 3, 4)] {
            let a = field(&curve, row, seed_col);
            let b = field(&curve1, row, seed_col);
            let mean = (a + b) / 2.0;
            let std = ((a - mean).powi(2) + (b - mean).powi(2)).sqrt(); // n-1 = 1
            assert!((field(&aggregate, row, mean_col) - mean).abs() < 1e-12);
            assert!((field(&aggregate, row, std_col) - std).abs() < 1e-12);
        }
    }

    // Rerun: every cell skips, outputs stay byte-identical.
    let before = std::fs::read(exp.join("tal/aggregate.csv")).unwrap();
    let second = harness(
        &[
            "run",
            spec_path.to_str().unwrap(),
            "--out",
            out_arg.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    let text = stdout(&second);
    assert!(text.contains("skipped (already complete)"), "{text}");
    assert!(text.contains("4 skipped"), "{text}");
    let after = std::fs::read(exp.join("tal/aggregate.csv")).unwrap();
    assert_eq!(before, after);

    // Seed override trains a fresh cell only.
    let third = harness(
        &[
            "run",
            spec_path.to_str().unwrap(),
            "--out",
            out_arg.to_str().unwrap(),
            "--seed-override",
            "7",
        ],
        dir.path(),
    );
    assert_eq!(code(&third), 0, "{}", stderr(&third));
    assert!(exp.join("tal/seed-7.csv").exists());

    // Seed overrides are meaningless for the deterministic tabular kind.
    let chain = harness(
        &[
            "run",
            "fig5-actiongap",
            "--out",
            out_arg.to_str().unwrap(),
            "--seed-override",
            "7",
        ],
        dir.path(),
    );
    assert_eq!(code(&chain), 2, "{}", stderr(&chain));
}

#[test]
fn failed_cells_produce_error_report_and_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("stall.toml");
    std::fs::write(
        &spec_path,
        r#"
name = "stall"
kind = "chain-action-gap"

[chain]
n_states = 15
slip = 0.1
gamma = 0.99
q = 2.0
alpha = 0.1
betas = [0.0]
max_sweeps = 1
"#,
    )
    .unwrap();
    let out_arg = dir.path().join("runs");
    let out = harness(
        &[
            "run",
            spec_path.to_str().unwrap(),
            "--out",
            out_arg.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let report_path = out_arg.join("stall").join("error-report.json");
    assert!(report_path.exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(report["experiment"], "stall");
    assert!(report["failures"][0]["message"]
        .as_str()
        .unwrap()
        .contains("no fixed point"));
}
