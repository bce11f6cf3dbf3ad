//! End-to-end tests of the `gramevo` binary: every subcommand, the exit
//! code contract, and byte-level reproducibility of batch outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gramevo::grammar::parse_bnf;

const BIN: &str = env!("CARGO_BIN_EXE_gramevo");

fn grammar_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../grammars/regression.bnf")
}

fn groups_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../grammars/unary_families.groups")
}

fn gramevo(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("GRAMEVO_THREADS")
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_spec(dir: &Path, body: &str) -> PathBuf {
    fs::copy(grammar_path(), dir.join("regression.bnf")).unwrap();
    let spec = dir.join("exp.spec");
    fs::write(&spec, body).unwrap();
    spec
}

const SMALL_BATCH: &str = "\
grammar = regression.bnf
benchmark = quartic
runs = 3
base_seed = 100
output_dir = results
population_size = 20
generations = 5
";

#[test]
fn run_writes_one_file_per_seed_plus_summary_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path(), SMALL_BATCH);
    let out = gramevo(tmp.path(), &["run", "--spec", "exp.spec"]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let results = tmp.path().join("results");
    for seed in 100..=102 {
        let text = fs::read_to_string(results.join(format!("run_{seed}.csv"))).unwrap();
        assert!(text.starts_with(&format!("# seed = {seed}\n")));
        // header + one row per generation
        assert_eq!(text.lines().count(), 1 + 1 + 5);
    }
    let summary = fs::read_to_string(results.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "# base_seed = 100");
    assert_eq!(
        lines[1],
        "run,seed,best_fitness_train,best_fitness_test,best_phenotype"
    );
    assert_eq!(lines.len(), 2 + 3, "one summary row per run");
    for (i, line) in lines[2..].iter().enumerate() {
        assert!(line.starts_with(&format!("{i},{},", 100 + i)));
    }
    let echo = fs::read_to_string(results.join("spec_echo.txt")).unwrap();
    for key in [
        "grammar = ", "benchmark = quartic", "runs = 3", "base_seed = 100",
        "population_size = 20", "generations = 5", "sigma = 0.05",
        "adaptive_mutation = true",
    ] {
        assert!(echo.contains(key), "echo missing {key:?}:\n{echo}");
    }
}

fn snapshot(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read_to_string(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn rerunning_a_spec_reproduces_every_output_byte() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path(), SMALL_BATCH);
    assert_eq!(exit_code(&gramevo(tmp.path(), &["run", "--spec", "exp.spec"])), 0);
    let first = snapshot(&tmp.path().join("results"));
    fs::remove_dir_all(tmp.path().join("results")).unwrap();
    assert_eq!(exit_code(&gramevo(tmp.path(), &["run", "--spec", "exp.spec"])), 0);
    let second = snapshot(&tmp.path().join("results"));
    assert_eq!(first, second);
    assert_eq!(first.len(), 5, "3 run files + summary + echo");
}

#[test]
fn thread_cap_does_not_change_any_output_byte() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path(), SMALL_BATCH);
    assert_eq!(exit_code(&gramevo(tmp.path(), &["run", "--spec", "exp.spec"])), 0);
    let parallel = snapshot(&tmp.path().join("results"));
    fs::remove_dir_all(tmp.path().join("results")).unwrap();

    let out = Command::new(BIN)
        .current_dir(tmp.path())
        .env("GRAMEVO_THREADS", "1")
        .args(["run", "--spec", "exp.spec"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    let serial = snapshot(&tmp.path().join("results"));
    assert_eq!(parallel, serial);

    let out = Command::new(BIN)
        .current_dir(tmp.path())
        .env("GRAMEVO_THREADS", "zero?")
        .args(["run", "--spec", "exp.spec"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1, "garbage thread cap is a usage error");
}

#[test]
fn zero_sigma_batches_log_constant_mutation_rate_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = format!("{SMALL_BATCH}sigma = 0\n");
    write_spec(tmp.path(), &spec);
    assert_eq!(exit_code(&gramevo(tmp.path(), &["run", "--spec", "exp.spec"])), 0);

    let text = fs::read_to_string(tmp.path().join("results/run_100.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# seed"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, name)| name.starts_with("mut_"))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(mut_cols.len(), 5, "one rate column per non-terminal");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for &col in &mut_cols {
        for row in &rows[1..] {
            assert_eq!(row[col], rows[0][col], "column {} drifted", header[col]);
        }
    }
}

#[test]
fn csv_benchmark_batches_score_a_real_test_split() {
    let tmp = tempfile::tempdir().unwrap();
    let mut data = String::from("x0,y\n");
    for k in 0..40 {
        let x = k as f64 / 10.0;
        data.push_str(&format!("{x},{}\n", 3.0 * x + 1.0));
    }
    fs::write(tmp.path().join("line.csv"), data).unwrap();
    let spec = "\
grammar = regression.bnf
benchmark = csv:line.csv:y
train_fraction = 0.75
runs = 2
base_seed = 9
output_dir = results
population_size = 20
generations = 5
";
    write_spec(tmp.path(), spec);
    assert_eq!(exit_code(&gramevo(tmp.path(), &["run", "--spec", "exp.spec"])), 0);

    let summary = fs::read_to_string(tmp.path().join("results/summary.csv")).unwrap();
    for line in summary.lines().skip(2) {
        let test_cell = line.split(',').nth(3).unwrap();
        let value: f64 = test_cell.parse().unwrap();
        assert!(value.is_finite(), "test split fitness should be real, got {test_cell}");
    }
    let echo = fs::read_to_string(tmp.path().join("results/spec_echo.txt")).unwrap();
    assert!(echo.contains("train_fraction = 0.75"));
}

#[test]
fn run_rejects_bad_specs_with_exit_one_and_missing_files_with_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gramevo(tmp.path(), &["run", "--spec", "no_such.spec"]);
    assert_eq!(exit_code(&out), 2);

    write_spec(tmp.path(), &format!("{SMALL_BATCH}mystery_knob = 7\n"));
    let out = gramevo(tmp.path(), &["run", "--spec", "exp.spec"]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("unknown key `mystery_knob`"),
        "diagnostic names the offending key"
    );
}

#[test]
fn grammar_check_reports_structure_and_rejects_invalid_grammars() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gramevo(tmp.path(), &["grammar", "check", grammar_path().to_str().unwrap()]);
    let report = stdout_of(&out);
    assert!(report.contains("5 non-terminals"), "{report}");
    assert!(report.contains("14 rules"), "{report}");
    assert!(report.contains("start symbol <start>"), "{report}");
    assert!(report.contains("(recursive)"), "{report}");

    fs::write(tmp.path().join("bad.bnf"), "<s> ::= <s>\n").unwrap();
    let out = gramevo(tmp.path(), &["grammar", "check", "bad.bnf"]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("cannot derive a finite phenotype"),
        "diagnostic explains the rejection"
    );
}

#[test]
fn grammar_transform_emits_a_seven_nonterminal_grouped_grammar() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gramevo(
        tmp.path(),
        &[
            "grammar", "transform",
            grammar_path().to_str().unwrap(),
            "--groups", groups_path().to_str().unwrap(),
            "-o", "grouped.bnf",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rendered = fs::read_to_string(tmp.path().join("grouped.bnf")).unwrap();
    let grouped = parse_bnf(&rendered, 1).expect("transform output parses");
    assert_eq!(grouped.nonterminal_count(), 7);
    assert_eq!(
        grouped.names(),
        ["start", "expr", "op", "pre_op", "trig_op", "pow_op", "var"]
    );

    // Without -o the grammar goes to stdout instead.
    let out = gramevo(
        tmp.path(),
        &[
            "grammar", "transform",
            grammar_path().to_str().unwrap(),
            "--groups", groups_path().to_str().unwrap(),
        ],
    );
    assert_eq!(stdout_of(&out), rendered);
}

#[test]
fn enumerate_agrees_between_original_and_transformed_grammars() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gramevo(
        tmp.path(),
        &[
            "grammar", "transform",
            grammar_path().to_str().unwrap(),
            "--groups", groups_path().to_str().unwrap(),
            "-o", "grouped.bnf",
        ],
    );
    assert_eq!(exit_code(&out), 0);

    let enumerate = |file: &str, depth: &str| {
        stdout_of(&gramevo(tmp.path(), &["grammar", "enumerate", file, "--depth", depth]))
    };
    let original = grammar_path();
    for depth in ["1", "2", "3", "4"] {
        let a = enumerate(original.to_str().unwrap(), depth);
        let b = enumerate("grouped.bnf", depth);
        assert_eq!(a, b, "languages diverge at depth {depth}");
    }
    // Depth 4 forces binary operands down to leaves: 2*4*2 two-operand
    // strings + 4*2 unary applications + 2 bare leaves.
    let depth4 = enumerate(original.to_str().unwrap(), "4");
    let mut lines: Vec<&str> = depth4.lines().collect();
    assert_eq!(lines.len(), 26);
    let already = lines.clone();
    lines.sort_unstable();
    assert_eq!(lines, already, "output arrives sorted");
    assert!(already.contains(&"x[0] + 1.0"));
}

#[test]
fn closing_the_output_pipe_early_is_not_an_error() {
    // Depth 5 enumerates ~2700 phenotypes (~90KB), more than a default
    // pipe buffer holds, so the writes hit a closed pipe when the reader
    // hangs up immediately — the binary must exit quietly, not panic.
    let mut child = Command::new(BIN)
        .args([
            "grammar",
            "enumerate",
            grammar_path().to_str().unwrap(),
            "--depth",
            "5",
        ])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    let mut stderr = String::new();
    std::io::Read::read_to_string(child.stderr.as_mut().unwrap(), &mut stderr).unwrap();
    assert_eq!(stderr, "", "no panic or diagnostic on early pipe close");
}

#[test]
fn compare_reports_the_null_result_for_identical_directories() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path(), SMALL_BATCH);
    assert_eq!(exit_code(&gramevo(tmp.path(), &["run", "--spec", "exp.spec"])), 0);

    let out = gramevo(tmp.path(), &["compare", "results", "results"]);
    let report = stdout_of(&out);
    assert!(report.contains("samples: 3 vs 3"), "{report}");
    assert!(report.contains("U = 4.5"), "identical samples sit at n*m/2: {report}");
    assert!(report.contains("p (two-sided) = 1"), "{report}");

    let out = gramevo(tmp.path(), &["compare", "results", "elsewhere"]);
    assert_eq!(exit_code(&out), 2, "missing summary is an I/O error");
}

#[test]
fn help_and_version_exit_zero_and_bad_usage_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"][..], &["grammar", "--help"][..]] {
        let out = gramevo(tmp.path(), args);
        assert_eq!(exit_code(&out), 0, "{args:?}");
    }
    for args in [
        &["frobnicate"][..],
        &["run"][..],
        &["run", "--bogus"][..],
        &["grammar", "enumerate", "g.bnf"][..],
    ] {
        let out = gramevo(tmp.path(), args);
        assert_eq!(exit_code(&out), 1, "{args:?}");
    }
}
