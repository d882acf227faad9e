//! End-to-end tests of the `rankweave` binary: exit codes, file outputs,
//! and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankweave"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn rankweave")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn ps(dir: &Path, name: &str) -> String {
    p(dir, name).display().to_string()
}

/// Small deterministic corpus shared by several tests.
fn synth(dir: &Path, queries: &str, seed: &str) -> (PathBuf, PathBuf) {
    let docs = p(dir, "docs.tsv");
    let pairs = p(dir, "pairs.tsv");
    let out = run(&[
        "synth",
        "--n-queries",
        queries,
        "--docs-per-query",
        "12",
        "--feature-dim",
        "4",
        "--domain-count",
        "8",
        "--seed",
        seed,
        "--out-docs",
        docs.to_str().unwrap(),
        "--out-pairs",
        pairs.to_str().unwrap(),
    ]);
    assert_ok(&out);
    (docs, pairs)
}

#[test]
fn synth_is_reproducible_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, pairs) = synth(dir.path(), "6", "11");
    let first_docs = read(&docs);
    let first_pairs = read(&pairs);
    assert!(first_docs.starts_with("query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob\tf0"));

    let manifest = read(&p(dir.path(), "docs.tsv.manifest"));
    assert!(manifest.contains("subcommand\tsynth"), "{manifest}");
    assert!(manifest.contains("seed\t11"));
    assert!(manifest.contains("duration_ms\t"));

    let (docs2, pairs2) = synth(dir.path(), "6", "11");
    assert_eq!(read(&docs2), first_docs);
    assert_eq!(read(&pairs2), first_pairs);
}

#[test]
fn build_domains_happy_path_and_rerun_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, _) = synth(dir.path(), "40", "3");
    let out_list = p(dir.path(), "domains.txt");
    let out = run(&[
        "build-domains",
        "--docs",
        docs.to_str().unwrap(),
        "--out",
        out_list.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("listed"), "{stdout}");
    let first = read(&out_list);
    assert!(first.starts_with("rankweave-domains v1\tmin_count=5\tmin_rate=0.9"));

    let out = run(&[
        "build-domains",
        "--docs",
        docs.to_str().unwrap(),
        "--out",
        out_list.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert_eq!(read(&out_list), first);
}

#[test]
fn build_domains_rejects_bad_rate() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, _) = synth(dir.path(), "4", "0");
    let out = run(&[
        "build-domains",
        "--docs",
        docs.to_str().unwrap(),
        "--min-rate",
        "1.5",
        "--out",
        &ps(dir.path(), "domains.txt"),
    ]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("min_rate"));
}

#[test]
fn missing_input_is_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "build-domains",
        "--docs",
        &ps(dir.path(), "nope.tsv"),
        "--out",
        &ps(dir.path(), "domains.txt"),
    ]);
    assert_exit(&out, 1);
}

const DOCS_HEADER: &str = "query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob\tf0";

#[test]
fn fuse_rewrites_only_wm_prob() {
    let dir = tempfile::tempdir().unwrap();
    let docs = p(dir.path(), "docs.tsv");
    std::fs::write(
        &docs,
        format!(
            "{DOCS_HEADER}\n\
             q1\ta\tstock.example\t2\t0.9\t1\t0.3\t1\n\
             q1\tb\tother.example\t1\t0.5\t0\t0.3\t2\n\
             q1\tc\tother.example\t1\t0.5\t0\tNA\t3\n"
        ),
    )
    .unwrap();
    let domains = p(dir.path(), "domains.txt");
    std::fs::write(
        &domains,
        "rankweave-domains v1\tmin_count=5\tmin_rate=0.9\nstock.example\t10\t10\n",
    )
    .unwrap();
    let fused = p(dir.path(), "fused.tsv");
    let out = run(&[
        "fuse",
        "--docs",
        docs.to_str().unwrap(),
        "--domains",
        domains.to_str().unwrap(),
        "--out",
        fused.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = read(&fused);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows[0], "q1\ta\tstock.example\t2\t0.9\t1\t1\t1");
    assert_eq!(rows[1], "q1\tb\tother.example\t1\t0.5\t0\t0.3\t2");
    assert_eq!(rows[2], "q1\tc\tother.example\t1\t0.5\t0\t0.5\t3");
}

/// Metric file with the hand-checkable fixture parameters.
fn write_fixture_metric(dir: &Path) -> PathBuf {
    let metric = p(dir, "metric.txt");
    std::fs::write(
        &metric,
        "rankweave-metric v1\nrating_good\t1\nrating_excellent\t2\ngamma\t0.5\nwmp\t0.5\n\
         b0\t-0.6\nb1\t-0.2\nb2\t0.2\nb3\t0.6\nsigma\t0.5\n",
    )
    .unwrap();
    metric
}

#[test]
fn rate_appends_expected_column() {
    let dir = tempfile::tempdir().unwrap();
    let docs = p(dir.path(), "docs.tsv");
    std::fs::write(
        &docs,
        format!(
            "{DOCS_HEADER}\n\
             q1\ta\t\t0\t1\t0\tNA\t1\n\
             q1\tb\t\t2\t1\t0\tNA\t2\n\
             q1\tc\t\t1\t0.8\t1\tNA\t3\n"
        ),
    )
    .unwrap();
    let metric = write_fixture_metric(dir.path());
    let rated = p(dir.path(), "rated.tsv");
    let out = run(&[
        "rate",
        "--docs",
        docs.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--out",
        rated.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = read(&rated);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].ends_with("\trating"));
    assert!(lines[1].ends_with("\t0"), "{}", lines[1]);
    assert!(lines[2].ends_with("\t1"), "{}", lines[2]);
    assert!(lines[3].ends_with("\t0.35"), "{}", lines[3]);
}

#[test]
fn rate_names_document_with_missing_label() {
    let dir = tempfile::tempdir().unwrap();
    let docs = p(dir.path(), "docs.tsv");
    std::fs::write(
        &docs,
        format!("{DOCS_HEADER}\nq1\tneeds-ia\t\t1\tNA\t0\tNA\t1\n"),
    )
    .unwrap();
    let metric = write_fixture_metric(dir.path());
    let out = run(&[
        "rate",
        "--docs",
        docs.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--out",
        &ps(dir.path(), "rated.tsv"),
    ]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs-ia"));
}

#[test]
fn thread_count_does_not_change_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, _) = synth(dir.path(), "10", "4");
    let metric = write_fixture_metric(dir.path());
    let model = p(dir.path(), "model.txt");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = run(&[
            "--threads",
            threads,
            "train",
            "--docs",
            docs.to_str().unwrap(),
            "--metric",
            metric.to_str().unwrap(),
            "--n-trees",
            "15",
            "--min-docs-per-leaf",
            "1",
            "--out-model",
            model.to_str().unwrap(),
        ]);
        assert_ok(&out);
        outputs.push(read(&model));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn fit_metric_is_deterministic_and_rejects_empty_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, pairs) = synth(dir.path(), "12", "5");
    let metric = p(dir.path(), "fitted.txt");
    let args = [
        "fit-metric",
        "--pairs",
        pairs.to_str().unwrap(),
        "--docs",
        docs.to_str().unwrap(),
        "--max-iters",
        "60",
        "--out",
        metric.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_ok(&out);
    let first = read(&metric);
    assert!(first.starts_with("rankweave-metric v1"));
    let out = run(&args);
    assert_ok(&out);
    assert_eq!(read(&metric), first);

    let empty = p(dir.path(), "empty_pairs.tsv");
    std::fs::write(
        &empty,
        "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n",
    )
    .unwrap();
    let out = run(&[
        "fit-metric",
        "--pairs",
        empty.to_str().unwrap(),
        "--docs",
        docs.to_str().unwrap(),
        "--out",
        &ps(dir.path(), "nope.txt"),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn train_eval_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let dirp = dir.path();
    let (docs, pairs) = synth(dirp, "40", "8");

    let metric = p(dirp, "metric.txt");
    assert_ok(&run(&[
        "fit-metric",
        "--pairs",
        pairs.to_str().unwrap(),
        "--docs",
        docs.to_str().unwrap(),
        "--max-iters",
        "300",
        "--out",
        metric.to_str().unwrap(),
    ]));

    let domains = p(dirp, "domains.txt");
    assert_ok(&run(&[
        "build-domains",
        "--docs",
        docs.to_str().unwrap(),
        "--out",
        domains.to_str().unwrap(),
    ]));
    let fused = p(dirp, "fused.tsv");
    assert_ok(&run(&[
        "fuse",
        "--docs",
        docs.to_str().unwrap(),
        "--domains",
        domains.to_str().unwrap(),
        "--out",
        fused.to_str().unwrap(),
    ]));

    // control: no watermark columns; experiment: adds the fused wm_prob
    let control_model = p(dirp, "control.model");
    let out = run(&[
        "train",
        "--docs",
        docs.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--features",
        "f0,f1,f3",
        "--n-trees",
        "40",
        "--out-model",
        control_model.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let trace = String::from_utf8_lossy(&out.stdout);
    assert!(trace.contains("iter\ttrain_ndcg"), "{trace}");

    let experiment_model = p(dirp, "experiment.model");
    assert_ok(&run(&[
        "train",
        "--docs",
        fused.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--features",
        "f0,f1,f3,wm_prob",
        "--n-trees",
        "40",
        "--out-model",
        experiment_model.to_str().unwrap(),
    ]));

    let control_report = p(dirp, "control.report");
    assert_ok(&run(&[
        "eval",
        "--docs",
        docs.to_str().unwrap(),
        "--model",
        control_model.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--k",
        "5,10",
        "--out-report",
        control_report.to_str().unwrap(),
    ]));
    let experiment_report = p(dirp, "experiment.report");
    assert_ok(&run(&[
        "eval",
        "--docs",
        fused.to_str().unwrap(),
        "--model",
        experiment_model.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--k",
        "5,10",
        "--out-report",
        experiment_report.to_str().unwrap(),
    ]));

    let comparison = p(dirp, "comparison.tsv");
    let out = run(&[
        "compare",
        "--a",
        control_report.to_str().unwrap(),
        "--b",
        experiment_report.to_str().unwrap(),
        "--out",
        comparison.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = read(&comparison);
    assert!(text.starts_with("rankweave-compare v1\tcontrol=control\texperiment=experiment"));
    assert!(text.contains("watermark_rate\t10\t"));

    // the fused watermark feature must not hurt the watermark rate
    let wm_row = text
        .lines()
        .find(|l| l.starts_with("watermark_rate\t10"))
        .unwrap();
    let fields: Vec<&str> = wm_row.split('\t').collect();
    let control_rate: f64 = fields[2].parse().unwrap();
    let experiment_rate: f64 = fields[3].parse().unwrap();
    assert!(
        experiment_rate <= control_rate,
        "experiment {experiment_rate} vs control {control_rate}"
    );
}

#[test]
fn train_zero_trees_and_eval_dim_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let dirp = dir.path();
    let (docs, _) = synth(dirp, "6", "2");
    let metric = write_fixture_metric(dirp);

    let model = p(dirp, "const.model");
    assert_ok(&run(&[
        "train",
        "--docs",
        docs.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--n-trees",
        "0",
        "--out-model",
        model.to_str().unwrap(),
    ]));
    assert!(read(&model).contains("n_trees\t0"));

    // a dataset with a different feature dimension
    let narrow = p(dirp, "narrow.tsv");
    std::fs::write(
        &narrow,
        format!("{DOCS_HEADER}\nq1\ta\t\t1\t0.5\t0\tNA\t1\nq1\tb\t\t2\t0.5\t0\tNA\t2\n"),
    )
    .unwrap();
    let out = run(&[
        "eval",
        "--docs",
        narrow.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--metric",
        metric.to_str().unwrap(),
        "--out-report",
        &ps(dirp, "report.tsv"),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn compare_identical_reports_zero_deltas_and_known_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let dirp = dir.path();
    let report = |id: &str, rate: &str| {
        format!(
            "rankweave-report v1\tmodel={id}\tqueries=2\n\
             metric\tk\tquery\tvalue\n\
             ndcg\t10\t-\t0.9\n\
             watermark_rate\t10\t-\t{rate}\n\
             ndcg\t10\tq1\t0.8\n\
             ndcg\t10\tq2\t1\n"
        )
    };
    let a = p(dirp, "a.report");
    let b = p(dirp, "b.report");
    std::fs::write(&a, report("control", "0.052")).unwrap();
    std::fs::write(&b, report("experiment", "0.038")).unwrap();
    let out_path = p(dirp, "cmp.tsv");
    let out = run(&[
        "compare",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = read(&out_path);
    let wm: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("watermark_rate"))
        .unwrap()
        .split('\t')
        .collect();
    let reduction: f64 = wm[6].parse().unwrap();
    assert!((reduction - 0.2692).abs() < 1e-3, "{reduction}");

    std::fs::write(&b, report("experiment", "0.052")).unwrap();
    let out = run(&[
        "compare",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    for line in read(&out_path).lines().skip(2) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[4], "0", "{line}");
    }
}

#[test]
fn help_covers_every_subcommand() {
    let out = run(&["--help"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "build-domains",
        "fuse",
        "fit-metric",
        "rate",
        "train",
        "eval",
        "synth",
        "compare",
    ] {
        assert!(text.contains(sub), "--help is missing {sub}");
    }
}
