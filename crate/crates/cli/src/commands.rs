//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::Path;

use rankweave_core::corpus::{
    fmt_f64, parse_documents, parse_pairs, serialize_documents, serialize_pairs, Dataset,
};
use rankweave_core::eval::synth::{generate_synthetic, SynthConfig};
use rankweave_core::eval::{
    assemble_rated_lists, compare, default_selection, evaluate, load_report,
    parse_feature_selection, report_text, save_comparison, save_report, selection_names,
};
use rankweave_core::ltr::{load_model, save_model, train_lambdamart, TrainConfig, Truncation};
use rankweave_core::metric::{
    compute_rating, fit_metric, load_metric_params, observations, save_metric_params, DocLabels,
    FitConfig, MetricParams,
};
use rankweave_core::watermark::{
    build_domain_list, fuse_probability, load_domain_list, save_domain_list,
};
use rankweave_core::{Error, Result};

use crate::manifest::RunManifest;
use crate::Command;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildDomains {
            docs,
            min_count,
            min_rate,
            out,
        } => cmd_build_domains(&docs, min_count, min_rate, &out),
        Command::Fuse { docs, domains, out } => cmd_fuse(&docs, &domains, &out),
        Command::FitMetric {
            pairs,
            docs,
            out,
            max_iters,
            init_step,
            step_halvings,
            tol,
            seed,
        } => {
            let config = FitConfig {
                max_iters,
                init_step,
                step_halvings,
                convergence_tol: tol,
                seed,
            };
            cmd_fit_metric(&pairs, &docs, &out, &config)
        }
        Command::Rate { docs, metric, out } => cmd_rate(&docs, &metric, &out),
        Command::Train {
            docs,
            metric,
            out_model,
            features,
            n_trees,
            shrinkage,
            max_leaves,
            min_docs_per_leaf,
            lambda_sigma,
            ndcg_truncation,
            seed,
        } => {
            let config = TrainConfig {
                n_trees,
                shrinkage,
                max_leaves,
                min_docs_per_leaf,
                lambda_sigma,
                ndcg_truncation: Truncation::parse(&ndcg_truncation)?,
                seed,
            };
            cmd_train(&docs, &metric, &out_model, features.as_deref(), &config)
        }
        Command::Eval {
            docs,
            model,
            metric,
            k,
            out_report,
        } => cmd_eval(&docs, &model, &metric, &k, &out_report),
        Command::Synth {
            n_queries,
            docs_per_query,
            feature_dim,
            noise_level,
            watermark_base_rate,
            domain_count,
            domain_skew,
            pairs_per_query,
            judgments_per_pair,
            seed,
            out_docs,
            out_pairs,
        } => {
            let config = SynthConfig {
                n_queries,
                docs_per_query,
                feature_dim,
                noise_level,
                watermark_base_rate,
                domain_count,
                domain_skew,
                pairs_per_query: pairs_per_query.unwrap_or(docs_per_query / 2),
                judgments_per_pair,
                seed,
                ..SynthConfig::default()
            };
            cmd_synth(&config, &out_docs, &out_pairs)
        }
        Command::Compare { a, b, out } => cmd_compare(&a, &b, &out),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

fn cmd_build_domains(docs: &Path, min_count: u64, min_rate: f64, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("build-domains");
    manifest.push_path("docs", docs);
    manifest.push("min_count", min_count);
    manifest.push("min_rate", fmt_f64(min_rate));
    manifest.push_path("out", out);

    let dataset = parse_documents(docs)?;
    let (list, summary) = build_domain_list(&dataset, min_count, min_rate)?;
    save_domain_list(&list, out)?;
    println!(
        "listed {} of {} domains ({} documents counted, {} without wm label, {} without domain)",
        list.len(),
        summary.domains_seen,
        summary.docs_counted,
        summary.docs_missing_label,
        summary.docs_missing_domain
    );
    manifest.push("domains_listed", list.len());
    manifest.push("domains_seen", summary.domains_seen);
    manifest.write(out)
}

fn cmd_fuse(docs: &Path, domains: &Path, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("fuse");
    manifest.push_path("docs", docs);
    manifest.push_path("domains", domains);
    manifest.push_path("out", out);

    let dataset = parse_documents(docs)?;
    let list = load_domain_list(domains)?;
    let mut groups = dataset.groups().to_vec();
    let mut forced = 0usize;
    for group in &mut groups {
        for doc in &mut group.documents {
            let fused = fuse_probability(&doc.domain, doc.wm_prob, &list)?;
            if fused == 1.0 && doc.wm_prob != Some(1.0) {
                forced += 1;
            }
            doc.wm_prob = Some(fused);
        }
    }
    let fused = Dataset::from_groups(groups, dataset.feature_dim())?;
    write_file(out, &serialize_documents(&fused))?;
    println!(
        "fused wm_prob for {} documents ({} forced to 1 by the domain list)",
        fused.n_documents(),
        forced
    );
    manifest.push("documents", fused.n_documents());
    manifest.push("forced_to_one", forced);
    manifest.write(out)
}

fn cmd_fit_metric(pairs: &Path, docs: &Path, out: &Path, config: &FitConfig) -> Result<()> {
    let mut manifest = RunManifest::new("fit-metric");
    manifest.push_path("pairs", pairs);
    manifest.push_path("docs", docs);
    manifest.push_path("out", out);
    manifest.push("max_iters", config.max_iters);
    manifest.push("init_step", fmt_f64(config.init_step));
    manifest.push("step_halvings", config.step_halvings);
    manifest.push("tol", fmt_f64(config.convergence_tol));
    manifest.push("seed", config.seed);

    let dataset = parse_documents(docs)?;
    let judged = parse_pairs(pairs, &dataset)?;
    let obs = observations(&dataset, &judged)?;
    let init = MetricParams::default_init();
    let (params, report) = fit_metric(&obs, config, &init)?;
    save_metric_params(&params, Some(&report), out)?;
    println!(
        "fit {} pairs in {} iterations: cost {:.6}, gradient norm {:.3e}, converged {}",
        obs.len(),
        report.iterations,
        report.final_cost,
        report.gradient_norm,
        report.converged
    );
    println!(
        "gamma {:.4}, wmp {:.4}, rating levels [0, {:.4}, {:.4}], sigma {:.4}",
        params.gamma, params.wmp, params.rating_good, params.rating_excellent, params.sigma
    );
    manifest.push("pairs_fit", obs.len());
    manifest.push("iterations", report.iterations);
    manifest.write(out)
}

fn cmd_rate(docs: &Path, metric: &Path, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("rate");
    manifest.push_path("docs", docs);
    manifest.push_path("metric", metric);
    manifest.push_path("out", out);

    let dataset = parse_documents(docs)?;
    let (params, _) = load_metric_params(metric)?;
    let mut ratings = Vec::with_capacity(dataset.n_documents());
    for doc in dataset.documents() {
        let labels = DocLabels::from_document(doc)?;
        ratings.push(compute_rating(labels.ir, labels.ia, labels.wm, &params));
    }

    // canonical serialization with one extra column spliced on
    let base = serialize_documents(&dataset);
    let mut lines = base.lines();
    let header = lines.next().expect("serialized documents have a header");
    let mut text = String::with_capacity(base.len() + 16 * ratings.len());
    let _ = writeln!(text, "{header}\trating");
    for (line, rating) in lines.zip(&ratings) {
        let _ = writeln!(text, "{line}\t{}", fmt_f64(*rating));
    }
    write_file(out, &text)?;
    println!("rated {} documents", ratings.len());
    manifest.push("documents", ratings.len());
    manifest.write(out)
}

fn cmd_train(
    docs: &Path,
    metric: &Path,
    out_model: &Path,
    features: Option<&str>,
    config: &TrainConfig,
) -> Result<()> {
    let mut manifest = RunManifest::new("train");
    manifest.push_path("docs", docs);
    manifest.push_path("metric", metric);
    manifest.push_path("out_model", out_model);

    let dataset = parse_documents(docs)?;
    let (params, _) = load_metric_params(metric)?;
    let selection = match features {
        Some(raw) => parse_feature_selection(raw, dataset.feature_dim())?,
        None => default_selection(dataset.feature_dim()),
    };
    let names = selection_names(&selection);
    manifest.push("features", names.join(","));
    manifest.push("n_trees", config.n_trees);
    manifest.push("shrinkage", fmt_f64(config.shrinkage));
    manifest.push("max_leaves", config.max_leaves);
    manifest.push("min_docs_per_leaf", config.min_docs_per_leaf);
    manifest.push("lambda_sigma", fmt_f64(config.lambda_sigma));
    manifest.push("ndcg_truncation", config.ndcg_truncation);
    manifest.push("seed", config.seed);

    let lists = assemble_rated_lists(&dataset, &params, &selection)?;
    let (mut model, trace) = train_lambdamart(&lists, config)?;
    model.set_feature_columns(names);
    save_model(&model, out_model)?;

    println!("iter\ttrain_ndcg@{}", config.ndcg_truncation);
    for (i, v) in trace.iter().enumerate() {
        println!("{}\t{:.6}", i + 1, v);
    }
    println!(
        "trained {} trees on {} queries ({} features)",
        model.n_trees(),
        lists.len(),
        model.feature_dim()
    );
    manifest.push("queries", lists.len());
    if let Some(last) = trace.last() {
        manifest.push("final_train_ndcg", fmt_f64(*last));
    }
    manifest.write(out_model)
}

fn cmd_eval(
    docs: &Path,
    model: &Path,
    metric: &Path,
    ks_raw: &str,
    out_report: &Path,
) -> Result<()> {
    let mut manifest = RunManifest::new("eval");
    manifest.push_path("docs", docs);
    manifest.push_path("model", model);
    manifest.push_path("metric", metric);
    manifest.push("k", ks_raw);
    manifest.push_path("out_report", out_report);

    let dataset = parse_documents(docs)?;
    let ensemble = load_model(model)?;
    let (params, _) = load_metric_params(metric)?;
    let ks = parse_ks(ks_raw)?;
    let report = evaluate(&ensemble, &dataset, &params, &ks, &file_stem(model))?;
    save_report(&report, out_report)?;
    print!("{}", report_text(&report));
    manifest.push("queries", report.query_count);
    manifest.write(out_report)
}

fn parse_ks(raw: &str) -> Result<Vec<usize>> {
    let mut ks = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let k: usize = part
            .parse()
            .map_err(|_| Error::invalid(format!("bad cutoff '{part}'")))?;
        if k == 0 {
            return Err(Error::invalid("cutoffs must be positive"));
        }
        ks.push(k);
    }
    if ks.is_empty() {
        return Err(Error::invalid("no cutoffs given"));
    }
    Ok(ks)
}

fn cmd_synth(config: &SynthConfig, out_docs: &Path, out_pairs: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("synth");
    manifest.push("n_queries", config.n_queries);
    manifest.push("docs_per_query", config.docs_per_query);
    manifest.push("feature_dim", config.feature_dim);
    manifest.push("noise_level", fmt_f64(config.noise_level));
    manifest.push("watermark_base_rate", fmt_f64(config.watermark_base_rate));
    manifest.push("domain_count", config.domain_count);
    manifest.push("domain_skew", fmt_f64(config.domain_skew));
    manifest.push("pairs_per_query", config.pairs_per_query);
    manifest.push("judgments_per_pair", config.judgments_per_pair);
    manifest.push("seed", config.seed);
    manifest.push("planted_gamma", fmt_f64(config.planted.gamma));
    manifest.push("planted_wmp", fmt_f64(config.planted.wmp));
    manifest.push_path("out_docs", out_docs);
    manifest.push_path("out_pairs", out_pairs);

    let (dataset, pairs) = generate_synthetic(config)?;
    write_file(out_docs, &serialize_documents(&dataset))?;
    write_file(out_pairs, &serialize_pairs(&pairs))?;
    println!(
        "generated {} documents in {} queries and {} pairs",
        dataset.n_documents(),
        dataset.groups().len(),
        pairs.len()
    );
    manifest.write(out_docs)
}

fn cmd_compare(a: &Path, b: &Path, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::new("compare");
    manifest.push_path("a", a);
    manifest.push_path("b", b);
    manifest.push_path("out", out);

    let control = load_report(a)?;
    let experiment = load_report(b)?;
    let cmp = compare(&control, &experiment)?;
    save_comparison(&cmp, out)?;
    println!(
        "control {} vs experiment {}",
        cmp.control_id, cmp.experiment_id
    );
    for row in &cmp.rows {
        println!(
            "{} @{}: {:.5} -> {:.5} (delta {:+.5}, relative reduction {})",
            row.metric,
            row.k,
            row.control,
            row.experiment,
            row.abs_delta,
            if row.rel_reduction.is_nan() {
                "NA".to_string()
            } else {
                format!("{:.2}%", row.rel_reduction * 100.0)
            }
        );
    }
    manifest.write(out)
}
