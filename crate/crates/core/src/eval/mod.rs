//! Offline evaluation: NDCG@k and watermark-rate@k reports, ranker
//! comparison, and the synthetic corpus generator.

pub mod synth;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{fmt_f64, Dataset, Document};
use crate::error::{Error, Result};
use crate::ltr::{gain, ndcg, rank_by_scores, Ensemble, FeatureMatrix, RatedList, Truncation};
use crate::metric::{compute_rating, DocLabels, MetricParams};

/// One ranker input column: a feature by index or the fused watermark
/// probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureColumn {
    Feature(usize),
    WmProb,
}

impl FeatureColumn {
    pub fn name(&self) -> String {
        match self {
            FeatureColumn::Feature(i) => format!("f{i}"),
            FeatureColumn::WmProb => "wm_prob".to_string(),
        }
    }
}

/// Parses a comma-separated column list such as `f0,f1,f3,wm_prob`.
pub fn parse_feature_selection(raw: &str, feature_dim: usize) -> Result<Vec<FeatureColumn>> {
    let mut selection = Vec::new();
    for name in raw.split(',') {
        let name = name.trim();
        if name.is_empty() {
            continue;
        }
        let column = if name == "wm_prob" {
            FeatureColumn::WmProb
        } else if let Some(i) = name.strip_prefix('f').and_then(|s| s.parse::<usize>().ok()) {
            if i >= feature_dim {
                return Err(Error::invalid(format!(
                    "column '{name}' out of range: the dataset has features f0..f{}",
                    feature_dim.saturating_sub(1)
                )));
            }
            FeatureColumn::Feature(i)
        } else {
            return Err(Error::invalid(format!(
                "unknown column '{name}' (expected fN or wm_prob)"
            )));
        };
        if selection.contains(&column) {
            return Err(Error::invalid(format!("column '{name}' listed twice")));
        }
        selection.push(column);
    }
    if selection.is_empty() {
        return Err(Error::invalid("feature selection is empty"));
    }
    Ok(selection)
}

/// Every plain feature column, in order; the default ranker input.
pub fn default_selection(feature_dim: usize) -> Vec<FeatureColumn> {
    (0..feature_dim).map(FeatureColumn::Feature).collect()
}

pub fn selection_names(selection: &[FeatureColumn]) -> Vec<String> {
    selection.iter().map(FeatureColumn::name).collect()
}

/// Extracts one ranker input row. Selecting `wm_prob` on a document
/// without one is an error; run the fuse step first.
pub fn doc_row(doc: &Document, selection: &[FeatureColumn]) -> Result<Vec<f64>> {
    selection
        .iter()
        .map(|col| match col {
            FeatureColumn::Feature(i) => Ok(doc.features[*i]),
            FeatureColumn::WmProb => doc.wm_prob.ok_or_else(|| {
                Error::invalid(format!(
                    "document '{}' has no wm_prob but the selection includes it",
                    doc.doc_id
                ))
            }),
        })
        .collect()
}

/// Builds per-query training lists: hybrid-rating gains plus the selected
/// feature columns.
pub fn assemble_rated_lists(
    dataset: &Dataset,
    params: &MetricParams,
    selection: &[FeatureColumn],
) -> Result<Vec<RatedList>> {
    params.validate()?;
    let mut lists = Vec::with_capacity(dataset.groups().len());
    for group in dataset.groups() {
        let mut features = FeatureMatrix::new(selection.len());
        let mut gains = Vec::with_capacity(group.documents.len());
        for doc in &group.documents {
            let labels = DocLabels::from_document(doc)?;
            let rating = compute_rating(labels.ir, labels.ia, labels.wm, params);
            gains.push(gain(rating));
            features.push_row(&doc_row(doc, selection)?)?;
        }
        lists.push(RatedList {
            query_id: group.query_id.clone(),
            gains,
            features,
        });
    }
    Ok(lists)
}

/// Pooled fraction of watermarked documents in the top k, over per-query
/// watermark flags already in ranked order. Queries shorter than k
/// contribute all their documents.
pub fn watermark_rate_at_k(ranked_wm_flags: &[Vec<bool>], k: usize) -> Result<f64> {
    if ranked_wm_flags.is_empty() || k == 0 {
        return Err(Error::invalid("watermark rate needs queries and k > 0"));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for flags in ranked_wm_flags {
        let cut = k.min(flags.len());
        total += cut;
        hits += flags[..cut].iter().filter(|&&w| w).count();
    }
    if total == 0 {
        return Err(Error::invalid("no documents in the top-k pool"));
    }
    Ok(hits as f64 / total as f64)
}

/// Per-query NDCG values for each requested k.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryNdcg {
    pub query_id: String,
    pub ndcg: Vec<f64>,
}

/// Evaluation result of one model over one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub model_id: String,
    pub ks: Vec<usize>,
    pub query_count: usize,
    /// Mean NDCG@k over queries, aligned with `ks`.
    pub mean_ndcg: Vec<f64>,
    /// Pooled watermark rate@k, aligned with `ks`.
    pub watermark_rate: Vec<f64>,
    /// Sorted by query_id.
    pub per_query: Vec<QueryNdcg>,
}

/// Ranks every query with the model and measures NDCG@k on hybrid-rating
/// gains plus watermark-rate@k. Results do not depend on the order of
/// queries in the dataset.
pub fn evaluate(
    model: &Ensemble,
    dataset: &Dataset,
    params: &MetricParams,
    ks: &[usize],
    model_id: &str,
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::invalid("ks must be positive"));
    }
    let selection = model_selection(model, dataset.feature_dim())?;
    let lists = assemble_rated_lists(dataset, params, &selection)?;

    let mut per_query: Vec<(QueryNdcg, Vec<bool>)> = Vec::with_capacity(lists.len());
    for (group, list) in dataset.groups().iter().zip(&lists) {
        let scores: Vec<f64> = (0..list.features.rows())
            .map(|i| model.predict(list.features.row(i)))
            .collect::<Result<_>>()?;
        let order = rank_by_scores(&scores);
        let ranked_gains: Vec<f64> = order.iter().map(|&i| list.gains[i]).collect();
        let ranked_wm: Vec<bool> = order
            .iter()
            .map(|&i| {
                group.documents[i].wm_label.ok_or_else(|| {
                    Error::invalid(format!(
                        "document '{}' has no wm label",
                        group.documents[i].doc_id
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let ndcgs: Vec<f64> = ks
            .iter()
            .map(|&k| ndcg(&ranked_gains, Truncation::At(k)))
            .collect();
        per_query.push((
            QueryNdcg {
                query_id: group.query_id.clone(),
                ndcg: ndcgs,
            },
            ranked_wm,
        ));
    }
    // fixed accumulation order regardless of input query order
    per_query.sort_by(|a, b| a.0.query_id.cmp(&b.0.query_id));

    let n = per_query.len();
    let mut mean_ndcg = vec![0.0; ks.len()];
    for (q, _) in &per_query {
        for (slot, v) in q.ndcg.iter().enumerate() {
            mean_ndcg[slot] += v;
        }
    }
    for v in &mut mean_ndcg {
        *v /= n as f64;
    }

    let wm_lists: Vec<Vec<bool>> = per_query.iter().map(|(_, wm)| wm.clone()).collect();
    let watermark_rate: Vec<f64> = ks
        .iter()
        .map(|&k| watermark_rate_at_k(&wm_lists, k))
        .collect::<Result<_>>()?;

    Ok(EvalReport {
        model_id: sanitize_id(model_id),
        ks: ks.to_vec(),
        query_count: n,
        mean_ndcg,
        watermark_rate,
        per_query: per_query.into_iter().map(|(q, _)| q).collect(),
    })
}

/// Columns a model expects: its recorded names when present, otherwise
/// all dataset features (which must then match the model width).
pub fn model_selection(model: &Ensemble, feature_dim: usize) -> Result<Vec<FeatureColumn>> {
    if model.feature_columns().is_empty() {
        if model.feature_dim() != feature_dim {
            return Err(Error::invalid(format!(
                "model expects {} features but the dataset has {}",
                model.feature_dim(),
                feature_dim
            )));
        }
        return Ok(default_selection(feature_dim));
    }
    let selection = parse_feature_selection(&model.feature_columns().join(","), feature_dim)?;
    if selection.len() != model.feature_dim() {
        return Err(Error::invalid(format!(
            "model records {} columns but expects {} features",
            selection.len(),
            model.feature_dim()
        )));
    }
    Ok(selection)
}

fn sanitize_id(raw: &str) -> String {
    raw.replace(['\t', '\n'], "_")
}

const REPORT_MAGIC: &str = "rankweave-report v1";

pub fn serialize_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{REPORT_MAGIC}\tmodel={}\tqueries={}",
        report.model_id, report.query_count
    );
    out.push_str("metric\tk\tquery\tvalue\n");
    for (slot, &k) in report.ks.iter().enumerate() {
        let _ = writeln!(out, "ndcg\t{k}\t-\t{}", fmt_f64(report.mean_ndcg[slot]));
    }
    for (slot, &k) in report.ks.iter().enumerate() {
        let _ = writeln!(
            out,
            "watermark_rate\t{k}\t-\t{}",
            fmt_f64(report.watermark_rate[slot])
        );
    }
    for q in &report.per_query {
        for (slot, &k) in report.ks.iter().enumerate() {
            let _ = writeln!(out, "ndcg\t{k}\t{}\t{}", q.query_id, fmt_f64(q.ndcg[slot]));
        }
    }
    out
}

/// Human-oriented aligned-column rendering of a report.
pub fn report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "model {} ({} queries)",
        report.model_id, report.query_count
    );
    let _ = writeln!(
        out,
        "{:>6}  {:>12}  {:>18}",
        "k", "mean ndcg@k", "watermark rate@k"
    );
    for (slot, &k) in report.ks.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k:>6}  {:>12.5}  {:>18.5}",
            report.mean_ndcg[slot], report.watermark_rate[slot]
        );
    }
    out
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_report(report)).map_err(|e| Error::io(path, e))
}

pub fn parse_report(content: &str, source: &str) -> Result<EvalReport> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty report file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    if parts.len() != 3 || parts[0] != REPORT_MAGIC {
        return Err(Error::parse(
            source,
            1,
            format!("bad header, expected '{REPORT_MAGIC}'"),
        ));
    }
    let model_id = parts[1]
        .strip_prefix("model=")
        .ok_or_else(|| Error::parse(source, 1, "missing model id"))?
        .to_string();
    let query_count: usize = parts[2]
        .strip_prefix("queries=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(source, 1, "bad query count"))?;
    let (_, columns) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 2, "missing column header"))?;
    if columns != "metric\tk\tquery\tvalue" {
        return Err(Error::parse(source, 2, "bad column header"));
    }

    let mut ks: Vec<usize> = Vec::new();
    let mut mean_ndcg = Vec::new();
    let mut watermark_rate = Vec::new();
    let mut per_query: Vec<QueryNdcg> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(source, line, "expected 4 columns"));
        }
        let k: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(source, line, "bad k"))?;
        let value: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(source, line, "bad value"))?;
        match (fields[0], fields[2]) {
            ("ndcg", "-") => {
                ks.push(k);
                mean_ndcg.push(value);
            }
            ("watermark_rate", "-") => watermark_rate.push(value),
            ("ndcg", query) => {
                if per_query.last().map(|q| q.query_id.as_str()) != Some(query) {
                    per_query.push(QueryNdcg {
                        query_id: query.to_string(),
                        ndcg: Vec::new(),
                    });
                }
                per_query.last_mut().unwrap().ndcg.push(value);
            }
            (metric, _) => {
                return Err(Error::parse(
                    source,
                    line,
                    format!("unknown metric '{metric}'"),
                ))
            }
        }
    }
    if ks.is_empty() || watermark_rate.len() != ks.len() {
        return Err(Error::parse(
            source,
            1,
            "incomplete report (truncated file?)",
        ));
    }
    for q in &per_query {
        if q.ndcg.len() != ks.len() {
            return Err(Error::parse(
                source,
                1,
                format!(
                    "query '{}' has {} ndcg values, expected {}",
                    q.query_id,
                    q.ndcg.len(),
                    ks.len()
                ),
            ));
        }
    }
    if per_query.len() != query_count {
        return Err(Error::parse(
            source,
            1,
            format!(
                "header says {query_count} queries but {} listed",
                per_query.len()
            ),
        ));
    }
    Ok(EvalReport {
        model_id,
        ks,
        query_count,
        mean_ndcg,
        watermark_rate,
        per_query,
    })
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&content, &path.display().to_string())
}

/// One metric/k line of a control-versus-experiment comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub k: usize,
    pub control: f64,
    pub experiment: f64,
    /// experiment - control.
    pub abs_delta: f64,
    /// (experiment - control) / control; NaN when control is 0.
    pub rel_delta: f64,
    /// (control - experiment) / control; the headline reduction for
    /// watermark rates.
    pub rel_reduction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub control_id: String,
    pub experiment_id: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str, k: usize) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric && r.k == k)
    }
}

/// Metric deltas between two reports over the same dataset and ks.
pub fn compare(control: &EvalReport, experiment: &EvalReport) -> Result<Comparison> {
    if control.ks != experiment.ks {
        return Err(Error::invalid(format!(
            "reports use different ks: {:?} vs {:?}",
            control.ks, experiment.ks
        )));
    }
    if control.query_count != experiment.query_count {
        return Err(Error::invalid(format!(
            "reports cover different datasets: {} vs {} queries",
            control.query_count, experiment.query_count
        )));
    }
    let control_queries: HashSet<&str> = control
        .per_query
        .iter()
        .map(|q| q.query_id.as_str())
        .collect();
    let experiment_queries: HashSet<&str> = experiment
        .per_query
        .iter()
        .map(|q| q.query_id.as_str())
        .collect();
    if control_queries != experiment_queries {
        return Err(Error::invalid("reports cover different query sets"));
    }

    let mut rows = Vec::new();
    let mut push = |metric: &str, k: usize, c: f64, e: f64| {
        let abs_delta = e - c;
        let (rel_delta, rel_reduction) = if c == 0.0 {
            (f64::NAN, f64::NAN)
        } else {
            ((e - c) / c, (c - e) / c)
        };
        rows.push(ComparisonRow {
            metric: metric.to_string(),
            k,
            control: c,
            experiment: e,
            abs_delta,
            rel_delta,
            rel_reduction,
        });
    };
    for (slot, &k) in control.ks.iter().enumerate() {
        push(
            "ndcg",
            k,
            control.mean_ndcg[slot],
            experiment.mean_ndcg[slot],
        );
    }
    for (slot, &k) in control.ks.iter().enumerate() {
        push(
            "watermark_rate",
            k,
            control.watermark_rate[slot],
            experiment.watermark_rate[slot],
        );
    }
    Ok(Comparison {
        control_id: control.model_id.clone(),
        experiment_id: experiment.model_id.clone(),
        rows,
    })
}

const COMPARE_MAGIC: &str = "rankweave-compare v1";

fn fmt_ratio(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        fmt_f64(v)
    }
}

pub fn serialize_comparison(cmp: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{COMPARE_MAGIC}\tcontrol={}\texperiment={}",
        cmp.control_id, cmp.experiment_id
    );
    out.push_str("metric\tk\tcontrol\texperiment\tabs_delta\trel_delta\trel_reduction\n");
    for r in &cmp.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.metric,
            r.k,
            fmt_f64(r.control),
            fmt_f64(r.experiment),
            fmt_f64(r.abs_delta),
            fmt_ratio(r.rel_delta),
            fmt_ratio(r.rel_reduction),
        );
    }
    out
}

pub fn save_comparison(cmp: &Comparison, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_comparison(cmp)).map_err(|e| Error::io(path, e))
}
