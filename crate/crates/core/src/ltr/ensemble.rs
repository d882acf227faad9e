//! Boosting loop, prediction, and the versioned model file.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::ndcg::{lambda_gradients, ndcg};
use super::tree::{fit_tree, Node, RegressionTree};
use super::{rank_by_scores, FeatureMatrix, RatedList, TrainConfig, Truncation};
use crate::corpus::fmt_f64;
use crate::error::{Error, Result};

/// A trained LambdaMART model: an ordered list of regression trees whose
/// outputs are summed with a shrinkage weight on top of a base score.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    trees: Vec<RegressionTree>,
    shrinkage: f64,
    base_score: f64,
    feature_dim: usize,
    config: TrainConfig,
    /// Names of the dataset columns each feature index was built from;
    /// empty when the caller assembled rows directly.
    feature_columns: Vec<String>,
}

impl Ensemble {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn feature_columns(&self) -> &[String] {
        &self.feature_columns
    }

    pub fn set_feature_columns(&mut self, columns: Vec<String>) {
        self.feature_columns = columns;
    }

    /// Score for one feature row.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_dim {
            return Err(Error::invalid(format!(
                "feature row has {} values but the model expects {}",
                row.len(),
                self.feature_dim
            )));
        }
        Ok(self.predict_unchecked(row))
    }

    fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let tree_sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.shrinkage * tree_sum
    }

    /// Ranks one query's documents: returns the doc indices in descending
    /// score order, ties broken by original index.
    pub fn rank(&self, list: &RatedList) -> Result<Vec<usize>> {
        list.validate()?;
        if list.features.cols() != self.feature_dim {
            return Err(Error::invalid(format!(
                "query '{}' has {} features but the model expects {}",
                list.query_id,
                list.features.cols(),
                self.feature_dim
            )));
        }
        let scores: Vec<f64> = (0..list.features.rows())
            .map(|i| self.predict_unchecked(list.features.row(i)))
            .collect();
        Ok(rank_by_scores(&scores))
    }
}

/// Trains a LambdaMART ensemble. Returns the model and the mean training
/// NDCG recorded after each boosting iteration.
///
/// Training is deterministic: no sampling is used, per-query lambda
/// results are scattered into disjoint slices, and the per-feature split
/// search merges in fixed feature order, so the result is independent of
/// worker count.
pub fn train_lambdamart(
    queries: &[RatedList],
    config: &TrainConfig,
) -> Result<(Ensemble, Vec<f64>)> {
    config.validate()?;
    if queries.is_empty() {
        return Err(Error::invalid("cannot train on zero queries"));
    }
    let feature_dim = queries[0].features.cols();
    for q in queries {
        q.validate()?;
        if q.features.cols() != feature_dim {
            return Err(Error::invalid(format!(
                "query '{}' has {} features, expected {}",
                q.query_id,
                q.features.cols(),
                feature_dim
            )));
        }
    }

    let mut offsets = Vec::with_capacity(queries.len());
    let mut features = FeatureMatrix::new(feature_dim);
    let mut gains = Vec::new();
    for q in queries {
        offsets.push(gains.len());
        for i in 0..q.features.rows() {
            features.push_row(q.features.row(i))?;
        }
        gains.extend_from_slice(&q.gains);
    }
    let total_docs = gains.len();
    let base_score = 0.0;

    let mut scores = vec![base_score; total_docs];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut trace = Vec::with_capacity(config.n_trees);

    for _ in 0..config.n_trees {
        let per_query: Vec<(Vec<f64>, Vec<f64>)> = queries
            .par_iter()
            .enumerate()
            .map(|(qi, q)| {
                let lo = offsets[qi];
                let hi = lo + q.gains.len();
                lambda_gradients(
                    &scores[lo..hi],
                    &q.gains,
                    config.ndcg_truncation,
                    config.lambda_sigma,
                )
            })
            .collect();
        let mut lambdas = vec![0.0; total_docs];
        let mut hessians = vec![0.0; total_docs];
        for (qi, (l, h)) in per_query.into_iter().enumerate() {
            let lo = offsets[qi];
            lambdas[lo..lo + l.len()].copy_from_slice(&l);
            hessians[lo..lo + h.len()].copy_from_slice(&h);
        }

        let tree = fit_tree(&features, &lambdas, &hessians, config)?;
        for (i, score) in scores.iter_mut().enumerate() {
            *score += config.shrinkage * tree.predict(features.row(i));
        }
        trees.push(tree);
        trace.push(mean_training_ndcg(
            queries,
            &offsets,
            &scores,
            config.ndcg_truncation,
        ));
    }

    Ok((
        Ensemble {
            trees,
            shrinkage: config.shrinkage,
            base_score,
            feature_dim,
            config: config.clone(),
            feature_columns: Vec::new(),
        },
        trace,
    ))
}

fn mean_training_ndcg(
    queries: &[RatedList],
    offsets: &[usize],
    scores: &[f64],
    truncation: Truncation,
) -> f64 {
    let mut total = 0.0;
    for (qi, q) in queries.iter().enumerate() {
        let lo = offsets[qi];
        let order = rank_by_scores(&scores[lo..lo + q.gains.len()]);
        let ranked: Vec<f64> = order.iter().map(|&i| q.gains[i]).collect();
        total += ndcg(&ranked, truncation);
    }
    total / queries.len() as f64
}

const MODEL_MAGIC: &str = "rankweave-model v1";

pub fn serialize_model(model: &Ensemble) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "feature_dim\t{}", model.feature_dim);
    let _ = writeln!(out, "shrinkage\t{}", fmt_f64(model.shrinkage));
    let _ = writeln!(out, "base_score\t{}", fmt_f64(model.base_score));
    let _ = writeln!(out, "n_trees\t{}", model.trees.len());
    let _ = writeln!(
        out,
        "features\t{}",
        if model.feature_columns.is_empty() {
            "-".to_string()
        } else {
            model.feature_columns.join(",")
        }
    );
    let c = &model.config;
    let _ = writeln!(
        out,
        "config\tn_trees={}\tshrinkage={}\tmax_leaves={}\tmin_docs_per_leaf={}\tlambda_sigma={}\tndcg_truncation={}\tseed={}",
        c.n_trees,
        fmt_f64(c.shrinkage),
        c.max_leaves,
        c.min_docs_per_leaf,
        fmt_f64(c.lambda_sigma),
        c.ndcg_truncation,
        c.seed
    );
    for (i, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree\t{i}\t{}", tree.nodes().len());
        write_preorder(&mut out, tree.nodes(), 0);
    }
    out
}

fn write_preorder(out: &mut String, nodes: &[Node], at: usize) {
    match &nodes[at] {
        Node::Leaf { value } => {
            let _ = writeln!(out, "leaf\t{}", fmt_f64(*value));
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "split\t{feature}\t{}", fmt_f64(*threshold));
            write_preorder(out, nodes, *left);
            write_preorder(out, nodes, *right);
        }
    }
}

pub fn save_model(model: &Ensemble, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_model(model)).map_err(|e| Error::io(path, e))
}

enum RawNode {
    Split { feature: usize, threshold: f64 },
    Leaf { value: f64 },
}

/// Rebuilds one tree from its pre-order listing.
fn build_tree(raw: &[RawNode], cursor: &mut usize, nodes: &mut Vec<Node>) -> Result<usize> {
    let Some(node) = raw.get(*cursor) else {
        return Err(Error::invalid("tree listing ended early (truncated file?)"));
    };
    *cursor += 1;
    let index = nodes.len();
    match node {
        RawNode::Leaf { value } => {
            nodes.push(Node::Leaf { value: *value });
        }
        RawNode::Split { feature, threshold } => {
            nodes.push(Node::Leaf { value: 0.0 });
            let left = build_tree(raw, cursor, nodes)?;
            let right = build_tree(raw, cursor, nodes)?;
            nodes[index] = Node::Split {
                feature: *feature,
                threshold: *threshold,
                left,
                right,
            };
        }
    }
    Ok(index)
}

pub fn parse_model(content: &str, source: &str) -> Result<Ensemble> {
    let mut lines = content.lines().enumerate().peekable();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty model file"))?;
    if header != MODEL_MAGIC {
        return Err(Error::parse(
            source,
            1,
            format!("bad header, expected '{MODEL_MAGIC}'"),
        ));
    }

    let mut expect_kv = |key: &str| -> Result<String> {
        let (idx, raw) = lines.next().ok_or_else(|| {
            Error::parse(source, 1, format!("missing '{key}' line (truncated file?)"))
        })?;
        let (k, v) = raw
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, idx + 1, "expected 'key\\tvalue'"))?;
        if k != key {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("expected key '{key}', got '{k}'"),
            ));
        }
        Ok(v.to_string())
    };

    let feature_dim: usize = expect_kv("feature_dim")?
        .parse()
        .map_err(|_| Error::parse(source, 2, "bad feature_dim"))?;
    let shrinkage: f64 = expect_kv("shrinkage")?
        .parse()
        .map_err(|_| Error::parse(source, 3, "bad shrinkage"))?;
    let base_score: f64 = expect_kv("base_score")?
        .parse()
        .map_err(|_| Error::parse(source, 4, "bad base_score"))?;
    let n_trees: usize = expect_kv("n_trees")?
        .parse()
        .map_err(|_| Error::parse(source, 5, "bad n_trees"))?;
    let features_raw = expect_kv("features")?;
    let feature_columns: Vec<String> = if features_raw == "-" {
        Vec::new()
    } else {
        features_raw.split(',').map(str::to_string).collect()
    };
    let config_raw = expect_kv("config")?;
    let config = parse_config_line(&config_raw, source)?;
    if config.shrinkage != shrinkage {
        return Err(Error::parse(
            source,
            7,
            "config shrinkage disagrees with the header",
        ));
    }

    let mut trees = Vec::with_capacity(n_trees);
    for expected_index in 0..n_trees {
        let (idx, raw) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "missing tree (truncated file?)"))?;
        let parts: Vec<&str> = raw.split('\t').collect();
        if parts.len() != 3 || parts[0] != "tree" {
            return Err(Error::parse(source, idx + 1, "expected a 'tree' line"));
        }
        let tree_index: usize = parts[1]
            .parse()
            .map_err(|_| Error::parse(source, idx + 1, "bad tree index"))?;
        if tree_index != expected_index {
            return Err(Error::parse(source, idx + 1, "tree indices out of order"));
        }
        let n_nodes: usize = parts[2]
            .parse()
            .map_err(|_| Error::parse(source, idx + 1, "bad node count"))?;

        let mut raw_nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (nidx, nraw) = lines
                .next()
                .ok_or_else(|| Error::parse(source, 1, "missing node (truncated file?)"))?;
            let fields: Vec<&str> = nraw.split('\t').collect();
            let node = match fields.as_slice() {
                ["leaf", v] => RawNode::Leaf {
                    value: v
                        .parse()
                        .map_err(|_| Error::parse(source, nidx + 1, "bad leaf value"))?,
                },
                ["split", f, t] => {
                    let feature: usize = f
                        .parse()
                        .map_err(|_| Error::parse(source, nidx + 1, "bad split feature"))?;
                    if feature >= feature_dim {
                        return Err(Error::parse(
                            source,
                            nidx + 1,
                            format!("split feature {feature} out of range for dim {feature_dim}"),
                        ));
                    }
                    RawNode::Split {
                        feature,
                        threshold: t
                            .parse()
                            .map_err(|_| Error::parse(source, nidx + 1, "bad split threshold"))?,
                    }
                }
                _ => {
                    return Err(Error::parse(
                        source,
                        nidx + 1,
                        "expected a 'split' or 'leaf' line",
                    ))
                }
            };
            raw_nodes.push(node);
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut cursor = 0;
        build_tree(&raw_nodes, &mut cursor, &mut nodes)?;
        if cursor != raw_nodes.len() {
            return Err(Error::parse(source, 1, "tree listing has trailing nodes"));
        }
        trees.push(RegressionTree::from_nodes(nodes));
    }
    if lines.next().is_some() {
        return Err(Error::parse(
            source,
            1,
            "trailing content after the last tree",
        ));
    }

    Ok(Ensemble {
        trees,
        shrinkage,
        base_score,
        feature_dim,
        config,
        feature_columns,
    })
}

fn parse_config_line(raw: &str, source: &str) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    for part in raw.split('\t') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::parse(source, 7, format!("bad config entry '{part}'")))?;
        let bad = |what: &str| Error::parse(source, 7, format!("bad config {what} '{v}'"));
        match k {
            "n_trees" => config.n_trees = v.parse().map_err(|_| bad("n_trees"))?,
            "shrinkage" => config.shrinkage = v.parse().map_err(|_| bad("shrinkage"))?,
            "max_leaves" => config.max_leaves = v.parse().map_err(|_| bad("max_leaves"))?,
            "min_docs_per_leaf" => {
                config.min_docs_per_leaf = v.parse().map_err(|_| bad("min_docs_per_leaf"))?
            }
            "lambda_sigma" => config.lambda_sigma = v.parse().map_err(|_| bad("lambda_sigma"))?,
            "ndcg_truncation" => config.ndcg_truncation = Truncation::parse(v)?,
            "seed" => config.seed = v.parse().map_err(|_| bad("seed"))?,
            other => {
                return Err(Error::parse(
                    source,
                    7,
                    format!("unknown config key '{other}'"),
                ))
            }
        }
    }
    Ok(config)
}

pub fn load_model(path: &Path) -> Result<Ensemble> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&content, &path.display().to_string())
}
