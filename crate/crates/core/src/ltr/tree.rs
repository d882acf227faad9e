//! Regression trees fit to lambda targets by greedy variance reduction.

use rayon::prelude::*;

use super::{FeatureMatrix, TrainConfig};
use crate::error::{Error, Result};

/// One node of a binary regression tree. Rows with
/// `row[feature] <= threshold` descend left.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A binary regression tree stored as an array of nodes rooted at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> RegressionTree {
        debug_assert!(!nodes.is_empty());
        RegressionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Largest feature index referenced by any split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Best variance-reduction split of `docs`, scanning every feature and
/// every midpoint between consecutive distinct values. Ties go to the
/// lowest feature index, then the lowest threshold.
fn best_split(
    features: &FeatureMatrix,
    lambdas: &[f64],
    docs: &[u32],
    min_docs: usize,
) -> Option<Candidate> {
    let n = docs.len();
    if n < 2 * min_docs {
        return None;
    }
    let total: f64 = docs.iter().map(|&d| lambdas[d as usize]).sum();
    let parent_term = total * total / n as f64;
    // Splits must beat float noise on near-constant targets.
    let min_gain = 1e-10 * (1.0 + parent_term.abs());

    let per_feature: Vec<Option<Candidate>> = (0..features.cols())
        .into_par_iter()
        .map(|f| {
            let mut sorted: Vec<u32> = docs.to_vec();
            sorted.sort_by(|&a, &b| {
                features
                    .get(a as usize, f)
                    .total_cmp(&features.get(b as usize, f))
                    .then_with(|| a.cmp(&b))
            });
            let mut best: Option<Candidate> = None;
            let mut left_sum = 0.0;
            for split in 1..n {
                left_sum += lambdas[sorted[split - 1] as usize];
                let lo = features.get(sorted[split - 1] as usize, f);
                let hi = features.get(sorted[split] as usize, f);
                if lo == hi {
                    continue;
                }
                if split < min_docs || n - split < min_docs {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / split as f64
                    + right_sum * right_sum / (n - split) as f64
                    - parent_term;
                if gain <= min_gain {
                    continue;
                }
                let mut threshold = 0.5 * (lo + hi);
                // keep the predict-time partition identical to the scan
                if !(threshold >= lo && threshold < hi) {
                    threshold = lo;
                }
                let better = match best {
                    None => true,
                    Some(b) => gain > b.gain,
                };
                if better {
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
            best
        })
        .collect();

    let mut best: Option<Candidate> = None;
    for cand in per_feature.into_iter().flatten() {
        best = Some(match best {
            None => cand,
            Some(b) => {
                if cand.gain > b.gain
                    || (cand.gain == b.gain
                        && (cand.feature, cand.threshold) < (b.feature, b.threshold))
                {
                    cand
                } else {
                    b
                }
            }
        });
    }
    best
}

struct OpenLeaf {
    node: usize,
    docs: Vec<u32>,
    candidate: Option<Candidate>,
    created: usize,
}

/// Grows a tree on lambda targets, best-first, until `max_leaves` is
/// reached or no split clears `min_docs_per_leaf`. Leaf values are the
/// Newton step sum(lambda) / sum(hessian), or 0 for a zero hessian.
pub fn fit_tree(
    features: &FeatureMatrix,
    lambdas: &[f64],
    hessians: &[f64],
    config: &TrainConfig,
) -> Result<RegressionTree> {
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit a tree on zero documents"));
    }
    if lambdas.len() != n || hessians.len() != n {
        return Err(Error::invalid("targets do not match the feature rows"));
    }
    if n < config.min_docs_per_leaf {
        return Err(Error::invalid(format!(
            "{n} documents is fewer than min_docs_per_leaf = {}",
            config.min_docs_per_leaf
        )));
    }

    let all: Vec<u32> = (0..n as u32).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenLeaf {
        node: 0,
        docs: all,
        candidate: None,
        created: 0,
    }];
    open[0].candidate = best_split(features, lambdas, &open[0].docs, config.min_docs_per_leaf);
    let mut n_leaves = 1;
    let mut created = 1;

    while n_leaves < config.max_leaves {
        let Some(pick) = open
            .iter()
            .enumerate()
            .filter(|(_, l)| l.candidate.is_some())
            .max_by(|(ia, a), (ib, b)| {
                let (ga, gb) = (a.candidate.unwrap().gain, b.candidate.unwrap().gain);
                ga.total_cmp(&gb)
                    .then_with(|| (a.created, *ia).cmp(&(b.created, *ib)).reverse())
            })
            .map(|(i, _)| i)
        else {
            break;
        };

        let leaf = open.swap_remove(pick);
        let cand = leaf.candidate.unwrap();
        let (left_docs, right_docs): (Vec<u32>, Vec<u32>) = leaf
            .docs
            .iter()
            .partition(|&&d| features.get(d as usize, cand.feature) <= cand.threshold);
        debug_assert!(!left_docs.is_empty() && !right_docs.is_empty());

        let left_index = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right_index = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: left_index,
            right: right_index,
        };
        n_leaves += 1;

        for (node, docs) in [(left_index, left_docs), (right_index, right_docs)] {
            let candidate = best_split(features, lambdas, &docs, config.min_docs_per_leaf);
            open.push(OpenLeaf {
                node,
                docs,
                candidate,
                created,
            });
            created += 1;
        }
    }

    for leaf in &open {
        let sum_lambda: f64 = leaf.docs.iter().map(|&d| lambdas[d as usize]).sum();
        let sum_hessian: f64 = leaf.docs.iter().map(|&d| hessians[d as usize]).sum();
        let value = if sum_hessian == 0.0 {
            0.0
        } else {
            sum_lambda / sum_hessian
        };
        nodes[leaf.node] = Node::Leaf { value };
    }
    Ok(RegressionTree::from_nodes(preorder(&nodes)))
}

/// Renumbers nodes into pre-order so the in-memory layout matches the
/// serialized one.
fn preorder(nodes: &[Node]) -> Vec<Node> {
    fn visit(nodes: &[Node], at: usize, out: &mut Vec<Node>) -> usize {
        let index = out.len();
        match &nodes[at] {
            Node::Leaf { value } => out.push(Node::Leaf { value: *value }),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(Node::Leaf { value: 0.0 });
                let new_left = visit(nodes, *left, out);
                let new_right = visit(nodes, *right, out);
                out[index] = Node::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left: new_left,
                    right: new_right,
                };
            }
        }
        index
    }
    let mut out = Vec::with_capacity(nodes.len());
    visit(nodes, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(rows[0].len());
        for r in rows {
            m.push_row(r).unwrap();
        }
        m
    }

    fn config(max_leaves: usize, min_docs: usize) -> TrainConfig {
        TrainConfig {
            max_leaves,
            min_docs_per_leaf: min_docs,
            ..TrainConfig::default()
        }
    }

    /// Exhaustive oracle: try every (feature, midpoint) split directly.
    fn brute_force_best(
        features: &FeatureMatrix,
        lambdas: &[f64],
        min_docs: usize,
    ) -> Option<(usize, f64, f64)> {
        let n = features.rows();
        let total: f64 = lambdas.iter().sum();
        let parent = total * total / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..features.cols() {
            let mut values: Vec<f64> = (0..n).map(|i| features.get(i, f)).collect();
            values.sort_by(|a, b| a.total_cmp(b));
            values.dedup();
            for w in values.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
                for i in 0..n {
                    if features.get(i, f) <= thr {
                        ls += lambdas[i];
                        ln += 1;
                    } else {
                        rs += lambdas[i];
                        rn += 1;
                    }
                }
                if ln < min_docs || rn < min_docs {
                    continue;
                }
                let gain = ls * ls / ln as f64 + rs * rs / rn as f64 - parent;
                if best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((f, thr, gain));
                }
            }
        }
        best
    }

    #[test]
    fn constant_targets_yield_single_leaf() {
        let m = matrix(&[&[1.0, 5.0], &[2.0, 4.0], &[3.0, 3.0], &[4.0, 2.0]]);
        let lambdas = [0.7; 4];
        let hessians = [1.0; 4];
        let tree = fit_tree(&m, &lambdas, &hessians, &config(8, 1)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert!((tree.predict(&[9.0, 9.0]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn perfect_split_matches_brute_force() {
        let m = matrix(&[&[0.1, 7.0], &[0.2, 3.0], &[0.9, 5.0], &[0.8, 1.0]]);
        let lambdas = [-1.0, -1.0, 2.0, 2.0];
        let hessians = [1.0; 4];
        let tree = fit_tree(&m, &lambdas, &hessians, &config(2, 1)).unwrap();
        assert_eq!(tree.n_leaves(), 2);
        let (f, thr, _) = brute_force_best(&m, &lambdas, 1).unwrap();
        match &tree.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, f);
                assert!((threshold - thr).abs() < 1e-12);
            }
            other => panic!("expected a split at the root, got {other:?}"),
        }
        assert_eq!(tree.predict(&[0.15, 0.0]), -1.0);
        assert_eq!(tree.predict(&[0.85, 0.0]), 2.0);
    }

    #[test]
    fn deeper_tree_matches_greedy_oracle() {
        // 64 docs, 3 features; checks the first split against the oracle
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut lambdas = Vec::new();
        for _ in 0..64 {
            let r: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            lambdas.push(if r[1] > 0.2 { 1.5 } else { -0.5 } + rng.random_range(-0.01..0.01));
            rows.push(r);
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        let hessians = vec![1.0; 64];
        let tree = fit_tree(&m, &lambdas, &hessians, &config(4, 2)).unwrap();
        let (f, thr, _) = brute_force_best(&m, &lambdas, 2).unwrap();
        match &tree.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, f);
                assert!((threshold - thr).abs() < 1e-12);
            }
            other => panic!("expected a split, got {other:?}"),
        }
        assert!(tree.n_leaves() <= 4);
    }

    #[test]
    fn single_leaf_newton_value() {
        let m = matrix(&[&[1.0], &[2.0], &[3.0]]);
        let lambdas = [3.0, -1.0, 2.0];
        let hessians = [2.0, 1.0, 1.0];
        let tree = fit_tree(&m, &lambdas, &hessians, &config(1, 1)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert!((tree.predict(&[0.0]) - 1.0).abs() < 1e-12); // 4 / 4
    }

    #[test]
    fn zero_hessian_leaf_is_zero() {
        let m = matrix(&[&[1.0], &[2.0]]);
        let tree = fit_tree(&m, &[0.0, 0.0], &[0.0, 0.0], &config(1, 1)).unwrap();
        assert_eq!(tree.predict(&[1.5]), 0.0);
    }

    #[test]
    fn respects_min_docs_per_leaf() {
        let m = matrix(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let lambdas = [5.0, -5.0, 5.0, -5.0];
        let hessians = [1.0; 4];
        let tree = fit_tree(&m, &lambdas, &hessians, &config(8, 2)).unwrap();
        // every leaf must keep >= 2 docs, so 4 docs allow at most 2 leaves
        assert!(tree.n_leaves() <= 2);
        assert!(fit_tree(&m, &lambdas, &hessians, &config(8, 5)).is_err());
    }

    #[test]
    fn rejects_empty_input() {
        let m = FeatureMatrix::new(2);
        assert!(fit_tree(&m, &[], &[], &config(4, 1)).is_err());
    }
}
