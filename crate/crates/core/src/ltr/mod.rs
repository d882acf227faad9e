//! LambdaMART learning-to-rank: NDCG over hybrid-rating gains, lambda
//! gradients, regression-tree fitting, and the boosting loop.

mod ensemble;
mod ndcg;
mod tree;

pub use ensemble::{
    load_model, parse_model, save_model, serialize_model, train_lambdamart, Ensemble,
};
pub use ndcg::{dcg, delta_ndcg, gain, lambda_gradients, ndcg, Truncation};
pub use tree::{fit_tree, Node, RegressionTree};

use crate::error::{Error, Result};

/// Row-major feature matrix, one row per document.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(cols: usize) -> FeatureMatrix {
        FeatureMatrix {
            data: Vec::new(),
            cols,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::invalid(format!(
                "feature row has {} values, expected {}",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// One query's documents ready for training: per-document gains and
/// feature rows, in the same order.
#[derive(Clone, Debug, PartialEq)]
pub struct RatedList {
    pub query_id: String,
    pub gains: Vec<f64>,
    pub features: FeatureMatrix,
}

impl RatedList {
    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::invalid(format!(
                "query '{}' has no documents",
                self.query_id
            )));
        }
        if self.gains.len() != self.features.rows() {
            return Err(Error::invalid(format!(
                "query '{}': {} gains but {} feature rows",
                self.query_id,
                self.gains.len(),
                self.features.rows()
            )));
        }
        if self.gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid(format!(
                "query '{}' has a negative or non-finite gain",
                self.query_id
            )));
        }
        Ok(())
    }
}

/// LambdaMART hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub shrinkage: f64,
    pub max_leaves: usize,
    pub min_docs_per_leaf: usize,
    /// Sharpness of the pairwise logistic force.
    pub lambda_sigma: f64,
    pub ndcg_truncation: Truncation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            n_trees: 200,
            shrinkage: 0.1,
            max_leaves: 16,
            min_docs_per_leaf: 5,
            lambda_sigma: 1.0,
            ndcg_truncation: Truncation::Full,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::invalid(format!(
                "shrinkage must be in (0,1], got {}",
                self.shrinkage
            )));
        }
        if self.max_leaves < 1 || self.min_docs_per_leaf < 1 {
            return Err(Error::invalid(
                "max_leaves and min_docs_per_leaf must be at least 1",
            ));
        }
        if !(self.lambda_sigma > 0.0) {
            return Err(Error::invalid(format!(
                "lambda_sigma must be positive, got {}",
                self.lambda_sigma
            )));
        }
        if let Truncation::At(0) = self.ndcg_truncation {
            return Err(Error::invalid("ndcg truncation must be positive"));
        }
        Ok(())
    }
}

/// Rank permutation for a score vector: descending score, ties broken by
/// original index. Invariant under any positive affine rescaling.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(&b)));
    order
}
