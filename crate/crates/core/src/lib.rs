//! Watermark-aware learning-to-rank toolkit.
//!
//! The pipeline runs in five stages, one module each:
//!
//! 1. [`corpus`] — judged documents and side-by-side pairs, parsed from
//!    tab-separated files.
//! 2. [`watermark`] — the domain-based watermark list and fusion with a
//!    content-classifier probability.
//! 3. [`metric`] — the hybrid relevance/attractiveness/watermark rating
//!    and the ordinal likelihood that learns its weights from verdicts.
//! 4. [`ltr`] — LambdaMART: NDCG over hybrid-rating gains, lambda
//!    gradients, regression trees, and the boosting loop.
//! 5. [`eval`] — NDCG@k and watermark-rate@k reports, ranker comparison,
//!    and a synthetic corpus generator for end-to-end experiments.
//!
//! # Example
//!
//! Generate a small corpus with planted ground truth, learn the metric
//! from its side-by-side verdicts, train a ranker on the fused watermark
//! feature, and evaluate it:
//!
//! ```
//! use rankweave_core::eval::synth::{generate_synthetic, SynthConfig};
//! use rankweave_core::eval::{assemble_rated_lists, evaluate, parse_feature_selection};
//! use rankweave_core::ltr::{train_lambdamart, TrainConfig};
//! use rankweave_core::metric::{fit_metric, observations, FitConfig, MetricParams};
//! use rankweave_core::watermark::{build_domain_list, fuse_probability};
//! use rankweave_core::Dataset;
//!
//! # fn main() -> rankweave_core::Result<()> {
//! let synth = SynthConfig { n_queries: 20, seed: 1, ..SynthConfig::default() };
//! let (docs, pairs) = generate_synthetic(&synth)?;
//!
//! let obs = observations(&docs, &pairs)?;
//! let fit = FitConfig { max_iters: 200, ..FitConfig::default() };
//! let (params, _report) = fit_metric(&obs, &fit, &MetricParams::default_init())?;
//!
//! let (domains, _summary) = build_domain_list(&docs, 5, 0.90)?;
//! let mut groups = docs.groups().to_vec();
//! for group in &mut groups {
//!     for doc in &mut group.documents {
//!         doc.wm_prob = Some(fuse_probability(&doc.domain, doc.wm_prob, &domains)?);
//!     }
//! }
//! let fused = Dataset::from_groups(groups, docs.feature_dim())?;
//!
//! let columns = parse_feature_selection("f0,f1,wm_prob", fused.feature_dim())?;
//! let lists = assemble_rated_lists(&fused, &params, &columns)?;
//! let config = TrainConfig { n_trees: 30, ..TrainConfig::default() };
//! let (mut model, _trace) = train_lambdamart(&lists, &config)?;
//! model.set_feature_columns(columns.iter().map(|c| c.name()).collect());
//!
//! let report = evaluate(&model, &fused, &params, &[5, 10], "demo")?;
//! assert_eq!(report.query_count, 20);
//! assert!(report.mean_ndcg[0] > 0.5);
//! # Ok(())
//! # }
//! ```

pub mod corpus;
pub mod error;
pub mod eval;
pub mod ltr;
pub mod metric;
pub mod watermark;

pub use corpus::{Dataset, Document, JudgedPair, QueryGroup, Relevance};
pub use error::{Error, Result};
pub use eval::synth::SynthConfig;
pub use eval::{Comparison, EvalReport};
pub use ltr::{Ensemble, FeatureMatrix, RatedList, RegressionTree, TrainConfig, Truncation};
pub use metric::{DocLabels, FitConfig, FitReport, MetricParams, PairObservation};
pub use watermark::{DomainList, DomainStats};
