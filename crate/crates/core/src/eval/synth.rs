//! Seed-deterministic synthetic corpus with planted ground truth.
//!
//! Documents carry latent (relevance, attractiveness, watermark) labels;
//! features are noisy projections of those labels plus pure-noise
//! distractors. A designated slice of domains concentrates watermarked
//! images, so a domain list built from the corpus has real signal, and
//! the watermark-informative column doubles as the content-classifier
//! probability. Side-by-side verdicts are sampled from the ordinal
//! likelihood under planted metric parameters, which gives the whole
//! pipeline a known ground truth to recover.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Dataset, DocRef, Document, JudgedPair, QueryGroup, Relevance};
use crate::error::{Error, Result};
use crate::metric::{compute_rating, pair_label_probabilities, MetricParams};

/// Planted metric used by default: a noticeable watermark penalty and a
/// verdict scale matched to rating differences in [-1, 1].
pub fn default_planted_params() -> MetricParams {
    MetricParams {
        rating_good: 1.0,
        rating_excellent: 2.0,
        gamma: 0.6,
        wmp: 0.7,
        boundaries: [-0.25, -0.08, 0.08, 0.25],
        sigma: 0.15,
    }
}

/// Generator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_queries: usize,
    pub docs_per_query: usize,
    /// At least 3: relevance, attractiveness, and watermark columns come
    /// first, the rest are noise distractors.
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian corruption on informative columns.
    pub noise_level: f64,
    pub watermark_base_rate: f64,
    pub domain_count: usize,
    /// At least 1; a watermarked image lands in a designated watermark
    /// domain with probability 1 - 1/skew.
    pub domain_skew: f64,
    pub pairs_per_query: usize,
    pub judgments_per_pair: u32,
    pub seed: u64,
    pub planted: MetricParams,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            n_queries: 200,
            docs_per_query: 30,
            feature_dim: 6,
            noise_level: 0.25,
            watermark_base_rate: 0.15,
            domain_count: 25,
            domain_skew: 8.0,
            pairs_per_query: 15,
            judgments_per_pair: 5,
            seed: 0,
            planted: default_planted_params(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 || self.docs_per_query < 2 {
            return Err(Error::invalid("need at least 1 query with 2 documents"));
        }
        if self.feature_dim < 3 {
            return Err(Error::invalid("feature_dim must be at least 3"));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::invalid(
                "noise_level must be a finite non-negative number",
            ));
        }
        if !(self.watermark_base_rate > 0.0 && self.watermark_base_rate < 1.0) {
            return Err(Error::invalid("watermark_base_rate must be in (0,1)"));
        }
        if self.domain_count < 2 {
            return Err(Error::invalid("domain_count must be at least 2"));
        }
        if !(self.domain_skew >= 1.0) {
            return Err(Error::invalid("domain_skew must be at least 1"));
        }
        if self.pairs_per_query == 0 || 2 * self.pairs_per_query > self.docs_per_query {
            return Err(Error::invalid(
                "pairs_per_query must be positive and at most docs_per_query / 2",
            ));
        }
        if self.judgments_per_pair == 0 {
            return Err(Error::invalid("judgments_per_pair must be positive"));
        }
        self.planted.validate()
    }

    fn n_watermark_domains(&self) -> usize {
        (self.domain_count / 5).max(1)
    }

    /// Domains designated to host watermarked images.
    pub fn watermark_domains(&self) -> Vec<String> {
        (0..self.n_watermark_domains())
            .map(|i| format!("stock{i:02}.example.com"))
            .collect()
    }

    /// The remaining, ordinary domains.
    pub fn clean_domains(&self) -> Vec<String> {
        (0..self.domain_count - self.n_watermark_domains())
            .map(|i| format!("img{i:02}.example.net"))
            .collect()
    }
}

fn sample_verdicts(rng: &mut ChaCha12Rng, probs: &[f64; 5], n: u32) -> [u32; 5] {
    let mut counts = [0u32; 5];
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        // the last bucket absorbs any rounding shortfall
        let mut verdict = 4;
        for (j, p) in probs.iter().enumerate().take(4) {
            acc += p;
            if u < acc {
                verdict = j;
                break;
            }
        }
        counts[verdict] += 1;
    }
    counts
}

/// Generates the documents and their side-by-side pairs. Bitwise
/// reproducible for a given config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<(Dataset, Vec<JudgedPair>)> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let wm_domains = config.watermark_domains();
    let clean_domains = config.clean_domains();
    let concentrate = 1.0 - 1.0 / config.domain_skew;

    let mut groups = Vec::with_capacity(config.n_queries);
    let mut pairs = Vec::with_capacity(config.n_queries * config.pairs_per_query);
    for q in 0..config.n_queries {
        let query_id = format!("q{q:04}");
        let mut documents = Vec::with_capacity(config.docs_per_query);
        for d in 0..config.docs_per_query {
            // retrieved candidates skew relevant: Bad 25%, Good 25%, Excellent 50%
            let roll: f64 = rng.random();
            let ir = if roll < 0.25 {
                Relevance::Bad
            } else if roll < 0.5 {
                Relevance::Good
            } else {
                Relevance::Excellent
            };
            let ia: f64 = rng.random_range(0.0..1.0);
            let wm = rng.random_bool(config.watermark_base_rate);
            let domain = if wm && rng.random_bool(concentrate) {
                wm_domains[rng.random_range(0..wm_domains.len())].clone()
            } else {
                clean_domains[rng.random_range(0..clean_domains.len())].clone()
            };
            let mut noise = || -> f64 {
                let draw: f64 = StandardNormal.sample(&mut rng);
                config.noise_level * draw
            };
            let wm_prob = (f64::from(u8::from(wm)) + noise()).clamp(0.0, 1.0);
            let mut features = Vec::with_capacity(config.feature_dim);
            features.push(ir.index() as f64 / 2.0 + noise());
            features.push(ia + noise());
            features.push(wm_prob);
            for _ in 3..config.feature_dim {
                let distractor: f64 = StandardNormal.sample(&mut rng);
                features.push(distractor);
            }
            documents.push(Document {
                query_id: query_id.clone(),
                doc_id: format!("{query_id}-d{d:02}"),
                domain,
                ir_label: ir,
                ia_label: Some(ia),
                wm_label: Some(wm),
                wm_prob: Some(wm_prob),
                features,
            });
        }

        let mut order: Vec<usize> = (0..config.docs_per_query).collect();
        order.shuffle(&mut rng);
        for pair_index in 0..config.pairs_per_query {
            let li = order[2 * pair_index];
            let ri = order[2 * pair_index + 1];
            let (left, right) = (&documents[li], &documents[ri]);
            let mu_l = compute_rating(
                left.ir_label,
                left.ia_label.unwrap(),
                left.wm_label.unwrap(),
                &config.planted,
            );
            let mu_r = compute_rating(
                right.ir_label,
                right.ia_label.unwrap(),
                right.wm_label.unwrap(),
                &config.planted,
            );
            let probs = pair_label_probabilities(mu_l, mu_r, &config.planted);
            let counts = sample_verdicts(&mut rng, &probs, config.judgments_per_pair);
            pairs.push(JudgedPair {
                query_id: query_id.clone(),
                left_id: left.doc_id.clone(),
                right_id: right.doc_id.clone(),
                left: DocRef { group: q, doc: li },
                right: DocRef { group: q, doc: ri },
                verdict_counts: counts,
            });
        }
        groups.push(QueryGroup {
            query_id,
            documents,
        });
    }
    let dataset = Dataset::from_groups(groups, config.feature_dim)?;
    Ok((dataset, pairs))
}
