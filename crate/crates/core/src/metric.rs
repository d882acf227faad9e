//! Hybrid relevance/attractiveness/watermark rating and the ordinal
//! pairwise likelihood used to learn its parameters.
//!
//! A document's rating is built from its relevance grade, attractiveness
//! score, and watermark flag: the grade fixes a bucket, a `1 - gamma`
//! slice of the bucket is a guaranteed margin over the grade below, and
//! the remaining `gamma` slice scales with the (watermark-penalized)
//! attractiveness. Ratings are normalized by the top grade's level so the
//! output lives in [0, 1].
//!
//! Side-by-side verdicts are modeled as a five-way ordinal outcome of the
//! rating difference: the difference is normal with mean `mu_left -
//! mu_right` and standard deviation `sqrt(2) * sigma`, and four learned
//! boundaries cut the axis into the five verdict regions. Fitting
//! maximizes the multinomial likelihood of the observed verdict counts by
//! full-batch gradient descent in an unconstrained reparameterization.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{fmt_f64, Dataset, Document, JudgedPair, Relevance};
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.3989422804014327;
/// Floor applied to probabilities inside the log only.
const PROB_FLOOR: f64 = 1e-12;

/// Learnable parameters of the hybrid rating and the verdict model.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricParams {
    /// Best rating for the Good grade; the Bad level is fixed at 0.
    pub rating_good: f64,
    /// Best rating for the Excellent grade; also the normalizer.
    pub rating_excellent: f64,
    /// Fraction of each bucket modulated by attractiveness, in (0, 1).
    pub gamma: f64,
    /// Watermark penalty applied multiplicatively to attractiveness.
    pub wmp: f64,
    /// Strictly increasing verdict boundaries b0 < b1 < b2 < b3.
    pub boundaries: [f64; 4],
    /// Shared per-image rating standard deviation.
    pub sigma: f64,
}

impl MetricParams {
    /// Symmetric starting point: every verdict has comfortable mass.
    pub fn default_init() -> MetricParams {
        MetricParams {
            rating_good: 1.0,
            rating_excellent: 2.0,
            gamma: 0.5,
            wmp: 0.5,
            boundaries: [-0.6, -0.2, 0.2, 0.6],
            sigma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rating_good > 0.0 && self.rating_excellent > self.rating_good) {
            return Err(Error::invalid(format!(
                "need 0 < rating_good < rating_excellent, got {} and {}",
                self.rating_good, self.rating_excellent
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "gamma must be in (0,1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.wmp) {
            return Err(Error::invalid(format!(
                "wmp must be in [0,1], got {}",
                self.wmp
            )));
        }
        let b = &self.boundaries;
        if !(b[0] < b[1] && b[1] < b[2] && b[2] < b[3]) {
            return Err(Error::invalid(format!(
                "boundaries must increase strictly, got {b:?}"
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        for v in [
            self.rating_good,
            self.rating_excellent,
            self.gamma,
            self.wmp,
            self.sigma,
        ]
        .iter()
        .chain(b.iter())
        {
            if !v.is_finite() {
                return Err(Error::invalid("non-finite metric parameter"));
            }
        }
        Ok(())
    }

    /// Rating levels indexed by relevance grade: [0, good, excellent].
    pub fn rating_levels(&self) -> [f64; 3] {
        [0.0, self.rating_good, self.rating_excellent]
    }

    /// Maps into the unconstrained coordinates used by the optimizer:
    /// `[ln good, ln(excellent-good), logit gamma, logit wmp,
    ///   b0, ln(b1-b0), ln(b2-b1), ln(b3-b2), ln sigma]`.
    pub fn to_unconstrained(&self) -> [f64; 9] {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let b = &self.boundaries;
        [
            self.rating_good.ln(),
            (self.rating_excellent - self.rating_good).ln(),
            logit(self.gamma),
            logit(self.wmp),
            b[0],
            (b[1] - b[0]).ln(),
            (b[2] - b[1]).ln(),
            (b[3] - b[2]).ln(),
            self.sigma.ln(),
        ]
    }

    /// Inverse of [`to_unconstrained`]; the result satisfies every
    /// parameter invariant by construction.
    ///
    /// [`to_unconstrained`]: MetricParams::to_unconstrained
    pub fn from_unconstrained(theta: &[f64; 9]) -> MetricParams {
        let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
        let good = theta[0].exp();
        let b0 = theta[4];
        let b1 = b0 + theta[5].exp();
        let b2 = b1 + theta[6].exp();
        let b3 = b2 + theta[7].exp();
        MetricParams {
            rating_good: good,
            rating_excellent: good + theta[1].exp(),
            gamma: logistic(theta[2]),
            wmp: logistic(theta[3]),
            boundaries: [b0, b1, b2, b3],
            sigma: theta[8].exp(),
        }
    }
}

/// The three labels the rating consumes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DocLabels {
    pub ir: Relevance,
    pub ia: f64,
    pub wm: bool,
}

impl DocLabels {
    /// Extracts the labels a rating needs, failing loudly on absent ones.
    pub fn from_document(doc: &Document) -> Result<DocLabels> {
        let ia = doc
            .ia_label
            .ok_or_else(|| Error::invalid(format!("document '{}' has no ia label", doc.doc_id)))?;
        let wm = doc
            .wm_label
            .ok_or_else(|| Error::invalid(format!("document '{}' has no wm label", doc.doc_id)))?;
        Ok(DocLabels {
            ir: doc.ir_label,
            ia,
            wm,
        })
    }
}

/// A resolved side-by-side observation: both documents' labels plus the
/// five verdict counts.
#[derive(Clone, Debug, PartialEq)]
pub struct PairObservation {
    pub left: DocLabels,
    pub right: DocLabels,
    pub counts: [u32; 5],
}

/// Resolves parsed pairs into label observations for the metric ops.
pub fn observations(dataset: &Dataset, pairs: &[JudgedPair]) -> Result<Vec<PairObservation>> {
    pairs
        .iter()
        .map(|p| {
            Ok(PairObservation {
                left: DocLabels::from_document(dataset.document(p.left))?,
                right: DocLabels::from_document(dataset.document(p.right))?,
                counts: p.verdict_counts,
            })
        })
        .collect()
}

/// Hybrid rating in [0, 1] for one document's labels.
pub fn compute_rating(ir: Relevance, ia: f64, wm: bool, params: &MetricParams) -> f64 {
    let levels = params.rating_levels();
    let top = levels[ir.index()];
    let prev = levels[ir.index().saturating_sub(1)];
    let bucket = top - prev;
    let ia_eff = (1.0 - params.wmp * f64::from(u8::from(wm))) * ia;
    let raw = prev + bucket * (1.0 - params.gamma) + ia_eff * bucket * params.gamma;
    // the exact value lives in [0, 1]; the clamp only shaves float dust
    (raw / params.rating_excellent).clamp(0.0, 1.0)
}

/// Partials of a rating with respect to the four natural rating
/// parameters, used by the likelihood gradient.
#[derive(Clone, Copy, Debug, Default)]
struct RatingGrad {
    d_good: f64,
    d_excellent: f64,
    d_gamma: f64,
    d_wmp: f64,
}

fn rating_with_grad(labels: &DocLabels, params: &MetricParams) -> (f64, RatingGrad) {
    let levels = params.rating_levels();
    let d_levels_good = [0.0, 1.0, 0.0];
    let d_levels_exc = [0.0, 0.0, 1.0];
    let i = labels.ir.index();
    let p = i.saturating_sub(1);

    let top = levels[i];
    let prev = levels[p];
    let bucket = top - prev;
    let wm = f64::from(u8::from(labels.wm));
    let ia_eff = (1.0 - params.wmp * wm) * labels.ia;
    let d_ia_eff_d_wmp = -wm * labels.ia;

    // c is the bucket fraction actually awarded.
    let c = (1.0 - params.gamma) + ia_eff * params.gamma;
    let d_c_d_gamma = ia_eff - 1.0;
    let d_c_d_wmp = params.gamma * d_ia_eff_d_wmp;

    let raw = prev + bucket * c;
    let d_raw_d_good = d_levels_good[p] + (d_levels_good[i] - d_levels_good[p]) * c;
    let d_raw_d_exc = d_levels_exc[p] + (d_levels_exc[i] - d_levels_exc[p]) * c;
    let d_raw_d_gamma = bucket * d_c_d_gamma;
    let d_raw_d_wmp = bucket * d_c_d_wmp;

    let e = params.rating_excellent;
    let rating = (raw / e).clamp(0.0, 1.0);
    let grad = RatingGrad {
        d_good: d_raw_d_good / e,
        d_excellent: d_raw_d_exc / e - raw / (e * e),
        d_gamma: d_raw_d_gamma / e,
        d_wmp: d_raw_d_wmp / e,
    };
    (rating, grad)
}

/// Standard normal CDF, accurate to well below 1e-7 absolute error.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// P(Z > z); keeps full relative precision in the upper tail.
fn normal_upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// P(z_lo < Z <= z_hi), differencing on whichever tail avoids
/// cancellation so tiny buckets keep relative precision.
fn normal_bucket(z_lo: f64, z_hi: f64) -> f64 {
    if z_lo >= 0.0 {
        normal_upper_tail(z_lo) - normal_upper_tail(z_hi)
    } else {
        standard_normal_cdf(z_hi) - standard_normal_cdf(z_lo)
    }
}

fn standard_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn verdict_probabilities_from_z(z: &[f64; 4]) -> [f64; 5] {
    [
        normal_upper_tail(z[3]),
        normal_bucket(z[2], z[3]),
        normal_bucket(z[1], z[2]),
        normal_bucket(z[0], z[1]),
        standard_normal_cdf(z[0]),
    ]
}

/// Probabilities of the five verdicts for a pair with the given rating
/// means. Index 0 ("left better") is the mass of the rating difference
/// above b3; index 4 ("right better") the mass below b0.
pub fn pair_label_probabilities(mu_left: f64, mu_right: f64, params: &MetricParams) -> [f64; 5] {
    let dmu = mu_left - mu_right;
    let dsigma = SQRT_2 * params.sigma;
    let mut z = [0.0f64; 4];
    for (zk, b) in z.iter_mut().zip(&params.boundaries) {
        *zk = (b - dmu) / dsigma;
    }
    verdict_probabilities_from_z(&z)
}

fn pair_mu(obs: &PairObservation, params: &MetricParams) -> (f64, f64) {
    (
        compute_rating(obs.left.ir, obs.left.ia, obs.left.wm, params),
        compute_rating(obs.right.ir, obs.right.ia, obs.right.wm, params),
    )
}

/// Negative log-likelihood of the verdict counts. Probabilities are
/// floored at 1e-12 inside the log to keep extreme tails finite.
pub fn metric_loss(pairs: &[PairObservation], params: &MetricParams) -> f64 {
    let mut cost = 0.0;
    for obs in pairs {
        let (mu_l, mu_r) = pair_mu(obs, params);
        let p = pair_label_probabilities(mu_l, mu_r, params);
        for (count, prob) in obs.counts.iter().zip(&p) {
            if *count > 0 {
                cost -= f64::from(*count) * prob.max(PROB_FLOOR).ln();
            }
        }
    }
    cost
}

/// Partials of [`metric_loss`] with respect to the natural parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NaturalGradient {
    pub d_rating_good: f64,
    pub d_rating_excellent: f64,
    pub d_gamma: f64,
    pub d_wmp: f64,
    pub d_boundaries: [f64; 4],
    pub d_sigma: f64,
}

/// Analytic gradient in natural-parameter space (unclamped
/// probabilities), summed over pairs in order.
pub fn metric_gradient_natural(
    pairs: &[PairObservation],
    params: &MetricParams,
) -> NaturalGradient {
    let mut g = NaturalGradient::default();
    let dsigma = SQRT_2 * params.sigma;
    for obs in pairs {
        let (mu_l, grad_l) = rating_with_grad(&obs.left, params);
        let (mu_r, grad_r) = rating_with_grad(&obs.right, params);
        let dmu = mu_l - mu_r;

        let mut z = [0.0f64; 4];
        let mut pdf = [0.0f64; 4];
        for k in 0..4 {
            z[k] = (params.boundaries[k] - dmu) / dsigma;
            pdf[k] = standard_normal_pdf(z[k]);
        }
        let q = verdict_probabilities_from_z(&z);
        let n: Vec<f64> = obs.counts.iter().map(|&c| f64::from(c)).collect();

        let mut d_dmu = 0.0;
        let mut d_dsigma = 0.0;
        for k in 0..4 {
            // cost = -sum_j n_j ln q_j with q as differences of phi values;
            // phi_k appears positively in q_{3-k} and negatively in q_{4-k}.
            let d_cost_d_phi = n[3 - k] / q[3 - k] - n[4 - k] / q[4 - k];
            g.d_boundaries[k] += d_cost_d_phi * pdf[k] / dsigma;
            d_dmu -= d_cost_d_phi * pdf[k] / dsigma;
            d_dsigma -= d_cost_d_phi * pdf[k] * z[k] / dsigma;
        }

        g.d_rating_good += d_dmu * (grad_l.d_good - grad_r.d_good);
        g.d_rating_excellent += d_dmu * (grad_l.d_excellent - grad_r.d_excellent);
        g.d_gamma += d_dmu * (grad_l.d_gamma - grad_r.d_gamma);
        g.d_wmp += d_dmu * (grad_l.d_wmp - grad_r.d_wmp);
        g.d_sigma += d_dsigma * SQRT_2;
    }
    g
}

/// Analytic gradient of [`metric_loss`] in the unconstrained coordinates
/// of [`MetricParams::to_unconstrained`].
pub fn metric_gradient(pairs: &[PairObservation], params: &MetricParams) -> [f64; 9] {
    let nat = metric_gradient_natural(pairs, params);
    chain_to_unconstrained(&nat, params)
}

fn chain_to_unconstrained(nat: &NaturalGradient, params: &MetricParams) -> [f64; 9] {
    let good = params.rating_good;
    let exc = params.rating_excellent;
    let b = &params.boundaries;
    let db = &nat.d_boundaries;
    [
        (nat.d_rating_good + nat.d_rating_excellent) * good,
        nat.d_rating_excellent * (exc - good),
        nat.d_gamma * params.gamma * (1.0 - params.gamma),
        nat.d_wmp * params.wmp * (1.0 - params.wmp),
        db[0] + db[1] + db[2] + db[3],
        (db[1] + db[2] + db[3]) * (b[1] - b[0]),
        (db[2] + db[3]) * (b[2] - b[1]),
        db[3] * (b[3] - b[2]),
        nat.d_sigma * params.sigma,
    ]
}

/// Gradient-descent settings for [`fit_metric`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    pub init_step: f64,
    /// Halvings tried per iteration before giving up on a descent step.
    pub step_halvings: usize,
    /// Stop once the gradient norm in unconstrained space drops below this.
    pub convergence_tol: f64,
    /// Recorded for provenance; the optimizer itself is deterministic.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> FitConfig {
        FitConfig {
            max_iters: 500,
            init_step: 1.0,
            step_halvings: 40,
            convergence_tol: 1e-6,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.step_halvings == 0 {
            return Err(Error::invalid(
                "max_iters and step_halvings must be positive",
            ));
        }
        if !(self.init_step > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::invalid(
                "init_step and convergence_tol must be positive",
            ));
        }
        Ok(())
    }
}

/// Outcome of a metric fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub final_cost: f64,
    /// Accepted descent iterations.
    pub iterations: usize,
    /// Unconstrained-space gradient norm at the returned parameters.
    pub gradient_norm: f64,
    /// True when the gradient norm dropped below `convergence_tol`.
    pub converged: bool,
}

fn norm(v: &[f64; 9]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn eval_theta(pairs: &[PairObservation], theta: &[f64; 9]) -> (f64, [f64; 9], MetricParams) {
    let params = MetricParams::from_unconstrained(theta);
    let cost = metric_loss(pairs, &params);
    let grad = metric_gradient(pairs, &params);
    (cost, grad, params)
}

/// Full-batch gradient descent with a step-halving line search. The step
/// doubles after each accepted iteration so the search adapts to scale.
/// Cost never increases across accepted iterations.
pub fn fit_metric(
    pairs: &[PairObservation],
    config: &FitConfig,
    init: &MetricParams,
) -> Result<(MetricParams, FitReport)> {
    config.validate()?;
    init.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("cannot fit the metric on zero pairs"));
    }

    let mut theta = init.to_unconstrained();
    let (mut cost, mut grad, mut params) = eval_theta(pairs, &theta);
    if !cost.is_finite() {
        return Err(Error::invalid(format!(
            "non-finite cost {cost} at the initial parameters"
        )));
    }

    let mut step = config.init_step;
    let mut iterations = 0;
    let mut converged = norm(&grad) < config.convergence_tol;
    while iterations < config.max_iters && !converged {
        let mut s = step;
        let mut accepted = false;
        for _ in 0..=config.step_halvings {
            let mut trial = theta;
            for (t, g) in trial.iter_mut().zip(grad.iter()) {
                *t -= s * g;
            }
            let (trial_cost, trial_grad, trial_params) = eval_theta(pairs, &trial);
            if trial_cost.is_finite() && trial_cost < cost {
                theta = trial;
                cost = trial_cost;
                grad = trial_grad;
                params = trial_params;
                step = s * 2.0;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        converged = norm(&grad) < config.convergence_tol;
    }

    let report = FitReport {
        final_cost: cost,
        iterations,
        gradient_norm: norm(&grad),
        converged,
    };
    Ok((params, report))
}

const METRIC_MAGIC: &str = "rankweave-metric v1";

pub fn serialize_metric_params(params: &MetricParams, report: Option<&FitReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{METRIC_MAGIC}");
    let _ = writeln!(out, "rating_good\t{}", fmt_f64(params.rating_good));
    let _ = writeln!(
        out,
        "rating_excellent\t{}",
        fmt_f64(params.rating_excellent)
    );
    let _ = writeln!(out, "gamma\t{}", fmt_f64(params.gamma));
    let _ = writeln!(out, "wmp\t{}", fmt_f64(params.wmp));
    for (i, b) in params.boundaries.iter().enumerate() {
        let _ = writeln!(out, "b{i}\t{}", fmt_f64(*b));
    }
    let _ = writeln!(out, "sigma\t{}", fmt_f64(params.sigma));
    if let Some(r) = report {
        let _ = writeln!(out, "fit_final_cost\t{}", fmt_f64(r.final_cost));
        let _ = writeln!(out, "fit_iterations\t{}", r.iterations);
        let _ = writeln!(out, "fit_gradient_norm\t{}", fmt_f64(r.gradient_norm));
        let _ = writeln!(out, "fit_converged\t{}", r.converged);
    }
    out
}

pub fn save_metric_params(
    params: &MetricParams,
    report: Option<&FitReport>,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, serialize_metric_params(params, report)).map_err(|e| Error::io(path, e))
}

pub fn parse_metric_params(
    content: &str,
    source: &str,
) -> Result<(MetricParams, Option<FitReport>)> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty metric file"))?;
    if header != METRIC_MAGIC {
        return Err(Error::parse(
            source,
            1,
            format!("bad header, expected '{METRIC_MAGIC}'"),
        ));
    }
    let mut kv = std::collections::HashMap::new();
    for (idx, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let (k, v) = raw.split_once('\t').ok_or_else(|| {
            Error::parse(source, idx + 1, "expected 'key\\tvalue' (truncated file?)")
        })?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |key: &str| -> Result<f64> {
        kv.get(key)
            .ok_or_else(|| Error::parse(source, 1, format!("missing key '{key}'")))?
            .parse()
            .map_err(|_| Error::parse(source, 1, format!("bad value for '{key}'")))
    };
    let params = MetricParams {
        rating_good: get("rating_good")?,
        rating_excellent: get("rating_excellent")?,
        gamma: get("gamma")?,
        wmp: get("wmp")?,
        boundaries: [get("b0")?, get("b1")?, get("b2")?, get("b3")?],
        sigma: get("sigma")?,
    };
    params.validate()?;
    let report = if kv.contains_key("fit_final_cost") {
        Some(FitReport {
            final_cost: get("fit_final_cost")?,
            iterations: get("fit_iterations")? as usize,
            gradient_norm: get("fit_gradient_norm")?,
            converged: kv
                .get("fit_converged")
                .map(|v| v == "true")
                .unwrap_or(false),
        })
    } else {
        None
    };
    Ok((params, report))
}

pub fn load_metric_params(path: &Path) -> Result<(MetricParams, Option<FitReport>)> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metric_params(&content, &path.display().to_string())
}
