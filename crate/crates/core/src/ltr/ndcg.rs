//! Gain function, NDCG, swap deltas, and lambda gradients.

use crate::error::{Error, Result};

/// NDCG cutoff: either the whole list or the top T positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    Full,
    At(usize),
}

impl Truncation {
    pub fn cutoff(self, n: usize) -> usize {
        match self {
            Truncation::Full => n,
            Truncation::At(t) => t.min(n),
        }
    }

    pub fn parse(raw: &str) -> Result<Truncation> {
        if raw == "full" {
            return Ok(Truncation::Full);
        }
        match raw.parse::<usize>() {
            Ok(t) if t > 0 => Ok(Truncation::At(t)),
            _ => Err(Error::invalid(format!(
                "truncation must be 'full' or a positive integer, got '{raw}'"
            ))),
        }
    }
}

impl std::fmt::Display for Truncation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Truncation::Full => write!(f, "full"),
            Truncation::At(t) => write!(f, "{t}"),
        }
    }
}

/// Exponential gain for a rating in [0, 1], scaled so the endpoints meet
/// the classic 0..4 grade range: 2^(4 * rating) - 1.
pub fn gain(rating: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&rating));
    (4.0 * rating).exp2() - 1.0
}

/// Position discount 1 / log2(1 + j) with 1-based position j, zero past
/// the cutoff.
fn discount(position: usize, cutoff: usize) -> f64 {
    if position < cutoff {
        1.0 / ((position + 2) as f64).log2()
    } else {
        0.0
    }
}

/// Discounted cumulative gain of a list already in ranked order.
pub fn dcg(gains_in_ranked_order: &[f64], truncation: Truncation) -> f64 {
    let cutoff = truncation.cutoff(gains_in_ranked_order.len());
    gains_in_ranked_order[..cutoff]
        .iter()
        .enumerate()
        .map(|(pos, g)| g / ((pos + 2) as f64).log2())
        .sum()
}

fn ideal_dcg(gains: &[f64], truncation: Truncation) -> f64 {
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    dcg(&sorted, truncation)
}

/// NDCG of a list in ranked order. An all-zero list scores 1.0: no
/// ordering mistake is possible.
pub fn ndcg(gains_in_ranked_order: &[f64], truncation: Truncation) -> f64 {
    let ideal = ideal_dcg(gains_in_ranked_order, truncation);
    if ideal == 0.0 {
        1.0
    } else {
        dcg(gains_in_ranked_order, truncation) / ideal
    }
}

/// |NDCG change| from swapping ranked positions i and j, in closed form:
/// only the two swapped terms of the DCG sum move.
pub fn delta_ndcg(
    gains_in_ranked_order: &[f64],
    i: usize,
    j: usize,
    truncation: Truncation,
) -> Result<f64> {
    let n = gains_in_ranked_order.len();
    if i >= n || j >= n {
        return Err(Error::invalid(format!(
            "swap positions ({i}, {j}) out of range for {n} documents"
        )));
    }
    if i == j {
        return Err(Error::invalid("swap positions must differ"));
    }
    let ideal = ideal_dcg(gains_in_ranked_order, truncation);
    if ideal == 0.0 {
        return Ok(0.0);
    }
    let cutoff = truncation.cutoff(n);
    let dg = gains_in_ranked_order[i] - gains_in_ranked_order[j];
    let dd = discount(j, cutoff) - discount(i, cutoff);
    Ok((dg * dd).abs() / ideal)
}

/// LambdaRank gradients and second-order weights for one query.
///
/// Documents are ranked by `scores` (descending, ties by index); for each
/// pair with unequal gains the higher-gain document is pushed up and the
/// lower one down, weighted by the logistic force and the NDCG swap
/// delta. Per-document lambdas always sum to zero.
pub fn lambda_gradients(
    scores: &[f64],
    gains: &[f64],
    truncation: Truncation,
    lambda_sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = scores.len();
    debug_assert_eq!(n, gains.len());
    let mut lambdas = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    if n < 2 {
        return (lambdas, hessians);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(&b)));
    let mut position = vec![0usize; n];
    for (pos, &doc) in order.iter().enumerate() {
        position[doc] = pos;
    }

    let ideal = ideal_dcg(gains, truncation);
    if ideal == 0.0 {
        return (lambdas, hessians);
    }
    let cutoff = truncation.cutoff(n);

    for a in 0..n {
        for b in (a + 1)..n {
            let (hi, lo) = if gains[a] > gains[b] {
                (a, b)
            } else if gains[b] > gains[a] {
                (b, a)
            } else {
                continue;
            };
            let delta = {
                let dg = gains[hi] - gains[lo];
                let dd = discount(position[lo], cutoff) - discount(position[hi], cutoff);
                (dg * dd).abs() / ideal
            };
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (lambda_sigma * (scores[hi] - scores[lo])).exp());
            let force = lambda_sigma * rho * delta;
            lambdas[hi] += force;
            lambdas[lo] -= force;
            let weight = lambda_sigma * lambda_sigma * rho * (1.0 - rho) * delta;
            hessians[hi] += weight;
            hessians[lo] += weight;
        }
    }
    (lambdas, hessians)
}
