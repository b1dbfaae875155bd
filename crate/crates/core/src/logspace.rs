//! Natural-log probability arithmetic.

use std::cmp::Ordering;

/// Stable `ln(Σ exp(x_i))`. Returns `-inf` for an empty slice or when every
/// term is `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Shift log-weights so that they sum to one in probability space.
pub fn normalize_log_weights(values: &[f64]) -> Vec<f64> {
    let total = logsumexp(values);
    values.iter().map(|v| v - total).collect()
}

/// Scores closer than this are treated as tied when ranking, so that
/// mathematically equal scores reached through different float paths break
/// ties deterministically instead of by rounding noise.
pub const TIE_EPSILON: f64 = 1e-10;

/// Integer ranking key of a score; equal keys count as ties.
pub fn rank_bucket(score: f64) -> i64 {
    if score == f64::NEG_INFINITY {
        i64::MIN
    } else if score == f64::INFINITY {
        i64::MAX
    } else {
        (score / TIE_EPSILON).round() as i64
    }
}

/// Total order used by every ranking step: higher score first, then shorter
/// sequence, then lexicographically smaller token ids.
pub fn rank_order(a_score: f64, a_tokens: &[u32], b_score: f64, b_tokens: &[u32]) -> Ordering {
    rank_bucket(b_score)
        .cmp(&rank_bucket(a_score))
        .then_with(|| a_tokens.len().cmp(&b_tokens.len()))
        .then_with(|| a_tokens.cmp(b_tokens))
}
