//! Multiple-testing primitives.
//!
//! Benjamini-Hochberg step-up, the Storey and quantile null-proportion
//! estimators, the π0-adaptive step-up built on them, and the counting
//! knockoff threshold on raw scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used in every `p <= threshold` comparison.
///
/// Empirical p-values live on a grid of multiples of `1/(ℓ+1)` and step-up
/// thresholds on multiples of `α/m`; when the two grids coincide exactly
/// the comparison must not be decided by the last bit of rounding.
pub const REL_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn le_tol(a: f64, b: f64) -> bool {
    a <= b + b.abs() * REL_TOL
}

/// A vector of p-values, every entry in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PValues(Vec<f64>);

impl PValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("p-value vector is empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!("p-value {i} = {v} is outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    fn sorted(&self) -> Vec<f64> {
        let mut s = self.0.clone();
        s.sort_by(f64::total_cmp);
        s
    }
}

/// Output of a step-up procedure. Indices are 0-based and ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionSet {
    pub indices: Vec<usize>,
    pub k_hat: usize,
    pub level_used: f64,
}

impl RejectionSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn empty(level_used: f64) -> Self {
        Self { indices: Vec::new(), k_hat: 0, level_used }
    }
}

/// Which null-proportion estimator an adaptive procedure uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Pi0Method {
    Storey { lambda: f64 },
    Quantile { k0: usize },
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pi0Estimate {
    pub value: f64,
    #[serde(flatten)]
    pub method: Pi0Method,
}

/// `(1 + #{p_i >= λ}) / (m (1 - λ))`.
pub fn storey_pi0(p: &PValues, lambda: f64) -> Result<Pi0Estimate> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("Storey λ = {lambda} must lie in (0, 1)")));
    }
    let m = p.len() as f64;
    let above = p.as_slice().iter().filter(|&&v| v >= lambda).count() as f64;
    Ok(Pi0Estimate {
        value: (1.0 + above) / (m * (1.0 - lambda)),
        method: Pi0Method::Storey { lambda },
    })
}

/// `(m - k0 + 1) / (m (1 - p_(k0)))` with `p_(k0)` the `k0`-th smallest
/// p-value. Fails with [`Error::Degenerate`] when `p_(k0) = 1`.
pub fn quantile_pi0(p: &PValues, k0: usize) -> Result<Pi0Estimate> {
    let m = p.len();
    if k0 == 0 || k0 > m {
        return Err(Error::invalid(format!("quantile k0 = {k0} must lie in 1..={m}")));
    }
    let pk = p.sorted()[k0 - 1];
    if pk >= 1.0 {
        return Err(Error::Degenerate(format!(
            "the {k0}-th smallest p-value equals 1; quantile estimate is infinite"
        )));
    }
    Ok(Pi0Estimate {
        value: (m - k0 + 1) as f64 / (m as f64 * (1.0 - pk)),
        method: Pi0Method::Quantile { k0 },
    })
}

fn step_up(p: &PValues, level: f64) -> RejectionSet {
    let m = p.len();
    let sorted = p.sorted();
    let mf = m as f64;
    let k_hat = (1..=m)
        .rev()
        .find(|&k| le_tol(sorted[k - 1], level * k as f64 / mf))
        .unwrap_or(0);
    if k_hat == 0 {
        return RejectionSet::empty(level);
    }
    let thr = level * k_hat as f64 / mf;
    let indices: Vec<usize> = p
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| le_tol(v, thr))
        .map(|(i, _)| i)
        .collect();
    debug_assert_eq!(indices.len(), k_hat);
    RejectionSet { indices, k_hat, level_used: level }
}

/// Benjamini-Hochberg step-up at level `alpha`.
///
/// `k̂ = max{k : #{p_i <= αk/m} >= k}` and the rejections are
/// `{i : p_i <= αk̂/m}`; equal p-values are always kept or rejected together.
pub fn bh_rejections(p: &PValues, alpha: f64) -> Result<RejectionSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("α = {alpha} must lie in (0, 1)")));
    }
    Ok(step_up(p, alpha))
}

/// Result of a π0-adaptive step-up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub rejections: RejectionSet,
    /// `None` for [`Pi0Method::None`]; for a degenerate quantile estimate the
    /// value is `+inf`.
    pub pi0: Option<Pi0Estimate>,
    pub warning: Option<String>,
}

/// BH at level `min(1, α / π̂0)`.
///
/// A degenerate quantile estimate is treated as `π̂0 = +inf`: no rejections,
/// with a warning.
pub fn adaptive_bh(p: &PValues, alpha: f64, method: Pi0Method) -> Result<AdaptiveOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("α = {alpha} must lie in (0, 1)")));
    }
    let estimate = match method {
        Pi0Method::None => {
            return Ok(AdaptiveOutcome { rejections: step_up(p, alpha), pi0: None, warning: None })
        }
        Pi0Method::Storey { lambda } => storey_pi0(p, lambda)?,
        Pi0Method::Quantile { k0 } => match quantile_pi0(p, k0) {
            Ok(e) => e,
            Err(Error::Degenerate(msg)) => {
                return Ok(AdaptiveOutcome {
                    rejections: RejectionSet::empty(0.0),
                    pi0: Some(Pi0Estimate { value: f64::INFINITY, method }),
                    warning: Some(format!("{msg}; no rejections")),
                })
            }
            Err(e) => return Err(e),
        },
    };
    let level = (alpha / estimate.value).min(1.0);
    Ok(AdaptiveOutcome { rejections: step_up(p, level), pi0: Some(estimate), warning: None })
}

/// Counting-knockoff estimate of the false discovery proportion at `t`:
/// `(m/(ℓ+1)) (1 + #{null >= t}) / #{test >= t}`, `+inf` if no test score
/// reaches `t`.
pub fn fdp_hat(t: f64, null_scores: &[f64], test_scores: &[f64]) -> f64 {
    let m = test_scores.len() as f64;
    let ell = null_scores.len() as f64;
    let v = null_scores.iter().filter(|&&s| s >= t).count() as f64;
    let r = test_scores.iter().filter(|&&s| s >= t).count() as f64;
    if r == 0.0 {
        return f64::INFINITY;
    }
    m / (ell + 1.0) * (1.0 + v) / r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnockoffResult {
    /// `+inf` when no candidate threshold qualifies.
    pub threshold: f64,
    pub fdp_hat_at_threshold: f64,
    pub rejections: RejectionSet,
}

/// Smallest observed score `t` with `FDP̂(t) <= α`; rejects test points
/// scoring at least `t`.
pub fn knockoff_select(null_scores: &[f64], test_scores: &[f64], alpha: f64) -> Result<KnockoffResult> {
    if test_scores.is_empty() {
        return Err(Error::invalid("knockoff selection needs at least one test score"));
    }
    let m = test_scores.len();
    let ell = null_scores.len();
    let mut null_sorted = null_scores.to_vec();
    null_sorted.sort_by(f64::total_cmp);
    let mut test_sorted = test_scores.to_vec();
    test_sorted.sort_by(f64::total_cmp);
    let count_ge = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|&s| s < t);

    let mut candidates: Vec<f64> = null_scores.iter().chain(test_scores).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // FDP̂(t) <= α  <=>  m (1 + V) <= α (ℓ + 1) R
    let chosen = candidates.into_iter().find(|&t| {
        let r = count_ge(&test_sorted, t);
        r > 0 && le_tol((m * (1 + count_ge(&null_sorted, t))) as f64, alpha * ((ell + 1) * r) as f64)
    });
    let level_used = alpha;
    match chosen {
        None => Ok(KnockoffResult {
            threshold: f64::INFINITY,
            fdp_hat_at_threshold: f64::INFINITY,
            rejections: RejectionSet::empty(level_used),
        }),
        Some(t) => {
            let indices: Vec<usize> = test_scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s >= t)
                .map(|(i, _)| i)
                .collect();
            Ok(KnockoffResult {
                threshold: t,
                fdp_hat_at_threshold: fdp_hat(t, null_scores, test_scores),
                rejections: RejectionSet { k_hat: indices.len(), indices, level_used },
            })
        }
    }
}
