//! The detection procedures.
//!
//! A run fits a score on `(first_null, calib_null ++ test)`, scores the
//! mixed sample, breaks ties, forms empirical p-values and applies BH (or a
//! π0-adaptive BH). The counting-knockoff selection is computed alongside
//! and must agree with BH exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{empirical_pvalues, ScoredSplit};
use crate::data::Points;
use crate::error::{Error, Result, ResultExt};
use crate::mtest::{adaptive_bh, knockoff_select, PValues, Pi0Estimate, Pi0Method, RejectionSet};
use crate::rng;
use crate::scorers::Scorer;

/// How to divide the null training sample into `first_null` and `calib_null`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// The first `k` nulls train the score; the remaining `ℓ = n - k` calibrate.
    Explicit { k: usize },
    /// The last `ℓ` nulls calibrate; `k = n - ℓ`.
    ExplicitEll { ell: usize },
    /// `ℓ = m`, `k = n - m`.
    EllEqualsM,
}

/// Split sizes of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullSplit {
    pub k: usize,
    pub ell: usize,
    pub m: usize,
}

/// Nulls split in two, plus the test sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    first_null: Points,
    calib_null: Points,
    test: Points,
}

impl SplitDataset {
    pub fn new(first_null: Points, calib_null: Points, test: Points) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::invalid("the test sample is empty"));
        }
        let d = test.dim();
        if first_null.dim() != d || calib_null.dim() != d {
            return Err(Error::invalid(format!(
                "dimension mismatch: first null {}, calibration {}, test {d}",
                first_null.dim(),
                calib_null.dim()
            )));
        }
        for (name, p) in [("first null", &first_null), ("calibration", &calib_null), ("test", &test)] {
            if !p.is_finite() {
                return Err(Error::invalid(format!("{name} sample has non-finite values")));
            }
        }
        Ok(Self { first_null, calib_null, test })
    }

    pub fn first_null(&self) -> &Points {
        &self.first_null
    }

    pub fn calib_null(&self) -> &Points {
        &self.calib_null
    }

    pub fn test(&self) -> &Points {
        &self.test
    }

    pub fn dim(&self) -> usize {
        self.test.dim()
    }

    pub fn sizes(&self) -> NullSplit {
        NullSplit { k: self.first_null.len(), ell: self.calib_null.len(), m: self.test.len() }
    }

    /// `calib_null ++ test`.
    pub fn mixed(&self) -> Points {
        self.calib_null.concat(&self.test).expect("dimensions checked")
    }

    /// Replace the test sample, keeping the null split.
    pub fn with_test(&self, test: Points) -> Result<Self> {
        Self::new(self.first_null.clone(), self.calib_null.clone(), test)
    }
}

/// Split `nulls` per `policy`. The first `k` rows (after an optional seeded
/// shuffle) form the first null split.
pub fn split_nts(
    nulls: &Points,
    test: &Points,
    policy: SplitPolicy,
    shuffle_seed: Option<u64>,
) -> Result<SplitDataset> {
    let n = nulls.len();
    let m = test.len();
    let k = match policy {
        SplitPolicy::Explicit { k } => k,
        SplitPolicy::ExplicitEll { ell } => n.checked_sub(ell).ok_or_else(|| {
            Error::invalid(format!("ℓ = {ell} exceeds the number of nulls n = {n}"))
        })?,
        SplitPolicy::EllEqualsM => n.checked_sub(m).ok_or_else(|| {
            Error::invalid(format!("ℓ = m = {m} needs at least {m} nulls, got {n}"))
        })?,
    };
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the number of nulls n = {n}")));
    }
    let nulls = match shuffle_seed {
        Some(s) => {
            use rand::seq::SliceRandom;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng::stream(s, "nts-shuffle"));
            nulls.select(&idx)
        }
        None => nulls.clone(),
    };
    SplitDataset::new(nulls.slice_rows(0, k), nulls.slice_rows(k, n), test.clone())
}

/// The step-up variant a report came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "kebab-case")]
pub enum Procedure {
    Bh,
    Storey {
        /// `λ = K / (ℓ + 1)`.
        storey_k: usize,
        lambda: f64,
        /// The λ asked for before snapping to the grid, if any.
        requested_lambda: Option<f64>,
    },
    Quantile {
        k0: usize,
    },
}

/// Everything a run produced, enough to audit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub procedure: Procedure,
    pub alpha: f64,
    pub seed: u64,
    pub scorer_id: String,
    pub hyperparameters: serde_json::Value,
    pub split: NullSplit,
    /// Calibration scores before tie-breaking, infinities replaced by
    /// finite sentinels.
    pub calib_scores: Vec<f64>,
    /// Test scores, same convention as `calib_scores`.
    pub test_scores: Vec<f64>,
    pub pvalues: PValues,
    pub rejections: RejectionSet,
    pub pi0_estimate: Option<Pi0Estimate>,
    /// Counting-knockoff threshold; `None` when nothing is selected.
    pub knockoff_threshold: Option<f64>,
    pub warnings: Vec<String>,
}

/// Replace infinite scores by finite values beyond the finite range,
/// preserving order. NaN is an error.
fn finite_scores(scores: &mut [f64]) -> Result<Option<String>> {
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Evaluation(format!("score of mixed point {i} is NaN")));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in scores.iter().filter(|s| s.is_finite()) {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo > hi {
        lo = 0.0;
        hi = 0.0;
    }
    let top = hi + hi.abs().max(1.0);
    let bottom = lo - lo.abs().max(1.0);
    let mut replaced = 0;
    for s in scores.iter_mut().filter(|s| s.is_infinite()) {
        *s = if *s > 0.0 { top } else { bottom };
        replaced += 1;
    }
    Ok((replaced > 0).then(|| format!("{replaced} infinite scores replaced by finite sentinels")))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("α = {alpha} must lie in (0, 1)")))
    }
}

struct Scored {
    calib: Vec<f64>,
    test: Vec<f64>,
    split: ScoredSplit,
    pvalues: PValues,
    warnings: Vec<String>,
}

fn fit_and_score(data: &SplitDataset, scorer: &dyn Scorer, seed: u64) -> Result<Scored> {
    let mixed = data.mixed();
    let fitted = scorer
        .fit(data.first_null(), &mixed, rng::derive_seed(seed, "scorer-fit", 0))
        .context(|| format!("fitting scorer '{}'", scorer.id()))?;
    let mut scores = fitted.score_all(&mixed);
    let mut warnings = fitted.warnings.clone();
    if let Some(w) = finite_scores(&mut scores).context(|| format!("scoring with '{}'", scorer.id()))? {
        warnings.push(w);
    }
    let ell = data.calib_null().len();
    let split = ScoredSplit::new(&scores[..ell], &scores[ell..], rng::derive_seed(seed, "tie-break", 0))?;
    let pvalues = empirical_pvalues(&split)?;
    let test = scores.split_off(ell);
    Ok(Scored { calib: scores, test, split, pvalues, warnings })
}

fn run(data: &SplitDataset, scorer: &dyn Scorer, alpha: f64, seed: u64, procedure: Procedure) -> Result<DetectionReport> {
    check_alpha(alpha)?;
    let scored = fit_and_score(data, scorer, seed)?;
    let method = match procedure {
        Procedure::Bh => Pi0Method::None,
        Procedure::Storey { lambda, .. } => Pi0Method::Storey { lambda },
        Procedure::Quantile { k0 } => Pi0Method::Quantile { k0 },
    };
    let outcome = adaptive_bh(&scored.pvalues, alpha, method)?;
    let mut warnings = scored.warnings;
    warnings.extend(outcome.warning);

    let level = outcome.rejections.level_used;
    let knock = knockoff_select(scored.split.calib(), scored.split.test(), level)?;
    if knock.rejections.indices != outcome.rejections.indices {
        return Err(Error::internal(format!(
            "BH selected {} points but counting knockoffs selected {} at level {level}",
            outcome.rejections.len(),
            knock.rejections.len()
        )));
    }

    Ok(DetectionReport {
        procedure,
        alpha,
        seed,
        scorer_id: scorer.id(),
        hyperparameters: scorer.hyperparameters(),
        split: data.sizes(),
        calib_scores: scored.calib,
        test_scores: scored.test,
        pvalues: scored.pvalues,
        rejections: outcome.rejections,
        pi0_estimate: outcome.pi0,
        knockoff_threshold: knock.threshold.is_finite().then_some(knock.threshold),
        warnings,
    })
}

/// Fit, score, and apply BH at level `alpha` to the empirical p-values.
pub fn run_adadetect(data: &SplitDataset, scorer: &dyn Scorer, alpha: f64, seed: u64) -> Result<DetectionReport> {
    run(data, scorer, alpha, seed, Procedure::Bh)
}

/// Storey-adaptive variant with `λ = K / (ℓ + 1)`, `2 <= K <= ℓ`.
pub fn run_storey_adadetect(
    data: &SplitDataset,
    scorer: &dyn Scorer,
    alpha: f64,
    storey_k: usize,
    seed: u64,
) -> Result<DetectionReport> {
    let ell = data.calib_null().len();
    if storey_k < 2 || storey_k > ell {
        return Err(Error::invalid(format!(
            "Storey K = {storey_k} must lie in {{2, ..., ℓ}} with ℓ = {ell}"
        )));
    }
    let lambda = storey_k as f64 / (ell + 1) as f64;
    run(data, scorer, alpha, seed, Procedure::Storey { storey_k, lambda, requested_lambda: None })
}

/// Nearest admissible `K` for a requested `λ`: `round(λ(ℓ+1))` clamped to `[2, ℓ]`.
pub fn storey_k_for_lambda(lambda: f64, ell: usize) -> Result<usize> {
    if ell < 2 {
        return Err(Error::invalid(format!("Storey-AdaDetect needs ℓ >= 2, got {ell}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("Storey λ = {lambda} must lie in (0, 1)")));
    }
    Ok(((lambda * (ell + 1) as f64).round() as usize).clamp(2, ell))
}

/// Storey variant from a requested λ, snapped to the admissible grid.
pub fn run_storey_adadetect_at_lambda(
    data: &SplitDataset,
    scorer: &dyn Scorer,
    alpha: f64,
    lambda: f64,
    seed: u64,
) -> Result<DetectionReport> {
    let storey_k = storey_k_for_lambda(lambda, data.calib_null().len())?;
    let mut report = run_storey_adadetect(data, scorer, alpha, storey_k, seed)?;
    if let Procedure::Storey { requested_lambda, lambda: used, .. } = &mut report.procedure {
        *requested_lambda = Some(lambda);
        if *used != lambda {
            report.warnings.push(format!("λ = {lambda} snapped to K/(ℓ+1) = {storey_k}/{}", data.calib_null().len() + 1));
        }
    }
    Ok(report)
}

/// `ceil(m / 2)`.
pub fn default_k0(m: usize) -> usize {
    m.div_ceil(2)
}

/// Quantile-adaptive variant; `k0` defaults to `ceil(m/2)`.
pub fn run_quantile_adadetect(
    data: &SplitDataset,
    scorer: &dyn Scorer,
    alpha: f64,
    k0: Option<usize>,
    seed: u64,
) -> Result<DetectionReport> {
    let m = data.test().len();
    let k0 = k0.unwrap_or_else(|| default_k0(m));
    if k0 < 1 || k0 > m {
        return Err(Error::invalid(format!("k0 = {k0} must lie in {{1, ..., m}} with m = {m}")));
    }
    run(data, scorer, alpha, seed, Procedure::Quantile { k0 })
}

/// Size of the surrogate first-null split: `k - m` when `k > m`, else `k / 2`.
pub fn default_cv_s(k: usize, m: usize) -> usize {
    if k > m {
        k - m
    } else {
        k / 2
    }
}

/// Knobs for [`run_adadetect_cv`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Level for counting surrogate rejections; defaults to the final α.
    pub surrogate_alpha: Option<f64>,
    /// Final step-up variant; `None` for plain BH.
    pub final_storey_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub s: usize,
    pub surrogate_alpha: f64,
    pub grid_ids: Vec<String>,
    /// Surrogate rejection count per grid member.
    pub surrogate_rejections: Vec<usize>,
    pub chosen_index: usize,
    pub chosen_id: String,
    pub report: DetectionReport,
}

/// Pick the grid member with the most rejections on a surrogate problem
/// built from the nulls, then run AdaDetect with it on the original split.
///
/// The surrogate uses `Y_1..Y_s` as first null, `Y_{s+1}..Y_k` as
/// calibration and `calib_null ++ test` as test sample. Ties go to the
/// lowest grid index. Grid members are evaluated in parallel.
pub fn run_adadetect_cv(
    data: &SplitDataset,
    grid: &[&dyn Scorer],
    alpha: f64,
    s: usize,
    seed: u64,
    options: CvOptions,
) -> Result<CvReport> {
    check_alpha(alpha)?;
    if grid.is_empty() {
        return Err(Error::invalid("the CV grid is empty"));
    }
    let k = data.first_null().len();
    if s >= k {
        return Err(Error::invalid(format!("CV needs s < k, got s = {s}, k = {k}")));
    }
    let surrogate_alpha = options.surrogate_alpha.unwrap_or(alpha);
    check_alpha(surrogate_alpha)?;
    let surrogate = SplitDataset::new(
        data.first_null().slice_rows(0, s),
        data.first_null().slice_rows(s, k),
        data.mixed(),
    )?;
    let counts: Vec<usize> = grid
        .par_iter()
        .enumerate()
        .map(|(i, scorer)| {
            let seed = rng::derive_seed(seed, "cv", i as u64);
            run(&surrogate, *scorer, surrogate_alpha, seed, Procedure::Bh)
                .map(|r| r.rejections.len())
                .context(|| format!("surrogate run for grid member {i}"))
        })
        .collect::<Result<_>>()?;
    let chosen_index = counts
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best });
    let chosen = grid[chosen_index];
    let report = match options.final_storey_k {
        None => run_adadetect(data, chosen, alpha, seed)?,
        Some(sk) => run_storey_adadetect(data, chosen, alpha, sk, seed)?,
    };
    Ok(CvReport {
        s,
        surrogate_alpha,
        grid_ids: grid.iter().map(|g| g.id()).collect(),
        surrogate_rejections: counts,
        chosen_index,
        chosen_id: chosen.id(),
        report,
    })
}
