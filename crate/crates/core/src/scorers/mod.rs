//! Score functions.
//!
//! A [`Scorer`] is a recipe; fitting it on the first null split and the
//! mixed sample yields a [`FittedScore`]. Every scorer shipped here is
//! invariant to the order of the mixed sample: learners see their training
//! data in canonical row order and seed their RNGs from an order-free hash
//! of it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::rng;

mod baseline;
mod density;
mod forest;
mod linear;
mod mlp;
mod oracle;

pub use baseline::{chi_square_score, linear_score, ConstantScore, FixedScore};
pub use density::{
    density_ratio_score, histogram_density, DensityFamily, DensityModel, DensityRatioScore,
    Gaussian, GaussianMixture, HistogramDensity,
};
pub use forest::TreeEnsemble;
pub use linear::{LinearHingeModel, LogisticModel};
pub use mlp::MlpModel;
pub use oracle::{oracle_score, KnownDensity, OracleScore};

/// A fitted map from a point to a real score. Larger means more novel.
pub trait ScoreFunction: Send + Sync {
    fn score(&self, x: &[f64]) -> f64;

    fn score_all(&self, points: &Points) -> Vec<f64> {
        points.rows().map(|r| self.score(r)).collect()
    }
}

impl<F> ScoreFunction for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn score(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// A fitted score function together with its provenance.
#[derive(Clone)]
pub struct FittedScore {
    func: Arc<dyn ScoreFunction>,
    pub scorer_id: String,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for FittedScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedScore")
            .field("scorer_id", &self.scorer_id)
            .field("seed", &self.seed)
            .field("warnings", &self.warnings)
            .finish_non_exhaustive()
    }
}

impl FittedScore {
    pub fn new(scorer_id: impl Into<String>, seed: u64, func: impl ScoreFunction + 'static) -> Self {
        Self { func: Arc::new(func), scorer_id: scorer_id.into(), seed, warnings: Vec::new() }
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.func.score(x)
    }

    pub fn score_all(&self, points: &Points) -> Vec<f64> {
        self.func.score_all(points)
    }

    /// Compose with a scalar map applied after scoring.
    pub fn compose(self, map: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let inner = self.func.clone();
        Self {
            func: Arc::new(Composed { inner, map }),
            scorer_id: format!("{}+composed", self.scorer_id),
            ..self
        }
    }
}

struct Composed<M> {
    inner: Arc<dyn ScoreFunction>,
    map: M,
}

impl<M: Fn(f64) -> f64 + Send + Sync> ScoreFunction for Composed<M> {
    fn score(&self, x: &[f64]) -> f64 {
        (self.map)(self.inner.score(x))
    }

    fn score_all(&self, points: &Points) -> Vec<f64> {
        self.inner.score_all(points).into_iter().map(&self.map).collect()
    }
}

/// Something that can be fit into a [`FittedScore`].
///
/// Implementations must return identical functions for any reordering of
/// `mixed`.
pub trait Scorer: Send + Sync {
    fn id(&self) -> String;

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    /// `false` for closed-form scores that ignore the data.
    fn is_adaptive(&self) -> bool {
        true
    }

    fn fit(&self, first_null: &Points, mixed: &Points, seed: u64) -> Result<FittedScore>;
}

/// Labelled training data for positive-unlabeled classification.
///
/// The first null split is the "positive" class (label -1), the mixed sample
/// the "unlabeled" class (label +1). `lambda` weights the unlabeled losses.
#[derive(Clone, Debug, PartialEq)]
pub struct PuTrainingSet {
    pub positives: Points,
    pub unlabeled: Points,
    pub lambda: f64,
}

impl PuTrainingSet {
    /// Canonicalises row order so training depends only on the multisets.
    pub fn new(positives: &Points, unlabeled: &Points, lambda: f64) -> Result<Self> {
        if unlabeled.is_empty() {
            return Err(Error::invalid("PU training needs a nonempty unlabeled sample"));
        }
        if positives.dim() != unlabeled.dim() {
            return Err(Error::invalid("positive and unlabeled samples differ in dimension"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("cost weight λ = {lambda} must be positive")));
        }
        Ok(Self { positives: positives.canonical(), unlabeled: unlabeled.canonical(), lambda })
    }

    pub fn dim(&self) -> usize {
        self.unlabeled.dim()
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Order-free fingerprint of the training multisets.
    pub fn fingerprint(&self) -> u64 {
        rng::mix64(rng::multiset_hash(&self.positives))
            ^ rng::multiset_hash(&self.unlabeled).rotate_left(17)
    }

    /// Why training cannot separate anything, if it cannot.
    pub(crate) fn degeneracy(&self) -> Option<String> {
        if self.positives.is_empty() {
            return Some("no positive (first-null) points; score is constant".into());
        }
        let first = self.unlabeled.row(0);
        let identical = self
            .positives
            .rows()
            .chain(self.unlabeled.rows())
            .all(|r| r == first);
        identical.then(|| "all training points are identical; score is constant".into())
    }

    /// Labels in {0, 1} (1 = unlabeled) and per-point weights summing to 1.
    pub(crate) fn labels_and_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.positives.len();
        let u = self.unlabeled.len();
        let total = k as f64 + self.lambda * u as f64;
        let mut y = vec![0.0; k];
        y.resize(k + u, 1.0);
        let mut w = vec![1.0 / total; k];
        w.resize(k + u, self.lambda / total);
        (y, w)
    }

    pub(crate) fn stacked(&self) -> Points {
        self.positives.concat(&self.unlabeled).expect("dimensions checked")
    }
}

/// Per-feature standardisation fitted on a training set.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    inv_sd: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(points: &Points) -> Self {
        let d = points.dim();
        let n = points.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in points.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in points.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_sd = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_sd }
    }

    pub(crate) fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.inv_sd) {
            *o = (v - m) * s;
        }
    }

    pub(crate) fn apply(&self, points: &Points) -> Points {
        let d = points.dim();
        let mut data = vec![0.0; points.as_slice().len()];
        for (r, out) in points.rows().zip(data.chunks_exact_mut(d)) {
            self.apply_row(r, out);
        }
        Points::new(d, data).expect("same shape")
    }
}

fn default_restarts() -> usize {
    100
}
fn default_shrinkage() -> f64 {
    0.1
}
fn default_em_iter() -> usize {
    100
}
fn default_em_tol() -> f64 {
    1e-3
}
fn default_lambda() -> f64 {
    1.0
}
fn default_l2() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    2000
}
fn default_grad_tol() -> f64 {
    1e-6
}
fn default_hidden() -> usize {
    100
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_mlp_iter() -> usize {
    200
}
fn default_trees() -> usize {
    100
}
fn default_depth() -> usize {
    10
}
fn default_hinge_step() -> f64 {
    0.5
}

/// Gaussian-shrinkage null density against a two-component EM mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametricParams {
    pub restarts: usize,
    /// Weight on the scaled identity in the null covariance.
    pub shrinkage: f64,
    pub max_iter: usize,
    /// Convergence threshold on the change in mean log-likelihood.
    pub tol: f64,
}

impl Default for ParametricParams {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            shrinkage: default_shrinkage(),
            max_iter: default_em_iter(),
            tol: default_em_tol(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramParams {
    /// Cells per axis; defaults to `ceil(N^(1/(2+d)))` with `N` the mixed size.
    pub bins: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub lambda: f64,
    pub l2: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            l2: default_l2(),
            max_iter: default_max_iter(),
            grad_tol: default_grad_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub lambda: f64,
    pub l2: f64,
    /// Full-batch Adam steps. Long runs memorise the mixed sample and lose
    /// power, hence the short default.
    pub max_iter: usize,
    pub grad_tol: f64,
    pub learning_rate: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            lambda: default_lambda(),
            l2: default_l2(),
            max_iter: default_mlp_iter(),
            grad_tol: default_grad_tol(),
            learning_rate: default_learning_rate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub lambda: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: default_trees(), max_depth: default_depth(), lambda: default_lambda() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HingeParams {
    pub lambda: f64,
    pub l2: f64,
    pub max_iter: usize,
    /// Initial subgradient step; step `t` uses `step / sqrt(t + 1)`.
    pub step: f64,
}

impl Default for HingeParams {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            l2: default_l2(),
            max_iter: default_max_iter(),
            step: default_hinge_step(),
        }
    }
}

/// Serializable scorer description, as used by the CLI and the simulation lab.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScorerConfig {
    /// `sum_j z_j^2`.
    ChiSquare,
    /// `mu^T z`.
    Linear { mu: Vec<f64> },
    /// Likelihood ratio under known densities.
    Oracle { null: KnownDensity, alternative: KnownDensity, pi1: f64 },
    Parametric(ParametricParams),
    Histogram(HistogramParams),
    Logistic(LogisticParams),
    Mlp(MlpParams),
    TreeEnsemble(ForestParams),
    LinearHinge(HingeParams),
}

impl ScorerConfig {
    /// Default configuration for a scorer name as typed on the command line.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "chi-square" => ScorerConfig::ChiSquare,
            "parametric" => ScorerConfig::Parametric(Default::default()),
            "histogram" => ScorerConfig::Histogram(Default::default()),
            "logistic" => ScorerConfig::Logistic(Default::default()),
            "mlp" => ScorerConfig::Mlp(Default::default()),
            "tree-ensemble" => ScorerConfig::TreeEnsemble(Default::default()),
            "linear-hinge" => ScorerConfig::LinearHinge(Default::default()),
            "linear" | "oracle" => {
                return Err(Error::invalid(format!(
                    "scorer '{name}' needs parameters; pass it as JSON, e.g. {{\"kind\":\"linear\",\"mu\":[1.0]}}"
                )))
            }
            other => return Err(Error::invalid(format!("unknown scorer '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScorerConfig::ChiSquare => "chi-square",
            ScorerConfig::Linear { .. } => "linear",
            ScorerConfig::Oracle { .. } => "oracle",
            ScorerConfig::Parametric(_) => "parametric",
            ScorerConfig::Histogram(_) => "histogram",
            ScorerConfig::Logistic(_) => "logistic",
            ScorerConfig::Mlp(_) => "mlp",
            ScorerConfig::TreeEnsemble(_) => "tree-ensemble",
            ScorerConfig::LinearHinge(_) => "linear-hinge",
        }
    }

    fn learner_seed(seed: u64, train: &PuTrainingSet) -> u64 {
        rng::derive_seed(seed ^ train.fingerprint(), "learner", 0)
    }
}

impl Scorer for ScorerConfig {
    fn id(&self) -> String {
        self.name().to_string()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    fn is_adaptive(&self) -> bool {
        !matches!(
            self,
            ScorerConfig::ChiSquare | ScorerConfig::Linear { .. } | ScorerConfig::Oracle { .. }
        )
    }

    fn fit(&self, first_null: &Points, mixed: &Points, seed: u64) -> Result<FittedScore> {
        if first_null.dim() != mixed.dim() {
            return Err(Error::invalid("first-null and mixed samples differ in dimension"));
        }
        let id = self.name();
        match self {
            ScorerConfig::ChiSquare => Ok(chi_square_score()),
            ScorerConfig::Linear { mu } => linear_score(mu.clone()),
            ScorerConfig::Oracle { null, alternative, pi1 } => {
                Ok(FittedScore::new(id, seed, oracle_score(null.clone(), alternative.clone(), *pi1)?))
            }
            ScorerConfig::Parametric(p) => density_ratio_score(
                first_null,
                mixed,
                &DensityFamily::Parametric(p.clone()),
                seed,
            ),
            ScorerConfig::Histogram(p) => {
                density_ratio_score(first_null, mixed, &DensityFamily::Histogram(p.clone()), seed)
            }
            ScorerConfig::Logistic(p) => {
                let train = PuTrainingSet::new(first_null, mixed, p.lambda)?;
                LogisticModel::fit(&train, p, Self::learner_seed(seed, &train))
            }
            ScorerConfig::Mlp(p) => {
                let train = PuTrainingSet::new(first_null, mixed, p.lambda)?;
                MlpModel::fit(&train, p, Self::learner_seed(seed, &train))
            }
            ScorerConfig::TreeEnsemble(p) => {
                let train = PuTrainingSet::new(first_null, mixed, p.lambda)?;
                TreeEnsemble::fit(&train, p, Self::learner_seed(seed, &train))
            }
            ScorerConfig::LinearHinge(p) => {
                let train = PuTrainingSet::new(first_null, mixed, p.lambda)?;
                LinearHingeModel::fit(&train, p, Self::learner_seed(seed, &train))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_names_round_trip() {
        for name in [
            "chi-square",
            "parametric",
            "histogram",
            "logistic",
            "mlp",
            "tree-ensemble",
            "linear-hinge",
        ] {
            let cfg = ScorerConfig::from_name(name).unwrap();
            assert_eq!(cfg.name(), name);
            let json = serde_json::to_string(&cfg).unwrap();
            let back: ScorerConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(ScorerConfig::from_name("linear").is_err());
        assert!(ScorerConfig::from_name("svdd").is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: ScorerConfig = serde_json::from_str(r#"{"kind":"mlp","hidden":16}"#).unwrap();
        match cfg {
            ScorerConfig::Mlp(p) => {
                assert_eq!(p.hidden, 16);
                assert_eq!(p.max_iter, 200);
                assert_eq!(p.lambda, 1.0);
            }
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn pu_set_rejects_empty_unlabeled() {
        let pos = Points::from_scalars(&[1.0]);
        assert!(PuTrainingSet::new(&pos, &Points::empty(1), 1.0).is_err());
        assert!(PuTrainingSet::new(&pos, &pos, 0.0).is_err());
    }
}
