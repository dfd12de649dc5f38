//! Synthetic settings and Monte-Carlo checks.
//!
//! Replicates are independent: replicate `r` draws its data from the seed
//! `derive_seed(seed, "replicate", r)` and its procedure randomness from
//! `derive_seed(seed, "procedure", r)`. Two Monte-Carlo runs with the same
//! generator and master seed therefore see identical datasets, whatever the
//! procedure.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adadetect::{
    run_adadetect, run_adadetect_cv, run_quantile_adadetect, run_storey_adadetect, split_nts,
    storey_k_for_lambda, CvOptions, SplitDataset, SplitPolicy,
};
use crate::data::Points;
use crate::error::{Error, Result, ResultExt};
use crate::mtest::{adaptive_bh, PValues, Pi0Method, RejectionSet};
use crate::rng;
use crate::scorers::{KnownDensity, Scorer, ScorerConfig};

fn default_signal_coords() -> usize {
    5
}

/// The data-generating setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "kebab-case")]
pub enum Setting {
    /// Nulls `N(0, I_d)`; novelties `N(μ, I_d)` with `μ_j = amplitude` on the
    /// first `signal_coords` coordinates. Amplitude defaults to `sqrt(2 log d)`.
    GaussianSparse {
        d: usize,
        #[serde(default = "default_signal_coords")]
        signal_coords: usize,
        #[serde(default)]
        amplitude: Option<f64>,
    },
    /// `Z_i = μ_i + sqrt(ρ) ξ + sqrt(1-ρ) ε_i` with `ξ` shared by every point
    /// of a replicate; `μ_i = 0` for nulls and `mu` for novelties.
    Equicorrelated { d: usize, mu: Vec<f64>, rho: f64 },
    /// Uniform coordinates except the first two: `Beta(5,5)` for nulls,
    /// `Beta(1,3)` for novelties.
    Beta { d: usize },
}

impl Setting {
    pub fn dim(&self) -> usize {
        match self {
            Setting::GaussianSparse { d, .. } | Setting::Equicorrelated { d, .. } | Setting::Beta { d } => *d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Setting::GaussianSparse { d, signal_coords, amplitude } => {
                if *d == 0 || *signal_coords > *d {
                    return Err(Error::invalid(format!(
                        "gaussian-sparse needs d >= 1 and signal_coords <= d, got d = {d}, signal_coords = {signal_coords}"
                    )));
                }
                if amplitude.is_some_and(|a| !a.is_finite()) {
                    return Err(Error::invalid("amplitude must be finite"));
                }
            }
            Setting::Equicorrelated { d, mu, rho } => {
                if *d == 0 || mu.len() != *d {
                    return Err(Error::invalid(format!("equicorrelated needs mu of length d = {d}, got {}", mu.len())));
                }
                if !(0.0..=1.0).contains(rho) {
                    return Err(Error::invalid(format!("ρ = {rho} must lie in [0, 1]")));
                }
                if mu.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("mu must be finite"));
                }
            }
            Setting::Beta { d } => {
                if *d < 2 {
                    return Err(Error::invalid(format!("beta setting needs d >= 2, got {d}")));
                }
            }
        }
        Ok(())
    }

    /// `sqrt(2 log d)`, or the explicit amplitude.
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            Setting::GaussianSparse { d, amplitude, .. } => {
                Some(amplitude.unwrap_or_else(|| (2.0 * (*d as f64).ln()).sqrt()))
            }
            _ => None,
        }
    }

    /// Novelty mean minus null mean.
    pub fn mean_shift(&self) -> Vec<f64> {
        match self {
            Setting::GaussianSparse { d, signal_coords, .. } => {
                let a = self.amplitude().expect("gaussian-sparse has an amplitude");
                (0..*d).map(|j| if j < *signal_coords { a } else { 0.0 }).collect()
            }
            Setting::Equicorrelated { mu, .. } => mu.clone(),
            Setting::Beta { d } => (0..*d).map(|j| if j < 2 { 0.25 - 0.5 } else { 0.0 }).collect(),
        }
    }

    /// Marginal null and novelty densities of a single point.
    pub fn densities(&self) -> (KnownDensity, KnownDensity) {
        match self {
            Setting::GaussianSparse { d, .. } | Setting::Equicorrelated { d, .. } => (
                KnownDensity::Gaussian { mean: vec![0.0; *d], sd: 1.0 },
                KnownDensity::Gaussian { mean: self.mean_shift(), sd: 1.0 },
            ),
            Setting::Beta { d } => {
                let shapes = |first: [f64; 2]| (0..*d).map(|j| if j < 2 { first } else { [1.0, 1.0] }).collect();
                (
                    KnownDensity::BetaProduct { shapes: shapes([5.0, 5.0]) },
                    KnownDensity::BetaProduct { shapes: shapes([1.0, 3.0]) },
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(flatten)]
    pub setting: Setting,
    /// Null training sample size.
    pub n: usize,
    /// Test sample size.
    pub m: usize,
    /// Number of novelties among the test points.
    pub m1: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.setting.validate()?;
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.m1 > self.m {
            return Err(Error::invalid(format!("m1 = {} exceeds m = {}", self.m1, self.m)));
        }
        Ok(())
    }

    /// Null proportion of the test sample.
    pub fn pi0(&self) -> f64 {
        (self.m - self.m1) as f64 / self.m as f64
    }
}

/// Nulls, test points, and which test points are novelties.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedData {
    pub nulls: Points,
    pub test: Points,
    /// `true` for novelties. The first `m1` test points are the novelties.
    pub is_novelty: Vec<bool>,
}

impl GeneratedData {
    pub fn split(&self, policy: SplitPolicy) -> Result<SplitDataset> {
        split_nts(&self.nulls, &self.test, policy, None)
    }
}

/// Draw one dataset.
pub fn gen_dataset(cfg: &GeneratorConfig) -> Result<GeneratedData> {
    cfg.validate()?;
    let d = cfg.setting.dim();
    let mut r = rng::stream(cfg.seed, "generate");
    let total = cfg.n + cfg.m;
    let mut nulls = Points::empty(d);
    let mut test = Points::empty(d);
    let mut row = vec![0.0; d];
    // novelty iff index in [n, n + m1)
    let is_novel = |i: usize| i >= cfg.n && i < cfg.n + cfg.m1;

    match &cfg.setting {
        Setting::GaussianSparse { .. } => {
            let shift = cfg.setting.mean_shift();
            for i in 0..total {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = r.sample::<f64, _>(StandardNormal) + if is_novel(i) { shift[j] } else { 0.0 };
                }
                if i < cfg.n { nulls.push(&row) } else { test.push(&row) }
            }
        }
        Setting::Equicorrelated { mu, rho, .. } => {
            let xi: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            for i in 0..total {
                for (j, v) in row.iter_mut().enumerate() {
                    let eps: f64 = r.sample(StandardNormal);
                    let base = if is_novel(i) { mu[j] } else { 0.0 };
                    *v = base + a * xi[j] + b * eps;
                }
                if i < cfg.n { nulls.push(&row) } else { test.push(&row) }
            }
        }
        Setting::Beta { .. } => {
            let null_first = Beta::new(5.0, 5.0).expect("valid shapes");
            let novel_first = Beta::new(1.0, 3.0).expect("valid shapes");
            for i in 0..total {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = match (j < 2, is_novel(i)) {
                        (true, false) => null_first.sample(&mut r),
                        (true, true) => novel_first.sample(&mut r),
                        (false, _) => r.random::<f64>(),
                    };
                }
                if i < cfg.n { nulls.push(&row) } else { test.push(&row) }
            }
        }
    }
    let is_novelty = (0..cfg.m).map(|j| j < cfg.m1).collect();
    Ok(GeneratedData { nulls, test, is_novelty })
}

/// Where a simulated procedure gets its score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SimScorer {
    /// Likelihood ratio of the setting's true marginal densities.
    Oracle,
    /// Fixed linear score along the novelty mean shift.
    MeanDirection,
    /// Any configurable scorer.
    Config { scorer: ScorerConfig },
}

impl SimScorer {
    fn resolve(&self, gen: &GeneratorConfig, ell: usize) -> Result<ScorerConfig> {
        Ok(match self {
            SimScorer::Oracle => {
                let (null, alternative) = gen.setting.densities();
                let pi1 = gen.m1.max(1) as f64 / (ell + gen.m) as f64;
                ScorerConfig::Oracle { null, alternative, pi1: pi1.min(0.5) }
            }
            SimScorer::MeanDirection => ScorerConfig::Linear { mu: gen.setting.mean_shift() },
            SimScorer::Config { scorer } => scorer.clone(),
        })
    }
}

/// A procedure to evaluate under simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ProcedureConfig {
    Adadetect {
        scorer: SimScorer,
    },
    StoreyAdadetect {
        scorer: SimScorer,
        /// Defaults to `ceil(ℓ/2)`; ignored when `lambda` is set.
        #[serde(default)]
        storey_k: Option<usize>,
        #[serde(default)]
        lambda: Option<f64>,
    },
    QuantileAdadetect {
        scorer: SimScorer,
        #[serde(default)]
        k0: Option<usize>,
    },
    AdadetectCv {
        grid: Vec<SimScorer>,
        #[serde(default)]
        s: Option<usize>,
    },
    /// Storey-BH on the gaussian upper-tail p-values of the mean-direction
    /// score, ignoring the null training sample.
    MarginalStoreyBh {
        lambda: f64,
    },
    RejectAll,
    RejectNone,
}

impl ProcedureConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedureConfig::Adadetect { .. } => "adadetect",
            ProcedureConfig::StoreyAdadetect { .. } => "storey-adadetect",
            ProcedureConfig::QuantileAdadetect { .. } => "quantile-adadetect",
            ProcedureConfig::AdadetectCv { .. } => "adadetect-cv",
            ProcedureConfig::MarginalStoreyBh { .. } => "marginal-storey-bh",
            ProcedureConfig::RejectAll => "reject-all",
            ProcedureConfig::RejectNone => "reject-none",
        }
    }

    /// Run once on `data`, returning the rejected test indices.
    pub fn apply(
        &self,
        gen: &GeneratorConfig,
        data: &GeneratedData,
        split: SplitPolicy,
        alpha: f64,
        seed: u64,
    ) -> Result<Vec<usize>> {
        let m = data.test.len();
        match self {
            ProcedureConfig::RejectAll => return Ok((0..m).collect()),
            ProcedureConfig::RejectNone => return Ok(Vec::new()),
            ProcedureConfig::MarginalStoreyBh { lambda } => {
                let shift = gen.setting.mean_shift();
                let norm = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scores: Vec<f64> = data
                    .test
                    .rows()
                    .map(|x| x.iter().zip(&shift).map(|(a, b)| a * b).sum())
                    .collect();
                return Ok(marginal_storey_bh(&scores, norm, alpha, *lambda)?.indices);
            }
            _ => {}
        }
        let ds = data.split(split)?;
        let ell = ds.calib_null().len();
        let report = match self {
            ProcedureConfig::Adadetect { scorer } => {
                run_adadetect(&ds, &scorer.resolve(gen, ell)?, alpha, seed)?
            }
            ProcedureConfig::StoreyAdadetect { scorer, storey_k, lambda } => {
                let k = match (lambda, storey_k) {
                    (Some(l), _) => storey_k_for_lambda(*l, ell)?,
                    (None, Some(k)) => *k,
                    (None, None) => ell.div_ceil(2),
                };
                run_storey_adadetect(&ds, &scorer.resolve(gen, ell)?, alpha, k, seed)?
            }
            ProcedureConfig::QuantileAdadetect { scorer, k0 } => {
                run_quantile_adadetect(&ds, &scorer.resolve(gen, ell)?, alpha, *k0, seed)?
            }
            ProcedureConfig::AdadetectCv { grid, s } => {
                let configs: Vec<ScorerConfig> = grid.iter().map(|g| g.resolve(gen, ell)).collect::<Result<_>>()?;
                let refs: Vec<&dyn Scorer> = configs.iter().map(|c| c as &dyn Scorer).collect();
                let k = ds.first_null().len();
                let s = s.unwrap_or_else(|| crate::adadetect::default_cv_s(k, m));
                run_adadetect_cv(&ds, &refs, alpha, s, seed, CvOptions::default())?.report
            }
            _ => unreachable!("handled above"),
        };
        Ok(report.rejections.indices)
    }
}

/// `FDP = V / max(1, R)`.
pub fn fdp(rejected: &[usize], is_novelty: &[bool]) -> f64 {
    let false_rej = rejected.iter().filter(|&&i| !is_novelty[i]).count();
    false_rej as f64 / rejected.len().max(1) as f64
}

/// True discoveries over novelties; 0 when there are no novelties.
pub fn tdp(rejected: &[usize], is_novelty: &[bool]) -> f64 {
    let m1 = is_novelty.iter().filter(|&&b| b).count();
    if m1 == 0 {
        return 0.0;
    }
    rejected.iter().filter(|&&i| is_novelty[i]).count() as f64 / m1 as f64
}

/// Mean and standard error (plug-in SD over `sqrt(R)`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / r;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r;
    (mean, (var / r).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub method: String,
    pub replicates: usize,
    pub fdr_hat: f64,
    pub fdr_se: f64,
    pub tdr_hat: f64,
    pub tdr_se: f64,
    pub mean_rejections: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_replicate: Option<Vec<[f64; 2]>>,
    pub warnings: Vec<String>,
}

/// Settings shared by every replicate of a Monte-Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub generator: GeneratorConfig,
    pub split: SplitPolicy,
    pub alpha: f64,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub keep_per_replicate: bool,
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("workers must be at least 1")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::internal(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Estimate FDR and TDR of `procedure` over independent replicates.
pub fn monte_carlo(cfg: &MonteCarloConfig, procedure: &ProcedureConfig) -> Result<MonteCarloReport> {
    if cfg.replicates == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::invalid(format!("α = {} must lie in (0, 1)", cfg.alpha)));
    }
    cfg.generator.validate()?;
    let per: Vec<[f64; 3]> = with_workers(cfg.workers, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let gen = GeneratorConfig {
                    seed: rng::derive_seed(cfg.seed, "replicate", r as u64),
                    ..cfg.generator.clone()
                };
                let data = gen_dataset(&gen)?;
                let seed = rng::derive_seed(cfg.seed, "procedure", r as u64);
                let rej = procedure
                    .apply(&gen, &data, cfg.split, cfg.alpha, seed)
                    .context(|| format!("replicate {r}"))?;
                Ok([fdp(&rej, &data.is_novelty), tdp(&rej, &data.is_novelty), rej.len() as f64])
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(report_from(procedure.name(), &per, cfg.keep_per_replicate))
}

fn report_from(method: &str, per: &[[f64; 3]], keep: bool) -> MonteCarloReport {
    let column = |c: usize| per.iter().map(|v| v[c]).collect::<Vec<f64>>();
    let (fdr_hat, fdr_se) = mean_se(&column(0));
    let (tdr_hat, tdr_se) = mean_se(&column(1));
    let (mean_rejections, _) = mean_se(&column(2));
    let mut warnings = Vec::new();
    if per.len() == 1 {
        warnings.push("a single replicate: standard errors are reported as 0".to_string());
    }
    MonteCarloReport {
        method: method.to_string(),
        replicates: per.len(),
        fdr_hat,
        fdr_se,
        tdr_hat,
        tdr_se,
        mean_rejections,
        per_replicate: keep.then(|| per.iter().map(|v| [v[0], v[1]]).collect()),
        warnings,
    }
}

/// Generator parameter varied across a simulation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    D,
    Rho,
    M1,
    Amplitude,
    N,
    M,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::D => "d",
            SweepVariable::Rho => "rho",
            SweepVariable::M1 => "m1",
            SweepVariable::Amplitude => "amplitude",
            SweepVariable::N => "n",
            SweepVariable::M => "m",
        }
    }

    /// A copy of `gen` with this variable set to `value`.
    pub fn apply(&self, gen: &GeneratorConfig, value: f64) -> Result<GeneratorConfig> {
        let mut g = gen.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value.is_finite() {
                Ok(value as usize)
            } else {
                Err(Error::invalid(format!("sweep value {value} for '{}' must be a nonnegative integer", self.name())))
            }
        };
        match (self, &mut g.setting) {
            (SweepVariable::D, Setting::GaussianSparse { d, signal_coords, .. }) => {
                *d = count()?;
                *signal_coords = (*signal_coords).min(*d);
            }
            (SweepVariable::D, Setting::Beta { d }) => *d = count()?,
            (SweepVariable::Rho, Setting::Equicorrelated { rho, .. }) => *rho = value,
            (SweepVariable::Amplitude, Setting::GaussianSparse { amplitude, .. }) => *amplitude = Some(value),
            (SweepVariable::M1, _) => g.m1 = count()?,
            (SweepVariable::N, _) => g.n = count()?,
            (SweepVariable::M, _) => g.m = count()?,
            (v, s) => {
                return Err(Error::invalid(format!(
                    "cannot sweep '{}' in the {} setting",
                    v.name(),
                    match s {
                        Setting::GaussianSparse { .. } => "gaussian-sparse",
                        Setting::Equicorrelated { .. } => "equicorrelated",
                        Setting::Beta { .. } => "beta",
                    }
                )))
            }
        }
        g.validate()?;
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// A procedure with the label it gets in outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedProcedure {
    /// Defaults to the method name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub procedure: ProcedureConfig,
}

impl NamedProcedure {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.procedure.name().to_string())
    }
}

/// A grid of Monte-Carlo runs: every method at every sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    pub split: SplitPolicy,
    pub alpha: f64,
    pub methods: Vec<NamedProcedure>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// `None` without a sweep.
    pub sweep_value: Option<f64>,
    pub report: MonteCarloReport,
}

/// Run every (sweep value, method) pair. All methods at one sweep value see
/// the same replicate datasets.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<Vec<CurvePoint>> {
    if cfg.methods.is_empty() {
        return Err(Error::invalid("the simulation lists no methods"));
    }
    let points: Vec<(Option<f64>, GeneratorConfig)> = match &cfg.sweep {
        None => vec![(None, cfg.generator.clone())],
        Some(sw) => {
            if sw.values.is_empty() {
                return Err(Error::invalid("the sweep has no values"));
            }
            sw.values
                .iter()
                .map(|&v| Ok((Some(v), sw.variable.apply(&cfg.generator, v)?)))
                .collect::<Result<_>>()?
        }
    };
    let mut out = Vec::new();
    for (value, generator) in points {
        for method in &cfg.methods {
            let mc = MonteCarloConfig {
                generator: generator.clone(),
                split: cfg.split,
                alpha: cfg.alpha,
                replicates: cfg.replicates,
                seed: cfg.seed,
                workers: cfg.workers,
                keep_per_replicate: false,
            };
            let mut report = monte_carlo(&mc, &method.procedure)
                .context(|| format!("method '{}'", method.label()))?;
            report.method = method.label();
            out.push(CurvePoint { sweep_value: value, report });
        }
    }
    Ok(out)
}

/// Storey-BH on `p_i = 1 - Φ(score_i / ‖μ‖)`.
pub fn marginal_storey_bh(test_scores: &[f64], mu_norm: f64, alpha: f64, lambda: f64) -> Result<RejectionSet> {
    let p = marginal_pvalues(test_scores, mu_norm)?;
    Ok(adaptive_bh(&p, alpha, Pi0Method::Storey { lambda })?.rejections)
}

/// Gaussian upper-tail p-values of standardized scores.
pub fn marginal_pvalues(test_scores: &[f64], mu_norm: f64) -> Result<PValues> {
    if !(mu_norm > 0.0 && mu_norm.is_finite()) {
        return Err(Error::invalid(format!("‖μ‖ = {mu_norm} must be positive")));
    }
    let normal = Normal::standard();
    PValues::new(test_scores.iter().map(|&s| normal.sf(s / mu_norm)).collect())
}

/// Draw from the least-favorable p-value law for null index `i`.
///
/// Non-null coordinates are 0, coordinate `i` is `1/(ℓ+1)`, and the other
/// null coordinates are i.i.d. from the grid distribution whose CDF at
/// `j/(ℓ+1)` is `1 - U_(j+1)` (`U_(1) > … > U_(ℓ+1)` fresh uniforms) for
/// `j <= ℓ`, and 1 at 1.
pub fn sample_least_favorable(m: usize, ell: usize, h0: &[usize], i: usize, seed: u64) -> Result<Vec<f64>> {
    if ell < 1 {
        return Err(Error::invalid("the least-favorable law needs ℓ >= 1"));
    }
    if let Some(&j) = h0.iter().find(|&&j| j >= m) {
        return Err(Error::invalid(format!("null index {j} out of range for m = {m}")));
    }
    if !h0.contains(&i) {
        return Err(Error::invalid(format!("index {i} is not a null index")));
    }
    let mut is_null = vec![false; m];
    for &j in h0 {
        is_null[j] = true;
    }
    let mut r = rng::stream(seed, "least-favorable");
    let mut u = Vec::new();
    let mut out = vec![0.0; m];
    draw_least_favorable(&mut r, ell, &is_null, i, &mut u, &mut out);
    Ok(out)
}

fn draw_least_favorable<R: Rng>(r: &mut R, ell: usize, is_null: &[bool], i: usize, u: &mut Vec<f64>, out: &mut [f64]) {
    u.clear();
    u.extend((0..=ell).map(|_| r.random::<f64>()));
    // descending: u[j] = U_(j+1)
    u.sort_by(|a, b| b.total_cmp(a));
    let denom = (ell + 1) as f64;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j == i {
            1.0 / denom
        } else if !is_null[j] {
            0.0
        } else {
            // smallest grid j' with 1 - U_(j'+1) >= V, i.e. U_(j'+1) <= 1 - V
            let cut = 1.0 - r.random::<f64>();
            // u is descending, so u[j'] <= cut holds on a suffix
            let first = u.partition_point(|&x| x > cut);
            let grid = first.max(1);
            if grid > ell {
                1.0
            } else {
                grid as f64 / denom
            }
        };
    }
}

/// A null-proportion functional `G` with `π̂0 = G(p) / m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum BoundEstimator {
    /// `G(p) = (1 + #{p_j >= λ}) / (1 - λ)`, `λ = K/(ℓ+1)`.
    Storey { storey_k: usize },
    /// `G(p) = (m - k0 + 1) / (1 - p_(k0))`.
    Quantile { k0: usize },
}

impl BoundEstimator {
    fn check(&self, m: usize, ell: usize) -> Result<()> {
        match *self {
            BoundEstimator::Storey { storey_k } if storey_k < 2 || storey_k > ell => Err(Error::invalid(format!(
                "Storey K = {storey_k} is not admissible: the bound holds for K in {{2, ..., ℓ}} with ℓ = {ell}"
            ))),
            BoundEstimator::Quantile { k0 } if k0 < 1 || k0 > m => Err(Error::invalid(format!(
                "quantile k0 = {k0} is not admissible: the bound holds for k0 in {{1, ..., m}} with m = {m}"
            ))),
            _ => Ok(()),
        }
    }

    fn inverse_g(&self, p: &mut [f64], ell: usize) -> f64 {
        match *self {
            BoundEstimator::Storey { storey_k } => {
                let denom = (ell + 1) as f64;
                let lambda = storey_k as f64 / denom;
                let above = p.iter().filter(|&&v| v >= lambda).count();
                (1.0 - lambda) / (1 + above) as f64
            }
            BoundEstimator::Quantile { k0 } => {
                let m = p.len();
                let (_, pk, _) = p.select_nth_unstable_by(k0 - 1, f64::total_cmp);
                (1.0 - *pk) / (m - k0 + 1) as f64
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub m: usize,
    pub ell: usize,
    pub m0: usize,
    pub estimator: BoundEstimator,
    pub replicates: usize,
    /// Estimate of `Σ_{i∈H0} E[1/G(p'^(i))]`.
    pub estimate: f64,
    pub se: f64,
    /// `estimate <= 1 + 3 se`.
    pub within_bound: bool,
}

/// Monte-Carlo estimate of the adaptive FDR bound with `H0 = {0, …, m0-1}`.
///
/// Each replicate draws one least-favorable vector per null index and sums
/// the `1/G` values.
pub fn verify_adaptive_bound(
    m: usize,
    ell: usize,
    m0: usize,
    estimator: BoundEstimator,
    replicates: usize,
    seed: u64,
) -> Result<BoundReport> {
    if m == 0 || m0 > m {
        return Err(Error::invalid(format!("need 1 <= m and m0 <= m, got m = {m}, m0 = {m0}")));
    }
    if ell < 1 {
        return Err(Error::invalid("ℓ must be at least 1"));
    }
    if replicates == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    estimator.check(m, ell)?;
    let is_null: Vec<bool> = (0..m).map(|j| j < m0).collect();
    let sums: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::indexed_stream(seed, "bound-replicate", rep as u64);
            let mut u = Vec::with_capacity(ell + 1);
            let mut p = vec![0.0; m];
            (0..m0)
                .map(|i| {
                    draw_least_favorable(&mut r, ell, &is_null, i, &mut u, &mut p);
                    estimator.inverse_g(&mut p, ell)
                })
                .sum()
        })
        .collect();
    let (estimate, se) = if m0 == 0 { (0.0, 0.0) } else { mean_se(&sums) };
    Ok(BoundReport {
        m,
        ell,
        m0,
        estimator,
        replicates,
        estimate,
        se,
        within_bound: estimate <= 1.0 + 3.0 * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(d: usize, n: usize, m: usize, m1: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            setting: Setting::GaussianSparse { d, signal_coords: 5.min(d), amplitude: None },
            n,
            m,
            m1,
            seed,
        }
    }

    #[test]
    fn sparse_gaussian_mean() {
        let s = Setting::GaussianSparse { d: 10, signal_coords: 5, amplitude: None };
        let mu = s.mean_shift();
        assert!((mu[0] - 2.146).abs() < 1e-3);
        assert_eq!(mu[4], mu[0]);
        assert_eq!(mu[5], 0.0);
    }

    #[test]
    fn equicorrelated_limits() {
        let cfg = |rho| GeneratorConfig {
            setting: Setting::Equicorrelated { d: 2, mu: vec![3.0, 3.0], rho },
            n: 5000,
            m: 10,
            m1: 2,
            seed: 1,
        };
        let g = gen_dataset(&cfg(1.0)).unwrap();
        let first = g.nulls.row(0).to_vec();
        assert!(g.nulls.rows().all(|r| r == first.as_slice()));
        assert!((g.test.row(0)[0] - first[0] - 3.0).abs() < 1e-12);

        let g = gen_dataset(&cfg(0.0)).unwrap();
        let a: Vec<f64> = g.nulls.rows().map(|r| r[0]).collect();
        let b: Vec<f64> = g.nulls.rows().map(|r| r[1]).collect();
        let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let (cov, se) = mean_se(&prods);
        assert!(cov.abs() <= 3.0 * se, "cov {cov}, se {se}");
    }

    #[test]
    fn beta_setting_ranges() {
        let cfg = GeneratorConfig { setting: Setting::Beta { d: 3 }, n: 50, m: 20, m1: 5, seed: 2 };
        let g = gen_dataset(&cfg).unwrap();
        assert!(g.nulls.as_slice().iter().chain(g.test.as_slice()).all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(g.is_novelty.iter().filter(|&&b| b).count(), 5);
        assert!(g.is_novelty[..5].iter().all(|&b| b));
        assert!(gen_dataset(&GeneratorConfig { setting: Setting::Beta { d: 1 }, ..cfg }).is_err());
    }

    #[test]
    fn trivial_procedures() {
        let mc = MonteCarloConfig {
            generator: gauss(2, 20, 10, 1, 0),
            split: SplitPolicy::EllEqualsM,
            alpha: 0.1,
            replicates: 7,
            seed: 3,
            workers: Some(2),
            keep_per_replicate: false,
        };
        let none = monte_carlo(&mc, &ProcedureConfig::RejectNone).unwrap();
        assert_eq!((none.fdr_hat, none.tdr_hat), (0.0, 0.0));
        let all = monte_carlo(&mc, &ProcedureConfig::RejectAll).unwrap();
        assert!((all.fdr_hat - 0.9).abs() < 1e-15);
        assert_eq!(all.tdr_hat, 1.0);
        assert!(all.fdr_se < 1e-12);
        let one = monte_carlo(&MonteCarloConfig { replicates: 1, ..mc }, &ProcedureConfig::RejectAll).unwrap();
        assert_eq!(one.fdr_se, 0.0);
        assert_eq!(one.warnings.len(), 1);
    }

    #[test]
    fn monte_carlo_is_worker_independent() {
        let mc = MonteCarloConfig {
            generator: gauss(3, 60, 20, 4, 0),
            split: SplitPolicy::EllEqualsM,
            alpha: 0.2,
            replicates: 12,
            seed: 8,
            workers: Some(1),
            keep_per_replicate: true,
        };
        let proc = ProcedureConfig::Adadetect { scorer: SimScorer::MeanDirection };
        let a = monte_carlo(&mc, &proc).unwrap();
        let b = monte_carlo(&MonteCarloConfig { workers: Some(3), ..mc }, &proc).unwrap();
        assert_eq!(a.per_replicate, b.per_replicate);
    }

    #[test]
    fn fdp_tdp_conventions() {
        let nov = [true, false, false];
        assert_eq!(fdp(&[], &nov), 0.0);
        assert_eq!(fdp(&[0, 1], &nov), 0.5);
        assert_eq!(tdp(&[0], &nov), 1.0);
        assert_eq!(tdp(&[1], &[false, false]), 0.0);
    }

    #[test]
    fn marginal_pvalue_examples() {
        let p = marginal_pvalues(&[0.0, 2.0 * 1.6449, -100.0], 2.0).unwrap();
        assert!((p.as_slice()[0] - 0.5).abs() < 1e-15);
        assert!((p.as_slice()[1] - 0.05).abs() < 1e-4);
        assert!(p.as_slice()[2] > 1.0 - 1e-12);
        assert!(marginal_storey_bh(&[-50.0; 10], 1.0, 0.1, 0.5).unwrap().is_empty());
        assert!(marginal_pvalues(&[0.0], 0.0).is_err());
    }

    #[test]
    fn least_favorable_structure() {
        let v = sample_least_favorable(6, 9, &[0, 2, 4], 2, 1).unwrap();
        assert_eq!(v[2], 0.1);
        assert_eq!((v[1], v[3], v[5]), (0.0, 0.0, 0.0));
        for x in [v[0], v[4]] {
            let j = x * 10.0;
            assert!((j - j.round()).abs() < 1e-12 && (0.1..=1.0).contains(&x));
        }
        let only_i = sample_least_favorable(4, 3, &[1], 1, 0).unwrap();
        assert_eq!(only_i, vec![0.0, 0.25, 0.0, 0.0]);
        assert!(sample_least_favorable(4, 0, &[1], 1, 0).is_err());
        assert!(sample_least_favorable(4, 3, &[1], 2, 0).is_err());
    }

    #[test]
    fn least_favorable_half_mass_for_ell_one() {
        let reps = 30000;
        let mut r = rng::stream(5, "t");
        let mut u = Vec::new();
        let mut out = vec![0.0; 2];
        let halves = (0..reps)
            .filter(|_| {
                draw_least_favorable(&mut r, 1, &[true, true], 0, &mut u, &mut out);
                out[1] == 0.5
            })
            .count() as f64
            / reps as f64;
        let se = (2.0 / 9.0 / reps as f64).sqrt();
        assert!((halves - 2.0 / 3.0).abs() < 4.0 * se, "{halves}");
    }

    #[test]
    fn bound_cases() {
        let r = verify_adaptive_bound(20, 10, 20, BoundEstimator::Storey { storey_k: 2 }, 2000, 1).unwrap();
        assert!(r.within_bound, "{r:?}");
        let r = verify_adaptive_bound(20, 10, 15, BoundEstimator::Quantile { k0: 6 }, 500, 1).unwrap();
        assert!(r.estimate <= 1.0);
        let r = verify_adaptive_bound(20, 10, 0, BoundEstimator::Quantile { k0: 3 }, 10, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(verify_adaptive_bound(20, 10, 5, BoundEstimator::Storey { storey_k: 1 }, 10, 1).is_err());
        assert!(verify_adaptive_bound(20, 10, 5, BoundEstimator::Quantile { k0: 21 }, 10, 1).is_err());
    }
}
