//! Density-ratio scores `f̂_γ / f̂_0`.
//!
//! The null density is fit on the first null split only, the mixture density
//! on the mixed sample only. Two families are available: a shrinkage
//! Gaussian against a two-component Gaussian mixture fit by EM, and a pair
//! of regular histograms on a shared grid.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::rng;

use super::{FittedScore, HistogramParams, ParametricParams, ScoreFunction};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Ridge added to every EM covariance diagonal.
const EM_REG: f64 = 1e-6;

/// Lower Cholesky factor of a symmetric positive-definite `d×d` matrix.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// A multivariate normal density.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::invalid("covariance shape does not match mean"));
        }
        let chol = cholesky(cov, d)
            .ok_or_else(|| Error::Degenerate("covariance is not positive definite".into()))?;
        let log_det: f64 = (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>() * 2.0;
        Ok(Self { mean, chol, log_norm: -0.5 * (d as f64 * LN_2PI + log_det) })
    }

    /// Maximum-likelihood mean; covariance `(1-ρ)S + ρ (tr S / d) I`.
    pub fn fit_shrinkage(points: &Points, shrinkage: f64) -> Result<Self> {
        let d = points.dim();
        if points.len() < d + 2 {
            return Err(Error::invalid(format!(
                "gaussian fit needs at least d + 2 = {} points, got {}",
                d + 2,
                points.len()
            )));
        }
        if !(0.0..=1.0).contains(&shrinkage) {
            return Err(Error::invalid(format!("shrinkage {shrinkage} must lie in [0, 1]")));
        }
        let (mean, mut cov) = mean_cov(points);
        let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum::<f64>() / d as f64;
        // all points identical: keep a tiny isotropic spread
        let target = if trace > 0.0 { trace } else { 1e-12 };
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] *= 1.0 - shrinkage;
            }
            cov[i * d + i] += shrinkage * target;
            if trace == 0.0 {
                cov[i * d + i] += target;
            }
        }
        Self::new(mean, &cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut z = [0.0f64; 64];
        let mut heap;
        let z: &mut [f64] = if d <= 64 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let s: f64 = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            z[i] = (x[i] - self.mean[i] - s) / self.chol[i * d + i];
            q += z[i] * z[i];
        }
        self.log_norm - 0.5 * q
    }
}

fn mean_cov(points: &Points) -> (Vec<f64>, Vec<f64>) {
    let d = points.dim();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for r in points.rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    let mut c = vec![0.0; d];
    for r in points.rows() {
        for ((ci, v), m) in c.iter_mut().zip(r).zip(&mean) {
            *ci = v - m;
        }
        for i in 0..d {
            for j in 0..=i {
                cov[i * d + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i * d + j] /= n;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    (mean, cov)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Two-component Gaussian mixture with full covariances.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    log_weights: [f64; 2],
    components: [Gaussian; 2],
    /// Total log-likelihood of the training sample.
    pub log_likelihood: f64,
    /// Index of the restart that produced this fit.
    pub restart: usize,
}

impl GaussianMixture {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(
            self.log_weights[0] + self.components[0].log_density(x),
            self.log_weights[1] + self.components[1].log_density(x),
        )
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.log_weights[0].exp(), self.log_weights[1].exp()]
    }

    pub fn components(&self) -> &[Gaussian; 2] {
        &self.components
    }

    /// EM with `restarts` random initialisations; keeps the fit with the
    /// highest likelihood, earliest restart on ties.
    ///
    /// Restart `r` starts from two distinct sample points drawn from the
    /// stream `(seed, r)`, with both covariances set to the sample
    /// covariance and equal weights. Callers wanting order-invariance pass
    /// points in canonical order.
    pub fn fit_em(points: &Points, params: &ParametricParams, seed: u64) -> Result<Self> {
        let d = points.dim();
        let n = points.len();
        if n < d + 2 {
            return Err(Error::invalid(format!(
                "mixture fit needs at least d + 2 = {} points, got {n}",
                d + 2
            )));
        }
        let restarts = params.restarts.max(1);
        let (_, mut base_cov) = mean_cov(points);
        for i in 0..d {
            base_cov[i * d + i] += EM_REG;
        }
        let x = points.to_array();
        let mut best: Option<GaussianMixture> = None;
        for r in 0..restarts {
            let mut stream = rng::indexed_stream(seed, "em-restart", r as u64);
            let picks = sample(&mut stream, n, 2);
            let init = [points.row(picks.index(0)).to_vec(), points.row(picks.index(1)).to_vec()];
            let Ok(fit) = run_em(&x, init, &base_cov, params, r) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
                best = Some(fit);
            }
        }
        best.ok_or_else(|| Error::Degenerate("every EM restart collapsed".into()))
    }
}

impl Gaussian {
    /// `log φ(x_i)` for every row of `x`, via `‖L⁻¹(x - μ)‖²`.
    fn log_density_rows(&self, x: &Array2<f64>) -> Array1<f64> {
        let d = self.mean.len();
        let mut inv = Array2::<f64>::zeros((d, d));
        // forward substitution against the identity
        for col in 0..d {
            for i in col..d {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in col..i {
                    s -= self.chol[i * d + k] * inv[[k, col]];
                }
                inv[[i, col]] = s / self.chol[i * d + i];
            }
        }
        let centred = x - &ArrayView1::from(&self.mean[..]);
        let z = centred.dot(&inv.t());
        z.map_axis(Axis(1), |row| self.log_norm - 0.5 * row.dot(&row))
    }
}

fn run_em(
    x: &Array2<f64>,
    means: [Vec<f64>; 2],
    base_cov: &[f64],
    params: &ParametricParams,
    restart: usize,
) -> Result<GaussianMixture> {
    let (n, d) = x.dim();
    let nf = n as f64;
    let mut comps = [Gaussian::new(means[0].clone(), base_cov)?, Gaussian::new(means[1].clone(), base_cov)?];
    let mut log_w = [0.5f64.ln(); 2];
    let mut prev = f64::NEG_INFINITY;
    let mut iter = 0;
    loop {
        // E-step
        let la = comps[0].log_density_rows(x) + log_w[0];
        let lb = comps[1].log_density_rows(x) + log_w[1];
        let mut ll = 0.0;
        let mut resp = [Array1::<f64>::zeros(n), Array1::<f64>::zeros(n)];
        for i in 0..n {
            let lse = log_sum_exp(la[i], lb[i]);
            ll += lse;
            resp[0][i] = (la[i] - lse).exp();
            resp[1][i] = (lb[i] - lse).exp();
        }
        if !ll.is_finite() {
            return Err(Error::Degenerate("non-finite likelihood".into()));
        }
        iter += 1;
        if iter > params.max_iter || (ll - prev).abs() / nf < params.tol {
            return Ok(GaussianMixture { log_weights: log_w, components: comps, log_likelihood: ll, restart });
        }
        prev = ll;

        // M-step
        let mut next: Vec<Gaussian> = Vec::with_capacity(2);
        for (c, r) in resp.iter().enumerate() {
            let nk = r.sum();
            if nk < 1e-8 * nf || nk < 1.0 {
                return Err(Error::Degenerate("mixture component collapsed".into()));
            }
            let mean = x.t().dot(r) / nk;
            let centred = x - &mean;
            let weighted = &centred * &r.view().insert_axis(Axis(1));
            let mut cov = weighted.t().dot(&centred) / nk;
            for a in 0..d {
                cov[[a, a]] += EM_REG;
            }
            // exact symmetry for the Cholesky factorisation
            for a in 0..d {
                for b in 0..a {
                    cov[[b, a]] = cov[[a, b]];
                }
            }
            log_w[c] = (nk / nf).ln();
            next.push(Gaussian::new(mean.to_vec(), cov.as_standard_layout().as_slice().expect("standard layout"))?);
        }
        let b = next.pop().expect("two components");
        let a = next.pop().expect("two components");
        comps = [a, b];
    }
}

/// Piecewise-constant density on a regular partition of `[0,1]^d` into
/// `bins^d` cubes. Only occupied cells are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDensity {
    bins: usize,
    dim: usize,
    n_total: usize,
    counts: HashMap<Vec<u32>, usize>,
}

/// Default cells per axis for `n` points in dimension `d`: `ceil(n^(1/(2+d)))`.
pub fn default_bins(n: usize, d: usize) -> usize {
    let m = (n.max(1) as f64).powf(1.0 / (2.0 + d as f64)).ceil() as usize;
    // guard against powf landing a hair above an exact integer root
    let m = if m > 1 && ((m - 1) as f64).powf(2.0 + d as f64) >= n as f64 { m - 1 } else { m };
    m.max(1)
}

/// Histogram density of `points` (all coordinates in `[0,1]`), with cell
/// value `bins^d × count / n_total`.
pub fn histogram_density(points: &Points, n_total: usize, bins: Option<usize>) -> Result<HistogramDensity> {
    HistogramDensity::fit(points, n_total, bins)
}

impl HistogramDensity {
    pub fn fit(points: &Points, n_total: usize, bins: Option<usize>) -> Result<Self> {
        let dim = points.dim();
        if n_total == 0 || n_total < points.len() {
            return Err(Error::invalid(format!(
                "n_total = {n_total} must be positive and at least the number of points ({})",
                points.len()
            )));
        }
        let bins = bins.unwrap_or_else(|| default_bins(n_total, dim));
        if bins == 0 || bins > u32::MAX as usize {
            return Err(Error::invalid("histogram needs between 1 and 2^32-1 bins per axis"));
        }
        let mut counts = HashMap::new();
        for (i, r) in points.rows().enumerate() {
            if let Some(v) = r.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!("point {i} has coordinate {v} outside [0, 1]")));
            }
            *counts.entry(cell_of(r, bins)).or_insert(0) += 1;
        }
        Ok(Self { bins, dim, n_total, counts })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Volume of one cell times the number of cells, i.e. `bins^d`.
    fn cells_per_unit(&self) -> f64 {
        (self.bins as f64).powi(self.dim as i32)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let cell = cell_of(x, self.bins);
        let c = self.counts.get(&cell).copied().unwrap_or(0);
        self.cells_per_unit() * c as f64 / self.n_total as f64
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.density(x).ln()
    }

    /// Probability mass of each occupied cell.
    pub fn cell_masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.counts.values().map(move |&c| c as f64 / self.n_total as f64)
    }

    pub fn occupied_cells(&self) -> usize {
        self.counts.len()
    }
}

fn cell_of(x: &[f64], bins: usize) -> Vec<u32> {
    x.iter()
        .map(|&v| ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1) as u32)
        .collect()
}

/// A fitted density with its family.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityModel {
    GaussianShrinkage(Gaussian),
    GaussianMixture2(GaussianMixture),
    Histogram(HistogramDensity),
}

impl DensityModel {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            DensityModel::GaussianShrinkage(g) => g.log_density(x),
            DensityModel::GaussianMixture2(g) => g.log_density(x),
            DensityModel::Histogram(h) => h.log_density(x),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DensityModel::GaussianShrinkage(_) => "gaussian-shrinkage",
            DensityModel::GaussianMixture2(_) => "gaussian-mixture-2",
            DensityModel::Histogram(_) => "histogram",
        }
    }
}

/// Which pair of estimators a density-ratio score uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DensityFamily {
    Parametric(ParametricParams),
    Histogram(HistogramParams),
}

/// Per-axis affine map onto `[0,1]`, clamped.
#[derive(Clone, Debug, PartialEq)]
struct MinMax {
    lo: Vec<f64>,
    inv_width: Vec<f64>,
}

impl MinMax {
    fn fit(points: &Points) -> Self {
        let d = points.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for r in points.rows() {
            for j in 0..d {
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
        }
        let inv_width = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { 1.0 / (h - l) } else { 1.0 })
            .collect();
        Self { lo, inv_width }
    }

    fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lo)
            .zip(&self.inv_width)
            .map(|((v, l), w)| ((v - l) * w).clamp(0.0, 1.0))
            .collect()
    }

    fn apply(&self, points: &Points) -> Points {
        let mut out = Points::empty(points.dim());
        for r in points.rows() {
            out.push(&self.apply_row(r));
        }
        out
    }
}

/// `x ↦ f̂_γ(x) / f̂_0(x)`; `+inf` where `f̂_0(x) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityRatioScore {
    null: DensityModel,
    mixed: DensityModel,
    rescale: Option<MinMax>,
}

impl DensityRatioScore {
    pub fn null_model(&self) -> &DensityModel {
        &self.null
    }

    pub fn mixed_model(&self) -> &DensityModel {
        &self.mixed
    }

    pub fn ratio(&self, x: &[f64]) -> f64 {
        let (l0, l1) = match &self.rescale {
            Some(mm) => {
                let y = mm.apply_row(x);
                (self.null.log_density(&y), self.mixed.log_density(&y))
            }
            None => (self.null.log_density(x), self.mixed.log_density(x)),
        };
        if l0 == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        (l1 - l0).exp()
    }
}

impl ScoreFunction for DensityRatioScore {
    fn score(&self, x: &[f64]) -> f64 {
        self.ratio(x)
    }
}

/// Fit `f̂_0` on `first_null` and `f̂_γ` on `mixed`.
///
/// Histogram inputs are min-max rescaled with ranges from `first_null`; both
/// histograms share `bins` cells per axis, defaulting to
/// `ceil(|mixed|^(1/(2+d)))`.
pub fn density_ratio_score(
    first_null: &Points,
    mixed: &Points,
    family: &DensityFamily,
    seed: u64,
) -> Result<FittedScore> {
    if first_null.is_empty() || mixed.is_empty() {
        return Err(Error::invalid("density-ratio scores need nonempty first-null and mixed samples"));
    }
    let first_null = first_null.canonical();
    let mixed = mixed.canonical();
    let score = match family {
        DensityFamily::Parametric(p) => {
            let null = Gaussian::fit_shrinkage(&first_null, p.shrinkage)?;
            let em_seed = seed ^ rng::multiset_hash(&mixed);
            let mix = GaussianMixture::fit_em(&mixed, p, em_seed)?;
            DensityRatioScore {
                null: DensityModel::GaussianShrinkage(null),
                mixed: DensityModel::GaussianMixture2(mix),
                rescale: None,
            }
        }
        DensityFamily::Histogram(p) => {
            let mm = MinMax::fit(&first_null);
            let bins = p.bins.unwrap_or_else(|| default_bins(mixed.len(), mixed.dim()));
            let null = HistogramDensity::fit(&mm.apply(&first_null), first_null.len(), Some(bins))?;
            let mix = HistogramDensity::fit(&mm.apply(&mixed), mixed.len(), Some(bins))?;
            DensityRatioScore {
                null: DensityModel::Histogram(null),
                mixed: DensityModel::Histogram(mix),
                rescale: Some(mm),
            }
        }
    };
    let id = match family {
        DensityFamily::Parametric(_) => "parametric",
        DensityFamily::Histogram(_) => "histogram",
    };
    Ok(FittedScore::new(id, seed, score))
}
