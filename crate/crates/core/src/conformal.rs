//! Empirical (conformal) p-values from calibration and test scores.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtest::PValues;
use crate::rng;

/// Largest perturbation applied by [`break_ties`], relative to the score range.
pub const TIE_SCALE: f64 = 1.0 / (1u64 << 40) as f64;

/// Calibration-null and test scores after tie-breaking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSplit {
    calib: Vec<f64>,
    test: Vec<f64>,
    seed: u64,
}

impl ScoredSplit {
    /// Break ties across the pooled `calib ++ test` scores and store the result.
    pub fn new(calib: &[f64], test: &[f64], seed: u64) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::invalid("at least one test score is required"));
        }
        if let Some(v) = calib.iter().chain(test).find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("score {v} is not finite")));
        }
        let pooled: Vec<f64> = calib.iter().chain(test).copied().collect();
        let broken = break_ties(&pooled, seed);
        let (c, t) = broken.split_at(calib.len());
        Ok(Self { calib: c.to_vec(), test: t.to_vec(), seed })
    }

    pub fn calib(&self) -> &[f64] {
        &self.calib
    }

    pub fn test(&self) -> &[f64] {
        &self.test
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// `p_j = (1 + #{i : calib_i > test_j}) / (ℓ + 1)`.
///
/// Fails with an internal error if the split still carries ties.
pub fn empirical_pvalues(split: &ScoredSplit) -> Result<PValues> {
    let mut pooled: Vec<f64> = split.calib.iter().chain(&split.test).copied().collect();
    pooled.sort_by(f64::total_cmp);
    if pooled.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::internal("scores still tied after tie-breaking"));
    }
    Ok(pvalues_from_scores(&split.calib, &split.test))
}

/// The p-value count without any tie check. Ties count as "not greater".
pub fn pvalues_from_scores(calib: &[f64], test: &[f64]) -> PValues {
    let mut sorted = calib.to_vec();
    sorted.sort_by(f64::total_cmp);
    let denom = (calib.len() + 1) as f64;
    let values = test
        .iter()
        .map(|&t| {
            let above = sorted.len() - sorted.partition_point(|&s| s <= t);
            (1 + above) as f64 / denom
        })
        .collect();
    PValues::new(values).expect("grid values lie in (0, 1]")
}

/// Make all scores pairwise distinct.
///
/// Only entries that share a value with another entry move, each by less
/// than `2^-40` times the score range (or `2^-40` when the range is 0), and
/// never past a quarter of the gap to the neighbouring distinct values.
/// Within a tied group the order is a random permutation drawn from a stream
/// keyed by `seed` and by the sizes of the tie groups in value order. That
/// key does not depend on where each score sits in the input, nor on
/// strictly increasing transformations of the scores.
///
/// If some group cannot be spread inside its gap in floating point, every
/// score is replaced by its rank in the broken order instead. The order, and
/// hence every p-value, is the same either way.
pub fn break_ties(scores: &[f64], seed: u64) -> Vec<f64> {
    let mut out = scores.to_vec();
    if scores.len() < 2 {
        return out;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable: tied entries stay in input order
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    let mut groups: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || scores[order[i]] != scores[order[start]] {
            groups.push(&order[start..i]);
            start = i;
        }
    }
    if groups.len() == scores.len() {
        return out;
    }

    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let structure = sizes
        .iter()
        .fold(sizes.len() as u64, |h, &s| rng::mix64(h ^ s.to_bits()));
    let mut rng = rng::stream(seed ^ structure, "tie-break");

    let lo = scores[order[0]];
    let hi = scores[order[order.len() - 1]];
    let range = hi - lo;
    let scale = if range > 0.0 && range.is_finite() { range } else { 1.0 } * TIE_SCALE;

    // within-group ranks, drawn for every tied group in value order
    let ranks: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut r: Vec<usize> = (0..g.len()).collect();
            if g.len() > 1 {
                r.shuffle(&mut rng);
            }
            r
        })
        .collect();

    let mut fits = true;
    for (gi, group) in groups.iter().enumerate() {
        let g = group.len();
        if g < 2 {
            continue;
        }
        let v = scores[group[0]];
        let below = gi.checked_sub(1).map_or(f64::INFINITY, |p| v - scores[groups[p][0]]);
        let above = groups.get(gi + 1).map_or(f64::INFINITY, |n| scores[n[0]] - v);
        let half = scale.min(below / 4.0).min(above / 4.0);
        let mut spread: Vec<(usize, f64)> = ranks[gi]
            .iter()
            .map(|&r| (r, v + ((2 * (r + 1)) as f64 / (g + 1) as f64 - 1.0) * half))
            .collect();
        spread.sort_by_key(|&(r, _)| r);
        if !spread.windows(2).all(|w| w[0].1 < w[1].1) || !spread.iter().all(|&(_, x)| x.is_finite()) {
            fits = false;
            break;
        }
        for (&idx, &r) in group.iter().zip(&ranks[gi]) {
            out[idx] = spread[r].1;
        }
    }
    if !fits {
        let mut base = 0;
        for (group, r) in groups.iter().zip(&ranks) {
            for (&idx, &k) in group.iter().zip(r) {
                out[idx] = (base + k) as f64;
            }
            base += group.len();
        }
    }
    out
}
