//! Non-adaptive scores: closed forms that ignore the samples they are fit on.

use std::sync::Arc;

use crate::data::Points;
use crate::error::{Error, Result};

use super::{FittedScore, Scorer};

/// `z ↦ Σ z_j²`.
pub fn chi_square_score() -> FittedScore {
    FittedScore::new("chi-square", 0, |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>())
}

/// `z ↦ μᵀz`. `μ` must be nonzero.
pub fn linear_score(mu: Vec<f64>) -> Result<FittedScore> {
    if mu.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("linear score direction μ must be nonzero"));
    }
    Ok(FittedScore::new("linear", 0, move |z: &[f64]| {
        debug_assert_eq!(z.len(), mu.len());
        mu.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }))
}

/// A user-supplied closed-form score.
#[derive(Clone)]
pub struct FixedScore {
    id: String,
    func: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl FixedScore {
    pub fn new(id: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { id: id.into(), func: Arc::new(func) }
    }
}

impl Scorer for FixedScore {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn fit(&self, _first_null: &Points, _mixed: &Points, seed: u64) -> Result<FittedScore> {
        let f = self.func.clone();
        Ok(FittedScore::new(self.id.clone(), seed, move |z: &[f64]| f(z)))
    }
}

/// Scores every point the same. Useful as an uninformative baseline.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantScore(pub f64);

impl Scorer for ConstantScore {
    fn id(&self) -> String {
        "constant".into()
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn fit(&self, _first_null: &Points, _mixed: &Points, seed: u64) -> Result<FittedScore> {
        let c = self.0;
        Ok(FittedScore::new("constant", seed, move |_: &[f64]| c))
    }
}
