//! Linear PU classifiers: weighted logistic regression and a linear hinge
//! machine.

use crate::error::Result;

use super::{FittedScore, HingeParams, LogisticParams, PuTrainingSet, ScoreFunction, Standardizer};

/// `x ↦ σ(wᵀ s(x) + b)` with `s` the training standardisation.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    scaler: Standardizer,
    weights: Vec<f64>,
    bias: f64,
    /// Iterations actually run.
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn constant(id: &str, seed: u64, value: f64, why: String) -> FittedScore {
    FittedScore::new(id, seed, move |_: &[f64]| value).with_warning(why)
}

impl LogisticModel {
    /// Full-batch gradient descent with step `1/L`, `L` the gradient
    /// Lipschitz bound of the weighted, ridge-penalised loss.
    pub fn fit(train: &PuTrainingSet, params: &LogisticParams, seed: u64) -> Result<FittedScore> {
        if let Some(why) = train.degeneracy() {
            return Ok(constant("logistic", seed, 0.5, why));
        }
        Ok(FittedScore::new("logistic", seed, Self::train(train, params)))
    }

    pub fn train(train: &PuTrainingSet, params: &LogisticParams) -> Self {
        let stacked = train.stacked();
        let scaler = Standardizer::fit(&stacked);
        let z = scaler.apply(&stacked);
        let (y, w) = train.labels_and_weights();
        let d = z.dim();

        let second_moment: f64 = z
            .rows()
            .zip(&w)
            .map(|(r, wi)| wi * dot(r, r))
            .sum();
        let lip = 0.25 * (1.0 + second_moment) + params.l2;
        let step = 1.0 / lip;

        let mut beta = vec![0.0; d];
        let mut bias = 0.0;
        let mut grad = vec![0.0; d];
        let mut iterations = 0;
        for _ in 0..params.max_iter {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for ((r, yi), wi) in z.rows().zip(&y).zip(&w) {
                let e = wi * (sigmoid(dot(&beta, r) + bias) - yi);
                gb += e;
                for (g, v) in grad.iter_mut().zip(r) {
                    *g += e * v;
                }
            }
            for (g, b) in grad.iter_mut().zip(&beta) {
                *g += params.l2 * b;
            }
            let norm = (dot(&grad, &grad) + gb * gb).sqrt();
            if norm < params.grad_tol {
                break;
            }
            for (b, g) in beta.iter_mut().zip(&grad) {
                *b -= step * g;
            }
            bias -= step * gb;
            iterations += 1;
        }
        Self { scaler, weights: beta, bias, iterations }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        self.scaler.apply_row(x, &mut z);
        dot(&self.weights, &z) + self.bias
    }
}

impl ScoreFunction for LogisticModel {
    fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

/// Linear max-margin classifier; scores are margins clipped to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHingeModel {
    scaler: Standardizer,
    weights: Vec<f64>,
    bias: f64,
    /// Penalised objective at the returned iterate.
    pub objective: f64,
}

impl LinearHingeModel {
    /// Subgradient descent on the weighted hinge loss plus ridge penalty;
    /// returns the best iterate seen.
    pub fn fit(train: &PuTrainingSet, params: &HingeParams, seed: u64) -> Result<FittedScore> {
        if let Some(why) = train.degeneracy() {
            return Ok(constant("linear-hinge", seed, 0.0, why));
        }
        Ok(FittedScore::new("linear-hinge", seed, Self::train(train, params)))
    }

    pub fn train(train: &PuTrainingSet, params: &HingeParams) -> Self {
        let stacked = train.stacked();
        let scaler = Standardizer::fit(&stacked);
        let z = scaler.apply(&stacked);
        let (y, w) = train.labels_and_weights();
        let sign: Vec<f64> = y.iter().map(|v| 2.0 * v - 1.0).collect();
        let d = z.dim();

        let objective = |beta: &[f64], bias: f64| -> f64 {
            let loss: f64 = z
                .rows()
                .zip(&sign)
                .zip(&w)
                .map(|((r, s), wi)| wi * (1.0 - s * (dot(beta, r) + bias)).max(0.0))
                .sum();
            loss + 0.5 * params.l2 * dot(beta, beta)
        };

        let mut beta = vec![0.0; d];
        let mut bias = 0.0;
        let mut best = (beta.clone(), bias, objective(&beta, bias));
        let mut grad = vec![0.0; d];
        for t in 0..params.max_iter {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for ((r, s), wi) in z.rows().zip(&sign).zip(&w) {
                if s * (dot(&beta, r) + bias) < 1.0 {
                    gb -= wi * s;
                    for (g, v) in grad.iter_mut().zip(r) {
                        *g -= wi * s * v;
                    }
                }
            }
            for (g, b) in grad.iter_mut().zip(&beta) {
                *g += params.l2 * b;
            }
            let eta = params.step / ((t + 1) as f64).sqrt();
            for (b, g) in beta.iter_mut().zip(&grad) {
                *b -= eta * g;
            }
            bias -= eta * gb;
            let obj = objective(&beta, bias);
            if obj < best.2 {
                best = (beta.clone(), bias, obj);
            }
        }
        let (weights, bias, objective) = best;
        Self { scaler, weights, bias, objective }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        self.scaler.apply_row(x, &mut z);
        dot(&self.weights, &z) + self.bias
    }
}

impl ScoreFunction for LinearHingeModel {
    fn score(&self, x: &[f64]) -> f64 {
        self.margin(x).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Points;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Normal, StandardNormal};

    fn blob(n: usize, d: usize, shift: f64, seed: u64) -> Points {
        let mut r = rng::stream(seed, "blob");
        Points::new(d, (0..n * d).map(|_| r.sample::<f64, _>(StandardNormal) + shift).collect()).unwrap()
    }

    #[test]
    fn logistic_orders_separable_classes() {
        let pos = blob(100, 2, -3.0, 1);
        let unl = blob(100, 2, 3.0, 2);
        let train = PuTrainingSet::new(&pos, &unl, 1.0).unwrap();
        let f = LogisticModel::fit(&train, &LogisticParams::default(), 0).unwrap();
        assert!(f.warnings.is_empty());
        assert!(f.score(&[3.0, 3.0]) > f.score(&[-3.0, -3.0]));
        assert!(f.score(&[3.0, 3.0]) > 0.9);
    }

    #[test]
    fn no_positives_gives_constant_with_warning() {
        let unl = blob(10, 2, 0.0, 3);
        let train = PuTrainingSet::new(&Points::empty(2), &unl, 1.0).unwrap();
        let f = LogisticModel::fit(&train, &LogisticParams::default(), 0).unwrap();
        assert_eq!(f.warnings.len(), 1);
        assert_eq!(f.score(&[0.0, 0.0]), f.score(&[5.0, -5.0]));
    }

    #[test]
    fn logistic_gradient_vanishes_at_solution() {
        let pos = blob(50, 1, 0.0, 4);
        let unl = blob(60, 1, 1.0, 5);
        let train = PuTrainingSet::new(&pos, &unl, 1.0).unwrap();
        let params = LogisticParams { max_iter: 20000, grad_tol: 1e-9, ..Default::default() };
        let m = LogisticModel::train(&train, &params);
        assert!(m.iterations < 20000);
        assert!(m.weights()[0] > 0.0);
    }

    #[test]
    fn hinge_scores_saturate_on_separated_data() {
        let mut r = rng::stream(6, "h");
        let n0 = Normal::new(-5.0, 0.5).unwrap();
        let n1 = Normal::new(5.0, 0.5).unwrap();
        let pos = Points::from_scalars(&(0..50).map(|_| r.sample(n0)).collect::<Vec<_>>());
        let unl = Points::from_scalars(&(0..50).map(|_| r.sample(n1)).collect::<Vec<_>>());
        let train = PuTrainingSet::new(&pos, &unl, 1.0).unwrap();
        let f = LinearHingeModel::fit(&train, &HingeParams::default(), 0).unwrap();
        for x in unl.rows() {
            assert_eq!(f.score(x), 1.0);
        }
        for x in pos.rows() {
            assert_eq!(f.score(x), -1.0);
        }
    }
}
