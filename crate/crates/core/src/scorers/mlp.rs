//! One-hidden-layer ReLU network trained as a weighted PU classifier.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Points;
use crate::error::Result;
use crate::rng;

use super::{FittedScore, MlpParams, PuTrainingSet, ScoreFunction, Standardizer};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// `x ↦ σ(w₂ᵀ relu(W₁ᵀ s(x) + b₁) + b₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    scaler: Standardizer,
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array1<f64>,
    b2: f64,
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

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

impl MlpModel {
    /// Full-batch Adam on the weighted cross-entropy plus ridge penalty,
    /// from He-normal initial weights drawn from `seed`.
    pub fn fit(train: &PuTrainingSet, params: &MlpParams, seed: u64) -> Result<FittedScore> {
        if let Some(why) = train.degeneracy() {
            return Ok(FittedScore::new("mlp", seed, |_: &[f64]| 0.5).with_warning(why));
        }
        if params.hidden == 0 {
            return Err(crate::Error::invalid("mlp needs at least one hidden unit"));
        }
        Ok(FittedScore::new("mlp", seed, Self::train(train, params, seed)))
    }

    pub fn train(train: &PuTrainingSet, params: &MlpParams, seed: u64) -> Self {
        let stacked = train.stacked();
        let scaler = Standardizer::fit(&stacked);
        let x = scaler.apply(&stacked).to_array();
        let (y, w) = train.labels_and_weights();
        let y = Array1::from(y);
        let w = Array1::from(w);
        let (n, d) = x.dim();
        let h = params.hidden;

        let mut r = rng::stream(seed, "mlp-init");
        let s1 = (2.0 / d as f64).sqrt();
        let s2 = (2.0 / h as f64).sqrt();
        let mut w1 = Array2::from_shape_fn((d, h), |_| s1 * r.sample::<f64, _>(StandardNormal));
        let mut b1 = Array1::<f64>::zeros(h);
        let mut w2 = Array1::from_shape_fn(h, |_| s2 * r.sample::<f64, _>(StandardNormal));
        let mut b2 = 0.0;

        let n_params = d * h + h + h + 1;
        let mut adam = Adam::new(n_params);
        let mut flat = vec![0.0; n_params];
        let mut grad = vec![0.0; n_params];
        let mut iterations = 0;

        for _ in 0..params.max_iter {
            // forward
            let mut a = x.dot(&w1);
            a += &b1;
            a.mapv_inplace(|v| v.max(0.0));
            let logits = a.dot(&w2) + b2;
            let mut e = Array1::<f64>::zeros(n);
            Zip::from(&mut e).and(&logits).and(&y).and(&w).for_each(|e, &z, &yi, &wi| {
                *e = wi * (sigmoid(z) - yi);
            });

            // backward
            let g_w2 = a.t().dot(&e) + &(&w2 * params.l2);
            let g_b2 = e.sum();
            Zip::from(a.rows_mut()).and(&e).for_each(|mut row, &ei| {
                Zip::from(&mut row).and(&w2).for_each(|v, &wj| {
                    *v = if *v > 0.0 { ei * wj } else { 0.0 };
                });
            });
            let g_w1 = x.t().dot(&a) + &(&w1 * params.l2);
            let g_b1 = a.sum_axis(Axis(0));

            let mut off = 0;
            for src in [g_w1.as_slice().unwrap(), g_b1.as_slice().unwrap(), g_w2.as_slice().unwrap(), &[g_b2]] {
                grad[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < params.grad_tol {
                break;
            }

            let mut off = 0;
            for src in [w1.as_slice().unwrap(), b1.as_slice().unwrap(), w2.as_slice().unwrap(), &[b2]] {
                flat[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
            adam.step(&mut flat, &grad, params.learning_rate);
            let (p_w1, rest) = flat.split_at(d * h);
            let (p_b1, rest) = rest.split_at(h);
            let (p_w2, p_b2) = rest.split_at(h);
            w1.as_slice_mut().unwrap().copy_from_slice(p_w1);
            b1.as_slice_mut().unwrap().copy_from_slice(p_b1);
            w2.as_slice_mut().unwrap().copy_from_slice(p_w2);
            b2 = p_b2[0];
            iterations += 1;
        }
        Self { scaler, w1, b1, w2, b2, iterations }
    }

    fn logits(&self, x: &Array2<f64>) -> Array1<f64> {
        let mut a = x.dot(&self.w1);
        a += &self.b1;
        a.mapv_inplace(|v| v.max(0.0));
        a.dot(&self.w2) + self.b2
    }
}

impl ScoreFunction for MlpModel {
    fn score(&self, x: &[f64]) -> f64 {
        let p = Points::new(x.len(), x.to_vec()).expect("row has its own dimension");
        self.score_all(&p)[0]
    }

    fn score_all(&self, points: &Points) -> Vec<f64> {
        if points.is_empty() {
            return Vec::new();
        }
        let z = self.scaler.apply(points).to_array();
        self.logits(&z).iter().map(|&v| sigmoid(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(n: usize, d: usize, shift: f64, seed: u64) -> Points {
        let mut r = rng::stream(seed, "blob");
        Points::new(d, (0..n * d).map(|_| r.sample::<f64, _>(StandardNormal) + shift).collect()).unwrap()
    }

    fn small() -> MlpParams {
        MlpParams { hidden: 8, max_iter: 300, learning_rate: 0.01, ..Default::default() }
    }

    #[test]
    fn separable_classes_are_ordered() {
        let pos = blob(80, 2, -2.5, 1);
        let unl = blob(80, 2, 2.5, 2);
        let train = PuTrainingSet::new(&pos, &unl, 1.0).unwrap();
        let f = MlpModel::fit(&train, &small(), 7).unwrap();
        assert!(f.score(&[2.5, 2.5]) > 0.9);
        assert!(f.score(&[-2.5, -2.5]) < 0.1);
    }

    #[test]
    fn batched_and_single_scores_agree() {
        let pos = blob(30, 3, 0.0, 3);
        let unl = blob(30, 3, 1.0, 4);
        let train = PuTrainingSet::new(&pos, &unl, 1.0).unwrap();
        let m = MlpModel::train(&train, &small(), 1);
        let all = m.score_all(&unl);
        for (r, s) in unl.rows().zip(all) {
            assert!((m.score(r) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn refit_on_shuffled_mixed_is_bit_identical() {
        let pos = blob(30, 2, 0.0, 5);
        let unl = blob(40, 2, 0.7, 6);
        let rev: Vec<usize> = (0..unl.len()).rev().collect();
        let t1 = PuTrainingSet::new(&pos, &unl, 1.0).unwrap();
        let t2 = PuTrainingSet::new(&pos, &unl.select(&rev), 1.0).unwrap();
        let a = MlpModel::train(&t1, &small(), 9).score_all(&unl);
        let b = MlpModel::train(&t2, &small(), 9).score_all(&unl);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn identical_points_give_constant() {
        let p = Points::from_scalars(&[1.0; 5]);
        let train = PuTrainingSet::new(&p, &p, 1.0).unwrap();
        let f = MlpModel::fit(&train, &small(), 0).unwrap();
        assert_eq!(f.warnings.len(), 1);
    }
}
