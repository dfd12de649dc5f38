//! Bagged classification trees with weighted Gini splits.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::{FittedScore, ForestParams, PuTrainingSet, ScoreFunction};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(bool),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Score `(votes + 1) / (trees + 2)` where a tree votes when its leaf is
/// majority-unlabeled by weight.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
}

struct Builder<'a, R> {
    x: &'a [f64],
    d: usize,
    y: &'a [f64],
    w: &'a [f64],
    mtry: usize,
    max_depth: usize,
    rng: R,
    nodes: Vec<Node>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p) * total
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let (mut one, mut all) = (0.0, 0.0);
        for &i in idx {
            one += self.w[i] * self.y[i];
            all += self.w[i];
        }
        self.nodes.push(Node::Leaf(one > 0.5 * all));
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let (mut one, mut all) = (0.0, 0.0);
        for &i in idx.iter() {
            one += self.w[i] * self.y[i];
            all += self.w[i];
        }
        if depth >= self.max_depth || idx.len() < 2 || one <= 0.0 || one >= all {
            return self.leaf(idx);
        }
        let parent = gini(one, all);
        let mut best: Option<(f64, usize, f64)> = None;
        let features = sample(&mut self.rng, self.d, self.mtry);
        for f in features.iter() {
            idx.sort_by(|&a, &b| self.x[a * self.d + f].total_cmp(&self.x[b * self.d + f]));
            let (mut l_one, mut l_all) = (0.0, 0.0);
            for k in 0..idx.len() - 1 {
                let i = idx[k];
                l_one += self.w[i] * self.y[i];
                l_all += self.w[i];
                let v = self.x[i * self.d + f];
                let next = self.x[idx[k + 1] * self.d + f];
                if v == next {
                    continue;
                }
                let impurity = gini(l_one, l_all) + gini(one - l_one, all - l_all);
                if impurity < parent - 1e-12 * all
                    && best.is_none_or(|(b, _, _)| impurity < b)
                {
                    best = Some((impurity, f, v + 0.5 * (next - v)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(idx);
        };
        let mid = partition(idx, |i| self.x[i * self.d + feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(false));
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for j in 0..idx.len() {
        if pred(idx[j]) {
            idx.swap(k, j);
            k += 1;
        }
    }
    k
}

impl TreeEnsemble {
    pub fn fit(train: &PuTrainingSet, params: &ForestParams, seed: u64) -> Result<FittedScore> {
        if let Some(why) = train.degeneracy() {
            return Ok(FittedScore::new("tree-ensemble", seed, |_: &[f64]| 0.5).with_warning(why));
        }
        Ok(FittedScore::new("tree-ensemble", seed, Self::train(train, params, seed)?))
    }

    /// Each tree grows on a bootstrap resample and considers
    /// `max(1, floor(sqrt d))` random features per split.
    pub fn train(train: &PuTrainingSet, params: &ForestParams, seed: u64) -> Result<Self> {
        if params.trees == 0 {
            return Err(Error::invalid("tree ensemble needs at least one tree"));
        }
        let stacked = train.stacked();
        let (y, w) = train.labels_and_weights();
        let n = stacked.len();
        let d = stacked.dim();
        let mtry = ((d as f64).sqrt().floor() as usize).clamp(1, d);
        let trees = (0..params.trees)
            .map(|t| {
                let mut r = rng::indexed_stream(seed, "tree", t as u64);
                let mut idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                let mut b = Builder {
                    x: stacked.as_slice(),
                    d,
                    y: &y,
                    w: &w,
                    mtry,
                    max_depth: params.max_depth,
                    rng: r,
                    nodes: Vec::new(),
                };
                b.build(&mut idx, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self { trees })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

impl ScoreFunction for TreeEnsemble {
    fn score(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        (votes + 1) as f64 / (self.trees.len() + 2) as f64
    }
}
