//! Gradient-boosted regression trees (depth 1 to 3) with Newton leaf
//! values, exact greedy splits on presorted features and level-wise
//! growth.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{weighted_mean, Family, FittedModel, Learner};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::rng::{stream_rng, uniform};
use crate::stats::{expit, logit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boosting {
    pub rounds: usize,
    pub shrinkage: f64,
    pub depth: usize,
    pub subsample: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
}

impl Default for Boosting {
    fn default() -> Self {
        Self { rounds: 100, shrinkage: 0.1, depth: 2, subsample: 1.0, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn eval(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    k = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingModel {
    family: Family,
    base: f64,
    trees: Vec<Tree>,
}

impl FittedModel for BoostingModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let f = self.base + self.trees.iter().map(|t| t.eval(row)).sum::<f64>();
                match self.family {
                    Family::Binomial => expit(f),
                    Family::Gaussian => f,
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Learner for Boosting {
    fn name(&self) -> String {
        "boost".into()
    }

    fn fit(&self, x: &Matrix, y: &[f64], weights: &[f64], family: Family, seed: u64) -> Result<Box<dyn FittedModel>> {
        let n = x.rows();
        let p = x.cols();
        let ybar = weighted_mean(y, weights);
        let base = match family {
            Family::Gaussian => ybar,
            Family::Binomial => logit(ybar.clamp(1e-6, 1.0 - 1e-6)),
        };
        let order: Vec<Vec<usize>> = (0..p)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut f = vec![base; n];
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut rng = stream_rng(seed, 0);
        let mut trees = Vec::with_capacity(self.rounds);
        let mut node_of = vec![usize::MAX; n];

        for _ in 0..self.rounds {
            for i in 0..n {
                let (gi, hi) = match family {
                    Family::Gaussian => (f[i] - y[i], 1.0),
                    Family::Binomial => {
                        let m = expit(f[i]);
                        (m - y[i], (m * (1.0 - m)).max(1e-12))
                    }
                };
                g[i] = weights[i] * gi;
                h[i] = weights[i] * hi;
            }
            for i in 0..n {
                let keep = self.subsample >= 1.0 || uniform(&mut rng) < self.subsample;
                node_of[i] = if keep && weights[i] > 0.0 { 0 } else { usize::MAX };
            }
            let tree = self.grow(x, &order, &g, &h, &mut node_of);
            for i in 0..n {
                f[i] += tree.eval(x.row(i));
            }
            trees.push(tree);
        }
        Ok(Box::new(BoostingModel { family, base, trees }))
    }
}

impl Boosting {
    fn leaf(&self, g: f64, h: f64) -> f64 {
        -self.shrinkage * g / (h + self.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.lambda)
    }

    /// `node_of[i]` is the open node holding row `i`, or `usize::MAX` for
    /// rows left out of this round.
    fn grow(&self, x: &Matrix, order: &[Vec<usize>], g: &[f64], h: &[f64], node_of: &mut [usize]) -> Tree {
        let n = x.rows();
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut open = vec![0usize];
        let mut sums = vec![(0.0, 0.0)];
        for i in 0..n {
            if node_of[i] == 0 {
                sums[0].0 += g[i];
                sums[0].1 += h[i];
            }
        }
        for _level in 0..self.depth {
            // local slot of every open node
            let mut slot = vec![usize::MAX; nodes.len()];
            for (s, &k) in open.iter().enumerate() {
                slot[k] = s;
            }
            let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
            for (j, idx) in order.iter().enumerate() {
                let mut acc = vec![(0.0f64, 0.0f64, 0usize, f64::NAN); open.len()];
                for &i in idx {
                    let k = node_of[i];
                    if k == usize::MAX || slot[k] == usize::MAX {
                        continue;
                    }
                    let s = slot[k];
                    let v = x.get(i, j);
                    let (gl, hl, cnt, last) = acc[s];
                    if cnt > 0 && v > last {
                        let (gt, ht) = sums[s];
                        let gain = self.score(gl, hl) + self.score(gt - gl, ht - hl) - self.score(gt, ht);
                        if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate { gain, feature: j, threshold: 0.5 * (last + v) });
                        }
                    }
                    acc[s] = (gl + g[i], hl + h[i], cnt + 1, v);
                }
            }
            let mut next_open = Vec::new();
            let mut next_sums = Vec::new();
            let mut splits = Vec::new();
            for (s, &k) in open.iter().enumerate() {
                if let Some(c) = best[s] {
                    let left = nodes.len();
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[k] = Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                    splits.push((k, c, left));
                } else {
                    let (gt, ht) = sums[s];
                    nodes[k] = Node::Leaf(self.leaf(gt, ht));
                }
            }
            if splits.is_empty() {
                return Tree { nodes };
            }
            let mut child_sums = vec![(0.0, 0.0); nodes.len()];
            for i in 0..n {
                let k = node_of[i];
                if k == usize::MAX {
                    continue;
                }
                if let Node::Split { feature, threshold, left, right } = nodes[k] {
                    let c = if x.get(i, feature) <= threshold { left } else { right };
                    node_of[i] = c;
                    child_sums[c].0 += g[i];
                    child_sums[c].1 += h[i];
                } else {
                    node_of[i] = usize::MAX;
                }
            }
            for (_, _, left) in splits {
                for c in [left, left + 1] {
                    next_open.push(c);
                    next_sums.push(child_sums[c]);
                }
            }
            open = next_open;
            sums = next_sums;
        }
        for (s, &k) in open.iter().enumerate() {
            let (gt, ht) = sums[s];
            nodes[k] = Node::Leaf(self.leaf(gt, ht));
        }
        Tree { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stumps_fit_a_step_function() {
        let n = 500;
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
        let y: Vec<f64> = xs.iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
        let x = Matrix::column(&xs);
        let b = Boosting { rounds: 200, depth: 1, ..Boosting::default() };
        let m = b.fit(&x, &y, &vec![1.0; n], Family::Gaussian, 0).unwrap();
        let mse: f64 = m.predict(&x).iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64;
        // pilot run: mse about 5e-10
        assert!(mse < 0.01, "mse {mse}");
    }

    #[test]
    fn depth_two_captures_interaction() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for _ in 0..25 {
                    rows.push([a as f64, b as f64]);
                    y.push(f64::from(u8::from(a == 1 && b == 1)));
                }
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = Boosting { rounds: 300, depth: 2, ..Boosting::default() }
            .fit(&x, &y, &vec![1.0; 100], Family::Binomial, 0)
            .unwrap();
        let p = m.predict(&Matrix::from_rows(&[[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).unwrap());
        assert!(p[0] > 0.9 && p[1] < 0.1 && p[2] < 0.1, "{p:?}");
    }
}
