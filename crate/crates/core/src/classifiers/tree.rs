//! CART classification tree with Gini impurity.

use serde::{Deserialize, Serialize};

/// Flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { class: usize },
}

impl DecisionTree {
    /// Grows a tree until leaves are pure or no split separates them.
    ///
    /// `x` is row-major with `n_features` columns per row; `y` holds class
    /// indices below `n_classes`. Ties between splits go to the lower
    /// feature index, then the lower threshold.
    pub fn fit(x: &[f64], n_features: usize, y: &[usize], n_classes: usize) -> DecisionTree {
        let n = y.len();
        let col = |f: usize, i: usize| x[i * n_features + f];
        // Per-feature row orders, partitioned in place as the tree grows.
        let mut sorted: Vec<Vec<usize>> = (0..n_features)
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| col(f, a).total_cmp(&col(f, b)).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut nodes = Vec::new();
        let mut side = vec![false; n];
        // (node slot, range start, range end)
        let mut stack = vec![(0usize, 0usize, n)];
        nodes.push(Node::Leaf { class: 0 });
        while let Some((slot, lo, hi)) = stack.pop() {
            let rows = &sorted[0][lo..hi];
            let mut counts = vec![0usize; n_classes];
            for &r in rows {
                counts[y[r]] += 1;
            }
            let majority = argmax_first(&counts);
            let total = hi - lo;
            if counts[majority] == total {
                nodes[slot] = Node::Leaf { class: majority };
                continue;
            }
            let parent = gini(&counts, total);
            let mut best: Option<(f64, usize, f64, usize)> = None; // (gain, feature, threshold, left size)
            let mut left = vec![0usize; n_classes];
            let total_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
            for (f, order) in sorted.iter().enumerate() {
                let order = &order[lo..hi];
                left.iter_mut().for_each(|c| *c = 0);
                // Running sums of squared class counts on each side.
                let (mut sq_l, mut sq_r) = (0.0, total_sq);
                for k in 0..total - 1 {
                    let c = y[order[k]];
                    sq_l += (2 * left[c] + 1) as f64;
                    sq_r -= (2 * (counts[c] - left[c]) - 1) as f64;
                    left[c] += 1;
                    let (a, b) = (col(f, order[k]), col(f, order[k + 1]));
                    if a == b {
                        continue;
                    }
                    let nl = (k + 1) as f64;
                    let nr = (total - k - 1) as f64;
                    let child = ((nl - sq_l / nl) + (nr - sq_r / nr)) / total as f64;
                    let gain = parent - child;
                    if best.is_none_or(|(g, ..)| gain > g + 1e-12) {
                        let mut t = a + (b - a) / 2.0;
                        if t >= b {
                            t = a;
                        }
                        best = Some((gain, f, t, k + 1));
                    }
                }
            }
            let Some((_, feature, threshold, nl)) = best else {
                nodes[slot] = Node::Leaf { class: majority };
                continue;
            };
            for &r in &sorted[feature][lo..hi] {
                side[r] = col(feature, r) <= threshold;
            }
            let mut buf = Vec::with_capacity(total);
            for order in sorted.iter_mut() {
                buf.clear();
                buf.extend(order[lo..hi].iter().copied().filter(|&r| side[r]));
                buf.extend(order[lo..hi].iter().copied().filter(|&r| !side[r]));
                order[lo..hi].copy_from_slice(&buf);
            }
            let l = nodes.len();
            nodes.push(Node::Leaf { class: 0 });
            let r = nodes.len();
            nodes.push(Node::Leaf { class: 0 });
            nodes[slot] = Node::Split { feature, threshold, left: l, right: r };
            stack.push((r, lo + nl, hi));
            stack.push((l, lo, lo + nl));
        }
        DecisionTree { nodes }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn argmax_first(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_training_set_exactly() {
        // XOR-like layout needs two levels.
        let x = [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let y = [0, 1, 1, 0];
        let t = DecisionTree::fit(&x, 2, &y, 2);
        for i in 0..4 {
            assert_eq!(t.predict(&x[2 * i..2 * i + 2]), y[i]);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn duplicate_rows_with_conflicting_labels_stop() {
        let x = [1.0, 1.0, 1.0];
        let y = [0, 1, 1];
        let t = DecisionTree::fit(&x, 1, &y, 2);
        assert_eq!(t.nodes, vec![Node::Leaf { class: 1 }]);
    }

    #[test]
    fn threshold_splits_between_values() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0, 0, 1, 1];
        let t = DecisionTree::fit(&x, 1, &y, 2);
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 1.5, left: 1, right: 2 });
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<DecisionTree>(&json).unwrap(), t);
    }
}
