//! Greedy CART regression tree.
//!
//! Each node takes the split with the largest reduction in squared error.
//! Thresholds are midpoints between consecutive distinct feature values; a
//! row goes left when `x[feature] <= threshold`. Ties go to the lowest feature
//! index, then the lowest threshold.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Relative margin a candidate must beat the incumbent by to replace it.
pub(crate) const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Mean target of the training rows reaching this node.
    pub value: f64,
    pub n_samples: usize,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// Nodes in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.split.is_none())
    }

    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        self.nodes[i].value
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    /// The same tree cut at `max_depth`. Identical to growing it with that
    /// depth limit, since split choices never depend on the limit.
    pub fn truncated(&self, max_depth: usize) -> TreeModel {
        let mut nodes = Vec::new();
        self.copy_subtree(0, max_depth, &mut nodes);
        TreeModel { nodes }
    }

    fn copy_subtree(&self, i: usize, max_depth: usize, out: &mut Vec<Node>) -> usize {
        let src = &self.nodes[i];
        let idx = out.len();
        out.push(Node {
            split: None,
            ..src.clone()
        });
        if let Some(s) = src.split {
            if src.depth < max_depth {
                let left = self.copy_subtree(s.left, max_depth, out);
                let right = self.copy_subtree(s.right, max_depth, out);
                out[idx].split = Some(Split { left, right, ..s });
            }
        }
        idx
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let m = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mean = sum / m as f64;
        let idx = self.nodes.len();
        self.nodes.push(Node {
            value: mean,
            n_samples: m,
            depth,
            split: None,
        });
        if depth >= self.max_depth || m < 2 * self.min_leaf {
            return idx;
        }
        let sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        if sse <= 0.0 {
            return idx;
        }
        let Some((feature, threshold)) = self.best_split(&rows, sum, sse) else {
            return idx;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[[r, feature]] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[idx].split = Some(Split {
            feature,
            threshold,
            left,
            right,
        });
        idx
    }

    fn best_split(&self, rows: &[usize], total: f64, sse: f64) -> Option<(usize, f64)> {
        let m = rows.len();
        let base = total * total / m as f64;
        // maximize Σ_child (sum²/count); the reduction is that minus `base`
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(m);
        for f in 0..self.x.ncols() {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for pos in 0..m - 1 {
                left_sum += pairs[pos].1;
                let nl = pos + 1;
                let nr = m - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                if pairs[pos].0 >= pairs[pos + 1].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                let better = match best {
                    None => true,
                    Some((b, _, _)) => score - b > TIE_TOLERANCE * sse,
                };
                if better {
                    let threshold = 0.5 * (pairs[pos].0 + pairs[pos + 1].0);
                    best = Some((score, f, threshold));
                }
            }
        }
        best.filter(|(s, _, _)| s - base > TIE_TOLERANCE * sse)
            .map(|(_, f, t)| (f, t))
    }
}

/// Grows a tree to at most `max_depth` levels with at least `min_leaf` rows per leaf.
pub fn fit_tree(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    max_depth: usize,
    min_leaf: usize,
) -> TreeModel {
    assert_eq!(x.nrows(), y.len());
    assert!(min_leaf >= 1);
    let mut b = Builder {
        x,
        y,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    if y.is_empty() {
        return TreeModel {
            nodes: vec![Node {
                value: 0.0,
                n_samples: 0,
                depth: 0,
                split: None,
            }],
        };
    }
    b.grow((0..y.len()).collect(), 0);
    TreeModel { nodes: b.nodes }
}
