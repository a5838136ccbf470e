//! Axis-aligned binary regression trees grown by greedy variance reduction.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Arena-allocated tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    pub max_depth: usize,
    /// Minimum total sample weight on each side of a split.
    pub min_leaf: usize,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
}

/// Training statistics of a node, kept alongside the tree for pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStats {
    pub value: f64,
    pub sse: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: Tree,
    pub stats: Vec<NodeStats>,
}

/// Row indices sorted by each feature (ties by row index), computed once
/// and shared by every tree grown on the same matrix.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(columns: &[Vec<f64>]) -> Self {
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    target: &'a [f64],
    weights: &'a [f64],
    params: GrowParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    stats: Vec<NodeStats>,
    goes_left: Vec<bool>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn node_stats(&self, rows: &[u32]) -> NodeStats {
        let (mut w, mut s) = (0.0, 0.0);
        for &r in rows {
            let r = r as usize;
            w += self.weights[r];
            s += self.weights[r] * self.target[r];
        }
        let mean = s / w;
        let sse = rows
            .iter()
            .map(|&r| {
                let r = r as usize;
                self.weights[r] * (self.target[r] - mean).powi(2)
            })
            .sum();
        NodeStats {
            value: mean,
            sse,
            weight: w,
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.columns.len();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < p => {
                let mut f = sample(rng, p, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, sorted: &[Vec<u32>], stats: &NodeStats) -> Option<BestSplit> {
        let min_leaf = self.params.min_leaf.max(1) as f64;
        let mean = stats.value;
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let col = &self.columns[f];
            let rows = &sorted[f];
            let total_s: f64 = rows
                .iter()
                .map(|&r| self.weights[r as usize] * (self.target[r as usize] - mean))
                .sum();
            let (mut wl, mut sl) = (0.0, 0.0);
            for i in 0..rows.len() - 1 {
                let r = rows[i] as usize;
                wl += self.weights[r];
                sl += self.weights[r] * (self.target[r] - mean);
                let x = col[r];
                let x_next = col[rows[i + 1] as usize];
                if x_next <= x {
                    continue;
                }
                let wr = stats.weight - wl;
                if wl < min_leaf || wr < min_leaf {
                    continue;
                }
                let sr = total_s - sl;
                let gain = sl * sl / wl + sr * sr / wr - total_s * total_s / stats.weight;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: x + (x_next - x) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let stats = self.node_stats(&sorted[0]);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: stats.value });
        self.stats.push(stats);

        if depth >= self.params.max_depth || stats.weight < 2.0 * self.params.min_leaf.max(1) as f64 || stats.sse <= 0.0
        {
            return id;
        }
        let Some(split) = self.best_split(&sorted, &stats) else {
            return id;
        };
        if split.gain.is_nan() || split.gain <= 1e-12 * stats.sse {
            return id;
        }

        let col = &self.columns[split.feature];
        for &r in &sorted[0] {
            self.goes_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let (mut left_sorted, mut right_sorted) = (Vec::new(), Vec::new());
        for rows in &sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| self.goes_left[r as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        drop(sorted);
        let left = self.grow(left_sorted, depth + 1);
        let right = self.grow(right_sorted, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on the rows with positive weight.
pub fn grow_tree(
    columns: &[Vec<f64>],
    target: &[f64],
    weights: &[f64],
    presorted: &Presorted,
    params: GrowParams,
    rng: Option<&mut ChaCha8Rng>,
) -> GrownTree {
    let sorted: Vec<Vec<u32>> = presorted
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect())
        .collect();
    let mut grower = Grower {
        columns,
        target,
        weights,
        params,
        rng,
        nodes: Vec::new(),
        stats: Vec::new(),
        goes_left: vec![false; target.len()],
    };
    if sorted.is_empty() || sorted[0].is_empty() {
        return GrownTree {
            tree: Tree::constant(0.0),
            stats: vec![NodeStats {
                value: 0.0,
                sse: 0.0,
                weight: 0.0,
            }],
        };
    }
    grower.grow(sorted, 0);
    GrownTree {
        tree: Tree { nodes: grower.nodes },
        stats: grower.stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> GrowParams {
        GrowParams {
            max_depth: depth,
            min_leaf: 1,
            max_features: None,
        }
    }

    #[test]
    fn splits_separable_rows() {
        let cols = vec![vec![0.0, 0.0, 1.0, 1.0]];
        let y = [1.0, 1.0, 5.0, 5.0];
        let g = grow_tree(&cols, &y, &[1.0; 4], &Presorted::new(&cols), params(3), None);
        assert_eq!(g.tree.leaf_count(), 2);
        assert_eq!(g.tree.predict_row(&[0.0]), 1.0);
        assert_eq!(g.tree.predict_row(&[1.0]), 5.0);
        assert_eq!(
            g.tree.nodes[0],
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
    }

    #[test]
    fn ties_go_to_lowest_feature() {
        // both features separate the target identically
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]];
        let y = [0.0, 0.0, 1.0, 1.0];
        let g = grow_tree(&cols, &y, &[1.0; 4], &Presorted::new(&cols), params(1), None);
        assert!(matches!(g.tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let cols = vec![vec![0.0, 1.0, 2.0]];
        let y = [1.0, 100.0, 3.0];
        let g = grow_tree(&cols, &y, &[1.0, 0.0, 1.0], &Presorted::new(&cols), params(0), None);
        assert_eq!(g.tree.predict_row(&[1.0]), 2.0);
    }

    #[test]
    fn depth_limit_holds() {
        let cols = vec![(0..64).map(f64::from).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..64).map(|i| (i * i) as f64).collect();
        let g = grow_tree(&cols, &y, &vec![1.0; 64], &Presorted::new(&cols), params(3), None);
        assert!(g.tree.depth() <= 3);
        assert!(g.tree.leaf_count() <= 8);
    }
}
