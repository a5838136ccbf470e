//! Minimal cost-complexity pruning with the cross-validated one-standard-error
//! rule.

use super::tree::{grow_tree, GrowParams, GrownTree, Node, Presorted, Tree};

/// Optimal subtree for complexity parameter `alpha`: a subtree is collapsed
/// whenever its leaf cost `R(t) + α` does not exceed the cost of keeping it.
pub fn prune_to_alpha(grown: &GrownTree, alpha: f64) -> Tree {
    fn cost(g: &GrownTree, i: usize, alpha: f64, keep: &mut [bool]) -> f64 {
        let leaf_cost = g.stats[i].sse + alpha;
        match g.tree.nodes[i] {
            Node::Leaf { .. } => leaf_cost,
            Node::Split { left, right, .. } => {
                let sub = cost(g, left, alpha, keep) + cost(g, right, alpha, keep);
                if sub < leaf_cost {
                    keep[i] = true;
                    sub
                } else {
                    leaf_cost
                }
            }
        }
    }
    let mut keep = vec![false; grown.tree.nodes.len()];
    cost(grown, 0, alpha, &mut keep);
    rebuild(grown, &keep)
}

fn rebuild(grown: &GrownTree, keep: &[bool]) -> Tree {
    fn copy(g: &GrownTree, keep: &[bool], i: usize, out: &mut Vec<Node>) -> usize {
        let id = out.len();
        out.push(Node::Leaf {
            value: g.stats[i].value,
        });
        if let (
            true,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            },
        ) = (keep[i], &g.tree.nodes[i])
        {
            let (feature, threshold, left, right) = (*feature, *threshold, *left, *right);
            let l = copy(g, keep, left, out);
            let r = copy(g, keep, right, out);
            out[id] = Node::Split {
                feature,
                threshold,
                left: l,
                right: r,
            };
        }
        id
    }
    let mut nodes = Vec::new();
    copy(grown, keep, 0, &mut nodes);
    Tree { nodes }
}

/// Critical complexity values of the weakest-link pruning sequence,
/// starting with 0 and ending with the value that collapses the root.
pub fn alpha_sequence(grown: &GrownTree) -> Vec<f64> {
    let n = grown.tree.nodes.len();
    let mut collapsed = vec![false; n];
    let mut alphas = vec![0.0];

    // (subtree leaf sse, leaf count) under the current collapse mask
    fn subtree(g: &GrownTree, collapsed: &[bool], i: usize) -> (f64, usize) {
        match g.tree.nodes[i] {
            Node::Split { left, right, .. } if !collapsed[i] => {
                let (a, la) = subtree(g, collapsed, left);
                let (b, lb) = subtree(g, collapsed, right);
                (a + b, la + lb)
            }
            _ => (g.stats[i].sse, 1),
        }
    }
    fn internal(g: &GrownTree, collapsed: &[bool], i: usize, out: &mut Vec<usize>) {
        if let Node::Split { left, right, .. } = g.tree.nodes[i] {
            if !collapsed[i] {
                out.push(i);
                internal(g, collapsed, left, out);
                internal(g, collapsed, right, out);
            }
        }
    }

    loop {
        let mut nodes = Vec::new();
        internal(grown, &collapsed, 0, &mut nodes);
        if nodes.is_empty() {
            break;
        }
        let links: Vec<(usize, f64)> = nodes
            .iter()
            .map(|&i| {
                let (r_sub, leaves) = subtree(grown, &collapsed, i);
                let g = (grown.stats[i].sse - r_sub) / (leaves as f64 - 1.0);
                (i, g.max(0.0))
            })
            .collect();
        let weakest = links.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        let tol = weakest.abs() * 1e-12;
        for (i, g) in links {
            if g <= weakest + tol {
                collapsed[i] = true;
            }
        }
        alphas.push(weakest);
    }
    alphas
}

/// Grows a tree on all rows and prunes it with the smallest subtree whose
/// cross-validated squared error is within one standard error of the best.
///
/// Folds are contiguous row blocks, so periodic inputs keep every phase in
/// each training split. Pruning is skipped when the data
/// cannot support at least two folds of `2 · min_leaf` rows.
pub fn grow_pruned(
    columns: &[Vec<f64>],
    target: &[f64],
    presorted: &Presorted,
    params: GrowParams,
    folds: usize,
) -> Tree {
    let n = target.len();
    let full = grow_tree(columns, target, &vec![1.0; n], presorted, params, None);
    let folds = folds.min(n / (2 * params.min_leaf.max(1)));
    if folds < 2 || full.tree.leaf_count() == 1 {
        return full.tree;
    }

    let alphas = alpha_sequence(&full);
    // geometric midpoints of consecutive critical values; the last one must
    // collapse every fold tree, not sit on the full tree's tie
    let betas: Vec<f64> = alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| match alphas.get(k + 1) {
            Some(&b) => (a * b).sqrt(),
            None => f64::INFINITY,
        })
        .collect();

    let fold_of = |r: usize| r * folds / n;
    let mut sq_err = vec![vec![0.0; n]; betas.len()];
    for fold in 0..folds {
        let weights: Vec<f64> = (0..n).map(|r| if fold_of(r) == fold { 0.0 } else { 1.0 }).collect();
        let train_share = weights.iter().sum::<f64>() / n as f64;
        let grown = grow_tree(columns, target, &weights, presorted, params, None);
        for (k, &beta) in betas.iter().enumerate() {
            let tree = prune_to_alpha(&grown, beta * train_share);
            for r in (0..n).filter(|&r| fold_of(r) == fold) {
                let row: Vec<f64> = columns.iter().map(|c| c[r]).collect();
                sq_err[k][r] = (target[r] - tree.predict_row(&row)).powi(2);
            }
        }
    }

    let summary: Vec<(f64, f64)> = sq_err
        .iter()
        .map(|e| {
            let mean = e.iter().sum::<f64>() / n as f64;
            let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, (var / n as f64).sqrt())
        })
        .collect();
    let best = (0..summary.len())
        .min_by(|&a, &b| summary[a].0.total_cmp(&summary[b].0))
        .unwrap_or(0);
    let limit = summary[best].0 + summary[best].1;
    let chosen = (0..summary.len())
        .rev()
        .find(|&k| summary[k].0 <= limit)
        .unwrap_or(best);
    prune_to_alpha(&full, betas[chosen])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GrowParams {
        GrowParams {
            max_depth: 8,
            min_leaf: 1,
            max_features: None,
        }
    }

    #[test]
    fn alpha_zero_keeps_everything_and_large_alpha_collapses() {
        let cols = vec![(0..16).map(f64::from).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64).collect();
        let g = grow_tree(&cols, &y, &[1.0; 16], &Presorted::new(&cols), params(), None);
        assert_eq!(prune_to_alpha(&g, 0.0), g.tree);
        assert_eq!(prune_to_alpha(&g, 1e9).leaf_count(), 1);
        let alphas = alpha_sequence(&g);
        assert_eq!(alphas[0], 0.0);
        assert!(alphas.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(prune_to_alpha(&g, *alphas.last().unwrap() * 1.0001).leaf_count(), 1);
    }

    #[test]
    fn noise_splits_get_pruned() {
        // a clean two-level step plus alternating jitter
        let n = 60;
        let cols = vec![(0..n).map(|i| i as f64).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..n)
            .map(|i| if i < 30 { 0.0 } else { 10.0 } + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let p = GrowParams {
            max_depth: 8,
            min_leaf: 2,
            max_features: None,
        };
        let tree = grow_pruned(&cols, &y, &Presorted::new(&cols), p, 5);
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn clean_periodic_pulse_keeps_its_split() {
        let n = 120;
        let cols = vec![(0..n).map(|i| (i % 25) as f64).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..n).map(|i| if i % 25 < 6 { 0.12 } else { -0.04 }).collect();
        let p = GrowParams {
            max_depth: 8,
            min_leaf: 2,
            max_features: None,
        };
        let tree = grow_pruned(&cols, &y, &Presorted::new(&cols), p, 5);
        assert_eq!(tree.leaf_count(), 2);
    }
}
