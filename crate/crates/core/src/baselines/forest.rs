//! Random forest regression: CART trees on bootstrap samples.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

/// Forest hyperparameters. The retailer benchmark uses the defaults:
/// 100 trees, depth cap 12, minimum 5 rows per leaf, `ceil(p / 3)`
/// candidate features per node.
#[derive(Debug, Clone)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per node; `None` selects `ceil(p / 3)`.
    pub mtry: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 5,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<TreeNode>,
    pub params: RfParams,
}

/// Best (feature, threshold) over the given candidate features, minimizing
/// the summed squared deviation of the two children. Returns `None` when no
/// split separates the rows. Thresholds are midpoints between consecutive
/// distinct feature values.
pub fn find_best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
) -> Option<(usize, f64, f64)> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let total_sum: f64 = rows.iter().map(|&r| y[r]).sum();
    let mut best: Option<(usize, f64, f64)> = None;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    for &feature in features {
        order.clear();
        order.extend_from_slice(rows);
        order.sort_by(|&a, &b| {
            x[a][feature]
                .partial_cmp(&x[b][feature])
                .expect("finite feature values")
        });

        // Prefix scan: evaluate each boundary between distinct values.
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let total_sq: f64 = rows.iter().map(|&r| y[r] * y[r]).sum();
        for i in 0..n - 1 {
            let r = order[i];
            left_sum += y[r];
            left_sq += y[r] * y[r];
            let a = x[order[i]][feature];
            let b = x[order[i + 1]][feature];
            if a == b {
                continue;
            }
            let threshold = a + (b - a) / 2.0;
            let n_left = (i + 1) as f64;
            let n_right = (n - i - 1) as f64;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            // Sum of child SSEs via sum / sum-of-squares identities.
            let sse_left = left_sq - left_sum * left_sum / n_left;
            let sse_right = right_sq - right_sum * right_sum / n_right;
            let score = sse_left + sse_right;
            let better = match best {
                None => true,
                Some((_, _, best_score)) => score < best_score,
            };
            if better {
                best = Some((feature, threshold, score));
            }
        }
    }
    best
}

fn build_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: &RfParams,
    mtry: usize,
    rng: &mut R,
) -> TreeNode {
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    if rows.len() <= params.min_leaf || depth >= params.max_depth {
        return TreeNode::Leaf { value: mean };
    }
    let p = x[0].len();
    let mut features: Vec<usize> = (0..p).collect();
    features.shuffle(rng);
    features.truncate(mtry);
    features.sort_unstable();

    match find_best_split(x, y, &rows, &features) {
        None => TreeNode::Leaf { value: mean },
        Some((feature, threshold, _)) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| x[r][feature] <= threshold);
            if left_rows.is_empty() || right_rows.is_empty() {
                return TreeNode::Leaf { value: mean };
            }
            let left = build_tree(x, y, left_rows, depth + 1, params, mtry, rng);
            let right = build_tree(x, y, right_rows, depth + 1, params, mtry, rng);
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Fit a forest; fully determined by `(data, params, seed)`.
pub fn rf_fit(x: &[Vec<f64>], y: &[f64], params: &RfParams, seed: u64) -> Result<RandomForest> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput { context: "random forest fit" });
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
            context: "random forest design",
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput {
            context: "random forest needs at least 2 rows",
        });
    }
    if x.iter().any(|row| row.iter().any(|v| !v.is_finite()))
        || y.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            context: "random forest design",
        });
    }
    let n = x.len();
    let p = x[0].len();
    let mtry = params.mtry.unwrap_or_else(|| p.div_ceil(3)).clamp(1, p);
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            build_tree(x, y, rows, 0, params, mtry, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        trees,
        params: params.clone(),
    })
}

/// Mean of the per-tree predictions.
pub fn rf_predict(forest: &RandomForest, row: &[f64]) -> f64 {
    let sum: f64 = forest.trees.iter().map(|t| t.predict(row)).sum();
    sum / forest.trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x = vec![
            vec![1.0, 5.0],
            vec![2.0, 4.0],
            vec![3.0, 3.0],
            vec![4.0, 2.0],
            vec![5.0, 1.0],
            vec![6.0, 0.0],
        ];
        let y = vec![1.0, 1.2, 1.1, 8.0, 8.3, 8.1];
        (x, y)
    }

    /// Exhaustive oracle: every feature, every midpoint threshold.
    fn exhaustive_best_split(
        x: &[Vec<f64>],
        y: &[f64],
        rows: &[usize],
    ) -> Option<(usize, f64, f64)> {
        let p = x[0].len();
        let mut best: Option<(usize, f64, f64)> = None;
        for feature in 0..p {
            let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][feature]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for pair in vals.windows(2) {
                let threshold = pair[0] + (pair[1] - pair[0]) / 2.0;
                let left: Vec<f64> = rows
                    .iter()
                    .filter(|&&r| x[r][feature] <= threshold)
                    .map(|&r| y[r])
                    .collect();
                let right: Vec<f64> = rows
                    .iter()
                    .filter(|&&r| x[r][feature] > threshold)
                    .map(|&r| y[r])
                    .collect();
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                let sse = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|&t| (t - m) * (t - m)).sum::<f64>()
                };
                let score = sse(&left) + sse(&right);
                if best.map(|(_, _, b)| score < b).unwrap_or(true) {
                    best = Some((feature, threshold, score));
                }
            }
        }
        best
    }

    #[test]
    fn first_split_matches_exhaustive_search() {
        let (x, y) = toy_data();
        let rows: Vec<usize> = (0..x.len()).collect();
        let all_features = [0, 1];
        let got = find_best_split(&x, &y, &rows, &all_features).unwrap();
        let want = exhaustive_best_split(&x, &y, &rows).unwrap();
        assert_eq!(got.0, want.0);
        assert!((got.1 - want.1).abs() < 1e-12);
        assert!((got.2 - want.2).abs() < 1e-9);
        // The jump in y sits between x0 = 3 and x0 = 4.
        assert_eq!(got.0, 0);
        assert!((got.1 - 3.5).abs() < 1e-12);
    }

    #[test]
    fn depth_zero_trees_predict_bootstrap_means() {
        let (x, y) = toy_data();
        let params = RfParams {
            n_trees: 400,
            max_depth: 0,
            min_leaf: 1,
            mtry: None,
        };
        let forest = rf_fit(&x, &y, &params, 3).unwrap();
        for tree in &forest.trees {
            assert!(matches!(tree, TreeNode::Leaf { .. }));
        }
        // With many trees the forest mean approaches the training mean.
        let train_mean = y.iter().sum::<f64>() / y.len() as f64;
        let pred = rf_predict(&forest, &x[0]);
        assert!((pred - train_mean).abs() < 0.5, "pred {pred} vs {train_mean}");
    }

    #[test]
    fn same_seed_gives_identical_predictions() {
        let (x, y) = toy_data();
        let params = RfParams::default();
        let a = rf_fit(&x, &y, &params, 17).unwrap();
        let b = rf_fit(&x, &y, &params, 17).unwrap();
        for row in &x {
            assert_eq!(rf_predict(&a, row), rf_predict(&b, row));
        }
    }

    #[test]
    fn predictions_stay_within_target_range() {
        let (x, y) = toy_data();
        let forest = rf_fit(&x, &y, &RfParams::default(), 5).unwrap();
        let (lo, hi) = (1.0, 8.3);
        for probe in [
            vec![-100.0, 50.0],
            vec![3.5, 2.5],
            vec![100.0, -100.0],
        ] {
            let pred = rf_predict(&forest, &probe);
            assert!(pred >= lo && pred <= hi, "prediction {pred} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(rf_fit(&[], &[], &RfParams::default(), 1).is_err());
        assert!(rf_fit(&[vec![1.0]], &[1.0], &RfParams::default(), 1).is_err());
    }
}
