//! Tree-family regression learners used to model the de-trended series:
//! a pruned CART tree, a random forest and gradient-boosted trees.
//!
//! All learners share one fit/predict contract so the recommender can treat
//! them interchangeably; [`RegressorKind`] is the extension point for more.

mod pruning;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pruning::{alpha_sequence, grow_pruned, prune_to_alpha};
pub use tree::{grow_tree, GrowParams, GrownTree, Node, NodeStats, Presorted, Tree};

pub const MIN_TRAINING_ROWS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressorError {
    #[error("need at least {MIN_TRAINING_ROWS} training rows, got {0}")]
    TooFewRows(usize),
    #[error("feature matrix has no target column")]
    MissingTarget,
    #[error("feature schema mismatch: model expects {expected:?}, got {found:?}")]
    SchemaMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("invalid feature matrix: {0}")]
    InvalidFeatures(String),
    #[error("unknown regressor `{0}`")]
    UnknownKind(String),
    #[error("model file: {0}")]
    Persist(String),
}

/// Named, column-major feature matrix with an optional regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    target: Option<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, target: Option<Vec<f64>>) -> Result<Self, RegressorError> {
        if names.len() != columns.len() {
            return Err(RegressorError::InvalidFeatures(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let rows = columns
            .first()
            .map(Vec::len)
            .or(target.as_ref().map(Vec::len))
            .unwrap_or(0);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != rows {
                return Err(RegressorError::InvalidFeatures(format!(
                    "column `{name}` has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(RegressorError::InvalidFeatures(format!(
                    "column `{name}` row {i} is not finite"
                )));
            }
        }
        if let Some(t) = &target {
            if t.len() != rows {
                return Err(RegressorError::InvalidFeatures(format!(
                    "target has {} rows, expected {rows}",
                    t.len()
                )));
            }
            if let Some(i) = t.iter().position(|v| !v.is_finite()) {
                return Err(RegressorError::InvalidFeatures(format!("target row {i} is not finite")));
            }
        }
        Ok(Self { names, columns, target })
    }

    pub fn rows(&self) -> usize {
        self.columns
            .first()
            .map(Vec::len)
            .or(self.target.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Cart,
    RandomForest,
    GradientBoosting,
}

impl RegressorKind {
    /// Fixed order, also used to break ties between equally rated learners.
    pub const ALL: [RegressorKind; 3] = [
        RegressorKind::Cart,
        RegressorKind::RandomForest,
        RegressorKind::GradientBoosting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegressorKind::Cart => "cart",
            RegressorKind::RandomForest => "random_forest",
            RegressorKind::GradientBoosting => "gradient_boosting",
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegressorKind {
    type Err = RegressorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cart" => Ok(RegressorKind::Cart),
            "random_forest" | "random-forest" | "rf" => Ok(RegressorKind::RandomForest),
            "gradient_boosting" | "gradient-boosting" | "gbt" | "xgboost" => Ok(RegressorKind::GradientBoosting),
            other => Err(RegressorError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub cart: CartParams,
    pub forest: ForestParams,
    pub boosting: BoostingParams,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            cart: CartParams {
                max_depth: 8,
                min_leaf: 2,
                folds: 5,
            },
            forest: ForestParams {
                trees: 100,
                max_depth: 12,
                min_leaf: 2,
            },
            boosting: BoostingParams {
                rounds: 200,
                learning_rate: 0.1,
                max_depth: 4,
                min_leaf: 2,
            },
        }
    }
}

/// Seed and the hyperparameters relevant to the fitted kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainingMeta {
    Cart { seed: u64, params: CartParams },
    RandomForest { seed: u64, params: ForestParams },
    GradientBoosting { seed: u64, params: BoostingParams },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: RegressorKind,
    pub feature_names: Vec<String>,
    /// Starting value of the boosted sum; zero for the other kinds.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub meta: TrainingMeta,
}

impl FittedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.meta {
            TrainingMeta::Cart { .. } => self.trees[0].predict_row(row),
            TrainingMeta::RandomForest { .. } => {
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            }
            TrainingMeta::GradientBoosting { params, .. } => {
                self.base_score
                    + self
                        .trees
                        .iter()
                        .map(|t| params.learning_rate * t.predict_row(row))
                        .sum::<f64>()
            }
        }
    }

    pub fn seed(&self) -> u64 {
        match self.meta {
            TrainingMeta::Cart { seed, .. }
            | TrainingMeta::RandomForest { seed, .. }
            | TrainingMeta::GradientBoosting { seed, .. } => seed,
        }
    }
}

fn training_target(features: &FeatureMatrix) -> Result<&[f64], RegressorError> {
    let target = features.target().ok_or(RegressorError::MissingTarget)?;
    if target.len() < MIN_TRAINING_ROWS {
        return Err(RegressorError::TooFewRows(target.len()));
    }
    Ok(target)
}

fn fit_forest(columns: &[Vec<f64>], target: &[f64], params: ForestParams, seed: u64) -> Vec<Tree> {
    let n = target.len();
    let presorted = Presorted::new(columns);
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: Some(columns.len().div_ceil(3).max(1)),
    };
    (0..params.trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut weights = vec![0.0; n];
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
            grow_tree(columns, target, &weights, &presorted, grow, Some(&mut rng)).tree
        })
        .collect()
}

fn fit_boosting(columns: &[Vec<f64>], target: &[f64], params: BoostingParams) -> (f64, Vec<Tree>) {
    let n = target.len();
    let base = target.iter().sum::<f64>() / n as f64;
    let presorted = Presorted::new(columns);
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: None,
    };
    let weights = vec![1.0; n];
    let mut prediction = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut row = vec![0.0; columns.len()];
    for _ in 0..params.rounds {
        for i in 0..n {
            residual[i] = target[i] - prediction[i];
        }
        let tree = grow_tree(columns, &residual, &weights, &presorted, grow, None).tree;
        for (i, p) in prediction.iter_mut().enumerate() {
            for (j, c) in columns.iter().enumerate() {
                row[j] = c[i];
            }
            *p += params.learning_rate * tree.predict_row(&row);
        }
        let stalled = tree.leaf_count() == 1;
        trees.push(tree);
        if stalled {
            break;
        }
    }
    (base, trees)
}

/// Fits a learner of the requested kind to `features` (which must carry a
/// target). A constant target yields a constant-predicting model.
pub fn fit(
    kind: RegressorKind,
    features: &FeatureMatrix,
    seed: u64,
    hyper: &Hyperparameters,
) -> Result<FittedModel, RegressorError> {
    let target = training_target(features)?;
    let columns = features.columns();
    let (base_score, trees, meta) = match kind {
        RegressorKind::Cart => {
            let p = hyper.cart;
            let grow = GrowParams {
                max_depth: p.max_depth,
                min_leaf: p.min_leaf,
                max_features: None,
            };
            let tree = grow_pruned(columns, target, &Presorted::new(columns), grow, p.folds);
            (0.0, vec![tree], TrainingMeta::Cart { seed, params: p })
        }
        RegressorKind::RandomForest => {
            let p = hyper.forest;
            let trees = if p.trees == 0 {
                vec![Tree::constant(target.iter().sum::<f64>() / target.len() as f64)]
            } else {
                fit_forest(columns, target, p, seed)
            };
            (0.0, trees, TrainingMeta::RandomForest { seed, params: p })
        }
        RegressorKind::GradientBoosting => {
            let p = hyper.boosting;
            let (base, trees) = fit_boosting(columns, target, p);
            (base, trees, TrainingMeta::GradientBoosting { seed, params: p })
        }
    };
    Ok(FittedModel {
        kind,
        feature_names: features.names().to_vec(),
        base_score,
        trees,
        meta,
    })
}

/// One prediction per row of `features`, whose column names must match the
/// training schema.
pub fn predict(model: &FittedModel, features: &FeatureMatrix) -> Result<Vec<f64>, RegressorError> {
    if features.names() != model.feature_names.as_slice() {
        return Err(RegressorError::SchemaMismatch {
            expected: model.feature_names.clone(),
            found: features.names().to_vec(),
        });
    }
    Ok((0..features.rows())
        .map(|r| model.predict_row(&features.row(r)))
        .collect())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum StoredNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: String,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    kind: RegressorKind,
    meta: TrainingMeta,
    features: Vec<String>,
    base_score: f64,
    trees: Vec<Vec<StoredNode>>,
}

impl StoredModel {
    fn from_model(model: &FittedModel) -> Self {
        let trees = model
            .trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .map(|n| match *n {
                        Node::Leaf { value } => StoredNode::Leaf { value },
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => StoredNode::Split {
                            feature: model.feature_names[feature].clone(),
                            threshold,
                            left,
                            right,
                        },
                    })
                    .collect()
            })
            .collect();
        Self {
            kind: model.kind,
            meta: model.meta,
            features: model.feature_names.clone(),
            base_score: model.base_score,
            trees,
        }
    }

    fn into_model(self) -> Result<FittedModel, RegressorError> {
        let mut trees = Vec::with_capacity(self.trees.len());
        for stored in self.trees {
            let count = stored.len();
            let mut nodes = Vec::with_capacity(count);
            for node in stored {
                nodes.push(match node {
                    StoredNode::Leaf { value } => Node::Leaf { value },
                    StoredNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let index = self
                            .features
                            .iter()
                            .position(|f| *f == feature)
                            .ok_or_else(|| RegressorError::Persist(format!("unknown split feature `{feature}`")))?;
                        if left >= count || right >= count {
                            return Err(RegressorError::Persist("child index out of range".into()));
                        }
                        Node::Split {
                            feature: index,
                            threshold,
                            left,
                            right,
                        }
                    }
                });
            }
            if nodes.is_empty() {
                return Err(RegressorError::Persist("empty tree".into()));
            }
            trees.push(Tree { nodes });
        }
        if trees.is_empty() {
            return Err(RegressorError::Persist("model has no trees".into()));
        }
        Ok(FittedModel {
            kind: self.kind,
            feature_names: self.features,
            base_score: self.base_score,
            trees,
            meta: self.meta,
        })
    }
}

impl Serialize for FittedModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StoredModel::from_model(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FittedModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        StoredModel::deserialize(d)?
            .into_model()
            .map_err(serde::de::Error::custom)
    }
}

/// Pretty-printed JSON; floats round-trip exactly.
pub fn save_model(model: &FittedModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialisation cannot fail")
}

pub fn load_model(text: &str) -> Result<FittedModel, RegressorError> {
    serde_json::from_str(text).map_err(|e| RegressorError::Persist(e.to_string()))
}
