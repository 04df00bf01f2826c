//! Base learners: weighted logistic regression, random forest, extra trees,
//! first-order gradient boosting and second-order ("XGB-style") boosting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::LabeledDataset;
use super::rebalance::Objective;
use super::tree::{grow_tree, BinnedData, Criterion, SampleStats, SplitMode, Tree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    GradientBoosting,
    ExtraTrees,
    RandomForest,
    XgbBoosting,
}

impl Family {
    /// The four families of a cohort, in round-robin order. The second slot is
    /// gradient boosting for the precision cohort and extra trees for recall.
    pub fn cohort_rotation(objective: Objective) -> [Family; 4] {
        let second = match objective {
            Objective::Precision => Family::GradientBoosting,
            Objective::Recall => Family::ExtraTrees,
        };
        [Family::Logistic, second, Family::RandomForest, Family::XgbBoosting]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseClassifierConfig {
    pub family: Family,
    /// Inverse L2 regularization strength for logistic regression.
    pub c: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Loss weight of a failure sample; successes weigh 1.
    pub failure_weight: f64,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_iter: usize,
    /// L2 leaf penalty of second-order boosting.
    pub leaf_l2: f64,
    pub seed: u64,
}

impl BaseClassifierConfig {
    /// Cohort hyperparameters for a family.
    pub fn for_cohort(family: Family, objective: Objective, seed: u64) -> Self {
        match objective {
            Objective::Precision => BaseClassifierConfig {
                family,
                c: 1.0,
                max_depth: match family {
                    Family::GradientBoosting => 3,
                    Family::XgbBoosting => 6,
                    _ => 8,
                },
                min_samples_split: 20,
                min_samples_leaf: 10,
                failure_weight: 1.2,
                learning_rate: 0.1,
                n_estimators: 100,
                max_iter: 2000,
                leaf_l2: 1.0,
                seed,
            },
            Objective::Recall => BaseClassifierConfig {
                family,
                c: 0.1,
                max_depth: match family {
                    Family::XgbBoosting | Family::GradientBoosting => 8,
                    _ => 10,
                },
                min_samples_split: 10,
                min_samples_leaf: 5,
                failure_weight: 2.5,
                learning_rate: 0.05,
                n_estimators: 100,
                max_iter: 2000,
                leaf_l2: 1.0,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Classifier {
    Logistic(LogisticModel),
    Boosted(BoostedTrees),
    Forest(Forest),
    /// Fixed output; used for audit stubs and tests.
    Constant {
        probability: f64,
    },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

impl Classifier {
    /// Failure probability for one standardized vector.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let p = match self {
            Classifier::Logistic(m) => sigmoid(m.intercept + m.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
            Classifier::Boosted(m) => {
                sigmoid(m.base_score + m.learning_rate * m.trees.iter().map(|t| t.predict(x)).sum::<f64>())
            }
            Classifier::Forest(f) => f.trees.iter().map(|t| t.predict(x)).sum::<f64>() / f.trees.len() as f64,
            Classifier::Constant { probability } => *probability,
        };
        p.clamp(0.0, 1.0)
    }
}

fn sample_weights(labels: &[bool], failure_weight: f64) -> Vec<f64> {
    labels.iter().map(|&y| if y { failure_weight } else { 1.0 }).collect()
}

fn weighted_prior(labels: &[bool], w: &[f64]) -> f64 {
    let pos: f64 = labels.iter().zip(w).filter(|(y, _)| **y).map(|(_, w)| w).sum();
    pos / w.iter().sum::<f64>()
}

/// Trains one base classifier on standardized data.
pub fn train_base(config: &BaseClassifierConfig, data: &LabeledDataset) -> Result<Classifier> {
    let failures = data.failures();
    if failures == 0 || failures == data.len() {
        return Err(Error::SingleClass);
    }
    let rows = data.rows();
    let w = sample_weights(&data.labels, config.failure_weight);
    Ok(match config.family {
        Family::Logistic => Classifier::Logistic(train_logistic(&rows, &data.labels, &w, config)),
        Family::GradientBoosting => Classifier::Boosted(train_boosting(&rows, &data.labels, &w, config, false)),
        Family::XgbBoosting => Classifier::Boosted(train_boosting(&rows, &data.labels, &w, config, true)),
        Family::RandomForest => Classifier::Forest(train_forest(&rows, &data.labels, &w, config, true)),
        Family::ExtraTrees => Classifier::Forest(train_forest(&rows, &data.labels, &w, config, false)),
    })
}

const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Batch gradient descent on the weighted mean log-loss plus
/// `||β||² / (2·C·Σw)` (the intercept is not penalized). Step size is 1/L from
/// a power-iteration estimate of the loss curvature bound.
fn train_logistic(rows: &[&[f64]], y: &[bool], w: &[f64], cfg: &BaseClassifierConfig) -> LogisticModel {
    let d = rows[0].len();
    let sw: f64 = w.iter().sum();
    let lambda = 1.0 / (cfg.c * sw);

    // largest eigenvalue of [X 1]^T W [X 1] / Σw
    let mut v = vec![1.0 / ((d + 1) as f64).sqrt(); d + 1];
    let mut eig = 1.0;
    for _ in 0..50 {
        let mut out = vec![0.0; d + 1];
        for (r, &wi) in rows.iter().zip(w) {
            let proj = r.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[d];
            let s = wi * proj / sw;
            for (o, x) in out.iter_mut().zip(r.iter()) {
                *o += s * x;
            }
            out[d] += s;
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        eig = norm;
        v = out.into_iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (0.25 * eig * 1.05 + lambda);

    let mut beta = vec![0.0; d];
    let mut b0 = logit(weighted_prior(y, w));
    let mut grad = vec![0.0; d];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut g0 = 0.0;
        for ((r, &yi), &wi) in rows.iter().zip(y).zip(w) {
            let z = b0 + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            let resid = wi * (sigmoid(z) - if yi { 1.0 } else { 0.0 }) / sw;
            for (g, x) in grad.iter_mut().zip(r.iter()) {
                *g += resid * x;
            }
            g0 += resid;
        }
        for (g, b) in grad.iter_mut().zip(&beta) {
            *g += lambda * b;
        }
        let norm = (grad.iter().map(|g| g * g).sum::<f64>() + g0 * g0).sqrt();
        if norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        for (b, g) in beta.iter_mut().zip(&grad) {
            *b -= step * g;
        }
        b0 -= step * g0;
        iterations += 1;
    }
    LogisticModel {
        weights: beta,
        intercept: b0,
        iterations,
        converged,
    }
}

fn train_boosting(
    rows: &[&[f64]],
    y: &[bool],
    w: &[f64],
    cfg: &BaseClassifierConfig,
    second_order: bool,
) -> BoostedTrees {
    let n = rows.len();
    let data = BinnedData::new(rows);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base_score = logit(weighted_prior(y, w));
    let mut f = vec![base_score; n];
    let params = TreeParams {
        criterion: if second_order {
            Criterion::Newton { lambda: cfg.leaf_l2 }
        } else {
            Criterion::Squared
        },
        split_mode: SplitMode::Best,
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: None,
    };
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for _ in 0..cfg.n_estimators {
        for i in 0..n {
            let p = sigmoid(f[i]);
            a[i] = w[i] * (if y[i] { 1.0 } else { 0.0 } - p);
            b[i] = w[i] * p * (1.0 - p);
        }
        let tree = grow_tree(
            &data,
            SampleStats { w, a: &a, b: &b },
            (0..n).collect(),
            params,
            &mut rng,
        );
        for i in 0..n {
            f[i] += cfg.learning_rate * tree.predict(rows[i]);
        }
        trees.push(tree);
    }
    BoostedTrees {
        base_score,
        learning_rate: cfg.learning_rate,
        trees,
    }
}

/// Random forest (bootstrap + best splits) or extra trees (no bootstrap +
/// random cuts); both examine √d features per node. Bootstrap multiplicities
/// scale the class weights.
fn train_forest(rows: &[&[f64]], y: &[bool], w: &[f64], cfg: &BaseClassifierConfig, bootstrap: bool) -> Forest {
    let n = rows.len();
    let d = rows[0].len();
    let data = BinnedData::new(rows);
    let max_features = ((d as f64).sqrt().round() as usize).max(1);
    let params = TreeParams {
        criterion: Criterion::Gini,
        split_mode: if bootstrap { SplitMode::Best } else { SplitMode::Random },
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: Some(max_features),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zeros = vec![0.0; n];
    let trees = (0..cfg.n_estimators)
        .map(|_| {
            let mut tree_w = w.to_vec();
            let mut samples: Vec<usize> = (0..n).collect();
            if bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
                for i in 0..n {
                    tree_w[i] *= counts[i] as f64;
                }
                samples.retain(|&i| counts[i] > 0);
            }
            let a: Vec<f64> = (0..n).map(|i| if y[i] { tree_w[i] } else { 0.0 }).collect();
            let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            grow_tree(
                &data,
                SampleStats {
                    w: &tree_w,
                    a: &a,
                    b: &zeros,
                },
                samples,
                params,
                &mut tree_rng,
            )
        })
        .collect();
    Forest { trees }
}
