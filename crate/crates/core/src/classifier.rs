//! One-vs-one linear SVMs, a chi-square 1-NN oracle, and the evaluation
//! harness (accuracy, confusion matrices, cross-validation reports).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FoldPlan, Protocol};
use crate::features::FeatureMatrix;
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 50 }
    }
}

/// Linear two-class machine; decision value is `weights . t + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: String,
    pub negative: String,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn decision_value(&self, t: &[f64]) -> f64 {
        dot(&self.weights, t) + self.bias
    }

    /// Label chosen by the sign of the decision value; zero goes positive.
    pub fn vote<'a>(&'a self, t: &[f64]) -> (&'a str, f64) {
        let d = self.decision_value(t);
        if d >= 0.0 {
            (&self.positive, d)
        } else {
            (&self.negative, d)
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a binary training run, with the dual objective after each epoch.
#[derive(Debug, Clone)]
pub struct BinaryTraining {
    pub machine: BinarySvm,
    pub dual_objective: Vec<f64>,
    pub epochs_run: usize,
}

/// Train an L2-regularized hinge-loss SVM by dual coordinate descent.
///
/// `targets` must be `+1` or `-1`. The bias is learned as the weight of a
/// constant feature equal to 1. Each epoch visits samples in an order
/// drawn from `seed`; training stops after `params.epochs` epochs or once an
/// epoch leaves every multiplier unchanged.
pub fn train_binary_svm(
    samples: &[&[f64]],
    targets: &[i8],
    params: &SvmParams,
    seed: u64,
) -> Result<BinaryTraining> {
    if samples.len() != targets.len() {
        return Err(Error::Shape {
            expected: samples.len(),
            actual: targets.len(),
        });
    }
    if !params.c.is_finite() || params.c <= 0.0 {
        return Err(Error::Config(format!("C must be positive, got {}", params.c)));
    }
    if let Some(&t) = targets.iter().find(|&&t| t != 1 && t != -1) {
        return Err(Error::Argument(format!("binary targets must be +1 or -1, got {t}")));
    }
    if !(targets.contains(&1) && targets.contains(&-1)) {
        return Err(Error::DegenerateTraining(
            "both +1 and -1 samples are required".into(),
        ));
    }
    let dim = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            actual: bad.len(),
        });
    }

    let n = samples.len();
    let c = params.c;
    let y: Vec<f64> = targets.iter().map(|&t| t as f64).collect();
    // Diagonal of the augmented Gram matrix, including the constant bias feature.
    let q_diag: Vec<f64> = samples.iter().map(|s| dot(s, s) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    let mut dual_objective = Vec::with_capacity(params.epochs);
    let mut epochs_run = 0;

    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        let mut changed = false;
        for &i in &order {
            let x = samples[i];
            let g = y[i] * (dot(&w, x) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
            let step = (alpha[i] - old) * y[i];
            if step != 0.0 {
                changed = true;
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += step * xj;
                }
                b += step;
            }
        }
        epochs_run += 1;
        dual_objective.push(0.5 * (dot(&w, &w) + b * b) - alpha.iter().sum::<f64>());
        if !changed {
            break;
        }
    }

    Ok(BinaryTraining {
        machine: BinarySvm {
            positive: "+1".into(),
            negative: "-1".into(),
            weights: w,
            bias: b,
        },
        dual_objective,
        epochs_run,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassModel {
    pub kernel: String,
    pub labels: Vec<String>,
    pub machines: Vec<BinarySvm>,
    pub params: SvmParams,
    pub seed: u64,
}

/// Prediction together with the vote tally that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct OvoDecision {
    pub label: String,
    pub votes: Vec<usize>,
    pub margins: Vec<f64>,
}

impl MultiClassModel {
    pub fn dim(&self) -> Option<usize> {
        self.machines.first().map(|m| m.weights.len())
    }

    /// Vote over all pairwise machines. Ties on votes go to the label with the
    /// largest summed |decision value| over the machines that voted for it,
    /// then to the lowest label index.
    pub fn decide(&self, t: &[f64]) -> Result<OvoDecision> {
        if let Some(dim) = self.dim() {
            if t.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: t.len(),
                });
            }
        }
        let index: BTreeMap<&str, usize> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        // Accumulate in canonical pair order so the result does not depend on
        // how the machines are stored.
        let mut contributions: Vec<(usize, usize, usize, f64)> = self
            .machines
            .iter()
            .map(|m| {
                let (winner, d) = m.vote(t);
                let (p, q) = (index[m.positive.as_str()], index[m.negative.as_str()]);
                (p.min(q), p.max(q), index[winner], d.abs())
            })
            .collect();
        contributions.sort_by_key(|c| (c.0, c.1));
        let mut votes = vec![0usize; self.labels.len()];
        let mut margins = vec![0.0f64; self.labels.len()];
        for &(_, _, winner, margin) in &contributions {
            votes[winner] += 1;
            margins[winner] += margin;
        }
        let mut best = 0;
        for i in 1..self.labels.len() {
            if votes[i] > votes[best] || (votes[i] == votes[best] && margins[i] > margins[best]) {
                best = i;
            }
        }
        Ok(OvoDecision {
            label: self.labels[best].clone(),
            votes,
            margins,
        })
    }

    pub fn predict(&self, t: &[f64]) -> Result<String> {
        self.decide(t).map(|d| d.label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

/// Train `n(n-1)/2` machines over the sorted distinct labels. Machine `(i, j)`
/// with `i < j` treats `labels[i]` as positive.
pub fn train_ovo(rows: &[&[f64]], labels: &[&str], params: &SvmParams, seed: u64) -> Result<MultiClassModel> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no training samples".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::Shape {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let classes: Vec<String> = labels
        .iter()
        .map(|l| l.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pairs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|i| (i + 1..classes.len()).map(move |j| (i, j)))
        .collect();
    let machines = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let (pos, neg) = (classes[i].as_str(), classes[j].as_str());
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (row, &l) in rows.iter().zip(labels) {
                if l == pos {
                    xs.push(*row);
                    ys.push(1i8);
                } else if l == neg {
                    xs.push(*row);
                    ys.push(-1i8);
                }
            }
            let trained = train_binary_svm(&xs, &ys, params, SplitMix64::derive(seed, k as u64).next_u64())?;
            Ok(BinarySvm {
                positive: pos.to_string(),
                negative: neg.to_string(),
                ..trained.machine
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiClassModel {
        kernel: "linear".into(),
        labels: classes,
        machines,
        params: *params,
        seed,
    })
}

/// Chi-square distance with a small guard against empty bins.
pub fn chi_square(u: &[f64], v: &[f64]) -> f64 {
    const EPS: f64 = 1e-10;
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a - b;
            d * d / (a + b + EPS)
        })
        .sum()
}

/// 1-NN under chi-square distance; ties go to the lowest training index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl KnnModel {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Argument("k-NN needs at least one training sample".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Shape {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        Ok(KnnModel { rows, labels })
    }

    pub fn predict(&self, t: &[f64]) -> Result<String> {
        let dim = self.rows[0].len();
        if t.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: t.len(),
            });
        }
        let mut best = (f64::INFINITY, 0);
        for (i, row) in self.rows.iter().enumerate() {
            let d = chi_square(row, t);
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(self.labels[best.1].clone())
    }
}

pub fn knn_predict(train_rows: &[Vec<f64>], train_labels: &[String], t: &[f64]) -> Result<String> {
    KnnModel::new(train_rows.to_vec(), train_labels.to_vec())?.predict(t)
}

/// Anything that maps a feature vector to a label.
pub trait Classifier: Sync {
    fn predict_label(&self, t: &[f64]) -> Result<String>;
}

impl Classifier for MultiClassModel {
    fn predict_label(&self, t: &[f64]) -> Result<String> {
        self.predict(t)
    }
}

impl Classifier for KnnModel {
    fn predict_label(&self, t: &[f64]) -> Result<String> {
        self.predict(t)
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Argument(format!("label '{label}' is not in the confusion matrix")))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let (i, j) = (self.index_of(truth)?, self.index_of(predicted)?);
        self.counts[i][j] += 1;
        Ok(())
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.labels != self.labels {
            return Err(Error::Argument("confusion matrices have different labels".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Percentage of correct predictions.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        100.0 * self.trace() as f64 / total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }

    /// Row-normalized, tab-separated table with 2-decimal cells and a caption
    /// line underneath.
    pub fn render_table(&self, caption: &str) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let sum: u64 = row.iter().sum();
            out.push_str(l);
            for &c in row {
                let v = if sum == 0 { 0.0 } else { c as f64 / sum as f64 };
                out.push_str(&format!("\t{v:.2}"));
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(caption);
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<String>,
}

/// Predict every test row and tally accuracy and confusion over `labels`.
pub fn evaluate<C: Classifier + ?Sized>(
    classifier: &C,
    rows: &[&[f64]],
    truth: &[&str],
    labels: &[String],
) -> Result<Evaluation> {
    if rows.is_empty() {
        return Err(Error::Argument("test set is empty".into()));
    }
    if rows.len() != truth.len() {
        return Err(Error::Shape {
            expected: rows.len(),
            actual: truth.len(),
        });
    }
    let predictions = rows
        .iter()
        .map(|r| classifier.predict_label(r))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = ConfusionMatrix::new(labels.to_vec());
    for (t, p) in truth.iter().zip(&predictions) {
        confusion.record(t, p)?;
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
        predictions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Knn,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            other => Err(Error::Config(format!("unknown classifier '{other}' (expected svm or knn)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub svm: SvmParams,
    pub seed: u64,
}

/// Accuracy values are kept to 2 decimals in serialized reports.
fn round2<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64((v * 100.0).round() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(serialize_with = "round2")]
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub classifier: ClassifierKind,
    pub protocol: Protocol,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    #[serde(serialize_with = "round2")]
    pub mean_accuracy: f64,
    pub pooled: ConfusionMatrix,
    pub warnings: Vec<String>,
}

fn check_plan(plan: &FoldPlan, n: usize) -> Result<()> {
    if plan.records != n {
        return Err(Error::Config(format!(
            "plan covers {} records but the feature matrix has {n}",
            plan.records
        )));
    }
    if plan.is_empty() {
        return Err(Error::Config("plan has no folds".into()));
    }
    for (k, s) in plan.splits.iter().enumerate() {
        if let Some(&bad) = s.train.iter().chain(&s.test).find(|&&i| i >= n) {
            return Err(Error::Config(format!("fold {k} references record {bad} of {n}")));
        }
        if s.train.is_empty() || s.test.is_empty() {
            return Err(Error::Config(format!("fold {k} has an empty train or test set")));
        }
    }
    Ok(())
}

fn run_fold(
    fold: usize,
    train: &[usize],
    test: &[usize],
    features: &FeatureMatrix,
    classes: &[String],
    config: &ClassifierConfig,
) -> Result<FoldResult> {
    let pick_rows = |idx: &[usize]| idx.iter().map(|&i| features.rows[i].as_slice()).collect::<Vec<_>>();
    let pick_labels = |idx: &[usize]| idx.iter().map(|&i| features.labels[i].as_str()).collect::<Vec<_>>();
    let (train_rows, train_labels) = (pick_rows(train), pick_labels(train));
    let (test_rows, test_labels) = (pick_rows(test), pick_labels(test));

    let seen: BTreeSet<&str> = train_labels.iter().copied().collect();
    let warnings: Vec<String> = test_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|l| !seen.contains(l))
        .map(|l| format!("fold {fold}: test class '{l}' is absent from training"))
        .collect();

    let eval = match config.kind {
        ClassifierKind::Svm => {
            let seed = SplitMix64::derive(config.seed, fold as u64).next_u64();
            let model = train_ovo(&train_rows, &train_labels, &config.svm, seed)?;
            evaluate(&model, &test_rows, &test_labels, classes)?
        }
        ClassifierKind::Knn => {
            let model = KnnModel::new(
                train_rows.iter().map(|r| r.to_vec()).collect(),
                train_labels.iter().map(|l| l.to_string()).collect(),
            )?;
            evaluate(&model, &test_rows, &test_labels, classes)?
        }
    };
    Ok(FoldResult {
        fold,
        train_size: train.len(),
        test_size: test.len(),
        accuracy: eval.accuracy,
        confusion: eval.confusion.clone(),
        warnings,
        evaluation: Some(eval),
    })
}

/// Train and evaluate on every split of `plan`. Folds run in parallel on the
/// current rayon pool; results are reduced in fold order.
pub fn run_cross_validation(
    plan: &FoldPlan,
    features: &FeatureMatrix,
    config: &ClassifierConfig,
) -> Result<CvReport> {
    check_plan(plan, features.len())?;
    let classes = features.classes();
    let folds = plan
        .splits
        .par_iter()
        .enumerate()
        .map(|(k, s)| run_fold(k, &s.train, &s.test, features, &classes, config))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = ConfusionMatrix::new(classes);
    for f in &folds {
        pooled.add(&f.confusion)?;
    }
    let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64;
    let mut warnings: Vec<String> = folds.iter().flat_map(|f| f.warnings.clone()).collect();
    if plan.protocol == Protocol::RandomHoldout {
        warnings.push(
            "random-holdout splits at record level; a subject may appear in both train and test".into(),
        );
    }
    Ok(CvReport {
        classifier: config.kind,
        protocol: plan.protocol,
        seed: plan.seed,
        folds,
        mean_accuracy,
        pooled,
        warnings,
    })
}
