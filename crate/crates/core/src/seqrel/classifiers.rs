//! From-scratch binary classifiers: Gaussian naive Bayes, logistic
//! regression, a one-hidden-layer perceptron and a linear SVM.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cv::{Learner, Predictor};
use super::shuffled;
use crate::error::{Error, Result};
use crate::math;
use crate::pairstats::FeatureMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassifierKind {
    NaiveBayes,
    LogisticRegression,
    Mlp,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::NaiveBayes,
        ClassifierKind::LogisticRegression,
        ClassifierKind::Mlp,
        ClassifierKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "nb",
            ClassifierKind::LogisticRegression => "lr",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub nb_var_floor: f64,
    pub lr_learning_rate: f64,
    pub lr_l2: f64,
    pub lr_max_epochs: usize,
    pub lr_tolerance: f64,
    pub mlp_hidden: usize,
    pub mlp_learning_rate: f64,
    pub mlp_epochs: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            nb_var_floor: 1e-9,
            lr_learning_rate: 0.1,
            lr_l2: 1e-3,
            lr_max_epochs: 500,
            lr_tolerance: 1e-6,
            mlp_hidden: 32,
            mlp_learning_rate: 0.05,
            mlp_epochs: 300,
            svm_lambda: 1e-3,
            svm_epochs: 200,
        }
    }
}

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for row in x {
            var.iter_mut().zip(row.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        // Constant columns pass through centered but unscaled.
        let std = var.into_iter().map(|v| if v > 1e-24 { math::sqrt(v) } else { 1.0 }).collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    NaiveBayes {
        log_prior: [f64; 2],
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Mlp {
        /// hidden x input, row-major
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub params: ModelParams,
    pub feature_mask: FeatureMask,
    /// Absent for naive Bayes, which works on raw features.
    pub standardization: Option<Standardizer>,
}

impl ClassifierModel {
    /// Real-valued score whose sign is the prediction (positive = `true`).
    pub fn decision(&self, row: &[f64]) -> f64 {
        let x = match &self.standardization {
            Some(s) => s.apply(row),
            None => row.to_vec(),
        };
        match &self.params {
            ModelParams::NaiveBayes { .. } => {
                let [neg, pos] = self.log_joint(&x);
                pos - neg
            }
            ModelParams::Linear { weights, bias } => math::dot(weights, &x) + bias,
            ModelParams::Mlp { w1, b1, w2, b2 } => {
                let d = x.len();
                let hidden = b1
                    .iter()
                    .enumerate()
                    .map(|(h, b)| math::tanh(math::dot(&w1[h * d..(h + 1) * d], &x) + b));
                hidden.zip(w2).map(|(a, w)| a * w).sum::<f64>() + b2
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> bool {
        self.decision(row) > 0.0
    }

    fn log_joint(&self, x: &[f64]) -> [f64; 2] {
        let ModelParams::NaiveBayes { log_prior, mean, var } = &self.params else {
            return [0.0, 0.0];
        };
        core::array::from_fn(|c| {
            log_prior[c]
                + x.iter()
                    .zip(mean[c].iter().zip(&var[c]))
                    .map(|(v, (m, s2))| -0.5 * math::ln(2.0 * core::f64::consts::PI * s2) - (v - m) * (v - m) / (2.0 * s2))
                    .sum::<f64>()
        })
    }

    /// Naive Bayes class posteriors `[P(false|x), P(true|x)]`.
    pub fn posterior(&self, row: &[f64]) -> Option<[f64; 2]> {
        if !matches!(self.params, ModelParams::NaiveBayes { .. }) {
            return None;
        }
        let [a, b] = self.log_joint(row);
        let m = a.max(b);
        let (ea, eb) = (math::exp(a - m), math::exp(b - m));
        Some([ea / (ea + eb), eb / (ea + eb)])
    }
}

impl Predictor for ClassifierModel {
    fn predict(&self, row: &[f64]) -> bool {
        ClassifierModel::predict(self, row)
    }
}

/// Trains one classifier. Rows are raw features; every kind except naive
/// Bayes standardizes them with statistics from these rows only.
pub fn train_classifier(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[bool],
    hp: &Hyperparams,
    mask: FeatureMask,
    seed: u64,
) -> Result<ClassifierModel> {
    let pos = y.iter().filter(|v| **v).count();
    if x.len() != y.len() || pos < 2 || y.len() - pos < 2 {
        return Err(Error::SingleClass);
    }
    let (standardization, rows) = if kind == ClassifierKind::NaiveBayes {
        (None, x.to_vec())
    } else {
        let s = Standardizer::fit(x);
        let rows = x.iter().map(|r| s.apply(r)).collect();
        (Some(s), rows)
    };
    let params = match kind {
        ClassifierKind::NaiveBayes => fit_naive_bayes(&rows, y, hp.nb_var_floor),
        ClassifierKind::LogisticRegression => fit_logistic(&rows, y, hp)?,
        ClassifierKind::Mlp => fit_mlp(&rows, y, hp, seed)?,
        ClassifierKind::Svm => fit_svm(&rows, y, hp, seed)?,
    };
    Ok(ClassifierModel {
        kind,
        params,
        feature_mask: mask,
        standardization,
    })
}

fn fit_naive_bayes(x: &[Vec<f64>], y: &[bool], floor: f64) -> ModelParams {
    let d = x[0].len();
    let n = x.len() as f64;
    let stats = |class: bool| -> (f64, Vec<f64>, Vec<f64>) {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, l)| **l == class).map(|(r, _)| r).collect();
        let k = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v / k);
        }
        let mut var = vec![0.0; d];
        for r in &rows {
            var.iter_mut().zip(r.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m) / k);
        }
        var.iter_mut().for_each(|v| *v = v.max(floor));
        (math::ln(k / n), mean, var)
    };
    let (p0, m0, v0) = stats(false);
    let (p1, m1, v1) = stats(true);
    ModelParams::NaiveBayes {
        log_prior: [p0, p1],
        mean: [m0, m1],
        var: [v0, v1],
    }
}

fn fit_logistic(x: &[Vec<f64>], y: &[bool], hp: &Hyperparams) -> Result<ModelParams> {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    for _ in 0..hp.lr_max_epochs {
        gw.iter_mut().zip(&w).for_each(|(g, wi)| *g = hp.lr_l2 * wi);
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let z = math::dot(&w, row) + b;
            let t = if label { 1.0 } else { 0.0 };
            let err = math::sigmoid(z) - t;
            gw.iter_mut().zip(row).for_each(|(g, v)| *g += err * v / n);
            gb += err / n;
            loss += if label { math::softplus(-z) } else { math::softplus(z) };
        }
        if !loss.is_finite() {
            return Err(Error::Diverged);
        }
        let gnorm = math::sqrt(math::dot(&gw, &gw) + gb * gb);
        if gnorm < hp.lr_tolerance {
            break;
        }
        w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= hp.lr_learning_rate * g);
        b -= hp.lr_learning_rate * gb;
    }
    Ok(ModelParams::Linear { weights: w, bias: b })
}

fn fit_mlp(x: &[Vec<f64>], y: &[bool], hp: &Hyperparams, seed: u64) -> Result<ModelParams> {
    let d = x[0].len();
    let h = hp.mlp_hidden.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit1 = math::sqrt(6.0 / (d + h) as f64);
    let limit2 = math::sqrt(6.0 / (h + 1) as f64);
    let mut w1: Vec<f64> = (0..h * d).map(|_| rng.gen_range(-limit1..limit1)).collect();
    let mut b1: Vec<f64> = (0..h).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut w2: Vec<f64> = (0..h).map(|_| rng.gen_range(-limit2..limit2)).collect();
    let mut b2 = 0.0;
    let mut hidden = vec![0.0; h];
    for _ in 0..hp.mlp_epochs {
        let mut loss = 0.0;
        for i in shuffled(x.len(), &mut rng) {
            let row = &x[i];
            for k in 0..h {
                hidden[k] = math::tanh(math::dot(&w1[k * d..(k + 1) * d], row) + b1[k]);
            }
            let z = math::dot(&w2, &hidden) + b2;
            let t = if y[i] { 1.0 } else { 0.0 };
            loss += if y[i] { math::softplus(-z) } else { math::softplus(z) };
            let dz = math::sigmoid(z) - t;
            for k in 0..h {
                let dh = dz * w2[k] * (1.0 - hidden[k] * hidden[k]);
                w2[k] -= hp.mlp_learning_rate * dz * hidden[k];
                for j in 0..d {
                    w1[k * d + j] -= hp.mlp_learning_rate * dh * row[j];
                }
                b1[k] -= hp.mlp_learning_rate * dh;
            }
            b2 -= hp.mlp_learning_rate * dz;
        }
        if !loss.is_finite() {
            return Err(Error::Diverged);
        }
    }
    Ok(ModelParams::Mlp { w1, b1, w2, b2 })
}

/// Pegasos with the bias folded in as a constant feature and the iterate
/// projected onto the ball of radius `1/sqrt(lambda)`.
fn fit_svm(x: &[Vec<f64>], y: &[bool], hp: &Hyperparams, seed: u64) -> Result<ModelParams> {
    let d = x[0].len();
    let lambda = hp.svm_lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; d + 1];
    let radius = 1.0 / math::sqrt(lambda);
    let mut t = 0usize;
    for _ in 0..hp.svm_epochs {
        for i in shuffled(x.len(), &mut rng) {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let label = if y[i] { 1.0 } else { -1.0 };
            let margin = label * (math::dot(&w[..d], &x[i]) + w[d]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for j in 0..d {
                    w[j] += eta * label * x[i][j];
                }
                w[d] += eta * label;
            }
            let norm = math::norm(&w);
            if norm > radius {
                w.iter_mut().for_each(|v| *v *= radius / norm);
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged);
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    Ok(ModelParams::Linear { weights: w, bias })
}

/// A classifier kind plus its hyperparameters, usable as a [`Learner`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub hyperparams: Hyperparams,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl Learner for ClassifierSpec {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn fit(&self, x: &[Vec<f64>], y: &[bool], mask: FeatureMask, seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(train_classifier(self.kind, x, y, &self.hyperparams, mask, seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accuracy(m: &ClassifierModel, x: &[Vec<f64>], y: &[bool]) -> f64 {
        x.iter().zip(y).filter(|(r, l)| m.predict(r) == **l).count() as f64 / x.len() as f64
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ClassifierKind::ALL {
            assert_eq!(ClassifierKind::parse(k.name()), Some(k));
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(
            train_classifier(ClassifierKind::LogisticRegression, &x, &[true, true, true], &Hyperparams::default(), FeatureMask::ALL, 0),
            Err(Error::SingleClass)
        );
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn nb_predictions_survive_balanced_duplication() {
        let x = vec![vec![0.0, 1.0], vec![0.5, 0.8], vec![2.0, -1.0], vec![2.4, -0.5], vec![1.1, 0.2]];
        let y = vec![false, false, true, true, true];
        let hp = Hyperparams::default();
        let m1 = train_classifier(ClassifierKind::NaiveBayes, &x, &y, &hp, FeatureMask::ALL, 0).unwrap();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().copied());
        let m2 = train_classifier(ClassifierKind::NaiveBayes, &x2, &y2, &hp, FeatureMask::ALL, 0).unwrap();
        for p in [vec![0.3, 0.9], vec![1.6, -0.2], vec![1.0, 0.0]] {
            assert_eq!(m1.predict(&p), m2.predict(&p));
        }
        let l1 = train_classifier(ClassifierKind::LogisticRegression, &x, &y, &hp, FeatureMask::ALL, 0).unwrap();
        let l2 = train_classifier(ClassifierKind::LogisticRegression, &x2, &y2, &hp, FeatureMask::ALL, 0).unwrap();
        for p in [vec![0.3, 0.9], vec![1.6, -0.2]] {
            assert_eq!(l1.predict(&p), l2.predict(&p));
        }
        assert!(accuracy(&m1, &x, &y) >= 0.8);
    }

    #[test]
    fn predictions_are_deterministic() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        for kind in ClassifierKind::ALL {
            let a = train_classifier(kind, &x, &y, &Hyperparams::default(), FeatureMask::ALL, 4).unwrap();
            let b = train_classifier(kind, &x, &y, &Hyperparams::default(), FeatureMask::ALL, 4).unwrap();
            assert_eq!(a, b);
            assert!(accuracy(&a, &x, &y) >= 0.9, "{kind:?}");
        }
    }

    fn fit(kind: ClassifierKind, x: &[Vec<f64>], y: &[bool]) -> ClassifierModel {
        train_classifier(kind, x, y, &Hyperparams::default(), FeatureMask::ALL, 7).unwrap()
    }

    #[test]
    fn nb_posterior_matches_closed_form() {
        let x = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 4.0], vec![6.0, 8.0]];
        let y = vec![false, false, true, true];
        let m = fit(ClassifierKind::NaiveBayes, &x, &y);
        // class means (1,2) and (5,6); variances (1,1) and (1,4); equal priors
        let normal = |v: f64, mu: f64, s2: f64| (-(v - mu) * (v - mu) / (2.0 * s2)).exp() / (2.0 * core::f64::consts::PI * s2).sqrt();
        for p in [[3.0, 3.5], [1.0, 2.0], [5.5, 5.0], [-2.0, 9.0]] {
            let l0 = 0.5 * normal(p[0], 1.0, 1.0) * normal(p[1], 2.0, 1.0);
            let l1 = 0.5 * normal(p[0], 5.0, 1.0) * normal(p[1], 6.0, 4.0);
            let post = m.posterior(&p).unwrap();
            assert!((post[1] - l1 / (l0 + l1)).abs() < 1e-9, "{p:?}");
            assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lr_separates_linear_data() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 8) as f64, (i / 8) as f64 * 1.5]).collect();
        let y: Vec<bool> = x.iter().map(|r| r[0] + r[1] > 6.2).collect();
        let m = fit(ClassifierKind::LogisticRegression, &x, &y);
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn mlp_solves_xor_and_lr_does_not() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![false, true, true, false];
        assert_eq!(accuracy(&fit(ClassifierKind::Mlp, &x, &y), &x, &y), 1.0);
        assert!(accuracy(&fit(ClassifierKind::LogisticRegression, &x, &y), &x, &y) < 1.0);
    }

    #[test]
    fn svm_agrees_with_lr_on_separable_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while x.len() < 60 {
            let p = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let s: f64 = p[0] - 0.5 * p[1] - 0.3;
            if s.abs() > 0.5 {
                y.push(s > 0.0);
                x.push(p);
            }
        }
        let svm = fit(ClassifierKind::Svm, &x, &y);
        let lr = fit(ClassifierKind::LogisticRegression, &x, &y);
        assert_eq!(accuracy(&svm, &x, &y), 1.0);
        for (r, l) in x.iter().zip(&y) {
            assert_eq!(svm.predict(r), lr.predict(r));
            assert_eq!(svm.predict(r), *l);
        }
    }
}
