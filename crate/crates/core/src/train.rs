//! A minimal softmax relation classifier trained with
//! `total = base cross-entropy + λ(epoch) · constraint loss`.
//!
//! The classifier is linear over precomputed features. The constraint-loss
//! machinery only consumes output probabilities, so nothing here depends
//! on a particular feature extractor; this stands in for heavier encoders
//! while keeping runs desk-sized and exactly reproducible.
//!
//! λ follows either a constant schedule or a triangular one that rises
//! from 0 to a peak `α` at the middle epoch and falls back to 0, letting
//! the model focus on the base loss early and late.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoding::{build_coherent, build_semantic};
use crate::error::{Error, Result};
use crate::infer::{count_violations, PredItem, PredictionSet};
use crate::loss::{batch_loss_raw, Encoding, EncodingKind, LossOptions, ProbVec};
use crate::mining::ConstraintSets;
use crate::synth::LabeledInstance;

/// Linear softmax classifier: `p = softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    /// `weights[class][feature]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ClassifierModel {
    /// Fresh model with small Gaussian weights drawn from `rng` (row-major
    /// order) and zero bias.
    pub fn init(n_classes: usize, feature_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, 0.01).expect("valid init distribution");
        let weights = (0..n_classes)
            .map(|_| (0..feature_dim).map(|_| normal.sample(rng)).collect())
            .collect();
        ClassifierModel {
            weights,
            bias: vec![0.0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect()
    }

    /// Softmax output; numerically stabilized by max-shift.
    pub fn forward(&self, x: &[f64]) -> ProbVec {
        let z = self.logits(x);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        exp.iter_mut().for_each(|v| *v /= sum);
        ProbVec::new_unchecked(exp)
    }

    /// Argmax prediction with lowest-index tie-breaking.
    pub fn predict(&self, x: &[f64]) -> usize {
        self.forward(x).argmax()
    }

    const MAGIC: &'static [u8; 8] = b"RCMODEL1";

    /// Writes the model as little-endian binary (magic, dims, weights, bias).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(Self::MAGIC);
        buf.extend_from_slice(&(self.n_classes() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.feature_dim() as u64).to_le_bytes());
        for row in &self.weights {
            for w in row {
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        for b in &self.bias {
            buf.extend_from_slice(&b.to_le_bytes());
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Malformed {
            path: path.display().to_string(),
            line: 0,
            reason: reason.to_string(),
        };
        if bytes.len() < 24 || &bytes[..8] != Self::MAGIC {
            return Err(bad("not a model file"));
        }
        let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let n_classes = read_u64(8) as usize;
        let dim = read_u64(16) as usize;
        let expected = 24 + 8 * (n_classes * dim + n_classes);
        if bytes.len() != expected {
            return Err(bad("truncated model file"));
        }
        let mut at = 24;
        let mut read_f64 = || {
            let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            at += 8;
            v
        };
        let weights = (0..n_classes)
            .map(|_| (0..dim).map(|_| read_f64()).collect())
            .collect();
        let bias = (0..n_classes).map(|_| read_f64()).collect();
        Ok(ClassifierModel { weights, bias })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Constant,
    Triangular,
}

/// λ schedule over epochs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    #[serde(default)]
    pub lambda_const: f64,
    /// Peak of the triangular schedule.
    #[serde(default)]
    pub alpha: f64,
    pub total_epochs: usize,
}

impl ScheduleConfig {
    pub fn constant(lambda: f64, total_epochs: usize) -> Self {
        ScheduleConfig {
            mode: ScheduleMode::Constant,
            lambda_const: lambda,
            alpha: 0.0,
            total_epochs,
        }
    }

    pub fn triangular(alpha: f64, total_epochs: usize) -> Self {
        ScheduleConfig {
            mode: ScheduleMode::Triangular,
            lambda_const: 0.0,
            alpha,
            total_epochs,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda_const < 0.0 || self.alpha < 0.0 {
            return Err(Error::BadConfig("λ and α must be non-negative".into()));
        }
        if self.total_epochs == 0 {
            return Err(Error::BadConfig("total_epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// Can this schedule ever produce a positive λ?
    pub fn ever_positive(&self) -> bool {
        match self.mode {
            ScheduleMode::Constant => self.lambda_const > 0.0,
            ScheduleMode::Triangular => self.alpha > 0.0,
        }
    }
}

/// λ at a given epoch. The triangular form is
/// `-α · 2 |E_cur - 0.5 E_total| / E_total + α`: exactly 0 at both ends
/// and exactly α at the midpoint for even `E_total`.
pub fn lambda_at(schedule: &ScheduleConfig, epoch: usize) -> Result<f64> {
    schedule.validate()?;
    if epoch > schedule.total_epochs {
        return Err(Error::EpochOutOfRange {
            epoch,
            total: schedule.total_epochs,
        });
    }
    Ok(match schedule.mode {
        ScheduleMode::Constant => schedule.lambda_const,
        ScheduleMode::Triangular => {
            let total = schedule.total_epochs as f64;
            let cur = epoch as f64;
            -schedule.alpha * 2.0 * (cur - 0.5 * total).abs() / total + schedule.alpha
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Plain mini-batch gradient descent.
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub encoding: EncodingKind,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    pub schedule: ScheduleConfig,
}

fn default_eps() -> f64 {
    crate::loss::DEFAULT_EPS
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.epochs == 0 {
            return Err(Error::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::BadConfig("batch_size must be >= 1".into()));
        }
        if self.schedule.ever_positive() && self.batch_size < 2 {
            return Err(Error::BadConfig(
                "batch_size must be >= 2 when λ can be positive (pairs needed)".into(),
            ));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::BadConfig(format!(
                "learning_rate {} invalid",
                self.learning_rate
            )));
        }
        if self.eps <= 0.0 {
            return Err(Error::BadConfig("eps must be positive".into()));
        }
        Ok(())
    }
}

/// One history row per epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy per instance over the epoch.
    #[serde(rename = "L_O")]
    pub loss_obj: f64,
    /// Mean constraint loss per mini-batch over the epoch (reported even
    /// when λ = 0 and the gradient is not applied).
    #[serde(rename = "L_C")]
    pub loss_constraint: f64,
    pub lambda: f64,
    /// Constraint violations among argmax predictions on the training set
    /// at the end of the epoch.
    pub violations: usize,
}

struct Adam {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    t: u64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, d: usize) -> Self {
        Adam {
            m_w: vec![vec![0.0; d]; n],
            v_w: vec![vec![0.0; d]; n],
            m_b: vec![0.0; n],
            v_b: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut ClassifierModel, gw: &[Vec<f64>], gb: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for r in 0..model.n_classes() {
            for d in 0..model.feature_dim() {
                let g = gw[r][d];
                self.m_w[r][d] = Self::BETA1 * self.m_w[r][d] + (1.0 - Self::BETA1) * g;
                self.v_w[r][d] = Self::BETA2 * self.v_w[r][d] + (1.0 - Self::BETA2) * g * g;
                model.weights[r][d] -=
                    lr * (self.m_w[r][d] / c1) / ((self.v_w[r][d] / c2).sqrt() + Self::EPS);
            }
            let g = gb[r];
            self.m_b[r] = Self::BETA1 * self.m_b[r] + (1.0 - Self::BETA1) * g;
            self.v_b[r] = Self::BETA2 * self.v_b[r] + (1.0 - Self::BETA2) * g * g;
            model.bias[r] -= lr * (self.m_b[r] / c1) / ((self.v_b[r] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains the classifier on `instances` against the mined `sets`, encoded
/// per `config.encoding`. Deterministic given the config seed: fixed init
/// draw order, fixed shuffles, fixed reduction order in the loss.
///
/// When λ is zero at an epoch the constraint loss is still computed and
/// reported in the history but contributes no gradient.
pub fn train(
    instances: &[LabeledInstance],
    sets: &ConstraintSets,
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<EpochStats>)> {
    config.validate()?;
    if instances.is_empty() {
        return Err(Error::EmptyInput("training instances".into()));
    }
    let n_classes = sets.n_relations();
    let dim = instances[0].features.len();
    for inst in instances {
        if inst.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: inst.features.len(),
            });
        }
        if inst.gold.rel >= n_classes {
            return Err(Error::BadRelationIndex {
                index: inst.gold.rel,
                size: n_classes,
            });
        }
    }

    let coherent;
    let semantic;
    let encoding = match config.encoding {
        EncodingKind::Coherent => {
            coherent = build_coherent(sets);
            Encoding::Coherent(&coherent)
        }
        EncodingKind::Semantic => {
            semantic = build_semantic(sets);
            Encoding::Semantic(&semantic)
        }
    };
    let loss_opts = LossOptions {
        eps: config.eps,
        ..LossOptions::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ClassifierModel::init(n_classes, dim, &mut rng);
    let mut adam = match config.optimizer {
        OptimizerKind::Adam => Some(Adam::new(n_classes, dim)),
        OptimizerKind::Sgd => None,
    };

    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lambda = lambda_at(&config.schedule, epoch.min(config.schedule.total_epochs))?;
        order.shuffle(&mut rng);

        let mut epoch_ce = 0.0;
        let mut epoch_lc = 0.0;
        let mut n_batches = 0usize;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let b = chunk.len();
            let probs: Vec<ProbVec> = chunk
                .iter()
                .map(|&i| model.forward(&instances[i].features))
                .collect();

            let mut ce = 0.0;
            for (slot, &i) in chunk.iter().enumerate() {
                ce -= probs[slot][instances[i].gold.rel].max(f64::MIN_POSITIVE).ln();
            }
            epoch_ce += ce;

            let golds: Vec<&crate::kb::Triple> =
                chunk.iter().map(|&i| &instances[i].gold).collect();
            let prob_views: Vec<&[f64]> = probs.iter().map(|p| &**p).collect();
            let want_grads = lambda > 0.0 && b >= 2;
            let report = batch_loss_raw(&golds, &prob_views, encoding, sets, &loss_opts, want_grads)?;
            epoch_lc += report.total;
            n_batches += 1;

            let batch_loss = ce / b as f64 + lambda * report.total;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }

            // Gradients w.r.t. logits: cross-entropy gives (p - y)/b; the
            // constraint term is chained through the softmax Jacobian.
            let mut gw = vec![vec![0.0; dim]; n_classes];
            let mut gb = vec![0.0; n_classes];
            for (slot, &i) in chunk.iter().enumerate() {
                let p = &probs[slot];
                let mut dz: Vec<f64> = (0..n_classes)
                    .map(|k| {
                        (p[k] - f64::from(u8::from(k == instances[i].gold.rel))) / b as f64
                    })
                    .collect();
                if want_grads {
                    let g = &report.grads.as_ref().expect("grads requested")[slot];
                    let dot: f64 = (0..n_classes).map(|k| g[k] * p[k]).sum();
                    for k in 0..n_classes {
                        dz[k] += lambda * p[k] * (g[k] - dot);
                    }
                }
                for k in 0..n_classes {
                    if dz[k] == 0.0 {
                        continue;
                    }
                    for (d, &x) in instances[i].features.iter().enumerate() {
                        gw[k][d] += dz[k] * x;
                    }
                    gb[k] += dz[k];
                }
            }

            match &mut adam {
                Some(adam) => adam.step(&mut model, &gw, &gb, config.learning_rate),
                None => {
                    for k in 0..n_classes {
                        for d in 0..dim {
                            model.weights[k][d] -= config.learning_rate * gw[k][d];
                        }
                        model.bias[k] -= config.learning_rate * gb[k];
                    }
                }
            }
        }

        let preds = prediction_set(&model, instances, "train");
        let violations = count_violations(&preds, sets).total;
        history.push(EpochStats {
            epoch,
            loss_obj: epoch_ce / instances.len() as f64,
            loss_constraint: epoch_lc / n_batches as f64,
            lambda,
            violations,
        });
    }
    Ok((model, history))
}

/// Runs the model over `instances` and packages argmax predictions.
pub fn prediction_set(
    model: &ClassifierModel,
    instances: &[LabeledInstance],
    id_prefix: &str,
) -> PredictionSet {
    let items = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let probs = model.forward(&inst.features);
            let predicted = probs.argmax();
            PredItem {
                id: format!("{id_prefix}{i:05}"),
                gold: inst.gold.clone(),
                probs,
                predicted,
            }
        })
        .collect();
    PredictionSet { items }
}

/// Fraction of instances whose argmax prediction equals the gold label.
pub fn accuracy(model: &ClassifierModel, instances: &[LabeledInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let hits = instances
        .iter()
        .filter(|inst| model.predict(&inst.features) == inst.gold.rel)
        .count();
    hits as f64 / instances.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::{mine, MiningConfig};
    use crate::synth::{generate_synthetic, SyntheticDatasetSpec};

    fn small_spec(label_noise: f64, feature_noise: f64) -> SyntheticDatasetSpec {
        SyntheticDatasetSpec {
            n_relations: 6,
            n_entities_per_type: 8,
            n_type_classes: 2,
            n_instances: 300,
            label_noise,
            feature_noise,
            seed: 9,
        }
    }

    fn config(lambda: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 25,
            learning_rate: 0.05,
            seed: 3,
            encoding: EncodingKind::Semantic,
            eps: crate::loss::DEFAULT_EPS,
            optimizer: OptimizerKind::Sgd,
            schedule: ScheduleConfig::constant(lambda, epochs),
        }
    }

    #[test]
    fn triangular_schedule_endpoints_and_peak() {
        let s = ScheduleConfig::triangular(0.5, 10);
        assert_eq!(lambda_at(&s, 0).unwrap(), 0.0);
        assert_eq!(lambda_at(&s, 10).unwrap(), 0.0);
        assert_eq!(lambda_at(&s, 5).unwrap(), 0.5);
        assert!(lambda_at(&s, 11).is_err());
        let s = ScheduleConfig::triangular(1e-4, 8);
        assert_eq!(lambda_at(&s, 2).unwrap(), 5e-5);
        let c = ScheduleConfig::constant(0.25, 4);
        assert_eq!(lambda_at(&c, 3).unwrap(), 0.25);
    }

    #[test]
    fn triangular_nonnegative_and_peaked() {
        let s = ScheduleConfig::triangular(0.3, 9);
        let values: Vec<f64> = (0..=9).map(|e| lambda_at(&s, e).unwrap()).collect();
        assert!(values.iter().all(|&v| v >= 0.0));
        let max = values.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 0.3 + 1e-15);
    }

    #[test]
    fn noiseless_data_reaches_full_train_accuracy() {
        let data = generate_synthetic(&small_spec(0.0, 0.0)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        let (model, _) = train(&data.instances, &sets, &config(0.0, 40)).unwrap();
        assert_eq!(accuracy(&model, &data.instances), 1.0);
    }

    #[test]
    fn total_loss_decreases_on_noiseless_data() {
        let data = generate_synthetic(&small_spec(0.0, 0.0)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        for lambda in [0.0, 1e-4] {
            let (_, history) = train(&data.instances, &sets, &config(lambda, 30)).unwrap();
            for w in history.windows(2).skip(2) {
                let prev = w[0].loss_obj + w[0].lambda * w[0].loss_constraint;
                let next = w[1].loss_obj + w[1].lambda * w[1].loss_constraint;
                assert!(
                    next <= prev + 1e-3,
                    "epoch {}: {next} > {prev}",
                    w[1].epoch
                );
            }
        }
    }

    #[test]
    fn identical_seed_reproduces_weights() {
        let data = generate_synthetic(&small_spec(0.1, 0.3)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        let (a, ha) = train(&data.instances, &sets, &config(1e-3, 5)).unwrap();
        let (b, hb) = train(&data.instances, &sets, &config(1e-3, 5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.len(), hb.len());
        for (x, y) in ha.iter().zip(&hb) {
            assert_eq!(x.loss_obj.to_bits(), y.loss_obj.to_bits());
            assert_eq!(x.violations, y.violations);
        }
    }

    /// With λ = 0 the constraint loss is reported but not applied: changing
    /// eps changes reported values, never the weights.
    #[test]
    fn zero_lambda_reports_but_does_not_apply() {
        let data = generate_synthetic(&small_spec(0.2, 0.3)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        let cfg_a = config(0.0, 4);
        let mut cfg_b = config(0.0, 4);
        cfg_b.eps = 1e-6;
        let (ma, ha) = train(&data.instances, &sets, &cfg_a).unwrap();
        let (mb, _) = train(&data.instances, &sets, &cfg_b).unwrap();
        assert_eq!(ma, mb);
        assert!(ha.iter().any(|s| s.loss_constraint > 0.0));
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = generate_synthetic(&small_spec(0.0, 0.1)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        let mut cfg = config(0.0, 1);
        cfg.learning_rate = 0.0;
        let (model, _) = train(&data.instances, &sets, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = ClassifierModel::init(sets.n_relations(), data.instances[0].features.len(), &mut rng);
        assert_eq!(model, init);
    }

    #[test]
    fn positive_lambda_requires_pairs() {
        let data = generate_synthetic(&small_spec(0.0, 0.0)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        let mut cfg = config(1e-3, 1);
        cfg.batch_size = 1;
        assert!(train(&data.instances, &sets, &cfg).is_err());
    }

    #[test]
    fn diverging_run_aborts_with_nonfinite_error() {
        let data = generate_synthetic(&small_spec(0.0, 0.5)).unwrap();
        let sets = mine(&data.store, &data.vocab, MiningConfig::default()).unwrap();
        let mut cfg = config(0.0, 30);
        cfg.learning_rate = 1e12;
        match train(&data.instances, &sets, &cfg) {
            Err(Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn model_save_load_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = ClassifierModel::init(5, 3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        assert_eq!(ClassifierModel::load(&path).unwrap(), model);
    }
}
