//! A logistic-regression screen for patched images over handcrafted
//! high-frequency statistics.
//!
//! Features (all pooled, so the length does not depend on image size):
//! - 8×8 block mean |Laplacian|: mean, std, max, max − median
//! - 8×8 block variance of the residual against a 3×3 median filter: mean,
//!   std, max, max − median
//! - 8-bin histogram of gradient magnitudes (fractions of pixels)

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::RngSeed;

pub const FEATURE_LEN: usize = 16;

const BLOCK: usize = 8;

/// Upper edges of the first seven gradient-magnitude bins; the last is open.
const GRADIENT_EDGES: [f64; 7] = [0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64];

/// Probability above which an image is called adversarial.
pub const DECISION_THRESHOLD: f64 = 0.5;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summary(values: &[f64]) -> [f64; 4] {
    if values.is_empty() {
        return [0.0; 4];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let med = median(&mut values.to_vec());
    [mean, var.sqrt(), max, max - med]
}

/// Per-block means of a per-pixel scalar map.
fn block_means(map: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            let (mut s, mut n) = (0.0, 0usize);
            for y in by..(by + BLOCK).min(h) {
                for x in bx..(bx + BLOCK).min(w) {
                    s += map[y * w + x];
                    n += 1;
                }
            }
            out.push(s / n as f64);
        }
    }
    out
}

/// Fixed-length statistics of `img`; needs no reference image.
pub fn featurize(img: &Image) -> Vec<f64> {
    let (w, h) = img.dims();
    let mut features = Vec::with_capacity(FEATURE_LEN);
    if w < 3 || h < 3 {
        features.resize(FEATURE_LEN, 0.0);
        return features;
    }
    let at = |x: usize, y: usize, c: usize| img.get(x, y, c);

    // |Laplacian| averaged over channels, replicated borders
    let mut lap = vec![0.0; w * h];
    let mut resid_sq = vec![0.0; w * h];
    let mut resid = vec![0.0; w * h];
    let mut window = [0.0; 9];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let mut l = 0.0;
            let mut r = 0.0;
            for c in 0..3 {
                let v = at(x, y, c);
                l += (at(xl, y, c) + at(xr, y, c) + at(x, yu, c) + at(x, yd, c) - 4.0 * v).abs();
                let mut k = 0;
                for yy in [yu, y, yd] {
                    for xx in [xl, x, xr] {
                        window[k] = at(xx, yy, c);
                        k += 1;
                    }
                }
                r += v - median(&mut window);
            }
            lap[y * w + x] = l / 3.0;
            resid[y * w + x] = r / 3.0;
            resid_sq[y * w + x] = (r / 3.0) * (r / 3.0);
        }
    }
    features.extend(summary(&block_means(&lap, w, h)));

    let mean_r = block_means(&resid, w, h);
    let mean_r2 = block_means(&resid_sq, w, h);
    let variances: Vec<f64> = mean_r
        .iter()
        .zip(&mean_r2)
        .map(|(m, m2)| (m2 - m * m).max(0.0))
        .collect();
    features.extend(summary(&variances));

    let mut hist = [0.0; 8];
    for y in 0..h {
        for x in 0..w {
            let (xr, yd) = ((x + 1).min(w - 1), (y + 1).min(h - 1));
            let mut g2 = 0.0;
            for c in 0..3 {
                let gx = at(xr, y, c) - at(x, y, c);
                let gy = at(x, yd, c) - at(x, y, c);
                g2 += gx * gx + gy * gy;
            }
            let g = (g2 / 3.0).sqrt();
            let bin = GRADIENT_EDGES.iter().position(|&e| g < e).unwrap_or(7);
            hist[bin] += 1.0;
        }
    }
    let total = (w * h) as f64;
    features.extend(hist.iter().map(|v| v / total));
    debug_assert_eq!(features.len(), FEATURE_LEN);
    features
}

/// Labeled feature vectors; `true` marks adversarial images.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl LabeledSet {
    /// Interleaves each adversarial image with its clean counterpart.
    pub fn from_pairs(adversarial: &[Image], clean: &[Image]) -> Result<Self> {
        if adversarial.len() != clean.len() {
            return Err(Error::Unbalanced(format!(
                "{} adversarial vs {} clean images",
                adversarial.len(),
                clean.len()
            )));
        }
        let mut set = LabeledSet::default();
        for (a, c) in adversarial.iter().zip(clean) {
            set.features.push(featurize(a));
            set.labels.push(true);
            set.features.push(featurize(c));
            set.labels.push(false);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check_balanced(&self, what: &str) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::Empty("labeled set"));
        }
        let pos = self.labels.iter().filter(|&&l| l).count();
        if 2 * pos != self.len() {
            return Err(Error::Unbalanced(format!(
                "{what}: {pos} adversarial of {} samples",
                self.len()
            )));
        }
        if self.features.iter().any(|f| f.len() != FEATURE_LEN) {
            return Err(Error::InvalidConfig(format!("{what}: wrong feature length")));
        }
        Ok(pos)
    }

    /// Same features with labels permuted by `seed`.
    pub fn with_shuffled_labels(&self, seed: RngSeed) -> Self {
        let mut labels = self.labels.clone();
        labels.shuffle(&mut seed.rng());
        Self {
            features: self.features.clone(),
            labels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.1,
            batch_size: 8,
            l2: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchDetectorModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Standardization applied before the linear layer.
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub seed: RngSeed,
    pub epochs: usize,
    /// Epoch whose parameters were kept (0 = before any update).
    pub best_epoch: usize,
    pub validation_accuracy: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl PatchDetectorModel {
    fn standardize(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Probability that the features come from an adversarial image.
    pub fn probability(&self, features: &[f64]) -> f64 {
        let z = self.standardize(features);
        sigmoid(self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn predict(&self, features: &[f64]) -> bool {
        self.probability(features) > DECISION_THRESHOLD
    }
}

/// `(TP + TN) / (2N)` on a balanced set of N adversarial and N clean samples.
pub fn evaluate(model: &PatchDetectorModel, test: &LabeledSet) -> Result<f64> {
    let n = test.check_balanced("test set")?;
    let correct = test
        .features
        .iter()
        .zip(&test.labels)
        .filter(|(f, &l)| model.predict(f) == l)
        .count();
    Ok(correct as f64 / (2 * n) as f64)
}

/// Mini-batch logistic regression; keeps the iterate with the best
/// validation accuracy (earliest on ties).
pub fn train(train: &LabeledSet, val: &LabeledSet, seed: RngSeed, cfg: &TrainConfig) -> Result<PatchDetectorModel> {
    train.check_balanced("training set")?;
    val.check_balanced("validation set")?;
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("batch_size and learning_rate must be positive".into()));
    }

    let n = train.len() as f64;
    let mut mean = vec![0.0; FEATURE_LEN];
    for f in &train.features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; FEATURE_LEN];
    for f in &train.features {
        for ((s, v), m) in scale.iter_mut().zip(f).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }

    let mut model = PatchDetectorModel {
        weights: vec![0.0; FEATURE_LEN],
        bias: 0.0,
        feature_mean: mean,
        feature_scale: scale,
        seed,
        epochs: cfg.epochs,
        best_epoch: 0,
        validation_accuracy: 0.0,
    };
    model.validation_accuracy = evaluate(&model, val)?;
    let mut best = model.clone();

    let xs: Vec<Vec<f64>> = train.features.iter().map(|f| model.standardize(f)).collect();
    let ys: Vec<f64> = train.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = seed.rng();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut gw = vec![0.0; FEATURE_LEN];
            let mut gb = 0.0;
            for &i in batch {
                let z: f64 = model.bias + xs[i].iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>();
                let err = sigmoid(z) - ys[i];
                for (g, x) in gw.iter_mut().zip(&xs[i]) {
                    *g += err * x;
                }
                gb += err;
            }
            let m = batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= cfg.learning_rate * (g / m + cfg.l2 * *w);
            }
            model.bias -= cfg.learning_rate * gb / m;
        }
        let acc = evaluate(&model, val)?;
        if acc > best.validation_accuracy {
            best = model.clone();
            best.best_epoch = epoch;
            best.validation_accuracy = acc;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noisy(seed: u64, amplitude: f64) -> Image {
        let mut rng = RngSeed(seed).rng();
        let mut img = Image::filled(32, 32, [0.3, 0.3, 0.3]);
        for v in img.data_mut() {
            *v += rng.gen_range(-0.01..0.01);
        }
        if amplitude > 0.0 {
            let (x0, y0) = (rng.gen_range(0..20), rng.gen_range(0..20));
            for y in y0..y0 + 10 {
                for x in x0..x0 + 10 {
                    for c in 0..3 {
                        img.set(x, y, c, rng.gen_range(0.0..amplitude));
                    }
                }
            }
        }
        img
    }

    fn pairs(range: std::ops::Range<u64>) -> LabeledSet {
        let adv: Vec<Image> = range.clone().map(|s| noisy(s, 1.0)).collect();
        let clean: Vec<Image> = range.map(|s| noisy(s + 1000, 0.0)).collect();
        LabeledSet::from_pairs(&adv, &clean).unwrap()
    }

    #[test]
    fn constant_image_has_no_high_frequency() {
        let f = featurize(&Image::filled(24, 24, [0.4, 0.1, 0.9]));
        assert_eq!(f.len(), FEATURE_LEN);
        assert!(f[..8].iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(f[8], 1.0); // every gradient in the lowest bin
    }

    #[test]
    fn features_are_deterministic_and_fixed_length() {
        let img = noisy(3, 1.0);
        assert_eq!(featurize(&img), featurize(&img.clone()));
        for side in [16, 20, 64] {
            assert_eq!(featurize(&Image::zeros(side, side + 3)).len(), FEATURE_LEN);
        }
    }

    #[test]
    fn separates_noise_patches() {
        let model = train(&pairs(0..40), &pairs(40..60), RngSeed(1), &TrainConfig::default()).unwrap();
        assert!(evaluate(&model, &pairs(60..100)).unwrap() >= 0.9);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&pairs(0..10), &pairs(10..15), RngSeed(4), &TrainConfig::default()).unwrap();
        let b = train(&pairs(0..10), &pairs(10..15), RngSeed(4), &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_classifier_scores_half() {
        let set = pairs(0..6);
        let mut model = train(&set, &set, RngSeed(0), &TrainConfig { epochs: 0, ..Default::default() }).unwrap();
        model.weights.iter_mut().for_each(|w| *w = 0.0);
        for bias in [-3.0, 3.0] {
            model.bias = bias;
            assert_eq!(evaluate(&model, &set).unwrap(), 0.5);
        }
    }

    #[test]
    fn rejects_unbalanced_and_empty() {
        let mut set = pairs(0..4);
        set.labels[1] = true;
        let ok = pairs(4..6);
        assert!(matches!(train(&set, &ok, RngSeed(0), &TrainConfig::default()), Err(Error::Unbalanced(_))));
        assert!(train(&LabeledSet::default(), &ok, RngSeed(0), &TrainConfig::default()).is_err());
        assert!(LabeledSet::from_pairs(&[Image::zeros(4, 4)], &[]).is_err());
    }
}
