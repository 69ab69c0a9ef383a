//! Feature/target normalization and deterministic dataset splits.
//!
//! Inputs are scaled by the largest absolute feature value seen in the
//! training split; target coordinates are mapped affinely so the training
//! extremes land on 0 and 1. Estimates and variances are converted back to
//! meters at the reporting boundary using the slopes stored here. Splits
//! are a seeded shuffle plus partition, with an optional rectangular
//! holdout whose samples are removed from train/val and forced into test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scene::CsiSample;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("empty input set")]
    EmptyInput,
    #[error("training features are all zero")]
    AllZeroFeatures,
    #[error("invalid split fractions: {0}")]
    BadFractions(String),
    #[error("no training samples remain after the holdout region")]
    EmptyTrainAfterHoldout,
}

/// Axis-aligned rectangle in scene coordinates, inclusive on both corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

/// Scaling state fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationState {
    /// Largest absolute feature value over the training split.
    pub delta_norm: f64,
    pub target_min: [f64; 2],
    pub target_max: [f64; 2],
}

impl NormalizationState {
    /// Per-coordinate affine slope from scaled space back to meters.
    ///
    /// Degenerate coordinates (all training positions equal) fall back to
    /// slope 1 so the mapping stays invertible.
    pub fn slopes(&self) -> [f64; 2] {
        let slope = |min: f64, max: f64| if max > min { max - min } else { 1.0 };
        [
            slope(self.target_min[0], self.target_max[0]),
            slope(self.target_min[1], self.target_max[1]),
        ]
    }

    pub fn scale_position(&self, p: [f64; 2]) -> [f64; 2] {
        let s = self.slopes();
        [
            (p[0] - self.target_min[0]) / s[0],
            (p[1] - self.target_min[1]) / s[1],
        ]
    }

    pub fn unscale_position(&self, scaled: [f64; 2]) -> [f64; 2] {
        let s = self.slopes();
        [
            scaled[0] * s[0] + self.target_min[0],
            scaled[1] * s[1] + self.target_min[1],
        ]
    }

    /// Converts a scaled-space variance pair to meters squared.
    pub fn variance_to_meters(&self, scaled: [f64; 2]) -> [f64; 2] {
        let s = self.slopes();
        [scaled[0] * s[0] * s[0], scaled[1] * s[1] * s[1]]
    }
}

/// Fits the scaling state on the training split only.
pub fn fit_normalizer(train: &[CsiSample]) -> Result<NormalizationState, DatasetError> {
    if train.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut delta_norm = 0.0_f64;
    let mut target_min = [f64::INFINITY; 2];
    let mut target_max = [f64::NEG_INFINITY; 2];
    for sample in train {
        for &f in &sample.features {
            delta_norm = delta_norm.max(f.abs());
        }
        for c in 0..2 {
            target_min[c] = target_min[c].min(sample.position[c]);
            target_max[c] = target_max[c].max(sample.position[c]);
        }
    }
    if !(delta_norm > 0.0) {
        return Err(DatasetError::AllZeroFeatures);
    }
    Ok(NormalizationState { delta_norm, target_min, target_max })
}

/// Applies feature and target scaling to one sample.
pub fn normalize(sample: &CsiSample, state: &NormalizationState) -> CsiSample {
    CsiSample {
        features: sample.features.iter().map(|f| f / state.delta_norm).collect(),
        position: state.scale_position(sample.position),
        los: sample.los,
        location_id: sample.location_id,
    }
}

/// Inverse of the target scaling, back to meters.
pub fn denormalize_position(scaled: [f64; 2], state: &NormalizationState) -> [f64; 2] {
    state.unscale_position(scaled)
}

/// Split configuration: fractions, shuffle seed and optional holdout
/// rectangle excluded from training.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub shuffle_seed: u64,
    pub out_of_set_region: Option<Rect>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(DatasetError::BadFractions(format!(
                "each fraction must lie in (0, 1), got {fractions:?}"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadFractions(format!(
                "fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// A test sample with its holdout-region tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSample {
    pub sample: CsiSample,
    pub out_of_set: bool,
}

/// Disjoint train/val/test partition of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSets {
    pub train: Vec<CsiSample>,
    pub val: Vec<CsiSample>,
    pub test: Vec<TestSample>,
}

/// Shuffles by seed, partitions by fractions, then applies the holdout
/// region: samples inside it never train or validate and are force-assigned
/// to test with the `out_of_set` tag.
pub fn split(data: &[CsiSample], spec: &SplitSpec) -> Result<SplitSets, DatasetError> {
    spec.validate()?;
    if data.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.shuffle_seed);
    order.shuffle(&mut rng);

    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    let n_val = (spec.val_fraction * n as f64).floor() as usize;

    let in_region = |s: &CsiSample| {
        spec.out_of_set_region
            .map(|r| r.contains(s.position))
            .unwrap_or(false)
    };

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    let mut displaced = Vec::new();
    for (slot, &idx) in order.iter().enumerate() {
        let sample = data[idx].clone();
        let oos = in_region(&sample);
        if slot < n_train {
            if oos {
                displaced.push(TestSample { sample, out_of_set: true });
            } else {
                train.push(sample);
            }
        } else if slot < n_train + n_val {
            if oos {
                displaced.push(TestSample { sample, out_of_set: true });
            } else {
                val.push(sample);
            }
        } else {
            test.push(TestSample { sample, out_of_set: oos });
        }
    }
    test.extend(displaced);

    if train.is_empty() {
        return Err(DatasetError::EmptyTrainAfterHoldout);
    }
    Ok(SplitSets { train, val, test })
}
