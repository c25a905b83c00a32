//! Labeled datasets, imbalanced Gaussian blobs, and train/validation splits.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};

/// Class proportions of the default five-class profile: a dominant class 0
/// and two scarce classes (3 and 4).
pub const DEFAULT_PROPORTIONS: [f64; 5] = [0.50, 0.10, 0.27, 0.05, 0.08];

/// Row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl LabeledDataset {
    /// `features` holds `labels.len()` rows of `dim` values each.
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("feature dimension must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::input("a dataset needs at least 2 classes"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::input(alloc::format!(
                "{} feature values for {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(alloc::format!(
                "non-finite feature at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        let mut class_counts = alloc::vec![0; num_classes];
        for (row, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::input(alloc::format!(
                    "label {label} at row {row} out of range for {num_classes} classes"
                )));
            }
            class_counts[label] += 1;
        }
        Ok(LabeledDataset {
            features,
            dim,
            labels,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Classes with no samples.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.num_classes()).filter(|&k| self.class_counts[k] == 0).collect()
    }

    /// Rows at `indices`, in that order, keeping the class count of `self`.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        let mut class_counts = alloc::vec![0; self.num_classes()];
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            class_counts[self.labels[i]] += 1;
        }
        LabeledDataset {
            features,
            dim: self.dim,
            labels,
            class_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub proportions: Vec<f64>,
    pub total: usize,
    /// Standard deviation of each blob.
    pub spread: f64,
    /// Radius of the circle the class centers sit on.
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            num_classes: 5,
            dim: 2,
            proportions: DEFAULT_PROPORTIONS.to_vec(),
            total: 2000,
            spread: 1.0,
            separation: 2.0,
            seed: 0,
        }
    }
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        if self.dim < 2 {
            return Err(Error::config("blob dimension must be at least 2"));
        }
        if self.proportions.len() != self.num_classes {
            return Err(Error::config(alloc::format!(
                "{} proportions for {} classes",
                self.proportions.len(),
                self.num_classes
            )));
        }
        if self.proportions.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::config("proportions must be positive"));
        }
        let sum: f64 = self.proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(alloc::format!("proportions sum to {sum}, not 1")));
        }
        if self.total < self.num_classes {
            return Err(Error::config("total must be at least the number of classes"));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::config("spread must be > 0"));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::config("separation must be > 0"));
        }
        Ok(())
    }

    /// `⌊proportion_k · total⌋` per class, with the remainder added to class 0.
    /// A 1e-9 slack absorbs products like `0.29 · 100 = 28.999…`.
    pub fn realized_counts(&self) -> Vec<usize> {
        let n = self.total as f64;
        let mut counts: Vec<usize> = self
            .proportions
            .iter()
            .map(|&p| libm::floor(p * n + 1e-9) as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        counts[0] += self.total.saturating_sub(assigned);
        counts
    }

    pub fn center(&self, class: usize) -> Vec<f64> {
        let angle = 2.0 * core::f64::consts::PI * class as f64 / self.num_classes as f64;
        let mut c = alloc::vec![0.0; self.dim];
        c[0] = self.separation * libm::cos(angle);
        c[1] = self.separation * libm::sin(angle);
        c
    }
}

/// Samples class by class (class 0 first); each row draws `dim` standard
/// normals in order from one generator on the blob stream.
pub fn generate_blobs(spec: &BlobSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let counts = spec.realized_counts();
    let mut rng = CounterRng::new(spec.seed, streams::BLOBS);
    let mut features = Vec::with_capacity(spec.total * spec.dim);
    let mut labels = Vec::with_capacity(spec.total);
    for (class, &count) in counts.iter().enumerate() {
        let center = spec.center(class);
        for _ in 0..count {
            for &c in &center {
                features.push(c + spec.spread * rng.next_normal());
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(features, spec.dim, labels, spec.num_classes)
}

fn val_size(n: usize, fraction: f64) -> usize {
    (libm::round(fraction * n as f64) as usize).clamp(1, n - 1)
}

/// Splits into `(train, val)`. Both outputs keep the original row order.
///
/// Stratified mode shuffles each class's rows and sends
/// `round(val_fraction · n_k)` of them (at least one, at most `n_k - 1`)
/// to validation, so every class with at least two rows lands in both
/// splits. Classes with no rows are ignored.
pub fn split(
    dataset: &LabeledDataset,
    val_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::config(alloc::format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::input("need at least 2 rows to split"));
    }
    let mut rng = CounterRng::new(seed, streams::SPLIT);
    let mut in_val = alloc::vec![false; dataset.len()];
    if stratified {
        for class in 0..dataset.num_classes() {
            let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.label(i) == class).collect();
            match members.len() {
                0 => continue,
                1 => {
                    return Err(Error::input(alloc::format!(
                        "class {class} has a single sample; stratified split needs at least 2"
                    )))
                }
                n => {
                    rng.shuffle(&mut members);
                    for &i in &members[..val_size(n, val_fraction)] {
                        in_val[i] = true;
                    }
                }
            }
        }
    } else {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        rng.shuffle(&mut order);
        for &i in &order[..val_size(dataset.len(), val_fraction)] {
            in_val[i] = true;
        }
    }
    let (val_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| in_val[i]);
    Ok((dataset.subset(&train_idx), dataset.subset(&val_idx)))
}

/// Human-readable notes about a dataset, such as classes with no samples.
pub fn dataset_warnings(dataset: &LabeledDataset) -> Vec<String> {
    dataset
        .empty_classes()
        .into_iter()
        .map(|k| alloc::format!("class {k} has no samples"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_profile_counts() {
        let spec = BlobSpec::default();
        assert_eq!(spec.realized_counts(), vec![1000, 200, 540, 100, 160]);
        let data = generate_blobs(&spec).unwrap();
        assert_eq!(data.class_counts(), &[1000, 200, 540, 100, 160]);
        assert_eq!(data.len(), 2000);
    }

    #[test]
    fn remainder_goes_to_class_zero() {
        let spec = BlobSpec {
            num_classes: 3,
            proportions: vec![0.2, 0.4, 0.4],
            total: 7,
            ..BlobSpec::default()
        };
        // floor(1.4)=1, floor(2.8)=2, floor(2.8)=2 -> remainder 2 to class 0
        assert_eq!(spec.realized_counts(), vec![3, 2, 2]);
    }

    #[test]
    fn blobs_deterministic() {
        let spec = BlobSpec {
            seed: 17,
            ..BlobSpec::default()
        };
        assert_eq!(generate_blobs(&spec).unwrap(), generate_blobs(&spec).unwrap());
        let other = BlobSpec {
            seed: 18,
            ..spec.clone()
        };
        assert_ne!(generate_blobs(&spec).unwrap(), generate_blobs(&other).unwrap());
    }

    #[test]
    fn tiny_spread_sits_on_centers() {
        let spec = BlobSpec {
            spread: 1e-12,
            dim: 3,
            ..BlobSpec::default()
        };
        let data = generate_blobs(&spec).unwrap();
        for i in 0..data.len() {
            let c = spec.center(data.label(i));
            for (x, cx) in data.row(i).iter().zip(&c) {
                assert!((x - cx).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bad_proportions_rejected() {
        let spec = BlobSpec {
            proportions: vec![0.5, 0.1, 0.2, 0.05, 0.05],
            ..BlobSpec::default()
        };
        assert!(matches!(generate_blobs(&spec), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(vec![0.0; 4], 2, vec![0, 3], 3).is_err());
        assert!(LabeledDataset::new(vec![0.0; 3], 2, vec![0, 1], 3).is_err());
        assert!(LabeledDataset::new(vec![0.0, f64::NAN], 2, vec![0], 2).is_err());
        let d = LabeledDataset::new(vec![0.0; 6], 2, vec![0, 2, 1], 3).unwrap();
        assert_eq!(d.class_counts(), &[1, 1, 1]);
    }

    fn balanced(n_per_class: usize) -> LabeledDataset {
        let labels: Vec<usize> = (0..2 * n_per_class).map(|i| i % 2).collect();
        let features: Vec<f64> = (0..2 * n_per_class).flat_map(|i| [i as f64, -(i as f64)]).collect();
        LabeledDataset::new(features, 2, labels, 2).unwrap()
    }

    #[test]
    fn stratified_split_exact() {
        let d = balanced(50);
        let (train, val) = split(&d, 0.2, 5, true).unwrap();
        assert_eq!(val.class_counts(), &[10, 10]);
        assert_eq!(train.class_counts(), &[40, 40]);
        // Partition: every original row in exactly one side.
        let mut seen: Vec<f64> = train.rows().chain(val.rows()).map(|r| r[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(split(&d, 0.2, 5, true).unwrap(), (train, val));
    }

    #[test]
    fn stratified_split_needs_two_per_class() {
        let d = LabeledDataset::new(vec![0.0; 8], 2, vec![0, 0, 0, 1], 2).unwrap();
        assert!(matches!(split(&d, 0.5, 1, true), Err(Error::InvalidInput(_))));
        assert!(split(&d, 0.5, 1, false).is_ok());
        assert!(split(&d, 1.0, 1, false).is_err());
    }

    #[test]
    fn stratified_keeps_minorities() {
        let data = generate_blobs(&BlobSpec {
            total: 60,
            ..BlobSpec::default()
        })
        .unwrap();
        let (train, val) = split(&data, 0.2, 3, true).unwrap();
        for k in 0..5 {
            assert!(train.class_counts()[k] > 0 && val.class_counts()[k] > 0);
        }
    }
}
