use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: 0.8,
            seed,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("class {label} has {count} members; at least 2 are required")]
    ClassTooSmall { label: u8, count: usize },
    #[error("train fraction {0} outside (0, 1)")]
    BadFraction(f64),
}

/// Row indices of the two parts, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffled split. Each class contributes `floor(n_c * (1 - f))`
/// rows to the test part and the rest to training. Depends only on the
/// labels and the seed.
pub fn stratified_split(labels: &[u8], spec: SplitSpec) -> Result<Split, SplitError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(SplitError::BadFraction(spec.train_fraction));
    }
    let groups: Vec<Vec<usize>> = if spec.stratified {
        (0..=1u8)
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    for (c, g) in groups.iter().enumerate() {
        if spec.stratified && g.len() < 2 {
            return Err(SplitError::ClassTooSmall {
                label: c as u8,
                count: g.len(),
            });
        }
    }

    let test_fraction = 1.0 - spec.train_fraction;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for mut g in groups {
        // 1 - 0.8 is 0.19999999999999996; the epsilon keeps floor(0.2 * 5) at 1.
        let n_test = (g.len() as f64 * test_fraction + 1e-9).floor() as usize;
        g.shuffle(&mut rng);
        test.extend_from_slice(&g[..n_test]);
        train.extend_from_slice(&g[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
