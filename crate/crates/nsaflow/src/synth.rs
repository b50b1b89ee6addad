//! Synthetic-data generators behind the sweep experiments, plus the
//! portable seedable RNG every randomized artifact in this crate goes
//! through (so outputs are reproducible across platforms and recorded
//! seeds mean the same thing everywhere).

use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Name recorded in output header comments next to the seed.
pub const RNG_NAME: &str = "chacha8";

pub fn portable_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// p×k matrix of standard-normal entries, seeded.
pub fn random_normal_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = portable_rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Disjoint positive row-blocks per column (an exactly orthogonal
    /// non-negative basis) plus clamped Gaussian noise.
    BlockNonneg,
    /// Low-rank Gaussian mixture with additive noise; columns correlated.
    CorrelatedNoise,
    /// Fixed 4×3 instance: three disjoint non-negative unit columns scaled
    /// by 1.0, 0.8, 1.2, observed with Gaussian noise.
    Toy43,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "block_nonneg" => Ok(SyntheticKind::BlockNonneg),
            "correlated_noise" => Ok(SyntheticKind::CorrelatedNoise),
            "toy43" => Ok(SyntheticKind::Toy43),
            other => Err(Error::Config(format!("unknown synthetic kind '{other}'"))),
        }
    }
}

/// Row ranges of the k disjoint blocks used by `BlockNonneg`; exposed so
/// tests can recover the ground-truth support.
pub fn block_partition(p: usize, k: usize) -> Vec<Range<usize>> {
    (0..k)
        .map(|b| (b * p / k)..((b + 1) * p / k))
        .collect()
}

pub fn gen_synthetic(
    kind: SyntheticKind,
    rows: usize,
    cols: usize,
    noise: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!(
            "synthetic dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if noise < 0.0 {
        return Err(Error::Config(format!("noise must be >= 0, got {noise}")));
    }
    match kind {
        SyntheticKind::BlockNonneg => block_nonneg(rows, cols, noise, seed),
        SyntheticKind::CorrelatedNoise => correlated_noise(rows, cols, noise, seed),
        SyntheticKind::Toy43 => toy43(rows, cols, noise, seed),
    }
}

fn block_nonneg(p: usize, k: usize, noise: f64, seed: u64) -> Result<DenseMatrix> {
    if k > p {
        return Err(Error::Dimension(format!(
            "block pattern needs rows >= cols, got {p}x{k}"
        )));
    }
    let blocks = block_partition(p, k);
    let mut rng = portable_rng(seed);
    let mut m = DenseMatrix::zeros(p, k);
    for (j, block) in blocks.iter().enumerate() {
        for i in block.clone() {
            // positive entries bounded away from zero
            m.set(i, j, 0.5 + rng.random::<f64>());
        }
    }
    if noise > 0.0 {
        m = m.map_with_noise(noise, &mut rng);
        m = m.map(|v| v.max(0.0));
    }
    Ok(m)
}

fn correlated_noise(rows: usize, cols: usize, noise: f64, seed: u64) -> Result<DenseMatrix> {
    let rank = (cols / 2).max(2).min(cols);
    let mut rng = portable_rng(seed);
    let a = DenseMatrix::from_fn(rows, rank, |_, _| standard_normal(&mut rng));
    let b = DenseMatrix::from_fn(rank, cols, |_, _| standard_normal(&mut rng));
    let mut m = a.matmul(&b).scaled(1.0 / (rank as f64).sqrt());
    if noise > 0.0 {
        m = m.map_with_noise(noise, &mut rng);
    }
    Ok(m)
}

/// Noiseless toy pattern: supports {0}, {1}, {2,3} with column norms
/// 1.0, 0.8, 1.2.
pub fn toy43_ground_truth() -> DenseMatrix {
    let s = 1.2 / 2.0f64.sqrt();
    DenseMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.8, 0.0],
        vec![0.0, 0.0, s],
        vec![0.0, 0.0, s],
    ])
    .expect("fixed pattern")
}

fn toy43(rows: usize, cols: usize, noise: f64, seed: u64) -> Result<DenseMatrix> {
    if (rows, cols) != (4, 3) {
        return Err(Error::Dimension(format!(
            "toy43 is a fixed 4x3 instance, got {rows}x{cols}"
        )));
    }
    let mut rng = portable_rng(seed);
    let mut m = toy43_ground_truth();
    if noise > 0.0 {
        m = m.map_with_noise(noise, &mut rng);
    }
    Ok(m)
}

impl DenseMatrix {
    fn map_with_noise(&self, noise: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows(), self.cols(), |i, j| {
            self.get(i, j) + noise * standard_normal(rng)
        })
    }
}
