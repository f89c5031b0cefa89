//! Discrete maximum-deceleration distributions and reproducible sampling.
//!
//! Vehicle braking capability is modeled as an i.i.d. draw from a discrete
//! distribution over an ascending support. Sampling goes through a
//! counter-keyed generator so that every matrix entry is a pure function
//! of `(seed, iteration, vehicle)` and campaigns stay bit-reproducible
//! under any parallel schedule.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("support must contain at least one value")]
    EmptySupport,
    #[error("support and probability lists differ in length: {values} vs {probs}")]
    LengthMismatch { values: usize, probs: usize },
    #[error("support must be strictly increasing at index {index}")]
    NonAscendingSupport { index: usize },
    #[error("probability at index {index} is negative ({value})")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities must sum to 1 within 1e-12, got {sum}")]
    ProbSumNotOne { sum: f64 },
    #[error("value at index {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("uniform variate must lie in [0, 1), got {0}")]
    UniformOutOfRange(f64),
}

/// Discrete pmf over maximum decelerations (m/s^2, magnitudes).
///
/// The support is strictly increasing with the first entry the weakest
/// and the last the strongest capability; probabilities sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DecelDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl DecelDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistError> {
        if values.is_empty() {
            return Err(DistError::EmptySupport);
        }
        if values.len() != probs.len() {
            return Err(DistError::LengthMismatch {
                values: values.len(),
                probs: probs.len(),
            });
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DistError::NonFiniteValue { index });
            }
            if index > 0 && values[index - 1] >= *v {
                return Err(DistError::NonAscendingSupport { index });
            }
        }
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(DistError::NegativeProbability { index, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DistError::ProbSumNotOne { sum });
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self { values, probs, cdf })
    }

    /// Equal-probability pmf over the given support.
    pub fn uniform(values: Vec<f64>) -> Result<Self, DistError> {
        let m = values.len().max(1);
        let p = 1.0 / m as f64;
        Self::new(values, vec![p; m])
    }

    /// Symmetric unimodal pmf peaked mid-support, with binomial weights
    /// `C(m-1, j) / 2^(m-1)`. A synthetic placeholder for situations where
    /// a measured capability distribution is not available.
    pub fn bell(values: Vec<f64>) -> Result<Self, DistError> {
        let m = values.len();
        if m == 0 {
            return Err(DistError::EmptySupport);
        }
        let mut probs = Vec::with_capacity(m);
        let mut c = 1.0;
        let scale = 0.5f64.powi(m as i32 - 1);
        for j in 0..m {
            probs.push(c * scale);
            c = c * (m - 1 - j) as f64 / (j + 1) as f64;
        }
        Self::new(values, probs)
    }

    /// Mildly peaked symmetric pmf with integer weights
    /// `2m + 3 + 2*min(j, m-1-j)` (center-to-edge ratio 1.4 for m = 11).
    /// Shipped as a stand-in default where a measured capability
    /// distribution is unavailable; not derived from data.
    pub fn standin_bell(values: Vec<f64>) -> Result<Self, DistError> {
        let m = values.len();
        if m == 0 {
            return Err(DistError::EmptySupport);
        }
        let weights: Vec<f64> = (0..m)
            .map(|j| (2 * m + 3 + 2 * j.min(m - 1 - j)) as f64)
            .collect();
        let total: f64 = weights.iter().sum();
        Self::new(values, weights.iter().map(|w| w / total).collect())
    }

    /// Evenly spaced support from `lower` to `upper` with `m` points.
    pub fn arithmetic_support(lower: f64, upper: f64, m: usize) -> Vec<f64> {
        if m == 1 {
            return vec![lower];
        }
        let step = (upper - lower) / (m - 1) as f64;
        (0..m).map(|j| lower + step * j as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn lower(&self) -> f64 {
        self.values[0]
    }

    pub fn upper(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Maps a uniform variate to the support: the first value whose
    /// cumulative probability exceeds `u`. Monotone non-decreasing in `u`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64, DistError> {
        if !(0.0..1.0).contains(&u) {
            return Err(DistError::UniformOutOfRange(u));
        }
        for (j, &c) in self.cdf.iter().enumerate() {
            if c > u {
                return Ok(self.values[j]);
            }
        }
        // Cumulative rounding can leave the last entry a hair below 1.
        Ok(*self.values.last().unwrap())
    }
}

/// SplitMix64 finalizer; a bijective 64-bit mix.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Derives an independent stream seed for substream `index` of `master`.
pub fn derive_stream_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Uniform variate in [0, 1) keyed by `(seed, row, col)` only.
pub fn cell_uniform(seed: u64, row: u64, col: u64) -> f64 {
    let z = mix64(
        mix64(mix64(seed.wrapping_add(GOLDEN)) ^ row.wrapping_mul(GOLDEN)) ^ col.wrapping_mul(GOLDEN),
    );
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pre-drawn capability matrix: one row per iteration, one column per
/// follower. Every entry is a member of the source distribution's support.
#[derive(Debug, Clone)]
pub struct DecelMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    pub seed: u64,
}

impl DecelMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Draws the `n x cols` capability matrix. Entry `(i, l)` is
/// `inverse_cdf(U(seed, i, l))`, so the result is independent of
/// evaluation order and thread count.
pub fn generate_matrix(dist: &DecelDistribution, n: usize, cols: usize, seed: u64) -> DecelMatrix {
    assert!(n >= 1 && cols >= 1, "matrix must have at least one cell");
    let mut data = Vec::with_capacity(n * cols);
    for i in 0..n {
        for l in 0..cols {
            let u = cell_uniform(seed, i as u64, l as u64);
            // Safe: cell_uniform is always in [0, 1).
            data.push(dist.inverse_cdf(u).unwrap());
        }
    }
    DecelMatrix {
        data,
        rows: n,
        cols,
        seed,
    }
}

/// Probability that a chain of i.i.d. draws avoids collision without
/// coordination.
#[derive(Debug, Clone, Copy)]
pub struct ChainAvoidance {
    /// Exact probability that `chain_length + 1` i.i.d. draws come out
    /// strictly increasing: the elementary symmetric sum over ordered
    /// support subsets.
    pub exact: f64,
    /// Probability of the one specific assignment that walks the support
    /// in order: the product of the first `chain_length + 1` pmf entries
    /// (zero when the chain outruns the support).
    pub ordered_product: f64,
}

/// Exact no-coordination avoidance probability for a platoon whose
/// leader-plus-followers chain makes `chain_length + 1` draws.
///
/// A strictly increasing chain of `k` draws uses `k` distinct support
/// values, so the exact probability is the degree-`k` elementary
/// symmetric polynomial of the pmf; it is zero by pigeonhole when
/// `k` exceeds the support size.
pub fn no_coord_avoidance_prob(dist: &DecelDistribution, chain_length: usize) -> ChainAvoidance {
    let k = chain_length + 1;
    let m = dist.len();
    let exact = if k > m {
        0.0
    } else {
        let mut e = vec![0.0f64; k + 1];
        e[0] = 1.0;
        for &p in dist.probs() {
            for j in (1..=k).rev() {
                e[j] += p * e[j - 1];
            }
        }
        e[k]
    };
    let ordered_product = if k > m {
        0.0
    } else {
        dist.probs()[..k].iter().product()
    };
    ChainAvoidance {
        exact,
        ordered_product,
    }
}
