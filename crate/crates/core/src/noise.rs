//! Multiplicative Gaussian device noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative standard deviation of each cell's output current.
    pub cell_variance: f64,
    /// Relative standard deviation of each TIA transfer.
    pub tia_variance: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::ideal()
    }
}

impl NoiseSpec {
    pub fn ideal() -> Self {
        NoiseSpec {
            cell_variance: 0.0,
            tia_variance: 0.0,
            seed: 0,
        }
    }

    pub fn new(cell_variance: f64, tia_variance: f64, seed: u64) -> Result<Self> {
        let spec = NoiseSpec {
            cell_variance,
            tia_variance,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_variance >= 0.0 && self.tia_variance >= 0.0) {
            return Err(Error::Parameter("noise variances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.cell_variance == 0.0 && self.tia_variance == 0.0
    }
}

/// Owns the random stream for one noisy evaluation context.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    pub spec: NoiseSpec,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(spec: NoiseSpec) -> Self {
        NoiseSource {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        }
    }

    pub fn reseed(&mut self, seed: u64) {
        self.spec.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// A `N(1, sigma^2)` factor.
    pub fn factor(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            1.0
        } else {
            1.0 + sigma * self.standard_normal()
        }
    }

    /// Sum of `count` unit cell currents, each scaled by its own
    /// `N(1, cell_variance^2)` factor. The sum of independent Gaussians is
    /// drawn in one step.
    pub fn cell_sum(&mut self, count: u32) -> f64 {
        let sigma = self.spec.cell_variance;
        if sigma == 0.0 || count == 0 {
            count as f64
        } else {
            count as f64 + sigma * (count as f64).sqrt() * self.standard_normal()
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}
