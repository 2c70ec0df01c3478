//! Additive link noise and seeded random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Network;

/// Deterministic stream for realization `index` of an ensemble seeded by `master_seed`.
///
/// Streams share the key and differ by ChaCha stream id, so they never overlap and
/// do not depend on the order in which realizations are executed.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Zero-mean noise added to every value received over a directed link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseModel {
    #[default]
    None,
    Gaussian {
        variance: f64,
    },
    /// Uniform on [−√(3σ²), √(3σ²)], which has variance σ².
    Uniform {
        variance: f64,
    },
}

impl NoiseModel {
    pub fn gaussian(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        Ok(Self::Gaussian { variance })
    }

    pub fn uniform(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        Ok(Self::Uniform { variance })
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Gaussian { variance } | Self::Uniform { variance } => variance,
        }
    }

    /// No randomness is consumed when this is true.
    pub fn is_silent(&self) -> bool {
        self.variance() == 0.0
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Gaussian { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                variance.sqrt() * z
            }
            Self::Uniform { variance } => {
                let half = (3.0 * variance).sqrt();
                rng.random_range(-half..=half)
            }
        }
    }

    /// One draw per directed link (n ← l), visiting n ascending then l ascending.
    pub fn sample_links<R: Rng + ?Sized>(&self, network: &Network, rng: &mut R) -> LinkNoise {
        let n = network.node_count();
        let mut values = vec![0.0; n * n];
        if !self.is_silent() {
            for node in 0..n {
                for &l in network.neighbors(node) {
                    values[node * n + l] = self.draw(rng);
                }
            }
        }
        LinkNoise {
            node_count: n,
            values,
        }
    }
}

fn check_variance(variance: f64) -> Result<()> {
    if variance.is_finite() && variance >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "noise variance {variance} must be finite and non-negative"
        )))
    }
}

/// Noise realizations for one iteration: `get(n, l)` perturbs ψ_l as received at n.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkNoise {
    node_count: usize,
    values: Vec<f64>,
}

impl LinkNoise {
    pub fn zeros(node_count: usize) -> Self {
        Self {
            node_count,
            values: vec![0.0; node_count * node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    #[inline]
    pub fn get(&self, n: usize, l: usize) -> f64 {
        self.values[n * self.node_count + l]
    }

    pub fn set(&mut self, n: usize, l: usize, value: f64) {
        self.values[n * self.node_count + l] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(model: NoiseModel, draws: usize) -> (f64, f64) {
        let mut rng = realization_rng(99, 0);
        let xs: Vec<f64> = (0..draws).map(|_| model.draw(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / draws as f64;
        (mean, var)
    }

    #[test]
    fn gaussian_moments() {
        let sigma2 = 0.09;
        let (mean, var) = moments(NoiseModel::gaussian(sigma2).unwrap(), 1_000_000);
        assert!(mean.abs() < 4.0 * sigma2.sqrt() / 1000.0, "mean {mean}");
        assert!((var - sigma2).abs() < 0.02 * sigma2, "var {var}");
    }

    #[test]
    fn uniform_moments() {
        let sigma2 = 0.01;
        let (mean, var) = moments(NoiseModel::uniform(sigma2).unwrap(), 1_000_000);
        assert!(mean.abs() < 4.0 * sigma2.sqrt() / 1000.0);
        assert!((var - sigma2).abs() < 0.02 * sigma2);
    }

    #[test]
    fn silent_model_consumes_nothing() {
        let g = Network::complete(4).unwrap();
        let mut a = realization_rng(1, 0);
        let b = a.clone();
        let noise = NoiseModel::None.sample_links(&g, &mut a);
        assert_eq!(noise, LinkNoise::zeros(4));
        assert_eq!(a, b);
    }

    #[test]
    fn directed_links_drawn_independently() {
        let g = Network::path(2).unwrap();
        let mut rng = realization_rng(5, 0);
        let noise = NoiseModel::gaussian(1.0)
            .unwrap()
            .sample_links(&g, &mut rng);
        assert_ne!(noise.get(0, 1), noise.get(1, 0));
        assert_eq!(noise.get(0, 0), 0.0);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let mut a = realization_rng(7, 0);
        let mut b = realization_rng(7, 1);
        let mut c = realization_rng(7, 0);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_eq!(x, z);
    }

    #[test]
    fn rejects_bad_variance() {
        assert!(NoiseModel::gaussian(-1.0).is_err());
        assert!(NoiseModel::gaussian(f64::INFINITY).is_err());
    }
}
