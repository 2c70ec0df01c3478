//! Measurement sets, the empirical CDF and the centralized quantile.

use crate::error::{Error, Result};

/// Tolerance for deciding that `p` sits on the 1/N grid of ECDF jumps.
pub const GRID_TOLERANCE: f64 = 1e-12;

/// Default ε in p = (k − ε)/N.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// One scalar measurement per node. Node `n` owns `values()[n]`; no ordering is imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    values: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: values.len(),
            });
        }
        if let Some(n) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(n));
        }
        Ok(Self { values })
    }

    /// {0, 1/N, …, (N−1)/N}.
    pub fn uniform_grid(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i as f64 / n as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.values.clone();
        s.sort_by(|a, b| a.total_cmp(b));
        s
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Step function u(d): 1 when d ≥ 0, else 0.
#[inline]
pub fn step_indicator(state: f64, datum: f64) -> f64 {
    if state >= datum {
        1.0
    } else {
        0.0
    }
}

/// F̂(ω) = |{n : x_n ≤ ω}| / N.
pub fn ecdf(omega: f64, data: &MeasurementSet) -> f64 {
    let count = data.values.iter().filter(|&&x| x <= omega).count();
    count as f64 / data.len() as f64
}

/// θ_p = inf{ω : F̂(ω) ≥ p}, i.e. the ⌈pN⌉-th smallest value.
pub fn quantile_oracle(p: f64, data: &MeasurementSet) -> Result<f64> {
    check_open_unit(p)?;
    let sorted = data.sorted();
    let n = sorted.len();
    // smallest k with k/N ≥ p; guard against pN landing a hair above an integer
    let mut k = (p * n as f64).ceil() as usize;
    while k > 1 && (k - 1) as f64 / n as f64 >= p {
        k -= 1;
    }
    while (k as f64) / (n as f64) < p {
        k += 1;
    }
    Ok(sorted[k.clamp(1, n) - 1])
}

fn check_open_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("p = {p} must lie in (0, 1)")))
    }
}

/// A validated quantile level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileTarget {
    pub p: f64,
    pub k: Option<usize>,
    pub epsilon: f64,
    /// Set when `p` is a multiple of 1/N: the estimate may land anywhere in [x_n, x_{n+1}).
    pub degenerate: bool,
}

impl QuantileTarget {
    /// Target for the k-th smallest element: p = (k − ε)/N.
    pub fn kth(k: usize, epsilon: f64, node_count: usize) -> Result<Self> {
        if k == 0 || k > node_count {
            return Err(Error::Domain(format!("k = {k} outside [1, {node_count}]")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!(
                "epsilon = {epsilon} must lie in (0, 1)"
            )));
        }
        let p = (k as f64 - epsilon) / node_count as f64;
        let mut t = validate_target(p, node_count)?;
        t.k = Some(k);
        t.epsilon = epsilon;
        Ok(t)
    }

    pub fn warning(&self, node_count: usize) -> Option<String> {
        self.degenerate.then(|| {
            let j = (self.p * node_count as f64).round() as usize;
            format!(
                "p = {} equals {j}/{node_count}: the estimate may land anywhere in [x_({j}), x_({}))",
                self.p,
                j + 1
            )
        })
    }
}

/// Accepts any p in (0, 1), flagging it as degenerate when it lies on the 1/N grid.
pub fn validate_target(p: f64, node_count: usize) -> Result<QuantileTarget> {
    check_open_unit(p)?;
    let scaled = p * node_count as f64;
    let degenerate = (scaled - scaled.round()).abs() <= GRID_TOLERANCE * node_count as f64;
    Ok(QuantileTarget {
        p,
        k: None,
        epsilon: DEFAULT_EPSILON,
        degenerate,
    })
}
