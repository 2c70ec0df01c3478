//! Applications built on the estimator: order statistics, outlier flags and the
//! trimmed mean.
//!
//! Every decision here is node-local: node `n` only compares its own datum with
//! its own converged state(s).

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::metrics::{max_abs_error, RunSetup};
use crate::noise::NoiseModel;
use crate::quantile::{
    quantile_oracle, validate_target, MeasurementSet, DEFAULT_EPSILON, GRID_TOLERANCE,
};
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionKind {
    Median,
    Minimum,
    Maximum,
    KthSmallest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionQuery {
    pub kind: SelectionKind,
    pub epsilon: f64,
}

impl SelectionQuery {
    pub fn new(kind: SelectionKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// 1-based rank of the order statistic this query selects.
    pub fn rank(&self, node_count: usize) -> Result<usize> {
        let k = match self.kind {
            SelectionKind::Minimum => 1,
            SelectionKind::Maximum => node_count,
            // x_(N/2) for even N, x_(⌈N/2⌉) for odd N
            SelectionKind::Median => node_count.div_ceil(2),
            SelectionKind::KthSmallest(k) => k,
        };
        if k == 0 || k > node_count {
            return Err(Error::Domain(format!("k = {k} outside [1, {node_count}]")));
        }
        Ok(k)
    }
}

/// p = (k − ε)/N for the rank selected by `query`.
pub fn selection_to_p(query: &SelectionQuery, node_count: usize) -> Result<f64> {
    if !(query.epsilon > 0.0 && query.epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon = {} must lie in (0, 1)",
            query.epsilon
        )));
    }
    let k = query.rank(node_count)?;
    Ok((k as f64 - query.epsilon) / node_count as f64)
}

/// Smallest k with k/N ≥ p, tolerating p that sits a rounding error above k/N.
pub fn rank_for_level(p: f64, node_count: usize) -> usize {
    let scaled = p * node_count as f64;
    let k = if (scaled - scaled.round()).abs() <= GRID_TOLERANCE * node_count as f64 {
        scaled.round()
    } else {
        scaled.ceil()
    };
    (k as usize).clamp(1, node_count)
}

/// Shared configuration of the estimator runs an application launches.
#[derive(Debug, Clone, Copy)]
pub struct AppContext<'a> {
    pub network: &'a Network,
    pub data: &'a MeasurementSet,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub budget: u64,
    pub seed: u64,
}

impl<'a> AppContext<'a> {
    /// Final states of one estimator run at level `p`; `stream` separates the
    /// noise of different runs launched by the same application.
    fn converge(&self, p: f64, stream: u64) -> Result<Vec<f64>> {
        let setup = RunSetup {
            network: self.network,
            data: self.data,
            p,
            schedule: self.schedule,
            noise: self.noise,
        };
        let mut run = setup.start(self.seed, stream)?;
        run.run_to(self.budget);
        Ok(run.into_omega())
    }

    /// Final states of the run targeting the k-th smallest value.
    fn converge_rank(&self, k: usize, epsilon: f64, stream: u64) -> Result<Vec<f64>> {
        let n = self.data.len();
        self.converge((k as f64 - epsilon) / n as f64, stream)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub p: f64,
    pub omega: Vec<f64>,
    pub theta_oracle: f64,
    pub max_abs_error: f64,
}

pub fn estimate_selection(query: &SelectionQuery, ctx: &AppContext<'_>) -> Result<SelectionResult> {
    let p = selection_to_p(query, ctx.data.len())?;
    let omega = ctx.converge(p, 0)?;
    let theta_oracle = quantile_oracle(p, ctx.data)?;
    Ok(SelectionResult {
        p,
        max_abs_error: max_abs_error(&omega, theta_oracle),
        omega,
        theta_oracle,
    })
}

/// Both middle order statistics of an even-sized set, plus their per-node midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianPair {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub midpoint: Vec<f64>,
}

/// Estimates x_(N/2) and x_(N/2+1). For odd N both runs target x_(⌈N/2⌉).
pub fn estimate_median_pair(epsilon: f64, ctx: &AppContext<'_>) -> Result<MedianPair> {
    let n = ctx.data.len();
    let lo_rank = SelectionQuery {
        kind: SelectionKind::Median,
        epsilon,
    }
    .rank(n)?;
    let hi_rank = if n.is_multiple_of(2) {
        lo_rank + 1
    } else {
        lo_rank
    };
    let lower = ctx.converge_rank(lo_rank, epsilon, 0)?;
    let upper = ctx.converge_rank(hi_rank, epsilon, 1)?;
    let midpoint = lower
        .iter()
        .zip(&upper)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(MedianPair {
        lower,
        upper,
        midpoint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub flags: Vec<bool>,
    /// Each node's own cutoff, the midpoint of its states for the two order
    /// statistics bracketing θ_p on the outlier side.
    pub cutoff_estimate: Vec<f64>,
    pub threshold_p: f64,
    pub tail: Tail,
}

impl OutlierReport {
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&n| self.flags[n]).collect()
    }
}

/// Flags nodes whose datum lies above (upper tail) or below (lower tail) θ_p.
///
/// The node holding θ_p itself converges onto its own datum, so a single run
/// cannot decide it. Two runs bracket the gap instead: for the upper tail the
/// states for x_(k) and x_(k+1) (k = ⌈pN⌉) are averaged, placing every node's
/// cutoff between two data values.
pub fn flag_outliers(threshold_p: f64, tail: Tail, ctx: &AppContext<'_>) -> Result<OutlierReport> {
    let n = ctx.data.len();
    validate_target(threshold_p, n)?;
    let k = rank_for_level(threshold_p, n);
    let eps = DEFAULT_EPSILON;
    let bracket = match tail {
        Tail::Upper => (k < n).then_some((k, k + 1)),
        Tail::Lower => (k > 1).then_some((k - 1, k)),
    };
    let cutoff_estimate = match bracket {
        Some((lo, hi)) => {
            let a = ctx.converge_rank(lo, eps, 0)?;
            let b = ctx.converge_rank(hi, eps, 1)?;
            a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect()
        }
        // nothing lies beyond the extreme order statistic
        None => vec![
            match tail {
                Tail::Upper => f64::INFINITY,
                Tail::Lower => f64::NEG_INFINITY,
            };
            n
        ],
    };
    let flags = ctx
        .data
        .values()
        .iter()
        .zip(&cutoff_estimate)
        .map(|(&x, &c)| match tail {
            Tail::Upper => x > c,
            Tail::Lower => x < c,
        })
        .collect();
    Ok(OutlierReport {
        flags,
        cutoff_estimate,
        threshold_p,
        tail,
    })
}

/// Keep data between the a-th and b-th percentiles, 0 < a < b < 100.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimSpec {
    pub lower_percent: f64,
    pub upper_percent: f64,
}

impl TrimSpec {
    pub fn new(lower_percent: f64, upper_percent: f64) -> Result<Self> {
        let ok = lower_percent > 0.0 && upper_percent < 100.0 && lower_percent < upper_percent;
        if !ok {
            return Err(Error::Domain(format!(
                "trim band {lower_percent}%..{upper_percent}% must satisfy 0 < a < b < 100"
            )));
        }
        Ok(Self {
            lower_percent,
            upper_percent,
        })
    }

    /// Ranks (k_a, k_b) of θ_{a/100} and θ_{b/100}.
    pub fn ranks(&self, node_count: usize) -> (usize, usize) {
        (
            rank_for_level(self.lower_percent / 100.0, node_count),
            rank_for_level(self.upper_percent / 100.0, node_count),
        )
    }
}

/// Constant-step average consensus ω ← (I − εL)ω run on several vectors at once.
pub fn average_consensus(network: &Network, vectors: &mut [Vec<f64>], step: f64, iterations: u64) {
    for _ in 0..iterations {
        for v in vectors.iter_mut() {
            let lv = network.laplacian_apply(v);
            for (x, d) in v.iter_mut().zip(lv) {
                *x -= step * d;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedMeanResult {
    /// Per-node readout numerator/denominator.
    pub estimates: Vec<f64>,
    pub mask: Vec<bool>,
    pub lower_cutoff: Vec<f64>,
    pub upper_cutoff: Vec<f64>,
}

/// Mean of the data inside [θ_{a/100}, θ_{b/100}], computed fully distributed.
///
/// Cutoffs come from estimator runs bracketing each boundary order statistic,
/// then every node masks itself and a ratio consensus over the whole graph
/// (masked values over mask counts) spreads the band average. Out-of-band nodes
/// keep relaying, so the band never has to be connected on its own.
pub fn trimmed_mean(
    trim: &TrimSpec,
    consensus_budget: u64,
    ctx: &AppContext<'_>,
) -> Result<TrimmedMeanResult> {
    let net = ctx.network;
    let n = ctx.data.len();
    if net.node_count() != n {
        return Err(Error::Dimension {
            expected: net.node_count(),
            got: n,
        });
    }
    let (ka, kb) = trim.ranks(n);
    let eps = DEFAULT_EPSILON;
    let midpoint = |lo: usize, hi: usize, stream: u64| -> Result<Vec<f64>> {
        let a = ctx.converge_rank(lo, eps, stream)?;
        let b = ctx.converge_rank(hi, eps, stream + 1)?;
        Ok(a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect())
    };
    let lower_cutoff = if ka > 1 {
        midpoint(ka - 1, ka, 0)?
    } else {
        vec![f64::NEG_INFINITY; n]
    };
    let upper_cutoff = if kb < n {
        midpoint(kb, kb + 1, 2)?
    } else {
        vec![f64::INFINITY; n]
    };

    let x = ctx.data.values();
    let mask: Vec<bool> = (0..n)
        .map(|i| lower_cutoff[i] < x[i] && x[i] < upper_cutoff[i])
        .collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::DegenerateTrim {
            lower: trim.lower_percent,
            upper: trim.upper_percent,
        });
    }

    let numerator: Vec<f64> = (0..n).map(|i| if mask[i] { x[i] } else { 0.0 }).collect();
    let denominator: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let mut vectors = vec![numerator, denominator];
    let step = 0.5 / net.max_degree().max(1) as f64;
    average_consensus(net, &mut vectors, step, consensus_budget);

    let mut estimates = Vec::with_capacity(n);
    for (i, (num, &den)) in vectors[0].iter().zip(&vectors[1]).enumerate() {
        if den < 1e-9 {
            return Err(Error::NotConverged(den, i));
        }
        estimates.push(num / den);
    }
    Ok(TrimmedMeanResult {
        estimates,
        mask,
        lower_cutoff,
        upper_cutoff,
    })
}
