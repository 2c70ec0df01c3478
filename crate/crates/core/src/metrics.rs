//! Convergence metrics and the seeded ensemble runner.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::EstimatorRun;
use crate::graph::Network;
use crate::noise::{realization_rng, NoiseModel};
use crate::quantile::{quantile_oracle, MeasurementSet};
use crate::schedule::StepSchedule;

/// (1/N)·‖ω − θ·1‖².
pub fn squared_error(omega: &[f64], theta: f64) -> f64 {
    omega.iter().map(|w| (w - theta) * (w - theta)).sum::<f64>() / omega.len() as f64
}

/// (1/N)·1ᵀω.
pub fn network_average(omega: &[f64]) -> f64 {
    omega.iter().sum::<f64>() / omega.len() as f64
}

/// max_n |ω_n − θ|.
pub fn max_abs_error(omega: &[f64], theta: f64) -> f64 {
    omega.iter().map(|w| (w - theta).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    EnsembleMse,
    SquaredError,
}

/// Which iterations get recorded. Iteration 0 (the initial state) and the final
/// iteration are always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// round(10^(j / points_per_decade)) for j = 0, 1, …
    Log { points_per_decade: u32 },
    /// Every `n`-th iteration.
    Stride(u64),
}

impl Default for RecordMode {
    fn default() -> Self {
        Self::Log {
            points_per_decade: 10,
        }
    }
}

impl RecordMode {
    pub fn points(&self, max_iterations: u64) -> Result<Vec<u64>> {
        let mut pts = vec![0];
        match *self {
            Self::Log { points_per_decade } => {
                if points_per_decade == 0 {
                    return Err(Error::Domain("points_per_decade must be >= 1".into()));
                }
                let mut j = 0u32;
                loop {
                    let it = 10f64.powf(j as f64 / points_per_decade as f64).round() as u64;
                    if it > max_iterations {
                        break;
                    }
                    if it > *pts.last().unwrap() {
                        pts.push(it);
                    }
                    j += 1;
                }
            }
            Self::Stride(stride) => {
                if stride == 0 {
                    return Err(Error::Domain("record stride must be >= 1".into()));
                }
                pts.extend((1..=max_iterations / stride).map(|k| k * stride));
            }
        }
        if *pts.last().unwrap() != max_iterations {
            pts.push(max_iterations);
        }
        Ok(pts)
    }
}

/// A metric sampled at increasing iteration indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub iterations: Vec<u64>,
    pub values: Vec<f64>,
    pub metric_kind: MetricKind,
    pub theta: f64,
    pub record_mode: RecordMode,
}

impl ConvergenceTrace {
    /// Metric value recorded at iteration `i`, if any.
    pub fn at(&self, i: u64) -> Option<f64> {
        self.iterations
            .binary_search(&i)
            .ok()
            .map(|idx| self.values[idx])
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// Everything one trajectory needs apart from its random stream.
#[derive(Debug, Clone, Copy)]
pub struct RunSetup<'a> {
    pub network: &'a Network,
    pub data: &'a MeasurementSet,
    pub p: f64,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
}

impl<'a> RunSetup<'a> {
    pub fn theta(&self) -> Result<f64> {
        quantile_oracle(self.p, self.data)
    }

    /// Realization `index` of the ensemble seeded by `master_seed`.
    pub fn start(&self, master_seed: u64, index: u64) -> Result<EstimatorRun<'a>> {
        EstimatorRun::with_rng(
            self.network,
            self.data,
            self.p,
            self.schedule,
            self.noise,
            realization_rng(master_seed, index),
        )
    }
}

/// Runs `run` to `max_iterations`, returning the squared error at each record point.
pub fn trace_run(run: &mut EstimatorRun<'_>, theta: f64, points: &[u64]) -> Vec<f64> {
    let mut values = Vec::with_capacity(points.len());
    let mut next = 0;
    if points.first() == Some(&run.iteration()) {
        values.push(squared_error(run.omega(), theta));
        next = 1;
    }
    let last = points.last().copied().unwrap_or(0);
    let remaining = last.saturating_sub(run.iteration());
    run.run_observed(remaining, |i, w| {
        if next < points.len() && points[next] == i {
            values.push(squared_error(w, theta));
            next += 1;
        }
    });
    values
}

/// Squared-error trace of the single trajectory seeded by `seed`.
pub fn run_single(
    setup: &RunSetup<'_>,
    seed: u64,
    max_iterations: u64,
    record: RecordMode,
) -> Result<(ConvergenceTrace, Vec<f64>)> {
    let theta = setup.theta()?;
    let points = record.points(max_iterations)?;
    let mut run = setup.start(seed, 0)?;
    let values = trace_run(&mut run, theta, &points);
    Ok((
        ConvergenceTrace {
            iterations: points,
            values,
            metric_kind: MetricKind::SquaredError,
            theta,
            record_mode: record,
        },
        run.into_omega(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub realizations: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses the rayon default. Results do not depend on this.
    pub workers: usize,
}

impl EnsembleSpec {
    pub fn new(realizations: usize, master_seed: u64) -> Self {
        Self {
            realizations,
            master_seed,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub trace: ConvergenceTrace,
    /// |mean_r ω_avg^(r)(final) − θ|.
    pub final_bias: f64,
    /// mean_r ω_n^(r)(final) − θ for each node.
    pub per_node_bias: Vec<f64>,
    /// Final states, indexed by realization.
    pub final_states: Vec<Vec<f64>>,
}

/// Approximates (1/N)·E‖ω(i) − θ·1‖² by averaging independent seeded realizations.
pub fn run_ensemble(
    setup: &RunSetup<'_>,
    spec: &EnsembleSpec,
    max_iterations: u64,
    record: RecordMode,
) -> Result<EnsembleReport> {
    if spec.realizations == 0 {
        return Err(Error::Domain(
            "ensemble needs at least one realization".into(),
        ));
    }
    (spec.realizations as u64)
        .checked_mul(max_iterations)
        .ok_or(Error::BudgetOverflow {
            realizations: spec.realizations,
            iterations: max_iterations,
        })?;
    let theta = setup.theta()?;
    let points = record.points(max_iterations)?;

    let one = |r: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut run = setup.start(spec.master_seed, r as u64)?;
        let values = trace_run(&mut run, theta, &points);
        Ok((values, run.into_omega()))
    };
    let job = || -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        (0..spec.realizations).into_par_iter().map(one).collect()
    };
    let results = if spec.workers == 0 {
        job()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(job)?
    };

    // reduce in realization order so the sums are independent of scheduling
    let r = spec.realizations as f64;
    let n = setup.data.len();
    let mut mse = vec![0.0; points.len()];
    let mut node_mean = vec![0.0; n];
    let mut avg_mean = 0.0;
    for (values, omega) in &results {
        for (acc, v) in mse.iter_mut().zip(values) {
            *acc += v;
        }
        for (acc, w) in node_mean.iter_mut().zip(omega) {
            *acc += w;
        }
        avg_mean += network_average(omega);
    }
    mse.iter_mut().for_each(|v| *v /= r);
    let per_node_bias = node_mean.iter().map(|s| s / r - theta).collect();

    Ok(EnsembleReport {
        trace: ConvergenceTrace {
            iterations: points,
            values: mse,
            metric_kind: MetricKind::EnsembleMse,
            theta,
            record_mode: record,
        },
        final_bias: (avg_mean / r - theta).abs(),
        per_node_bias,
        final_states: results.into_iter().map(|(_, w)| w).collect(),
    })
}
