//! Orchestrates runs and writes `trace.csv`, `states_final.csv` and `summary.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dquant_core::apps::{
    flag_outliers, rank_for_level, trimmed_mean, AppContext, SelectionKind, Tail,
};
use dquant_core::metrics::max_abs_error;
use dquant_core::{
    network_average, quantile_oracle, run_ensemble, run_single, ConvergenceTrace, EnsembleSpec,
    RunSetup,
};

use crate::config::ResolvedExperiment;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Select,
    Trim,
    Outliers,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Select => "select",
            Self::Trim => "trim",
            Self::Outliers => "outliers",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub command: Command,
    pub theta_oracle: f64,
    pub final_max_abs_error: f64,
    pub final_bias: f64,
    pub iterations: u64,
    pub wall_time: Duration,
    pub config_digest: String,
    /// Command-specific `key=value` lines appended to the summary.
    pub extra: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// `key=value` lines; `wall_time_ms` is the only non-deterministic field and comes last.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command.name());
        let _ = writeln!(s, "theta_oracle={}", num(self.theta_oracle));
        let _ = writeln!(s, "final_max_abs_error={}", num(self.final_max_abs_error));
        let _ = writeln!(s, "final_bias={}", num(self.final_bias));
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "config_digest={}", self.config_digest);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "wall_time_ms={}", self.wall_time.as_millis());
        s
    }
}

/// Creates `dir` and proves it writable before any computation starts.
pub fn prepare_output(dir: &Path) -> Result<()> {
    let fail = |source| CliError::OutputDir {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".dquant-write-probe");
    fs::write(&probe, b"").map_err(fail)?;
    fs::remove_file(&probe).map_err(fail)?;
    Ok(())
}

/// Shortest round-trip form, switching to exponent notation for very small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn trace_csv(trace: &ConvergenceTrace) -> String {
    let mut s = String::from("iteration,metric\n");
    for (i, v) in trace.iterations.iter().zip(&trace.values) {
        let _ = writeln!(s, "{i},{}", num(*v));
    }
    s
}

fn states_csv(x: &[f64], omega: &[f64]) -> String {
    let mut s = String::from("node,x,omega_final\n");
    for (n, (x, w)) in x.iter().zip(omega).enumerate() {
        let _ = writeln!(s, "{n},{},{}", num(*x), num(*w));
    }
    s
}

struct Artifacts {
    files: Vec<(String, String)>,
}

/// Writes every artifact, removing the ones already written if any write fails.
fn write_all(dir: &Path, prefix: &str, artifacts: Artifacts) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, body) in artifacts.files {
        let path = dir.join(format!("{prefix}{name}"));
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::io(format!("writing {}", path.display()), e));
        }
        written.push(path);
    }
    Ok(written)
}

fn require_p(exp: &ResolvedExperiment, command: Command) -> Result<f64> {
    exp.p.ok_or_else(|| {
        CliError::Invalid(vec![format!(
            "`{}` needs [target] p or selection",
            command.name()
        )])
    })
}

fn setup(exp: &ResolvedExperiment, p: f64) -> RunSetup<'_> {
    RunSetup {
        network: &exp.network,
        data: &exp.data,
        p,
        schedule: exp.schedule,
        noise: exp.config.noise,
    }
}

fn app_context(exp: &ResolvedExperiment) -> AppContext<'_> {
    AppContext {
        network: &exp.network,
        data: &exp.data,
        schedule: exp.schedule,
        noise: exp.config.noise,
        budget: exp.config.run.iterations,
        seed: exp.config.run.master_seed,
    }
}

struct Outcome {
    theta_oracle: f64,
    final_max_abs_error: f64,
    final_bias: f64,
    extra: Vec<(String, String)>,
    artifacts: Artifacts,
}

/// Runs `command` for an already resolved experiment and writes its artifacts.
pub fn run_experiment(exp: &ResolvedExperiment, command: Command) -> Result<RunSummary> {
    let out = &exp.config.output;
    prepare_output(&out.dir)?;
    let started = Instant::now();
    let outcome = match command {
        Command::Run | Command::Select => estimate(exp, command)?,
        Command::Trim => trim(exp)?,
        Command::Outliers => outliers(exp)?,
    };
    let mut summary = RunSummary {
        command,
        theta_oracle: outcome.theta_oracle,
        final_max_abs_error: outcome.final_max_abs_error,
        final_bias: outcome.final_bias,
        iterations: exp.config.run.iterations,
        wall_time: started.elapsed(),
        config_digest: exp.digest(command.name()),
        extra: outcome.extra,
        files: Vec::new(),
    };
    let mut artifacts = outcome.artifacts;
    artifacts
        .files
        .push(("summary.txt".into(), summary.to_text()));
    summary.files = write_all(&out.dir, &out.prefix, artifacts)?;
    Ok(summary)
}

fn estimate(exp: &ResolvedExperiment, command: Command) -> Result<Outcome> {
    let selection = exp.config.target.selection;
    if command == Command::Select && selection.is_none() {
        return Err(CliError::Invalid(vec![
            "`select` needs [target] selection".into()
        ]));
    }
    let p = require_p(exp, command)?;
    let run = &exp.config.run;
    let s = setup(exp, p);

    let (trace, mut omega, final_bias) = if run.realizations == 1 {
        let (trace, omega) = run_single(&s, run.master_seed, run.iterations, run.record)?;
        let bias = (network_average(&omega) - trace.theta).abs();
        (trace, omega, bias)
    } else {
        let spec = EnsembleSpec {
            realizations: run.realizations,
            master_seed: run.master_seed,
            workers: run.workers,
        };
        let report = run_ensemble(&s, &spec, run.iterations, run.record)?;
        let omega = report.final_states[0].clone();
        (report.trace, omega, report.final_bias)
    };
    let mut theta_oracle = quantile_oracle(p, &exp.data)?;
    let mut extra = vec![
        ("p".to_string(), p.to_string()),
        ("realizations".to_string(), run.realizations.to_string()),
        ("metric".to_string(), format!("{:?}", trace.metric_kind)),
    ];

    let n = exp.data.len();
    let midpoint = exp.config.target.median_midpoint
        && n.is_multiple_of(2)
        && selection.is_some_and(|q| q.kind == SelectionKind::Median);
    if midpoint {
        let eps = selection.map_or(0.5, |q| q.epsilon);
        let p_hi = ((n / 2 + 1) as f64 - eps) / n as f64;
        let mut upper = setup(exp, p_hi).start(run.master_seed, run.realizations as u64)?;
        upper.run_to(run.iterations);
        omega = omega
            .iter()
            .zip(upper.omega())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        theta_oracle = 0.5 * (theta_oracle + quantile_oracle(p_hi, &exp.data)?);
        extra.push(("median".into(), "midpoint".into()));
    }

    Ok(Outcome {
        theta_oracle,
        final_max_abs_error: max_abs_error(&omega, theta_oracle),
        final_bias,
        extra,
        artifacts: Artifacts {
            files: vec![
                ("trace.csv".into(), trace_csv(&trace)),
                (
                    "states_final.csv".into(),
                    states_csv(exp.data.values(), &omega),
                ),
            ],
        },
    })
}

/// Mean of the values in [θ_{a/100}, θ_{b/100}], computed centrally.
pub fn centralized_trimmed_mean(
    values: &[f64],
    lower_percent: f64,
    upper_percent: f64,
) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let lo = sorted[rank_for_level(lower_percent / 100.0, n) - 1];
    let hi = sorted[rank_for_level(upper_percent / 100.0, n) - 1];
    let band: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&x| lo <= x && x <= hi)
        .collect();
    (!band.is_empty()).then(|| band.iter().sum::<f64>() / band.len() as f64)
}

fn trim(exp: &ResolvedExperiment) -> Result<Outcome> {
    let spec = exp.config.target.trim.ok_or_else(|| {
        CliError::Invalid(vec![
            "`trim` needs [target] trim_lower and trim_upper".into()
        ])
    })?;
    let result = trimmed_mean(
        &spec,
        exp.config.run.consensus_iterations,
        &app_context(exp),
    )?;
    let x = exp.data.values();
    let oracle =
        centralized_trimmed_mean(x, spec.lower_percent, spec.upper_percent).unwrap_or(f64::NAN);
    let mean_estimate = network_average(&result.estimates);

    let mut csv = String::from("node,x,in_band,lower_cutoff,upper_cutoff,estimate\n");
    for (n, &v) in x.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{n},{},{},{},{},{}",
            num(v),
            u8::from(result.mask[n]),
            num(result.lower_cutoff[n]),
            num(result.upper_cutoff[n]),
            num(result.estimates[n])
        );
    }
    Ok(Outcome {
        theta_oracle: oracle,
        final_max_abs_error: max_abs_error(&result.estimates, oracle),
        final_bias: (mean_estimate - oracle).abs(),
        extra: vec![
            ("trim_lower".into(), spec.lower_percent.to_string()),
            ("trim_upper".into(), spec.upper_percent.to_string()),
            (
                "in_band".into(),
                result.mask.iter().filter(|&&m| m).count().to_string(),
            ),
            (
                "consensus_iterations".into(),
                exp.config.run.consensus_iterations.to_string(),
            ),
        ],
        artifacts: Artifacts {
            files: vec![("trim.csv".into(), csv)],
        },
    })
}

fn outliers(exp: &ResolvedExperiment) -> Result<Outcome> {
    let p = require_p(exp, Command::Outliers)?;
    let tail = exp.config.target.tail.unwrap_or(Tail::Upper);
    let report = flag_outliers(p, tail, &app_context(exp))?;
    let theta = quantile_oracle(p, &exp.data)?;
    let x = exp.data.values();
    let centralized: Vec<bool> = x
        .iter()
        .map(|&v| match tail {
            Tail::Upper => v > theta,
            Tail::Lower => v < theta,
        })
        .collect();

    let mut csv = String::from("node,x,cutoff,flag\n");
    for (n, &v) in x.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{n},{},{},{}",
            num(v),
            num(report.cutoff_estimate[n]),
            u8::from(report.flags[n])
        );
    }
    let finite: Vec<f64> = report
        .cutoff_estimate
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .collect();
    Ok(Outcome {
        theta_oracle: theta,
        final_max_abs_error: max_abs_error(&finite, theta),
        final_bias: if finite.is_empty() {
            0.0
        } else {
            (network_average(&finite) - theta).abs()
        },
        extra: vec![
            ("p".into(), p.to_string()),
            (
                "tail".into(),
                match tail {
                    Tail::Upper => "upper",
                    Tail::Lower => "lower",
                }
                .into(),
            ),
            ("flagged".into(), report.flagged().len().to_string()),
            (
                "matches_centralized".into(),
                (report.flags == centralized).to_string(),
            ),
        ],
        artifacts: Artifacts {
            files: vec![("outliers.csv".into(), csv)],
        },
    })
}
