use std::path::PathBuf;

use dquant_core::{realization_rng, MeasurementSet};
use rand_distr::{Distribution, LogNormal};

use crate::error::{CliError, Result};

/// Where node measurements come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// {0, 1/N, …, (N−1)/N}
    UniformGrid,
    /// exp of N(μ, σ²_ln) draws.
    LogNormal {
        mu: f64,
        variance: f64,
        seed: Option<u64>,
    },
    /// One value per line, `#` comments allowed.
    File { path: PathBuf },
}

/// Builds the measurement set for `node_count` nodes. `default_seed` seeds random
/// data when the spec carries no seed of its own.
pub fn generate_data(
    spec: &DataSpec,
    node_count: usize,
    default_seed: u64,
) -> Result<MeasurementSet> {
    let values = match spec {
        DataSpec::UniformGrid => return Ok(MeasurementSet::uniform_grid(node_count)?),
        DataSpec::LogNormal { mu, variance, seed } => {
            let dist = LogNormal::new(*mu, variance.sqrt()).map_err(|e| {
                CliError::Invalid(vec![format!("lognormal({mu}, {variance}): {e}")])
            })?;
            // a stream id no ensemble realization uses
            let mut rng = realization_rng(seed.unwrap_or(default_seed), u64::MAX);
            (0..node_count).map(|_| dist.sample(&mut rng)).collect()
        }
        DataSpec::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            parse_values(&text, &path.display().to_string())?
        }
    };
    Ok(MeasurementSet::new(values)?)
}

fn parse_values(text: &str, origin: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| CliError::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message: format!("bad measurement {line:?}: {e}"),
        })?;
        values.push(v);
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let d = generate_data(&DataSpec::UniformGrid, 4, 0).unwrap();
        assert_eq!(d.values(), &[0.0, 0.25, 0.5, 0.75]);
        let d = generate_data(&DataSpec::UniformGrid, 50, 0).unwrap();
        assert_eq!(d.sorted()[49], 0.98);
    }

    #[test]
    fn lognormal_median_near_one() {
        let spec = DataSpec::LogNormal {
            mu: 0.0,
            variance: 0.25,
            seed: Some(5),
        };
        let d = generate_data(&spec, 100_000, 0).unwrap();
        let median = d.sorted()[50_000];
        assert!((median - 1.0).abs() < 0.02, "median {median}");
        assert!(d.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn lognormal_is_seeded() {
        let spec = DataSpec::LogNormal {
            mu: 0.0,
            variance: 0.25,
            seed: None,
        };
        let a = generate_data(&spec, 10, 1).unwrap();
        assert_eq!(a, generate_data(&spec, 10, 1).unwrap());
        assert_ne!(a, generate_data(&spec, 10, 2).unwrap());
    }

    #[test]
    fn value_file_parsing() {
        assert_eq!(
            parse_values("1.5\n# c\n\n-2 # tail\n", "f").unwrap(),
            vec![1.5, -2.0]
        );
        let err = parse_values("1\nx\n", "f").unwrap_err();
        assert!(err.to_string().starts_with("f:2:"));
    }
}
