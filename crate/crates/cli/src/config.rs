//! Experiment configuration: a flat `key = value` format with `[section]` headers.
//!
//! ```text
//! [topology]
//! kind = random_geometric
//! nodes = 50
//! radius = 0.8
//!
//! [schedule]
//! eta0 = auto
//! ```
//!
//! `#` starts a comment. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dquant_core::apps::{SelectionKind, SelectionQuery, Tail, TrimSpec};
use dquant_core::quantile::DEFAULT_EPSILON;
use dquant_core::schedule::default_eta0;
use dquant_core::{
    selection_to_p, validate_target, MeasurementSet, Network, NoiseModel, RecordMode, StepSchedule,
};
use sha2::{Digest, Sha256};

use crate::data::{generate_data, DataSpec};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    RandomGeometric {
        nodes: usize,
        radius: f64,
        seed: Option<u64>,
    },
    ErdosRenyi {
        nodes: usize,
        probability: f64,
        seed: Option<u64>,
    },
    Complete {
        nodes: usize,
    },
    EdgeList {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta0 {
    /// 0.5 / d_max, fixed once the topology is known.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub alpha0: f64,
    pub tau1: f64,
    pub eta0: Eta0,
    pub tau2: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            tau1: 1.0,
            eta0: Eta0::Auto,
            tau2: 0.505,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetSpec {
    pub p: Option<f64>,
    pub selection: Option<SelectionQuery>,
    pub trim: Option<TrimSpec>,
    pub tail: Option<Tail>,
    /// Even-N median: report the midpoint of the two middle estimates.
    pub median_midpoint: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub iterations: u64,
    pub record: RecordMode,
    pub realizations: usize,
    pub master_seed: u64,
    /// 0 means one worker per available core. Never affects results.
    pub workers: usize,
    pub consensus_iterations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub data: DataSpec,
    pub target: TargetSpec,
    pub schedule: ScheduleSpec,
    pub noise: NoiseModel,
    pub run: RunSpec,
    pub output: OutputSpec,
}

/// A configuration with its network, data and schedule built and checked.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub network: Network,
    pub data: MeasurementSet,
    pub schedule: StepSchedule,
    /// Quantile level from `p` or `selection`, when either is set.
    pub p: Option<f64>,
    pub warnings: Vec<String>,
}

struct Entry {
    value: String,
    line: usize,
}

struct RawConfig {
    path: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "topology",
        &["kind", "nodes", "radius", "probability", "seed", "path"],
    ),
    ("data", &["kind", "mu", "variance", "seed", "path"]),
    (
        "target",
        &[
            "p",
            "selection",
            "k",
            "epsilon",
            "trim_lower",
            "trim_upper",
            "tail",
            "median",
        ],
    ),
    ("schedule", &["alpha0", "tau1", "eta0", "tau2"]),
    ("noise", &["kind", "variance"]),
    (
        "run",
        &[
            "iterations",
            "record",
            "points_per_decade",
            "stride",
            "realizations",
            "master_seed",
            "workers",
            "consensus_iterations",
        ],
    ),
    ("output", &["dir", "prefix"]),
];

fn parse_raw(text: &str, path: &str) -> Result<RawConfig> {
    let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
    let mut current: Option<String> = None;
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_string(),
        line,
        message,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("malformed section header {line:?}")))?
                .trim()
                .to_string();
            if !KNOWN.iter().any(|(s, _)| *s == name) {
                return Err(err(line_no, format!("unknown section [{name}]")));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_ref()
            .ok_or_else(|| err(line_no, format!("key {key:?} appears before any [section]")))?;
        let allowed = KNOWN.iter().find(|(s, _)| s == section).unwrap().1;
        if !allowed.contains(&key) {
            return Err(err(line_no, format!("unknown key {key:?} in [{section}]")));
        }
        let map = sections.get_mut(section).unwrap();
        if map.contains_key(key) {
            return Err(err(
                line_no,
                format!("duplicate key {key:?} in [{section}]"),
            ));
        }
        map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: line_no,
            },
        );
    }
    Ok(RawConfig {
        path: path.to_string(),
        sections,
    })
}

impl RawConfig {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|m| m.get(key))
    }

    fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key)
            .map(|e| e.value.as_str())
            .filter(|v| !v.is_empty())
    }

    fn get<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) if e.value.is_empty() => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| CliError::Parse {
                path: self.path.clone(),
                line: e.line,
                message: format!("[{section}] {key} = {:?}: {err}", e.value),
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| CliError::Parse {
            path: self.path.clone(),
            line: 0,
            message: format!("missing required key [{section}] {key}"),
        })
    }

    fn bad_value(&self, section: &str, key: &str, message: String) -> CliError {
        CliError::Parse {
            path: self.path.clone(),
            line: self.entry(section, key).map_or(0, |e| e.line),
            message: format!("[{section}] {key}: {message}"),
        }
    }
}

fn relative_to(base: Option<&Path>, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string(), path.parent())
    }

    /// Parses config text; relative paths inside resolve against `base_dir`.
    pub fn parse(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw = parse_raw(text, origin)?;

        let topology = match raw.str("topology", "kind").unwrap_or("random_geometric") {
            "random_geometric" => TopologySpec::RandomGeometric {
                nodes: raw.require("topology", "nodes")?,
                radius: raw.require("topology", "radius")?,
                seed: raw.get("topology", "seed")?,
            },
            "erdos_renyi" => TopologySpec::ErdosRenyi {
                nodes: raw.require("topology", "nodes")?,
                probability: raw.require("topology", "probability")?,
                seed: raw.get("topology", "seed")?,
            },
            "complete" => TopologySpec::Complete {
                nodes: raw.require("topology", "nodes")?,
            },
            "edge_list" => TopologySpec::EdgeList {
                path: relative_to(base_dir, &raw.require::<String>("topology", "path")?),
            },
            other => {
                return Err(raw.bad_value(
                    "topology",
                    "kind",
                    format!("unknown topology {other:?}"),
                ))
            }
        };

        let data = match raw.str("data", "kind").unwrap_or("uniform_grid") {
            "uniform_grid" => DataSpec::UniformGrid,
            "lognormal" => DataSpec::LogNormal {
                mu: raw.get("data", "mu")?.unwrap_or(0.0),
                variance: raw.get("data", "variance")?.unwrap_or(0.25),
                seed: raw.get("data", "seed")?,
            },
            "file" => DataSpec::File {
                path: relative_to(base_dir, &raw.require::<String>("data", "path")?),
            },
            other => {
                return Err(raw.bad_value("data", "kind", format!("unknown data kind {other:?}")))
            }
        };

        let epsilon = raw.get("target", "epsilon")?.unwrap_or(DEFAULT_EPSILON);
        let selection = match raw.str("target", "selection") {
            None => None,
            Some(s) => {
                let kind = match s {
                    "median" => SelectionKind::Median,
                    "minimum" | "min" => SelectionKind::Minimum,
                    "maximum" | "max" => SelectionKind::Maximum,
                    "kth" | "kth_smallest" => {
                        SelectionKind::KthSmallest(raw.require("target", "k")?)
                    }
                    other => {
                        return Err(raw.bad_value(
                            "target",
                            "selection",
                            format!("unknown selection {other:?}"),
                        ))
                    }
                };
                Some(SelectionQuery { kind, epsilon })
            }
        };
        let trim = match (
            raw.get::<f64>("target", "trim_lower")?,
            raw.get::<f64>("target", "trim_upper")?,
        ) {
            (None, None) => None,
            (Some(a), Some(b)) => Some(
                TrimSpec::new(a, b)
                    .map_err(|e| raw.bad_value("target", "trim_lower", e.to_string()))?,
            ),
            _ => {
                return Err(raw.bad_value(
                    "target",
                    "trim_lower",
                    "trim_lower and trim_upper must be given together".into(),
                ))
            }
        };
        let tail = match raw.str("target", "tail") {
            None => None,
            Some("upper") => Some(Tail::Upper),
            Some("lower") => Some(Tail::Lower),
            Some(other) => {
                return Err(raw.bad_value(
                    "target",
                    "tail",
                    format!("expected upper|lower, got {other:?}"),
                ))
            }
        };
        let median_midpoint = match raw.str("target", "median") {
            None | Some("lower") => false,
            Some("midpoint") => true,
            Some(other) => {
                return Err(raw.bad_value(
                    "target",
                    "median",
                    format!("expected lower|midpoint, got {other:?}"),
                ))
            }
        };
        let target = TargetSpec {
            p: raw.get("target", "p")?,
            selection,
            trim,
            tail,
            median_midpoint,
        };

        let mut schedule = ScheduleSpec::default();
        if let Some(v) = raw.get("schedule", "alpha0")? {
            schedule.alpha0 = v;
        }
        if let Some(v) = raw.get("schedule", "tau1")? {
            schedule.tau1 = v;
        }
        if let Some(v) = raw.get("schedule", "tau2")? {
            schedule.tau2 = v;
        }
        schedule.eta0 = match raw.str("schedule", "eta0") {
            None | Some("auto") => Eta0::Auto,
            Some(_) => Eta0::Fixed(raw.require("schedule", "eta0")?),
        };

        let noise = match raw.str("noise", "kind").unwrap_or("none") {
            "none" => NoiseModel::None,
            "gaussian" => NoiseModel::gaussian(raw.require("noise", "variance")?)
                .map_err(|e| raw.bad_value("noise", "variance", e.to_string()))?,
            "uniform" => NoiseModel::uniform(raw.require("noise", "variance")?)
                .map_err(|e| raw.bad_value("noise", "variance", e.to_string()))?,
            other => {
                return Err(raw.bad_value("noise", "kind", format!("unknown noise kind {other:?}")))
            }
        };

        let record = match raw.str("run", "record").unwrap_or("log") {
            "log" => RecordMode::Log {
                points_per_decade: raw.get("run", "points_per_decade")?.unwrap_or(10),
            },
            "stride" => RecordMode::Stride(raw.require("run", "stride")?),
            other => {
                return Err(raw.bad_value(
                    "run",
                    "record",
                    format!("expected log|stride, got {other:?}"),
                ))
            }
        };
        let run = RunSpec {
            iterations: raw.require("run", "iterations")?,
            record,
            realizations: raw.get("run", "realizations")?.unwrap_or(1),
            master_seed: raw.get("run", "master_seed")?.ok_or_else(|| CliError::Parse {
                path: raw.path.clone(),
                line: 0,
                message: "missing required key [run] master_seed (runs are never seeded from the clock)".into(),
            })?,
            workers: raw.get("run", "workers")?.unwrap_or(0),
            consensus_iterations: raw.get("run", "consensus_iterations")?.unwrap_or(2000),
        };

        let output = OutputSpec {
            dir: PathBuf::from(raw.str("output", "dir").unwrap_or("out")),
            prefix: raw.str("output", "prefix").unwrap_or("").to_string(),
        };

        Ok(Self {
            topology,
            data,
            target,
            schedule,
            noise,
            run,
            output,
        })
    }

    pub fn build_network(&self) -> Result<Network> {
        let seed = |s: Option<u64>| s.unwrap_or(self.run.master_seed);
        Ok(match &self.topology {
            TopologySpec::RandomGeometric {
                nodes,
                radius,
                seed: s,
            } => Network::random_geometric(*nodes, *radius, seed(*s))?,
            TopologySpec::ErdosRenyi {
                nodes,
                probability,
                seed: s,
            } => Network::erdos_renyi(*nodes, *probability, seed(*s))?,
            TopologySpec::Complete { nodes } => Network::complete(*nodes)?,
            TopologySpec::EdgeList { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
                Network::parse_edge_list(&text)?
            }
        })
    }

    /// Builds network, data and schedule, collecting every validation problem at once.
    pub fn resolve(self) -> Result<ResolvedExperiment> {
        let network = self.build_network()?;
        let data = generate_data(&self.data, network.node_count(), self.run.master_seed)?;
        let mut errors = Vec::new();
        let mut warnings = Vec::new();

        if !network.is_connected() {
            errors.push("network is not connected".to_string());
        }
        if data.len() != network.node_count() {
            errors.push(format!(
                "data has {} values but the network has {} nodes",
                data.len(),
                network.node_count()
            ));
        }
        let d_max = network.max_degree();
        let eta0 = match self.schedule.eta0 {
            Eta0::Auto => default_eta0(d_max),
            Eta0::Fixed(v) => v,
        };
        let schedule = StepSchedule::new(
            self.schedule.alpha0,
            self.schedule.tau1,
            eta0,
            self.schedule.tau2,
        );
        let violations = schedule.validate();
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            errors.push(format!(
                "step-size decay conditions violated: {}",
                list.join(", ")
            ));
        }
        if let Some(w) = schedule.averaging_warning(d_max) {
            warnings.push(w);
        }

        let n = network.node_count();
        let mut p = None;
        if self.target.p.is_some() && self.target.selection.is_some() {
            errors.push("[target] sets both p and selection".into());
        }
        if let Some(level) = self.target.p {
            match validate_target(level, n) {
                Ok(t) => {
                    warnings.extend(t.warning(n));
                    p = Some(level);
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
        if let Some(q) = &self.target.selection {
            match selection_to_p(q, n) {
                Ok(level) => p = Some(level),
                Err(e) => errors.push(e.to_string()),
            }
        }
        if self.run.iterations == 0 {
            errors.push("[run] iterations must be >= 1".into());
        }
        if self.run.realizations == 0 {
            errors.push("[run] realizations must be >= 1".into());
        }
        if let Err(e) = self.run.record.points(self.run.iterations.max(1)) {
            errors.push(e.to_string());
        }

        if !errors.is_empty() {
            return Err(CliError::Invalid(errors));
        }
        Ok(ResolvedExperiment {
            config: self,
            network,
            data,
            schedule,
            p,
            warnings,
        })
    }
}

/// Parses and resolves the config at `path`.
pub fn load_config(path: &Path) -> Result<ResolvedExperiment> {
    ExperimentConfig::from_file(path)?.resolve()
}

impl ResolvedExperiment {
    /// Stable description of everything that influences the outputs of `command`.
    pub fn canonical(&self, command: &str) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "command={command}");
        let _ = writeln!(
            s,
            "edges={}",
            self.network.to_edge_list().replace('\n', ";")
        );
        let values: Vec<String> = self
            .data
            .values()
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        let _ = writeln!(s, "data={}", values.join(","));
        let _ = writeln!(s, "p={:?}", self.p);
        let _ = writeln!(s, "target={:?}", c.target);
        let _ = writeln!(s, "schedule={:?}", self.schedule);
        let _ = writeln!(s, "noise={:?}", c.noise);
        let r = &c.run;
        let _ = writeln!(
            s,
            "run=iterations:{} record:{:?} realizations:{} master_seed:{} consensus:{}",
            r.iterations, r.record, r.realizations, r.master_seed, r.consensus_iterations
        );
        s
    }

    pub fn digest(&self, command: &str) -> String {
        hex::encode(Sha256::digest(self.canonical(command).as_bytes()))
    }
}
