//! Parameter studies: repeated seeded runs per cell until enough of them
//! land within a deviation bound of the best-known cost.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{deviation, run_once, BenchError, Problem, RunRecord, StartMethod};
use crate::sampler::{Sampler, SamplerSpec};
use crate::tabu::SearchParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// One cell per routing delay.
    Delay,
    /// One cell per start method.
    Start,
}

impl std::str::FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delay" => Ok(Self::Delay),
            "start" => Ok(Self::Start),
            _ => Err(format!("unknown study kind {s:?}; expected delay or start")),
        }
    }
}

fn default_start() -> StartMethod {
    StartMethod::ClarkeWright
}
fn default_delay() -> usize {
    250
}
fn default_sampler() -> SamplerSpec {
    SamplerSpec::Anneal
}
fn default_qualifying() -> usize {
    10
}
fn default_bound() -> f64 {
    2.0
}
fn default_seed() -> u64 {
    1
}
fn default_stop() -> usize {
    100
}

/// Study description, usually read from JSON. Relative paths are resolved
/// against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub instance: PathBuf,
    #[serde(default)]
    pub bks: Option<f64>,
    /// Cells of a delay study.
    #[serde(default)]
    pub delays: Vec<usize>,
    /// Cells of a start study.
    #[serde(default)]
    pub starts: Vec<StartMethod>,
    /// Start method of a delay study.
    #[serde(default = "default_start")]
    pub start: StartMethod,
    /// Routing delay of a start study.
    #[serde(default = "default_delay")]
    pub routing_delay: usize,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerSpec,
    #[serde(default = "default_qualifying")]
    pub qualifying_runs: usize,
    /// Attempts per cell before it is declared DNF; defaults to three times
    /// `qualifying_runs`.
    #[serde(default)]
    pub max_attempts: Option<usize>,
    /// A run qualifies when feasible and within this percent of the BKS.
    #[serde(default = "default_bound")]
    pub good_run_pct: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_stop")]
    pub stop_factor: usize,
}

impl StudyConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.instance.is_relative() {
            cfg.instance = base.join(&cfg.instance);
        }
        cfg.start = cfg.start.resolve(base);
        cfg.starts = cfg.starts.iter().map(|s| s.resolve(base)).collect();
        Ok(cfg)
    }

    fn cells(&self) -> Result<Vec<(String, StartMethod, usize)>, BenchError> {
        let cells: Vec<_> = match self.kind {
            StudyKind::Delay => self
                .delays
                .iter()
                .map(|&d| (format!("delay {d}"), self.start.clone(), d))
                .collect(),
            StudyKind::Start => self
                .starts
                .iter()
                .map(|s| (s.to_string(), s.clone(), self.routing_delay))
                .collect(),
        };
        if cells.is_empty() {
            return Err(BenchError::Config(match self.kind {
                StudyKind::Delay => "delay study needs a nonempty \"delays\" list".into(),
                StudyKind::Start => "start study needs a nonempty \"starts\" list".into(),
            }));
        }
        Ok(cells)
    }

    pub fn qualifies(&self, record: &RunRecord) -> bool {
        record.feasible
            && match self.bks {
                Some(b) => deviation(record.cost, b) <= self.good_run_pct + 1e-12,
                None => true,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    pub start: String,
    pub routing_delay: usize,
    pub attempts: usize,
    pub qualifying: usize,
    /// Fewer than the requested qualifying runs within the attempt cap.
    pub dnf: bool,
    /// Means over qualifying runs; `None` when there are none.
    pub mean_iterations_to_best: Option<f64>,
    pub mean_wall_ms: Option<f64>,
    pub mean_cost: Option<f64>,
    pub best_cost: Option<f64>,
    pub runs: Vec<RunRecord>,
    /// Per run, whether it qualified.
    pub qualified: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bks: Option<f64>,
    pub good_run_pct: f64,
    pub qualifying_runs: usize,
    pub cells: Vec<CellReport>,
}

impl StudyReport {
    pub fn cell(&self, label: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.label == label)
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl CellReport {
    pub fn from_runs(
        label: String,
        start: String,
        routing_delay: usize,
        required: usize,
        runs: Vec<RunRecord>,
        qualified: Vec<bool>,
    ) -> Self {
        let good: Vec<&RunRecord> = runs
            .iter()
            .zip(&qualified)
            .filter(|(_, q)| **q)
            .map(|(r, _)| r)
            .collect();
        let pick = |f: fn(&RunRecord) -> f64| good.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let costs = pick(|r| r.cost);
        Self {
            label,
            start,
            routing_delay,
            attempts: runs.len(),
            qualifying: good.len(),
            dnf: good.len() < required,
            mean_iterations_to_best: mean(&pick(|r| r.iterations_to_best as f64)),
            mean_wall_ms: mean(&pick(|r| r.wall_ms as f64)),
            mean_cost: mean(&costs),
            best_cost: costs.iter().copied().reduce(f64::min),
            runs,
            qualified,
        }
    }
}

/// Runs every cell: attempt `k` of each cell uses seed `seed + k`, so
/// cells are compared on the same seeds. A cell stops once it has
/// `qualifying_runs` qualifying runs or after `max_attempts` attempts.
pub fn run_study(
    config: &StudyConfig,
    sampler: &dyn Sampler<f64>,
    mut progress: impl FnMut(&str, &RunRecord, bool),
) -> Result<StudyReport, BenchError> {
    let problem = Problem::load(&config.instance)?;
    let mut report = StudyReport {
        kind: config.kind,
        instance: problem.name().to_string(),
        bks: config.bks,
        good_run_pct: config.good_run_pct,
        qualifying_runs: config.qualifying_runs,
        cells: Vec::new(),
    };
    if config.qualifying_runs == 0 {
        return Ok(report);
    }
    let cap = config.max_attempts.unwrap_or(3 * config.qualifying_runs);
    for (label, start, delay) in config.cells()? {
        let mut runs = Vec::new();
        let mut qualified = Vec::new();
        let mut good = 0;
        for k in 0..cap {
            if good >= config.qualifying_runs {
                break;
            }
            let params = SearchParams {
                routing_delay: delay,
                stop_factor: config.stop_factor,
                seed: config.seed.wrapping_add(k as u64),
                trace_moves: false,
                ..SearchParams::default()
            };
            let (rec, _) = run_once(&problem, &start, &config.sampler, sampler, &params, config.bks)?;
            let q = config.qualifies(&rec);
            good += q as usize;
            progress(&label, &rec, q);
            runs.push(rec);
            qualified.push(q);
        }
        report.cells.push(CellReport::from_runs(
            label,
            start.to_string(),
            delay,
            config.qualifying_runs,
            runs,
            qualified,
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let cfg: StudyConfig =
            serde_json::from_str(r#"{"kind": "delay", "instance": "x.vrp", "delays": [250, 3000]}"#).unwrap();
        assert_eq!(cfg.qualifying_runs, 10);
        assert_eq!(cfg.good_run_pct, 2.0);
        assert_eq!(cfg.start, StartMethod::ClarkeWright);
        assert_eq!(cfg.sampler, SamplerSpec::Anneal);
        assert_eq!(cfg.cells().unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<StudyConfig, _> =
            serde_json::from_str(r#"{"kind": "start", "instance": "x", "runs": 3}"#);
        assert!(r.is_err());
    }

    #[test]
    fn empty_cells_rejected() {
        let cfg: StudyConfig = serde_json::from_str(r#"{"kind": "start", "instance": "x"}"#).unwrap();
        assert!(cfg.cells().is_err());
    }
}
