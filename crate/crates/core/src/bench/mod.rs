//! Benchmark and study harness: seeded runs, best-known-solution gaps and
//! report tables.

pub mod report;
pub mod study;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{clarke_wright, geometric_cluster_start, import_solution, ImportError};
use crate::instance::{build_distance_matrix, DistanceMatrix, Instance, InstanceError};
use crate::sampler::{Sampler, SamplerError, SamplerSpec};
use crate::solution::{validate, Solution, SolutionJson};
use crate::tabu::{run_search, RerouteAccept, SearchError, SearchParams, SearchResult};

pub use report::{render_bench_csv, render_bench_text, render_study_csv, render_study_text};
pub use study::{run_study, CellReport, StudyConfig, StudyKind, StudyReport};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("start solution: {0}")]
    Import(#[from] ImportError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

/// Percent gap `100 * (cost - bks) / bks`.
pub fn deviation(cost: f64, bks: f64) -> f64 {
    assert!(bks > 0.0, "best-known cost must be positive");
    100.0 * (cost - bks) / bks
}

/// Best-known costs by instance name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BksTable(pub BTreeMap<String, f64>);

impl BksTable {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let table: Self =
            serde_json::from_str(text).map_err(|e| BenchError::Config(format!("bks table: {e}")))?;
        if let Some((k, v)) = table.0.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(BenchError::Config(format!("bks for {k} must be positive, got {v}")));
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StartMethod {
    ClarkeWright,
    Cluster,
    Import(PathBuf),
}

impl FromStr for StartMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cw" => Ok(Self::ClarkeWright),
            "cluster" => Ok(Self::Cluster),
            _ => match s.strip_prefix("import:") {
                Some(p) if !p.is_empty() => Ok(Self::Import(PathBuf::from(p))),
                _ => Err(format!("unknown start {s:?}; expected cw, cluster or import:PATH")),
            },
        }
    }
}

impl TryFrom<String> for StartMethod {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StartMethod> for String {
    fn from(s: StartMethod) -> Self {
        s.to_string()
    }
}

impl fmt::Display for StartMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ClarkeWright => f.write_str("cw"),
            Self::Cluster => f.write_str("cluster"),
            Self::Import(p) => write!(f, "import:{}", p.display()),
        }
    }
}

impl StartMethod {
    /// Relative import paths are resolved against `base`.
    pub fn resolve(&self, base: &Path) -> Self {
        match self {
            Self::Import(p) if p.is_relative() => Self::Import(base.join(p)),
            other => other.clone(),
        }
    }

    pub fn build(
        &self,
        instance: &Instance,
        matrix: &DistanceMatrix,
    ) -> Result<Solution, BenchError> {
        Ok(match self {
            Self::ClarkeWright => clarke_wright(instance, matrix),
            Self::Cluster => geometric_cluster_start(instance, matrix),
            Self::Import(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
                import_solution(&text, instance, matrix)?.0
            }
        })
    }
}

/// An instance with its distance matrix.
#[derive(Debug, Clone)]
pub struct Problem {
    pub instance: Instance,
    pub matrix: DistanceMatrix,
}

impl Problem {
    pub fn new(instance: Instance) -> Self {
        let matrix = build_distance_matrix(&instance);
        Self { instance, matrix }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        Ok(Self::new(Instance::from_file(path)?))
    }

    pub fn name(&self) -> &str {
        self.instance.name()
    }
}

/// One seeded run, with the final solution embedded so the reported cost
/// can always be re-validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub seed: u64,
    pub start: String,
    pub sampler: String,
    pub routing_delay: usize,
    pub stop_factor: usize,
    pub reroute_accept: RerouteAccept,
    pub start_cost: f64,
    pub cost: f64,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bks: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    pub iterations: u64,
    pub iterations_to_best: u64,
    pub wall_ms: u64,
    pub reroute_count: usize,
    pub sampler_calls: usize,
    pub sampler_failures: usize,
    pub solution: SolutionJson,
}

impl RunRecord {
    /// Checks that the embedded solution is valid for `problem` and that its
    /// cost matches the reported one within 1e-6.
    pub fn verify(&self, problem: &Problem) -> Result<(), String> {
        let s = Solution::from_sequences(self.solution.routes.clone(), &problem.instance, &problem.matrix);
        validate(&s, &problem.instance, &problem.matrix).map_err(|e| e.to_string())?;
        if (s.cost() - self.cost).abs() > 1e-6 {
            return Err(format!("recorded cost {} but solution costs {}", self.cost, s.cost()));
        }
        Ok(())
    }
}

/// Runs one search and summarises it.
pub fn run_once(
    problem: &Problem,
    start: &StartMethod,
    sampler_spec: &SamplerSpec,
    sampler: &dyn Sampler<f64>,
    params: &SearchParams,
    bks: Option<f64>,
) -> Result<(RunRecord, SearchResult), BenchError> {
    let initial = start.build(&problem.instance, &problem.matrix)?;
    let start_cost = initial.cost();
    let result = run_search(&problem.instance, &problem.matrix, initial, params, sampler)?;
    let cost = result.cost();
    let record = RunRecord {
        instance: problem.name().to_string(),
        seed: params.seed,
        start: start.to_string(),
        sampler: sampler_spec.to_string(),
        routing_delay: params.routing_delay,
        stop_factor: params.stop_factor,
        reroute_accept: params.reroute_accept,
        start_cost,
        cost,
        feasible: result.best.is_feasible(),
        bks,
        deviation: bks.map(|b| deviation(cost, b)),
        iterations: result.iterations,
        iterations_to_best: result.iterations_to_best,
        wall_ms: result.elapsed.as_millis() as u64,
        reroute_count: result.reroutes,
        sampler_calls: result.sampler_calls,
        sampler_failures: result.sampler_failures,
        solution: result.best.to_json(),
    };
    Ok((record, result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    /// Report the cheapest of the runs.
    Best,
    /// Report the mean over the runs alongside the best.
    All,
}

impl FromStr for Keep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best" => Ok(Self::Best),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown keep mode {s:?}; expected best or all")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bks: Option<f64>,
    pub best_cost: f64,
    pub mean_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    pub mean_iterations_to_best: f64,
    pub mean_wall_ms: f64,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub keep: Keep,
    pub rows: Vec<BenchRow>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl BenchRow {
    /// Summarises the runs of one instance. Runs are sorted by seed first,
    /// so the row does not depend on execution order.
    pub fn from_runs(instance: String, bks: Option<f64>, mut runs: Vec<RunRecord>) -> Self {
        runs.sort_by_key(|r| r.seed);
        let best_cost = runs.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
        Self {
            instance,
            bks,
            best_cost,
            mean_cost: mean(runs.iter().map(|r| r.cost)),
            deviation: bks.map(|b| deviation(best_cost, b)),
            mean_iterations_to_best: mean(runs.iter().map(|r| r.iterations_to_best as f64)),
            mean_wall_ms: mean(runs.iter().map(|r| r.wall_ms as f64)),
            runs,
        }
    }
}

/// Instance files of the CMT suite that have no time windows or route
/// length limits. Missing files are skipped by [`cmt_suite`].
pub const CMT_SUITE: [&str; 7] = ["CMT1", "CMT2", "CMT3", "CMT4", "CMT5", "CMT11", "CMT12"];

/// Paths of the suite instances present under `dir`, as `NAME.vrp` or
/// `NAME.json`.
pub fn cmt_suite(dir: &Path) -> (Vec<PathBuf>, Vec<&'static str>) {
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for name in CMT_SUITE {
        let hit = ["vrp", "json"]
            .iter()
            .map(|ext| dir.join(format!("{name}.{ext}")))
            .find(|p| p.exists());
        match hit {
            Some(p) => found.push(p),
            None => missing.push(name),
        }
    }
    (found, missing)
}

/// `runs` seeded runs (seeds `seed0..seed0 + runs`) on each problem.
#[allow(clippy::too_many_arguments)]
pub fn run_bench(
    problems: &[Problem],
    bks: &BksTable,
    runs: usize,
    keep: Keep,
    start: &StartMethod,
    sampler_spec: &SamplerSpec,
    sampler: &dyn Sampler<f64>,
    params: &SearchParams,
    mut progress: impl FnMut(&RunRecord),
) -> Result<BenchReport, BenchError> {
    let mut rows = Vec::new();
    for p in problems {
        let b = bks.get(p.name());
        let mut records = Vec::new();
        for k in 0..runs {
            let mut params = params.clone();
            params.seed = params.seed.wrapping_add(k as u64);
            let (rec, _) = run_once(p, start, sampler_spec, sampler, &params, b)?;
            progress(&rec);
            records.push(rec);
        }
        rows.push(BenchRow::from_runs(p.name().to_string(), b, records));
    }
    Ok(BenchReport { keep, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_examples() {
        assert!((deviation(848.95, 835.26) - 1.64).abs() < 0.005);
        assert!((deviation(830.99, 826.14) - 0.59).abs() < 0.005);
        assert_eq!(deviation(524.61, 524.61), 0.0);
    }

    #[test]
    fn bks_rejects_nonpositive() {
        assert!(BksTable::from_json(r#"{"A": 0}"#).is_err());
        let t = BksTable::from_json(r#"{"CMT1": 524.61}"#).unwrap();
        assert_eq!(t.get("CMT1"), Some(524.61));
        assert_eq!(t.get("CMT9"), None);
    }

    #[test]
    fn start_method_strings() {
        for s in ["cw", "cluster", "import:a/b.json"] {
            assert_eq!(s.parse::<StartMethod>().unwrap().to_string(), s);
        }
        assert!("dbscan".parse::<StartMethod>().is_err());
        let rel = StartMethod::Import("x.json".into()).resolve(Path::new("/base"));
        assert_eq!(rel, StartMethod::Import("/base/x.json".into()));
    }

    #[test]
    fn row_summary_is_order_independent() {
        let rec = |seed: u64, cost: f64| RunRecord {
            instance: "t".into(),
            seed,
            start: "cw".into(),
            sampler: "exact".into(),
            routing_delay: 250,
            stop_factor: 100,
            reroute_accept: RerouteAccept::Better,
            start_cost: 20.0,
            cost,
            feasible: true,
            bks: Some(10.0),
            deviation: Some(deviation(cost, 10.0)),
            iterations: 5,
            iterations_to_best: seed,
            wall_ms: 1,
            reroute_count: 0,
            sampler_calls: 0,
            sampler_failures: 0,
            solution: SolutionJson {
                routes: vec![],
                cost: None,
                feasible: None,
                excess: None,
            },
        };
        let a = BenchRow::from_runs("t".into(), Some(10.0), vec![rec(2, 12.0), rec(1, 11.0)]);
        let b = BenchRow::from_runs("t".into(), Some(10.0), vec![rec(1, 11.0), rec(2, 12.0)]);
        assert_eq!(a, b);
        assert_eq!(a.best_cost, 11.0);
        assert!((a.deviation.unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(a.mean_cost, 11.5);
    }
}
