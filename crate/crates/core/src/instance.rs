//! CVRP instances and their distance geometry.
//!
//! Two on-disk formats are understood: the TSPLIB-95 CVRP dialect with
//! `EUC_2D` coordinates (the layout the CMT benchmark files are distributed
//! in) and a small JSON document used by fixtures. Whatever the file
//! numbering, the depot is always remapped to id `0` and customers to
//! `1..=N` in file order.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("malformed instance json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> InstanceError {
    InstanceError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Location<T = f64> {
    pub id: usize,
    pub x: T,
    pub y: T,
    pub demand: u64,
}

/// A validated CVRP instance. Location `0` is the depot.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T = f64> {
    name: String,
    capacity: u64,
    locations: Vec<Location<T>>,
}

impl<T: Scalar> Instance<T> {
    /// Builds an instance, checking the structural invariants: contiguous
    /// ids starting at the depot, a zero-demand depot, at least one customer
    /// and no customer heavier than a vehicle.
    pub fn new(
        name: impl Into<String>,
        capacity: u64,
        locations: Vec<Location<T>>,
    ) -> Result<Self, InstanceError> {
        if capacity == 0 {
            return Err(InstanceError::Invalid("capacity must be positive".into()));
        }
        if locations.len() < 2 {
            return Err(InstanceError::Invalid(
                "an instance needs a depot and at least one customer".into(),
            ));
        }
        for (idx, loc) in locations.iter().enumerate() {
            if loc.id != idx {
                return Err(InstanceError::Invalid(format!(
                    "location ids must be contiguous from 0, found {} at position {idx}",
                    loc.id
                )));
            }
            if !loc.x.is_finite() || !loc.y.is_finite() {
                return Err(InstanceError::Invalid(format!(
                    "location {idx} has a non-finite coordinate"
                )));
            }
        }
        if locations[0].demand != 0 {
            return Err(InstanceError::Invalid("depot demand must be 0".into()));
        }
        if let Some(heavy) = locations.iter().find(|l| l.demand > capacity) {
            return Err(InstanceError::Invalid(format!(
                "customer {} demand {} exceeds capacity {capacity}",
                heavy.id, heavy.demand
            )));
        }
        Ok(Self {
            name: name.into(),
            capacity,
            locations,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn locations(&self) -> &[Location<T>] {
        &self.locations
    }

    pub fn depot(&self) -> &Location<T> {
        &self.locations[0]
    }

    /// Number of customers, `N`.
    pub fn num_customers(&self) -> usize {
        self.locations.len() - 1
    }

    /// Customer ids `1..=N`.
    pub fn customer_ids(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.num_customers()
    }

    #[inline]
    pub fn demand(&self, id: usize) -> u64 {
        self.locations[id].demand
    }

    pub fn total_demand(&self) -> u64 {
        self.locations.iter().map(|l| l.demand).sum()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = read(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            parse_instance(&text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: InstanceJson = serde_json::from_str(text)?;
        let mut locations: Vec<_> = doc
            .locations
            .into_iter()
            .map(|l| Location {
                id: l.id,
                x: T::of(l.x),
                y: T::of(l.y),
                demand: l.demand,
            })
            .collect();
        locations.sort_by_key(|l| l.id);
        Self::new(doc.name.unwrap_or_default(), doc.capacity, locations)
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceJson {
            name: Some(self.name.clone()),
            capacity: self.capacity,
            locations: self
                .locations
                .iter()
                .map(|l| LocationJson {
                    id: l.id,
                    x: l.x.as_f64(),
                    y: l.y.as_f64(),
                    demand: l.demand,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serializes")
    }

    /// Writes the instance in the TSPLIB CVRP dialect, depot as node 1.
    pub fn to_tsplib(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME : {}", self.name);
        let _ = writeln!(out, "TYPE : CVRP");
        let _ = writeln!(out, "DIMENSION : {}", self.locations.len());
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE : EUC_2D");
        let _ = writeln!(out, "CAPACITY : {}", self.capacity);
        let _ = writeln!(out, "NODE_COORD_SECTION");
        for l in &self.locations {
            let _ = writeln!(out, "{} {} {}", l.id + 1, l.x.as_f64(), l.y.as_f64());
        }
        let _ = writeln!(out, "DEMAND_SECTION");
        for l in &self.locations {
            let _ = writeln!(out, "{} {}", l.id + 1, l.demand);
        }
        let _ = writeln!(out, "DEPOT_SECTION\n1\n-1\nEOF");
        out
    }
}

fn read(path: &Path) -> Result<String, InstanceError> {
    std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct LocationJson {
    id: usize,
    x: f64,
    y: f64,
    #[serde(default)]
    demand: u64,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    #[serde(default)]
    name: Option<String>,
    capacity: u64,
    locations: Vec<LocationJson>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Coords,
    Demands,
    Depots,
}

/// Parses the TSPLIB-95 CVRP dialect.
pub fn parse_instance<T: Scalar>(text: &str) -> Result<Instance<T>, InstanceError> {
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<u64> = None;
    let mut coords: BTreeMap<i64, (T, T, usize)> = BTreeMap::new();
    let mut coord_order: Vec<i64> = Vec::new();
    let mut demands: HashMap<i64, (u64, usize)> = HashMap::new();
    let mut depots: Vec<i64> = Vec::new();
    let mut section = Section::Header;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        let upper_key = line
            .split(|c: char| c == ':' || c.is_whitespace())
            .next()
            .unwrap_or("")
            .to_ascii_uppercase();
        match upper_key.as_str() {
            "NODE_COORD_SECTION" => {
                section = Section::Coords;
                continue;
            }
            "DEMAND_SECTION" => {
                section = Section::Demands;
                continue;
            }
            "DEPOT_SECTION" => {
                section = Section::Depots;
                continue;
            }
            _ => {}
        }
        if let Some((key, value)) = line.split_once(':') {
            if section == Section::Header || key.trim().chars().all(|c| c.is_ascii_uppercase() || c == '_') {
                let key = key.trim().to_ascii_uppercase();
                let value = value.trim();
                match key.as_str() {
                    "NAME" => name = value.to_string(),
                    "DIMENSION" => {
                        dimension = Some(value.parse().map_err(|_| {
                            parse_err(line_no, "DIMENSION", format!("not an integer: {value:?}"))
                        })?)
                    }
                    "CAPACITY" => {
                        capacity = Some(value.parse().map_err(|_| {
                            parse_err(line_no, "CAPACITY", format!("not an integer: {value:?}"))
                        })?)
                    }
                    "EDGE_WEIGHT_TYPE" if value != "EUC_2D" => {
                        return Err(parse_err(
                            line_no,
                            "EDGE_WEIGHT_TYPE",
                            format!("unsupported edge weight type {value}"),
                        ))
                    }
                    "TYPE" if value != "CVRP" => {
                        return Err(parse_err(line_no, "TYPE", format!("expected CVRP, got {value}")))
                    }
                    _ => {}
                }
                section = Section::Header;
                continue;
            }
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Header => {
                return Err(parse_err(line_no, "header", format!("unexpected line {line:?}")))
            }
            Section::Coords => {
                let field = "NODE_COORD_SECTION";
                if fields.len() != 3 {
                    return Err(parse_err(line_no, field, "expected `id x y`"));
                }
                let id = parse_id(fields[0], line_no, field)?;
                let x = parse_coord::<T>(fields[1], line_no, field)?;
                let y = parse_coord::<T>(fields[2], line_no, field)?;
                if coords.insert(id, (x, y, line_no)).is_some() {
                    return Err(parse_err(line_no, field, format!("duplicate node id {id}")));
                }
                coord_order.push(id);
            }
            Section::Demands => {
                let field = "DEMAND_SECTION";
                if fields.len() != 2 {
                    return Err(parse_err(line_no, field, "expected `id demand`"));
                }
                let id = parse_id(fields[0], line_no, field)?;
                let demand: u64 = fields[1].parse().map_err(|_| {
                    parse_err(line_no, field, format!("bad demand {:?} for node {id}", fields[1]))
                })?;
                if demands.insert(id, (demand, line_no)).is_some() {
                    return Err(parse_err(line_no, field, format!("duplicate node id {id}")));
                }
            }
            Section::Depots => {
                let field = "DEPOT_SECTION";
                for f in fields {
                    let id: i64 = f
                        .parse()
                        .map_err(|_| parse_err(line_no, field, format!("bad depot id {f:?}")))?;
                    if id == -1 {
                        section = Section::Header;
                        break;
                    }
                    depots.push(id);
                }
            }
        }
    }

    let eof = last_line.max(1);
    let dimension = dimension.ok_or_else(|| parse_err(eof, "DIMENSION", "missing field"))?;
    let capacity = capacity.ok_or_else(|| parse_err(eof, "CAPACITY", "missing field"))?;
    if coords.is_empty() {
        return Err(parse_err(eof, "NODE_COORD_SECTION", "missing section"));
    }
    if demands.is_empty() {
        return Err(parse_err(eof, "DEMAND_SECTION", "missing section"));
    }
    if coords.len() != dimension {
        return Err(parse_err(
            eof,
            "DIMENSION",
            format!("declared {dimension} nodes but found {} coordinates", coords.len()),
        ));
    }
    let depot = match depots.as_slice() {
        [] => return Err(parse_err(eof, "DEPOT_SECTION", "missing section")),
        [d] => *d,
        _ => return Err(parse_err(eof, "DEPOT_SECTION", "multiple depots are not supported")),
    };
    if !coords.contains_key(&depot) {
        return Err(parse_err(eof, "DEPOT_SECTION", format!("depot {depot} has no coordinates")));
    }
    for (&id, &(_, line)) in &demands {
        if !coords.contains_key(&id) {
            return Err(parse_err(line, "DEMAND_SECTION", format!("node {id} has no coordinates")));
        }
    }

    let mut locations = Vec::with_capacity(dimension);
    for &file_id in std::iter::once(&depot).chain(coord_order.iter().filter(|&&id| id != depot)) {
        let (x, y, coord_line) = coords[&file_id];
        let Some(&(demand, demand_line)) = demands.get(&file_id) else {
            return Err(parse_err(
                coord_line,
                "DEMAND_SECTION",
                format!("missing demand for node {file_id}"),
            ));
        };
        if file_id == depot && demand != 0 {
            return Err(parse_err(
                demand_line,
                "DEMAND_SECTION",
                format!("depot {file_id} has nonzero demand {demand}"),
            ));
        }
        locations.push(Location {
            id: locations.len(),
            x,
            y,
            demand,
        });
    }
    Instance::new(name, capacity, locations)
}

fn parse_id(s: &str, line: usize, field: &str) -> Result<i64, InstanceError> {
    s.parse()
        .map_err(|_| parse_err(line, field, format!("bad node id {s:?}")))
}

fn parse_coord<T: Scalar>(s: &str, line: usize, field: &str) -> Result<T, InstanceError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::of)
        .ok_or_else(|| parse_err(line, field, format!("bad coordinate {s:?}")))
}

/// Dense symmetric matrix of Euclidean distances, unrounded.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T = f64> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn from_instance(instance: &Instance<T>) -> Self {
        build_distance_matrix(instance)
    }

    /// Number of locations, depot included.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

pub fn build_distance_matrix<T: Scalar>(instance: &Instance<T>) -> DistanceMatrix<T> {
    let locs = instance.locations();
    let n = locs.len();
    let mut entries = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (locs[i].x - locs[j].x).hypot(locs[i].y - locs[j].y);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix { n, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "NAME : tiny\nTYPE : CVRP\nDIMENSION : 2\nEDGE_WEIGHT_TYPE : EUC_2D\nCAPACITY : 1\nNODE_COORD_SECTION\n1 0 0\n2 3 4\nDEMAND_SECTION\n1 0\n2 1\nDEPOT_SECTION\n1\n-1\nEOF\n";

    #[test]
    fn parses_smallest_legal_instance() {
        let inst: Instance = parse_instance(MINIMAL).unwrap();
        assert_eq!(inst.num_customers(), 1);
        assert_eq!(inst.capacity(), 1);
        assert_eq!(inst.name(), "tiny");
        let m = build_distance_matrix(&inst);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn depot_is_remapped_to_zero() {
        let text = "DIMENSION : 3\nCAPACITY : 10\nNODE_COORD_SECTION\n1 5 5\n2 1 1\n3 9 9\nDEMAND_SECTION\n1 4\n2 0\n3 6\nDEPOT_SECTION\n2\n-1\n";
        let inst: Instance = parse_instance(text).unwrap();
        assert_eq!(inst.depot().x, 1.0);
        assert_eq!(inst.demand(1), 4);
        assert_eq!(inst.demand(2), 6);
    }

    #[test]
    fn missing_demand_names_the_node() {
        let text = MINIMAL.replace("2 1\nDEPOT", "DEPOT");
        let err = parse_instance::<f64>(&text).unwrap_err().to_string();
        assert!(err.contains("node 2"), "{err}");
        assert!(err.contains("DEMAND_SECTION"), "{err}");
    }

    #[test]
    fn duplicate_node_is_rejected_with_line() {
        let text = MINIMAL.replace("2 3 4\n", "2 3 4\n2 3 4\n");
        match parse_instance::<f64>(&text).unwrap_err() {
            InstanceError::Parse { line, field, .. } => {
                assert_eq!(line, 9);
                assert_eq!(field, "NODE_COORD_SECTION");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn nonzero_depot_demand_is_rejected() {
        let text = MINIMAL.replace("1 0\n2 1", "1 3\n2 1");
        let err = parse_instance::<f64>(&text).unwrap_err().to_string();
        assert!(err.contains("depot"), "{err}");
    }

    #[test]
    fn missing_capacity_is_reported() {
        let text = MINIMAL.replace("CAPACITY : 1\n", "");
        let err = parse_instance::<f64>(&text).unwrap_err().to_string();
        assert!(err.contains("CAPACITY"), "{err}");
    }

    #[test]
    fn oversized_demand_is_invalid() {
        let text = MINIMAL.replace("2 1\nDEPOT", "2 7\nDEPOT");
        assert!(matches!(
            parse_instance::<f64>(&text),
            Err(InstanceError::Invalid(_))
        ));
    }

    #[test]
    fn json_and_tsplib_round_trip() {
        let inst: Instance = parse_instance(MINIMAL).unwrap();
        let again: Instance = parse_instance(&inst.to_tsplib()).unwrap();
        assert_eq!(inst, again);
        let from_json: Instance = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, from_json);
    }

    #[test]
    fn f32_distances() {
        let inst: Instance<f32> = parse_instance(MINIMAL).unwrap();
        assert_eq!(build_distance_matrix(&inst).get(1, 0), 5.0f32);
    }
}
