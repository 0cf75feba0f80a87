//! Problem instances: a complete undirected graph over a depot and a set of
//! targets with symmetric nonnegative edge costs.
//!
//! Instances come from TSPLIB text (`EUC_2D`, `GEO`, `EXPLICIT`), from a JSON
//! mirror of [`Instance`], or directly from a cost matrix via
//! [`Instance::from_matrix`]. They are immutable once built.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest DIMENSION accepted by the parsers; the cost matrix is dense.
pub const MAX_DIMENSION: usize = 5000;

const SYMMETRY_TOL: f64 = 1e-9;
const TRIANGLE_TOL: f64 = 1e-9;

/// TSPLIB earth radius and the truncated pi the reference implementation uses.
const GEO_RADIUS: f64 = 6378.388;
const GEO_PI: f64 = 3.141592;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("line {line}: malformed {field}: {reason}")]
    Parse {
        field: String,
        line: usize,
        reason: String,
    },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("unsupported EDGE_WEIGHT_TYPE `{0}`")]
    UnsupportedEdgeWeightType(String),
    #[error("unsupported {field} `{value}`")]
    Unsupported { field: &'static str, value: String },
    #[error("{field}: expected {expected} entries for DIMENSION, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("DIMENSION {0} exceeds the supported maximum of {MAX_DIMENSION}")]
    TooLarge(usize),
    #[error("cost matrix is not square")]
    NotSquare,
    #[error("asymmetric costs: c[{i}][{j}] = {a} but c[{j}][{i}] = {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("invalid cost c[{i}][{j}] = {value}")]
    InvalidCost { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal c[{i}][{i}] = {value}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("depot {depot} out of range for {n} vertices")]
    DepotOutOfRange { depot: usize, n: usize },
    #[error("instance already designates vertex {0} as depot")]
    DepotAlreadySet(usize),
    #[error("instance has no depot")]
    NoDepot,
    #[error("operation needs node coordinates, instance `{0}` has none")]
    NoCoordinates(String),
    #[error("json: {0}")]
    Json(String),
    #[error("io: {0}")]
    Io(String),
}

/// How edge costs were derived from the raw data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    /// TSPLIB `EUC_2D`: Euclidean distance rounded to the nearest integer.
    #[serde(rename = "EUC_2D")]
    Euc2d,
    /// TSPLIB `GEO`: great-circle distance on the idealized sphere, truncated.
    Geo,
    /// Costs given verbatim.
    Explicit,
    /// Unrounded Euclidean distance (synthetic instances).
    Euclidean,
}

impl Metric {
    fn tsplib_name(self) -> Option<&'static str> {
        match self {
            Metric::Euc2d => Some("EUC_2D"),
            Metric::Geo => Some("GEO"),
            Metric::Explicit | Metric::Euclidean => None,
        }
    }

    /// Distance between two points under this metric, if it is coordinate based.
    pub fn distance(self, a: [f64; 2], b: [f64; 2]) -> Option<f64> {
        match self {
            Metric::Euc2d => Some(nint(euclid(a, b))),
            Metric::Euclidean => Some(euclid(a, b)),
            Metric::Geo => Some(geo_distance(a, b)),
            Metric::Explicit => None,
        }
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn nint(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// TSPLIB `DDD.MM` coordinate to radians.
fn geo_radians(x: f64) -> f64 {
    let deg = x.trunc();
    let min = x - deg;
    GEO_PI * (deg + 5.0 * min / 3.0) / 180.0
}

fn geo_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lat_a, lon_a) = (geo_radians(a[0]), geo_radians(a[1]));
    let (lat_b, lon_b) = (geo_radians(b[0]), geo_radians(b[1]));
    let q1 = (lon_a - lon_b).cos();
    let q2 = (lat_a - lat_b).cos();
    let q3 = (lat_a + lat_b).cos();
    let arg = (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).clamp(-1.0, 1.0);
    (GEO_RADIUS * arg.acos() + 1.0).trunc()
}

/// A validated MTSP instance.
///
/// Vertex ids are `0..n_vertices()`. The depot, once designated, is one of
/// them; every other vertex is a target.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    name: String,
    depot: Option<usize>,
    coords: Option<Vec<[f64; 2]>>,
    metric: Metric,
    n: usize,
    cost: Vec<f64>,
}

impl Instance {
    /// Wraps a cost matrix, validating symmetry, nonnegativity and the zero
    /// diagonal.
    pub fn from_matrix(cost: Vec<Vec<f64>>, depot: usize) -> Result<Self, InstanceError> {
        let mut inst = Self::from_rows("explicit".to_string(), &cost, Metric::Explicit, None)?;
        inst.designate_depot(depot)?;
        Ok(inst)
    }

    /// Builds an instance from coordinates, computing costs with `metric`.
    pub fn from_coords(
        name: impl Into<String>,
        coords: Vec<[f64; 2]>,
        metric: Metric,
        depot: Option<usize>,
    ) -> Result<Self, InstanceError> {
        let name = name.into();
        if metric == Metric::Explicit {
            return Err(InstanceError::Unsupported {
                field: "metric",
                value: "EXPLICIT with coordinates".into(),
            });
        }
        if coords.len() > MAX_DIMENSION {
            return Err(InstanceError::TooLarge(coords.len()));
        }
        if let Some(bad) = coords.iter().flatten().find(|c| !c.is_finite()) {
            return Err(InstanceError::Parse {
                field: "coordinates".into(),
                line: 0,
                reason: format!("non-finite value {bad}"),
            });
        }
        let n = coords.len();
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric.distance(coords[i], coords[j]).unwrap_or(0.0);
                cost[i * n + j] = d;
                cost[j * n + i] = d;
            }
        }
        let mut inst = Instance {
            name,
            depot: None,
            coords: Some(coords),
            metric,
            n,
            cost,
        };
        if let Some(d) = depot {
            inst.designate_depot(d)?;
        }
        Ok(inst)
    }

    fn from_rows(
        name: String,
        rows: &[Vec<f64>],
        metric: Metric,
        coords: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, InstanceError> {
        let n = rows.len();
        if n > MAX_DIMENSION {
            return Err(InstanceError::TooLarge(n));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(InstanceError::NotSquare);
        }
        let cost: Vec<f64> = rows.iter().flatten().copied().collect();
        validate_matrix(n, &cost)?;
        Ok(Instance {
            name,
            depot: None,
            coords,
            metric,
            n,
            cost,
        })
    }

    fn designate_depot(&mut self, depot: usize) -> Result<(), InstanceError> {
        if depot >= self.n {
            return Err(InstanceError::DepotOutOfRange { depot, n: self.n });
        }
        self.depot = Some(depot);
        Ok(())
    }

    /// Returns a copy with `depot` designated as the depot vertex.
    pub fn with_depot(mut self, depot: usize) -> Result<Self, InstanceError> {
        self.designate_depot(depot)?;
        Ok(self)
    }

    /// Returns a copy with a new name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Appends a depot at the centroid of all vertex coordinates.
    ///
    /// The depot becomes vertex 0 and the original vertices shift to
    /// `1..=n`; their pairwise costs are unchanged.
    pub fn add_centroid_depot(&self) -> Result<Instance, InstanceError> {
        if let Some(d) = self.depot {
            return Err(InstanceError::DepotAlreadySet(d));
        }
        let coords = self
            .coords
            .as_ref()
            .ok_or_else(|| InstanceError::NoCoordinates(self.name.clone()))?;
        if coords.is_empty() {
            return Err(InstanceError::Missing("targets"));
        }
        let k = coords.len() as f64;
        let sx: f64 = coords.iter().map(|c| c[0]).sum();
        let sy: f64 = coords.iter().map(|c| c[1]).sum();
        let centroid = [sx / k, sy / k];

        let n = self.n + 1;
        let mut cost = vec![0.0; n * n];
        for i in 0..self.n {
            for j in 0..self.n {
                cost[(i + 1) * n + (j + 1)] = self.cost[i * self.n + j];
            }
            let d = if coords[i] == centroid {
                0.0
            } else {
                self.metric.distance(centroid, coords[i]).unwrap_or(0.0)
            };
            cost[i + 1] = d;
            cost[(i + 1) * n] = d;
        }
        let mut new_coords = Vec::with_capacity(n);
        new_coords.push(centroid);
        new_coords.extend_from_slice(coords);
        Ok(Instance {
            name: self.name.clone(),
            depot: Some(0),
            coords: Some(new_coords),
            metric: self.metric,
            n,
            cost,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Number of targets; all vertices count as targets until a depot is set.
    pub fn n_targets(&self) -> usize {
        match self.depot {
            Some(_) => self.n - 1,
            None => self.n,
        }
    }

    pub fn depot(&self) -> Option<usize> {
        self.depot
    }

    /// The depot, or [`InstanceError::NoDepot`].
    pub fn require_depot(&self) -> Result<usize, InstanceError> {
        self.depot.ok_or(InstanceError::NoDepot)
    }

    /// Target vertex ids in increasing order.
    pub fn targets(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| Some(i) != self.depot).collect()
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// The cost matrix as nested rows.
    pub fn cost_matrix(&self) -> Vec<Vec<f64>> {
        self.cost.chunks(self.n.max(1)).take(self.n).map(|r| r.to_vec()).collect()
    }

    /// All `(i, j, k)` with `c[i][j] > c[i][k] + c[k][j] + 1e-9`.
    pub fn check_triangle_inequality(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                for k in 0..self.n {
                    if k == i || k == j {
                        continue;
                    }
                    if self.cost(i, j) > self.cost(i, k) + self.cost(k, j) + TRIANGLE_TOL {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }

    /// Relabels vertices: vertex `i` of `self` becomes vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Instance, InstanceError> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(InstanceError::Unsupported {
                field: "permutation",
                value: format!("{perm:?}"),
            });
        }
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cost[perm[i] * n + perm[j]] = self.cost(i, j);
            }
        }
        let coords = self.coords.as_ref().map(|c| {
            let mut out = vec![[0.0; 2]; n];
            for (i, p) in c.iter().enumerate() {
                out[perm[i]] = *p;
            }
            out
        });
        Ok(Instance {
            name: self.name.clone(),
            depot: self.depot.map(|d| perm[d]),
            coords,
            metric: self.metric,
            n,
            cost,
        })
    }

    /// Parses TSPLIB text; see [`parse_tsplib`].
    pub fn parse_tsplib(text: &str) -> Result<Instance, InstanceError> {
        parse_tsplib(text)
    }

    /// Parses the JSON instance format.
    pub fn from_json(text: &str) -> Result<Instance, InstanceError> {
        let raw: InstanceJson =
            serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        let name = raw.name.unwrap_or_else(|| "unnamed".to_string());
        let mut inst = match (raw.cost, raw.coords) {
            (Some(rows), coords) => {
                if let Some(c) = &coords {
                    if c.len() != rows.len() {
                        return Err(InstanceError::DimensionMismatch {
                            field: "coords",
                            expected: rows.len(),
                            found: c.len(),
                        });
                    }
                }
                let metric = raw.metric.unwrap_or(Metric::Explicit);
                let coords = if metric == Metric::Explicit { None } else { coords };
                Self::from_rows(name, &rows, metric, coords)?
            }
            (None, Some(coords)) => {
                let metric = raw.metric.unwrap_or(Metric::Euclidean);
                Self::from_coords(name, coords, metric, None)?
            }
            (None, None) => return Err(InstanceError::Missing("cost or coords")),
        };
        if let Some(n) = raw.n_targets {
            let expected = if raw.depot.is_some() { inst.n.saturating_sub(1) } else { inst.n };
            if n != expected {
                return Err(InstanceError::DimensionMismatch {
                    field: "n_targets",
                    expected,
                    found: n,
                });
            }
        }
        if let Some(d) = raw.depot {
            inst.designate_depot(d)?;
        }
        Ok(inst)
    }

    /// Serializes to the JSON instance format.
    pub fn to_json(&self) -> String {
        let raw = InstanceJson {
            name: Some(self.name.clone()),
            n_targets: Some(self.n_targets()),
            depot: self.depot,
            metric: Some(self.metric),
            coords: self.coords.clone(),
            cost: Some(self.cost_matrix()),
        };
        serde_json::to_string_pretty(&raw).expect("instance serializes")
    }

    /// Serializes to TSPLIB text. Coordinate metrics keep their coordinates;
    /// the others are written as a full explicit matrix.
    pub fn to_tsplib(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NAME : {}", self.name);
        let _ = writeln!(s, "TYPE : TSP");
        let _ = writeln!(s, "DIMENSION : {}", self.n);
        match (self.metric.tsplib_name(), &self.coords) {
            (Some(kind), Some(coords)) => {
                let _ = writeln!(s, "EDGE_WEIGHT_TYPE : {kind}");
                let _ = writeln!(s, "NODE_COORD_SECTION");
                for (i, c) in coords.iter().enumerate() {
                    let _ = writeln!(s, "{} {} {}", i + 1, c[0], c[1]);
                }
            }
            _ => {
                let _ = writeln!(s, "EDGE_WEIGHT_TYPE : EXPLICIT");
                let _ = writeln!(s, "EDGE_WEIGHT_FORMAT : FULL_MATRIX");
                let _ = writeln!(s, "EDGE_WEIGHT_SECTION");
                for i in 0..self.n {
                    let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.cost(i, j))).collect();
                    let _ = writeln!(s, "{}", row.join(" "));
                }
            }
        }
        if let Some(d) = self.depot {
            let _ = writeln!(s, "DEPOT_SECTION\n{}\n-1", d + 1);
        }
        s.push_str("EOF\n");
        s
    }

    /// Loads a TSPLIB (`.tsp`) or JSON (`.json`) file, chosen by extension.
    pub fn load(path: &Path) -> Result<Instance, InstanceError> {
        let text = std::fs::read_to_string(path).map_err(|e| InstanceError::Io(e.to_string()))?;
        let is_json = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            parse_tsplib(&text)
        }
    }
}

fn validate_matrix(n: usize, cost: &[f64]) -> Result<(), InstanceError> {
    for i in 0..n {
        let d = cost[i * n + i];
        if d != 0.0 {
            return Err(InstanceError::NonzeroDiagonal { i, value: d });
        }
        for j in 0..n {
            let a = cost[i * n + j];
            if !a.is_finite() || a < 0.0 {
                return Err(InstanceError::InvalidCost { i, j, value: a });
            }
            if j > i {
                let b = cost[j * n + i];
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(InstanceError::Asymmetric { i, j, a, b });
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    n_targets: Option<usize>,
    #[serde(default)]
    depot: Option<usize>,
    #[serde(default)]
    metric: Option<Metric>,
    #[serde(default)]
    coords: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    cost: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum WeightFormat {
    Full,
    UpperRow,
    LowerRow,
    UpperDiagRow,
    LowerDiagRow,
}

impl WeightFormat {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "FULL_MATRIX" => WeightFormat::Full,
            "UPPER_ROW" | "LOWER_COL" => WeightFormat::UpperRow,
            "LOWER_ROW" | "UPPER_COL" => WeightFormat::LowerRow,
            "UPPER_DIAG_ROW" | "LOWER_DIAG_COL" => WeightFormat::UpperDiagRow,
            "LOWER_DIAG_ROW" | "UPPER_DIAG_COL" => WeightFormat::LowerDiagRow,
            _ => return None,
        })
    }

    fn expected(self, n: usize) -> usize {
        match self {
            WeightFormat::Full => n * n,
            WeightFormat::UpperRow | WeightFormat::LowerRow => n * n.saturating_sub(1) / 2,
            WeightFormat::UpperDiagRow | WeightFormat::LowerDiagRow => n * (n + 1) / 2,
        }
    }

    /// (row, col) pairs in file order.
    fn positions(self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.expected(n));
        for i in 0..n {
            let cols: Box<dyn Iterator<Item = usize>> = match self {
                WeightFormat::Full => Box::new(0..n),
                WeightFormat::UpperRow => Box::new((i + 1)..n),
                WeightFormat::LowerRow => Box::new(0..i),
                WeightFormat::UpperDiagRow => Box::new(i..n),
                WeightFormat::LowerDiagRow => Box::new(0..=i),
            };
            out.extend(cols.map(|j| (i, j)));
        }
        out
    }
}

fn is_keyword_line(line: &str) -> bool {
    line.trim_start()
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic())
}

fn parse_number(tok: &str, field: &str, line: usize) -> Result<f64, InstanceError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| InstanceError::Parse {
            field: field.to_string(),
            line,
            reason: format!("`{tok}` is not a finite number"),
        })
}

/// Parses TSPLIB text with `EDGE_WEIGHT_TYPE` `EUC_2D`, `GEO` or `EXPLICIT`.
///
/// Costs follow the TSPLIB rounding rules. No depot is designated unless the
/// file carries a `DEPOT_SECTION`; every parsed node is otherwise a target.
pub fn parse_tsplib(text: &str) -> Result<Instance, InstanceError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut name = None;
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut weight_format: Option<WeightFormat> = None;
    let mut coords: Option<Vec<[f64; 2]>> = None;
    let mut weights: Option<(usize, Vec<f64>)> = None;
    let mut depots: Vec<usize> = Vec::new();

    let mut idx = 0;
    while idx < lines.len() {
        let lineno = idx + 1;
        let line = lines[idx].trim();
        idx += 1;
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (line.split_whitespace().next().unwrap_or(""), None),
        };
        let header_value = |field: &str| {
            value.filter(|v| !v.is_empty()).ok_or_else(|| InstanceError::Parse {
                field: field.to_string(),
                line: lineno,
                reason: "missing value".into(),
            })
        };
        match key {
            "NAME" => name = Some(header_value("NAME")?.to_string()),
            "COMMENT" | "DISPLAY_DATA_TYPE" | "NODE_COORD_TYPE" | "CAPACITY" => {}
            "TYPE" => {
                let t = header_value("TYPE")?;
                if t != "TSP" {
                    return Err(InstanceError::Unsupported {
                        field: "TYPE",
                        value: t.to_string(),
                    });
                }
            }
            "DIMENSION" => {
                let v = header_value("DIMENSION")?;
                let n: usize = v.parse().map_err(|_| InstanceError::Parse {
                    field: "DIMENSION".into(),
                    line: lineno,
                    reason: format!("`{v}` is not a count"),
                })?;
                if n > MAX_DIMENSION {
                    return Err(InstanceError::TooLarge(n));
                }
                dimension = Some(n);
            }
            "EDGE_WEIGHT_TYPE" => {
                let v = header_value("EDGE_WEIGHT_TYPE")?;
                if !matches!(v, "EUC_2D" | "GEO" | "EXPLICIT") {
                    return Err(InstanceError::UnsupportedEdgeWeightType(v.to_string()));
                }
                weight_type = Some(v.to_string());
            }
            "EDGE_WEIGHT_FORMAT" => {
                let v = header_value("EDGE_WEIGHT_FORMAT")?;
                if v == "FUNCTION" {
                    continue;
                }
                weight_format = Some(WeightFormat::parse(v).ok_or_else(|| InstanceError::Unsupported {
                    field: "EDGE_WEIGHT_FORMAT",
                    value: v.to_string(),
                })?);
            }
            "NODE_COORD_SECTION" => {
                let n = dimension.ok_or(InstanceError::Missing("DIMENSION before NODE_COORD_SECTION"))?;
                let mut slots: Vec<Option<[f64; 2]>> = vec![None; n];
                let mut found = 0;
                while idx < lines.len() && !is_keyword_line(lines[idx]) {
                    let lno = idx + 1;
                    let toks: Vec<&str> = lines[idx].split_whitespace().collect();
                    idx += 1;
                    if toks.is_empty() {
                        continue;
                    }
                    if toks.len() != 3 {
                        return Err(InstanceError::Parse {
                            field: "NODE_COORD_SECTION".into(),
                            line: lno,
                            reason: format!("expected `id x y`, got {} tokens", toks.len()),
                        });
                    }
                    let id: usize = toks[0].parse().map_err(|_| InstanceError::Parse {
                        field: "NODE_COORD_SECTION".into(),
                        line: lno,
                        reason: format!("bad node id `{}`", toks[0]),
                    })?;
                    found += 1;
                    if id == 0 || id > n {
                        return Err(InstanceError::DimensionMismatch {
                            field: "NODE_COORD_SECTION",
                            expected: n,
                            found: id,
                        });
                    }
                    let x = parse_number(toks[1], "NODE_COORD_SECTION", lno)?;
                    let y = parse_number(toks[2], "NODE_COORD_SECTION", lno)?;
                    if slots[id - 1].replace([x, y]).is_some() {
                        return Err(InstanceError::Parse {
                            field: "NODE_COORD_SECTION".into(),
                            line: lno,
                            reason: format!("duplicate node id {id}"),
                        });
                    }
                }
                if found != n {
                    return Err(InstanceError::DimensionMismatch {
                        field: "NODE_COORD_SECTION",
                        expected: n,
                        found,
                    });
                }
                coords = Some(slots.into_iter().map(|s| s.unwrap_or_default()).collect());
            }
            "EDGE_WEIGHT_SECTION" => {
                let mut vals = Vec::new();
                let start = lineno;
                while idx < lines.len() && !is_keyword_line(lines[idx]) {
                    for tok in lines[idx].split_whitespace() {
                        vals.push(parse_number(tok, "EDGE_WEIGHT_SECTION", idx + 1)?);
                    }
                    idx += 1;
                }
                weights = Some((start, vals));
            }
            "DISPLAY_DATA_SECTION" => {
                while idx < lines.len() && !is_keyword_line(lines[idx]) {
                    idx += 1;
                }
            }
            "DEPOT_SECTION" => {
                let mut done = false;
                while idx < lines.len() && !is_keyword_line(lines[idx]) && !done {
                    for tok in lines[idx].split_whitespace() {
                        let v: i64 = tok.parse().map_err(|_| InstanceError::Parse {
                            field: "DEPOT_SECTION".into(),
                            line: idx + 1,
                            reason: format!("bad depot id `{tok}`"),
                        })?;
                        if v == -1 {
                            done = true;
                            break;
                        }
                        if v < 1 {
                            return Err(InstanceError::Parse {
                                field: "DEPOT_SECTION".into(),
                                line: idx + 1,
                                reason: format!("bad depot id `{tok}`"),
                            });
                        }
                        depots.push(v as usize - 1);
                    }
                    idx += 1;
                }
            }
            "EOF" => break,
            other => {
                if value.is_none() {
                    return Err(InstanceError::Parse {
                        field: other.chars().take(40).collect(),
                        line: lineno,
                        reason: "unrecognized header line".into(),
                    });
                }
            }
        }
    }

    let n = dimension.ok_or(InstanceError::Missing("DIMENSION"))?;
    let name = name.unwrap_or_else(|| "unnamed".to_string());
    let kind = weight_type.ok_or(InstanceError::Missing("EDGE_WEIGHT_TYPE"))?;
    let mut inst = match kind.as_str() {
        "EUC_2D" | "GEO" => {
            let coords = coords.ok_or(InstanceError::Missing("NODE_COORD_SECTION"))?;
            let metric = if kind == "GEO" { Metric::Geo } else { Metric::Euc2d };
            Instance::from_coords(name, coords, metric, None)?
        }
        _ => {
            let format = weight_format.ok_or(InstanceError::Missing("EDGE_WEIGHT_FORMAT"))?;
            let (line, vals) = weights.ok_or(InstanceError::Missing("EDGE_WEIGHT_SECTION"))?;
            let expected = format.expected(n);
            if vals.len() != expected {
                return Err(InstanceError::DimensionMismatch {
                    field: "EDGE_WEIGHT_SECTION",
                    expected,
                    found: vals.len(),
                });
            }
            let mut rows = vec![vec![0.0; n]; n];
            let mut full = vec![vec![0.0; n]; n];
            for ((i, j), v) in format.positions(n).into_iter().zip(vals) {
                if v < 0.0 {
                    return Err(InstanceError::Parse {
                        field: "EDGE_WEIGHT_SECTION".into(),
                        line,
                        reason: format!("negative weight {v} at ({}, {})", i + 1, j + 1),
                    });
                }
                full[i][j] = v;
                if format != WeightFormat::Full && i != j {
                    full[j][i] = v;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        rows[i][j] = 0.5 * (full[i][j] + full[j][i]);
                    }
                }
            }
            Instance::from_rows(name, &rows, Metric::Explicit, None)?
        }
    };
    match depots.as_slice() {
        [] => {}
        [d] => inst.designate_depot(*d)?,
        _ => {
            return Err(InstanceError::Unsupported {
                field: "DEPOT_SECTION",
                value: format!("{} depots", depots.len()),
            })
        }
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Instance {
        Instance::from_coords(
            "sq",
            vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
            Metric::Euclidean,
            None,
        )
        .unwrap()
    }

    #[test]
    fn euc2d_three_four_five() {
        let text = "NAME: t\nTYPE: TSP\nDIMENSION: 2\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 3 4\nEOF\n";
        let inst = parse_tsplib(text).unwrap();
        assert_eq!(inst.cost(0, 1), 5.0);
        assert_eq!(inst.n_targets(), 2);
        assert_eq!(inst.depot(), None);
    }

    #[test]
    fn euc2d_rounds_to_nearest() {
        let text = "DIMENSION : 3\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n3 1.5 0\n";
        let inst = parse_tsplib(text).unwrap();
        // sqrt(2) = 1.414 -> 1, 1.5 -> 2
        assert_eq!(inst.cost(0, 1), 1.0);
        assert_eq!(inst.cost(0, 2), 2.0);
    }

    #[test]
    fn explicit_full_matrix_reads_through() {
        let text = "NAME: m\nTYPE: TSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 1 2\n1 0 3\n2 3 0\nEOF";
        let inst = parse_tsplib(text).unwrap();
        assert_eq!(
            inst.cost_matrix(),
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 3.0], vec![2.0, 3.0, 0.0]]
        );
        assert!(inst.coords().is_none());
    }

    #[test]
    fn explicit_triangular_formats_agree() {
        let upper = "DIMENSION: 3\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: UPPER_ROW\nEDGE_WEIGHT_SECTION\n1 2\n3\nEOF";
        let lower_diag = "DIMENSION: 3\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: LOWER_DIAG_ROW\nEDGE_WEIGHT_SECTION\n0 1 0 2 3 0\nEOF";
        let a = parse_tsplib(upper).unwrap();
        let b = parse_tsplib(lower_diag).unwrap();
        assert_eq!(a.cost_matrix(), b.cost_matrix());
        assert_eq!(a.cost(1, 2), 3.0);
    }

    #[test]
    fn unsupported_weight_type_is_named() {
        let text = "DIMENSION: 2\nEDGE_WEIGHT_TYPE: ATT\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n";
        assert_eq!(
            parse_tsplib(text).unwrap_err(),
            InstanceError::UnsupportedEdgeWeightType("ATT".into())
        );
    }

    #[test]
    fn dimension_mismatch_names_section() {
        let text = "DIMENSION: 3\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF";
        match parse_tsplib(text).unwrap_err() {
            InstanceError::DimensionMismatch { field, expected, found } => {
                assert_eq!(field, "NODE_COORD_SECTION");
                assert_eq!((expected, found), (3, 2));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn malformed_header_names_field() {
        let text = "DIMENSION: many\nEDGE_WEIGHT_TYPE: EUC_2D\n";
        match parse_tsplib(text).unwrap_err() {
            InstanceError::Parse { field, line, .. } => {
                assert_eq!(field, "DIMENSION");
                assert_eq!(line, 1);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn geo_same_point_apart_is_positive_and_diagonal_zero() {
        let inst = Instance::from_coords(
            "g",
            vec![[16.47, 96.10], [16.47, 94.44]],
            Metric::Geo,
            None,
        )
        .unwrap();
        assert_eq!(inst.cost(0, 0), 0.0);
        assert!(inst.cost(0, 1) > 0.0);
        assert_eq!(inst.cost(0, 1), inst.cost(0, 1).trunc());
    }

    #[test]
    fn centroid_of_square() {
        let inst = square().add_centroid_depot().unwrap();
        assert_eq!(inst.depot(), Some(0));
        assert_eq!(inst.coords().unwrap()[0], [1.0, 1.0]);
        assert_eq!(inst.n_vertices(), 5);
        assert_eq!(inst.n_targets(), 4);
        assert!((inst.cost(0, 1) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_single_target() {
        let inst = Instance::from_coords("one", vec![[5.0, 5.0]], Metric::Euc2d, None)
            .unwrap()
            .add_centroid_depot()
            .unwrap();
        assert_eq!(inst.coords().unwrap()[0], [5.0, 5.0]);
        assert_eq!(inst.cost(0, 1), 0.0);
    }

    #[test]
    fn centroid_keeps_target_costs() {
        let base = square();
        let with = base.add_centroid_depot().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(base.cost(i, j), with.cost(i + 1, j + 1));
            }
        }
    }

    #[test]
    fn centroid_needs_coordinates() {
        let inst = parse_tsplib("DIMENSION: 2\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 1 1 0\n").unwrap();
        assert!(matches!(
            inst.add_centroid_depot(),
            Err(InstanceError::NoCoordinates(_))
        ));
    }

    #[test]
    fn make_instance_validation() {
        assert!(Instance::from_matrix(vec![vec![0.0, 0.0], vec![0.0, 0.0]], 0).is_ok());
        assert!(matches!(
            Instance::from_matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]], 0),
            Err(InstanceError::Asymmetric { .. })
        ));
        let ones = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let inst = Instance::from_matrix(ones, 0).unwrap();
        assert_eq!(inst.n_targets(), 2);
        assert!(matches!(
            Instance::from_matrix(vec![vec![0.0, -1.0], vec![-1.0, 0.0]], 0),
            Err(InstanceError::InvalidCost { .. })
        ));
        assert!(matches!(
            Instance::from_matrix(vec![vec![1.0, 1.0], vec![1.0, 0.0]], 0),
            Err(InstanceError::NonzeroDiagonal { .. })
        ));
        assert!(matches!(
            Instance::from_matrix(vec![vec![0.0]], 3),
            Err(InstanceError::DepotOutOfRange { .. })
        ));
    }

    #[test]
    fn triangle_inequality_report() {
        assert!(square().check_triangle_inequality().is_empty());
        let ones = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert!(Instance::from_matrix(ones, 0).unwrap().check_triangle_inequality().is_empty());
        let bad = vec![vec![0.0, 1.0, 10.0], vec![1.0, 0.0, 1.0], vec![10.0, 1.0, 0.0]];
        let v = Instance::from_matrix(bad, 0).unwrap().check_triangle_inequality();
        assert!(v.contains(&(0, 2, 1)));
    }

    #[test]
    fn json_roundtrip_and_depot() {
        let inst = square().add_centroid_depot().unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        let minimal = r#"{"coords": [[0,0],[1,0]], "depot": 0}"#;
        let m = Instance::from_json(minimal).unwrap();
        assert_eq!(m.metric(), Metric::Euclidean);
        assert_eq!(m.cost(0, 1), 1.0);
        assert!(Instance::from_json(r#"{"name": "x"}"#).is_err());
    }

    #[test]
    fn tsplib_depot_section_roundtrip() {
        let inst = Instance::from_coords(
            "d",
            vec![[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]],
            Metric::Euc2d,
            Some(1),
        )
        .unwrap();
        let back = parse_tsplib(&inst.to_tsplib()).unwrap();
        assert_eq!(back.depot(), Some(1));
        assert_eq!(back.cost_matrix(), inst.cost_matrix());
    }
}
