//! Finite metric spaces: integer line metrics, general distance tables and
//! the star metric used by the adaptive adversary.

use std::fmt::Write as _;

use thiserror::Error;

use crate::{Cost, PointId, REL_TOL};

/// Largest admissible line coordinate magnitude. With `|x| <= 2^40` a single
/// distance fits in 41 bits and sums over 10^4 arcs stay below 2^55, far from
/// `i64` overflow even after multiplying by small constants (3·OPT checks).
pub const MAX_LINE_COORD: i64 = 1 << 40;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point {0} is out of range (metric has {1} points)")]
    InvalidPoint(PointId, usize),
    #[error("duplicate coordinate {coord} for points {a} and {b}")]
    DuplicateCoordinate { a: PointId, b: PointId, coord: i64 },
    #[error("coordinate {0} exceeds the supported magnitude 2^40")]
    CoordinateTooLarge(i64),
    #[error("distance table is not square: row {row} has {len} entries, expected {n}")]
    RaggedTable { row: usize, len: usize, n: usize },
    #[error("distance d[{i}][{j}] = {value} is not a finite nonnegative number")]
    BadDistance { i: usize, j: usize, value: f64 },
    #[error("metric needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("metric validation failed: {0}")]
    Invalid(MetricViolation),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// First violation found by [`validate_general`], if any.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    NonZeroDiagonal { i: usize, value: f64 },
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    Triangle { i: usize, j: usize, k: usize, direct: f64, via: f64 },
}

impl std::fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricViolation::NonZeroDiagonal { i, value } => {
                write!(f, "d[{i}][{i}] = {value}, expected 0")
            }
            MetricViolation::Asymmetric { i, j, dij, dji } => {
                write!(f, "d[{i}][{j}] = {dij} but d[{j}][{i}] = {dji}")
            }
            MetricViolation::Triangle { i, j, k, direct, via } => {
                write!(f, "triangle violated on ({i},{j},{k}): {direct} > {via}")
            }
        }
    }
}

/// Distance access used by the solver and the online algorithms.
///
/// `dist` assumes valid ids; the checked entry point is [`distance`].
pub trait Metric {
    type C: Cost;
    fn num_points(&self) -> usize;
    fn dist(&self, a: PointId, b: PointId) -> Self::C;
}

/// Checked distance query: symmetric, zero on the diagonal.
pub fn distance<M: Metric>(m: &M, a: PointId, b: PointId) -> Result<M::C, MetricError> {
    for p in [a, b] {
        if p.idx() >= m.num_points() {
            return Err(MetricError::InvalidPoint(p, m.num_points()));
        }
    }
    Ok(m.dist(a, b))
}

/// Points on the integer line; distance is `|loc(a) - loc(b)|` computed in
/// integer arithmetic. Coordinates must be pairwise distinct.
#[derive(Debug, Clone)]
pub struct LineMetric {
    locs: Vec<i64>,
}

impl LineMetric {
    pub fn new(locs: Vec<i64>) -> Result<Self, MetricError> {
        let mut seen = std::collections::BTreeMap::new();
        for (i, &x) in locs.iter().enumerate() {
            if x.abs() > MAX_LINE_COORD {
                return Err(MetricError::CoordinateTooLarge(x));
            }
            if let Some(&prev) = seen.get(&x) {
                return Err(MetricError::DuplicateCoordinate {
                    a: PointId(prev),
                    b: PointId(i as u32),
                    coord: x,
                });
            }
            seen.insert(x, i as u32);
        }
        Ok(LineMetric { locs })
    }

    pub fn loc(&self, p: PointId) -> i64 {
        self.locs[p.idx()]
    }

    pub fn locs(&self) -> &[i64] {
        &self.locs
    }
}

impl Metric for LineMetric {
    type C = i64;

    fn num_points(&self) -> usize {
        self.locs.len()
    }

    fn dist(&self, a: PointId, b: PointId) -> i64 {
        (self.locs[a.idx()] - self.locs[b.idx()]).abs()
    }
}

/// Dense symmetric distance table. Ties (distinct points at distance zero)
/// are allowed.
#[derive(Debug, Clone)]
pub struct GeneralMetric {
    n: usize,
    d: Vec<f64>,
}

impl GeneralMetric {
    /// Builds and validates the table: symmetry, zero diagonal and the
    /// triangle inequality (relative tolerance 1e-9).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::RaggedTable { row: i, len: row.len(), n });
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(MetricError::BadDistance { i, j, value: x });
                }
                d.push(x);
            }
        }
        let m = GeneralMetric { n, d };
        match validate_general(&m) {
            None => Ok(m),
            Some(v) => Err(MetricError::Invalid(v)),
        }
    }

    /// Builds the table from points in the plane under Euclidean distance.
    pub fn from_plane_points(pts: &[(f64, f64)]) -> Result<Self, MetricError> {
        let n = pts.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                rows[i][j] = (dx * dx + dy * dy).sqrt();
            }
        }
        GeneralMetric::new(rows)
    }
}

impl Metric for GeneralMetric {
    type C = f64;

    fn num_points(&self) -> usize {
        self.n
    }

    fn dist(&self, a: PointId, b: PointId) -> f64 {
        self.d[a.idx() * self.n + b.idx()]
    }
}

/// Reports the first symmetry/diagonal/triangle violation, or `None` if the
/// table is a metric (up to relative tolerance 1e-9).
pub fn validate_general(m: &GeneralMetric) -> Option<MetricViolation> {
    let n = m.n;
    for i in 0..n {
        let dii = m.dist(PointId(i as u32), PointId(i as u32));
        if dii != 0.0 {
            return Some(MetricViolation::NonZeroDiagonal { i, value: dii });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = m.dist(PointId(i as u32), PointId(j as u32));
            let dji = m.dist(PointId(j as u32), PointId(i as u32));
            if !dij.approx_eq(dji) {
                return Some(MetricViolation::Asymmetric { i, j, dij, dji });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let dij = m.dist(PointId(i as u32), PointId(j as u32));
            for k in 0..n {
                let dik = m.dist(PointId(i as u32), PointId(k as u32));
                let djk = m.dist(PointId(j as u32), PointId(k as u32));
                let via = dij + djk;
                if dik > via + REL_TOL * via.max(1.0) {
                    return Some(MetricViolation::Triangle { i, j: k, k: j, direct: dik, via });
                }
            }
        }
    }
    None
}

/// Star with `n_leaves` leaves: point 0 is the center at distance 1 from
/// every leaf, leaves are at distance 2 from each other.
pub fn star_metric(n_leaves: usize) -> GeneralMetric {
    let n = n_leaves + 1;
    let mut rows = vec![vec![0.0; n]; n];
    for i in 1..n {
        rows[0][i] = 1.0;
        rows[i][0] = 1.0;
        for j in 1..n {
            if i != j {
                rows[i][j] = 2.0;
            }
        }
    }
    GeneralMetric::new(rows).expect("star table is a metric")
}

/// Max pairwise distance divided by min nonzero pairwise distance.
pub fn aspect_ratio<M: Metric>(m: &M) -> Result<f64, MetricError> {
    if m.num_points() < 2 {
        return Err(MetricError::TooFewPoints { needed: 2, got: m.num_points() });
    }
    let mut max = 0.0_f64;
    let mut min_nz = f64::INFINITY;
    for i in 0..m.num_points() {
        for j in (i + 1)..m.num_points() {
            let d = m.dist(PointId(i as u32), PointId(j as u32)).to_f64();
            max = max.max(d);
            if d > 0.0 {
                min_nz = min_nz.min(d);
            }
        }
    }
    if !min_nz.is_finite() {
        // all points coincide
        return Ok(1.0);
    }
    Ok((max / min_nz).max(1.0))
}

/// A parsed metric of either kind, as read from the textual metric format.
#[derive(Debug, Clone)]
pub enum AnyMetric {
    Line(LineMetric),
    General(GeneralMetric),
}

impl AnyMetric {
    pub fn num_points(&self) -> usize {
        match self {
            AnyMetric::Line(m) => m.num_points(),
            AnyMetric::General(m) => m.num_points(),
        }
    }
}

/// Parses the line-oriented metric format:
///
/// ```text
/// metric line            metric general         metric star
/// point <id> <coord>     n <count>              n <leaves>
/// ...                    <row of n distances>
///                        ... (n rows)
/// ```
///
/// `#` starts a comment, blank lines are ignored. Line point ids must be
/// dense `0..n`.
pub fn parse_metric(text: &str) -> Result<AnyMetric, MetricError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (lno, header) = lines
        .next()
        .ok_or_else(|| MetricError::Parse { line: 0, msg: "empty metric".into() })?;
    let kind = header
        .strip_prefix("metric")
        .map(str::trim)
        .ok_or_else(|| MetricError::Parse { line: lno, msg: format!("expected `metric <kind>`, got `{header}`") })?;
    match kind {
        "line" => {
            let mut pts: Vec<(u32, i64)> = Vec::new();
            for (lno, l) in lines {
                let mut it = l.split_whitespace();
                let tag = it.next().unwrap_or("");
                if tag != "point" {
                    return Err(MetricError::Parse { line: lno, msg: format!("expected `point`, got `{tag}`") });
                }
                let id: u32 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| MetricError::Parse { line: lno, msg: "bad point id".into() })?;
                let coord: i64 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| MetricError::Parse { line: lno, msg: "bad coordinate".into() })?;
                pts.push((id, coord));
            }
            pts.sort_by_key(|&(id, _)| id);
            for (i, &(id, _)) in pts.iter().enumerate() {
                if id as usize != i {
                    return Err(MetricError::Parse {
                        line: 0,
                        msg: format!("line point ids must be dense 0..n, missing or duplicate id {i}"),
                    });
                }
            }
            Ok(AnyMetric::Line(LineMetric::new(pts.into_iter().map(|(_, c)| c).collect())?))
        }
        "general" => {
            let (lno, nline) = lines
                .next()
                .ok_or_else(|| MetricError::Parse { line: 0, msg: "missing `n` line".into() })?;
            let n: usize = nline
                .strip_prefix('n')
                .map(str::trim)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MetricError::Parse { line: lno, msg: format!("expected `n <count>`, got `{nline}`") })?;
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let (lno, l) = lines
                    .next()
                    .ok_or_else(|| MetricError::Parse { line: 0, msg: "missing distance row".into() })?;
                let row: Result<Vec<f64>, _> = l.split_whitespace().map(str::parse).collect();
                let row = row.map_err(|e| MetricError::Parse { line: lno, msg: format!("bad distance: {e}") })?;
                rows.push(row);
            }
            Ok(AnyMetric::General(GeneralMetric::new(rows)?))
        }
        "star" => {
            let (lno, nline) = lines
                .next()
                .ok_or_else(|| MetricError::Parse { line: 0, msg: "missing `n` line".into() })?;
            let n: usize = nline
                .strip_prefix('n')
                .map(str::trim)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MetricError::Parse { line: lno, msg: format!("expected `n <leaves>`, got `{nline}`") })?;
            Ok(AnyMetric::General(star_metric(n)))
        }
        other => Err(MetricError::Parse { line: lno, msg: format!("unknown metric kind `{other}`") }),
    }
}

/// Writes a metric in the format accepted by [`parse_metric`].
pub fn format_metric(m: &AnyMetric) -> String {
    let mut out = String::new();
    match m {
        AnyMetric::Line(m) => {
            out.push_str("metric line\n");
            for (i, &c) in m.locs().iter().enumerate() {
                let _ = writeln!(out, "point {i} {c}");
            }
        }
        AnyMetric::General(m) => {
            out.push_str("metric general\n");
            let _ = writeln!(out, "n {}", m.num_points());
            for i in 0..m.num_points() {
                let row: Vec<String> = (0..m.num_points())
                    .map(|j| format!("{}", m.dist(PointId(i as u32), PointId(j as u32))))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
    }
    out
}
