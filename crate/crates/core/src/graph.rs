//! Signature graphs and all-pairs shortest paths.
//!
//! Items are vertices of a complete weighted graph; shortest-path lengths
//! approximate geodesic distance on the underlying manifold.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergences;
use crate::error::{Error, Result};
use crate::features::Signature;
use crate::geometry::{gd_skld, ManifoldPoint};
use crate::retrieval::{signature_distance, Aggregation, PairMeasure};

/// How a pair of items is turned into an edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeWeight {
    Skld,
    /// √(2·SKLD), locally the Fisher-Rao line element.
    #[default]
    SqrtTwoSkld,
    /// One-directional KL(row ‖ column); yields an asymmetric matrix.
    KldDirected,
}

impl EdgeWeight {
    pub const ALL: [EdgeWeight; 3] = [EdgeWeight::Skld, EdgeWeight::SqrtTwoSkld, EdgeWeight::KldDirected];

    pub fn name(self) -> &'static str {
        match self {
            EdgeWeight::Skld => "skld",
            EdgeWeight::SqrtTwoSkld => "sqrt-two-skld",
            EdgeWeight::KldDirected => "kld-directed",
        }
    }

    pub fn measure(self) -> PairMeasure {
        match self {
            EdgeWeight::Skld => PairMeasure::Skld,
            EdgeWeight::SqrtTwoSkld => PairMeasure::GdSkld,
            EdgeWeight::KldDirected => PairMeasure::Kld,
        }
    }

    pub fn is_symmetric(self) -> bool {
        self != EdgeWeight::KldDirected
    }

    /// Weight between two manifold points.
    pub fn between(self, a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
        Ok(match self {
            EdgeWeight::Skld => divergences::skld(a, b)?.value(),
            EdgeWeight::SqrtTwoSkld => gd_skld(a, b)?,
            EdgeWeight::KldDirected => divergences::kld(a, b)?.value(),
        })
    }
}

impl fmt::Display for EdgeWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeWeight::ALL.into_iter().find(|w| w.name().eq_ignore_ascii_case(s)).ok_or_else(|| {
            Error::Invalid(format!("unknown edge weight '{s}' (expected skld, sqrt-two-skld, kld-directed)"))
        })
    }
}

/// Square matrix of pairwise weights with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    d: Array2<f64>,
}

impl DistanceMatrix {
    /// Validates shape, zero diagonal and finite nonnegative entries.
    pub fn new(labels: Vec<String>, d: Array2<f64>) -> Result<Self> {
        let n = labels.len();
        if d.dim() != (n, n) {
            return Err(Error::Invalid(format!("{}x{} matrix for {n} labels", d.nrows(), d.ncols())));
        }
        for ((i, j), &v) in d.indexed_iter() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!("entry ({i}, {j}) = {v} is not a finite nonnegative weight")));
            }
            if i == j && v != 0.0 {
                return Err(Error::Invalid(format!("diagonal entry {i} is {v}, expected 0")));
            }
        }
        Ok(Self { labels, d })
    }

    /// Matrix with `labels` "0", "1", ... .
    pub fn unlabeled(d: Array2<f64>) -> Result<Self> {
        let labels = (0..d.nrows()).map(|i| i.to_string()).collect();
        Self::new(labels, d)
    }

    /// Fill every off-diagonal entry with `weight(i, j)`, in parallel. When
    /// `symmetric`, only the upper triangle is evaluated and mirrored.
    pub fn from_fn<F>(labels: Vec<String>, symmetric: bool, weight: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let n = labels.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| if symmetric { j > i } else { j != i }).map(move |j| (i, j)))
            .collect();
        let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| weight(i, j)).collect::<Result<_>>()?;
        let mut d = Array2::zeros((n, n));
        for (&(i, j), &v) in pairs.iter().zip(&values) {
            d[[i, j]] = v;
            if symmetric {
                d[[j, i]] = v;
            }
        }
        Self::new(labels, d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[[i, j]]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..i).all(|j| self.d[[i, j]] == self.d[[j, i]]))
    }

    /// Row-major CSV with a header row of labels.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.labels).map_err(csv_error)?;
        for row in self.d.rows() {
            out.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (labels, d) = read_csv_matrix(r)?;
        Self::new(labels, d)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn write_dmat<W: Write>(&self, w: W) -> Result<()> {
        write_dmat(&self.d, w)
    }

    /// Binary matrices carry no labels; rows are labeled by index.
    pub fn read_dmat<R: Read>(r: R) -> Result<Self> {
        Self::unlabeled(read_dmat(r)?)
    }
}

/// Labels and entries of a CSV matrix file, without checking that the
/// entries form a distance matrix.
pub fn read_csv_matrix<R: Read>(r: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut input = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let labels: Vec<String> = input.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    let n = labels.len();
    let mut values = Vec::with_capacity(n * n);
    for (row, record) in input.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.len() != n {
            return Err(Error::CorruptFile(format!("row {row} has {} fields, expected {n}", record.len())));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::CorruptFile(format!("row {row}: '{field}' is not a number")))?;
            values.push(v);
        }
    }
    if values.len() != n * n {
        return Err(Error::CorruptFile(format!("{} rows for {n} labels", values.len() / n.max(1))));
    }
    let d = Array2::from_shape_vec((n, n), values).map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok((labels, d))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::CorruptFile(format!("{other:?}")),
    }
}

pub const DMAT_MAGIC: &[u8; 4] = b"DMAT";
pub const DMAT_VERSION: u8 = 1;

/// "DMAT", version byte, n as u64 LE, then n² f64 LE in row-major order.
pub fn write_dmat<W: Write>(d: &Array2<f64>, w: W) -> Result<()> {
    if d.nrows() != d.ncols() {
        return Err(Error::Invalid("DMAT holds square matrices only".into()));
    }
    let mut w = BufWriter::new(w);
    w.write_all(DMAT_MAGIC)?;
    w.write_all(&[DMAT_VERSION])?;
    w.write_all(&(d.nrows() as u64).to_le_bytes())?;
    for v in d.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dmat<R: Read>(r: R) -> Result<Array2<f64>> {
    let mut r = BufReader::new(r);
    let mut header = [0u8; 13];
    r.read_exact(&mut header).map_err(|_| Error::CorruptFile("truncated DMAT header".into()))?;
    if &header[..4] != DMAT_MAGIC {
        return Err(Error::CorruptFile("missing DMAT magic".into()));
    }
    if header[4] != DMAT_VERSION {
        return Err(Error::VersionMismatch(format!("DMAT version {} (supported: {DMAT_VERSION})", header[4])));
    }
    let n = u64::from_le_bytes(header[5..13].try_into().expect("8 bytes")) as usize;
    let count = n.checked_mul(n).ok_or_else(|| Error::CorruptFile(format!("matrix size {n} overflows")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::CorruptFile(format!("expected {} payload bytes, found {}", count * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Array2::from_shape_vec((n, n), values).map_err(|e| Error::CorruptFile(e.to_string()))
}

/// Pairwise matrix over signatures, each entry aggregated over subbands.
pub fn build_distance_matrix(
    labels: Vec<String>,
    signatures: &[Signature],
    edge_weight: EdgeWeight,
    aggregation: Aggregation,
) -> Result<DistanceMatrix> {
    if signatures.len() < 2 {
        return Err(Error::Invalid("a distance matrix needs at least 2 signatures".into()));
    }
    if labels.len() != signatures.len() {
        return Err(Error::Invalid(format!("{} labels for {} signatures", labels.len(), signatures.len())));
    }
    let first = &signatures[0];
    for s in signatures {
        if s.family != first.family {
            return Err(Error::FamilyMismatch(first.family, s.family));
        }
        if s.params.len() != first.params.len() {
            return Err(Error::StructureMismatch(format!(
                "signatures with {} and {} subbands",
                first.params.len(),
                s.params.len()
            )));
        }
    }
    DistanceMatrix::from_fn(labels, edge_weight.is_symmetric(), |i, j| {
        signature_distance(&signatures[i], &signatures[j], edge_weight.measure(), aggregation)
    })
}

/// Pairwise matrix over single manifold points.
pub fn build_point_matrix(points: &[ManifoldPoint], edge_weight: EdgeWeight) -> Result<DistanceMatrix> {
    let labels = (0..points.len()).map(|i| i.to_string()).collect();
    DistanceMatrix::from_fn(labels, edge_weight.is_symmetric(), |i, j| edge_weight.between(&points[i], &points[j]))
}

/// Which edges of the complete graph take part in relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sparsity {
    #[default]
    Complete,
    /// Keep edge i–j only when j is among the k nearest of i or vice versa.
    /// Disconnected pairs end with infinite distance.
    Knn(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct FwOptions {
    pub with_paths: bool,
    pub sparsity: Sparsity,
    /// Rows are relaxed in parallel from this size upward.
    pub parallel_threshold: usize,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { with_paths: false, sparsity: Sparsity::Complete, parallel_threshold: 512 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathResult {
    pub dist: Array2<f64>,
    /// `next[[i, j]]` is the vertex after i on a shortest path to j.
    pub next: Option<Array2<usize>>,
}

impl ShortestPathResult {
    pub fn len(&self) -> usize {
        self.dist.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vertex sequence from `i` to `j`; `None` without a next-hop matrix or
    /// when `j` is unreachable.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let next = self.next.as_ref()?;
        if !self.dist[[i, j]].is_finite() {
            return None;
        }
        let mut out = vec![i];
        let mut at = i;
        while at != j {
            at = next[[at, j]];
            out.push(at);
            if out.len() > self.len() {
                return None;
            }
        }
        Some(out)
    }

    pub fn validate(&self) -> MetricityReport {
        validate_metricity(&self.dist)
    }
}

pub fn floyd_warshall(d: &DistanceMatrix) -> Result<ShortestPathResult> {
    floyd_warshall_with(d, FwOptions::default())
}

pub fn floyd_warshall_with(d: &DistanceMatrix, opts: FwOptions) -> Result<ShortestPathResult> {
    let mut dist = match opts.sparsity {
        Sparsity::Complete => d.matrix().clone(),
        Sparsity::Knn(k) => knn_adjacency(d.matrix(), k),
    };
    let mut next = opts.with_paths.then(|| Array2::from_shape_fn(dist.dim(), |(_, j)| j));
    let n = dist.nrows();
    {
        let dist = dist.as_slice_mut().expect("standard layout");
        let next = next.as_mut().map(|m| m.as_slice_mut().expect("standard layout"));
        if n >= opts.parallel_threshold {
            relax_parallel(dist, next, n);
        } else {
            relax_serial(dist, next, n);
        }
    }
    if let Some(i) = (0..n).find(|&i| dist[[i, i]] < 0.0) {
        return Err(Error::NegativeCycle(i));
    }
    Ok(ShortestPathResult { dist, next })
}

fn relax_serial(dist: &mut [f64], mut next: Option<&mut [usize]>, n: usize) {
    let mut row_k = vec![0.0; n];
    for k in 0..n {
        row_k.copy_from_slice(&dist[k * n..(k + 1) * n]);
        for i in 0..n {
            let dik = dist[i * n + k];
            if dik == f64::INFINITY {
                continue;
            }
            let row = &mut dist[i * n..(i + 1) * n];
            match next.as_deref_mut() {
                None => {
                    for (dij, &dkj) in row.iter_mut().zip(&row_k) {
                        *dij = dij.min(dik + dkj);
                    }
                }
                Some(next) => {
                    let hop = next[i * n + k];
                    let next_row = &mut next[i * n..(i + 1) * n];
                    for j in 0..n {
                        let via = dik + row_k[j];
                        if via < row[j] {
                            row[j] = via;
                            next_row[j] = hop;
                        }
                    }
                }
            }
        }
    }
}

// Row k and column k do not change during phase k (d[k][k] = 0), so rows can
// be relaxed independently against a copy of row k.
fn relax_parallel(dist: &mut [f64], next: Option<&mut [usize]>, n: usize) {
    let mut row_k = vec![0.0; n];
    match next {
        None => {
            for k in 0..n {
                row_k.copy_from_slice(&dist[k * n..(k + 1) * n]);
                dist.par_chunks_mut(n).for_each(|row| {
                    let dik = row[k];
                    if dik == f64::INFINITY {
                        return;
                    }
                    for (dij, &dkj) in row.iter_mut().zip(&row_k) {
                        *dij = dij.min(dik + dkj);
                    }
                });
            }
        }
        Some(next) => {
            for k in 0..n {
                row_k.copy_from_slice(&dist[k * n..(k + 1) * n]);
                dist.par_chunks_mut(n).zip(next.par_chunks_mut(n)).for_each(|(row, next_row)| {
                    let dik = row[k];
                    if dik == f64::INFINITY {
                        return;
                    }
                    let hop = next_row[k];
                    for j in 0..n {
                        let via = dik + row_k[j];
                        if via < row[j] {
                            row[j] = via;
                            next_row[j] = hop;
                        }
                    }
                });
            }
        }
    }
}

/// Adjacency with only mutual-or-one-sided k-nearest-neighbor edges kept;
/// ties in distance are resolved by index.
pub fn knn_adjacency(d: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = d.nrows();
    let mut keep = Array2::from_elem((n, n), false);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            keep[[i, j]] = true;
            keep[[j, i]] = true;
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else if keep[[i, j]] {
            d[[i, j]]
        } else {
            f64::INFINITY
        }
    })
}

/// Distances from a new vertex with edge weights `query_edges` to every
/// existing vertex, routed through the existing shortest paths.
pub fn insert_query(s: &ShortestPathResult, query_edges: &[f64]) -> Result<Vec<f64>> {
    let n = s.len();
    if query_edges.len() != n {
        return Err(Error::Invalid(format!("{} query edges for {n} vertices", query_edges.len())));
    }
    if let Some(v) = query_edges.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::Invalid(format!("query edge weight {v} is negative or NaN")));
    }
    let mut out = vec![f64::INFINITY; n];
    for (k, &qk) in query_edges.iter().enumerate() {
        for (o, &dkj) in out.iter_mut().zip(s.dist.row(k)) {
            let via = qk + dkj;
            if via < *o {
                *o = via;
            }
        }
    }
    Ok(out)
}

/// Violations of the metric axioms found in a distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MetricityReport {
    /// max over (i, j, k) of d[i][j] − d[i][k] − d[k][j], floored at 0.
    pub max_triangle_violation: f64,
    pub triangle_violations: usize,
    /// max |d[i][j] − d[j][i]|
    pub symmetry_defect: f64,
    /// max |d[i][i]|
    pub diagonal_defect: f64,
    /// Off-diagonal pairs at distance zero (distinct items not separated).
    pub zero_distance_pairs: usize,
}

pub const TRIANGLE_SLACK: f64 = 1e-12;

impl MetricityReport {
    pub fn is_metric(&self) -> bool {
        self.triangle_violations == 0 && self.symmetry_defect == 0.0 && self.diagonal_defect == 0.0
    }
}

pub fn validate_metricity(d: &Array2<f64>) -> MetricityReport {
    let n = d.nrows();
    let mut report = MetricityReport::default();
    for i in 0..n {
        report.diagonal_defect = report.diagonal_defect.max(d[[i, i]].abs());
        for j in 0..n {
            if i != j {
                report.symmetry_defect = report.symmetry_defect.max((d[[i, j]] - d[[j, i]]).abs());
                if d[[i, j]] == 0.0 {
                    report.zero_distance_pairs += 1;
                }
            }
        }
    }
    let (worst, count) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            let mut count = 0;
            for k in 0..n {
                let dik = d[[i, k]];
                for j in 0..n {
                    let excess = d[[i, j]] - (dik + d[[k, j]]);
                    if excess > TRIANGLE_SLACK {
                        count += 1;
                    }
                    if excess > worst {
                        worst = excess;
                    }
                }
            }
            (worst, count)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    report.max_triangle_violation = worst;
    report.triangle_violations = count;
    report
}
