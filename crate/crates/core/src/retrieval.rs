//! Datasets, signature databases, signature distances and retrieval
//! evaluation (average retrieval rate and precision/recall).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::distributions::Family;
use crate::divergences;
use crate::error::{Error, Result};
use crate::features::{Signature, ORIENTATIONS};
use crate::geometry::{gd_skld, ManifoldPoint};
use crate::graph::{build_distance_matrix, floyd_warshall, DistanceMatrix, EdgeWeight, ShortestPathResult};

/// Per-subband comparison between two manifold points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMeasure {
    /// KL(query ‖ target)
    Kld,
    Skld,
    /// √(2·SKLD)
    GdSkld,
}

impl PairMeasure {
    pub const ALL: [PairMeasure; 3] = [PairMeasure::Kld, PairMeasure::Skld, PairMeasure::GdSkld];

    pub fn apply(self, a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
        Ok(match self {
            PairMeasure::Kld => divergences::kld(a, b)?.value(),
            PairMeasure::Skld => divergences::skld(a, b)?.value(),
            PairMeasure::GdSkld => gd_skld(a, b)?,
        })
    }

    pub fn is_symmetric(self) -> bool {
        self != PairMeasure::Kld
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// How per-subband values combine into one signature distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    /// Square root of the sum of squares.
    L2,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::L2 => "l2",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregation::Sum),
            "l2" => Ok(Aggregation::L2),
            _ => Err(Error::Invalid(format!("unknown aggregation '{s}' (expected sum, l2)"))),
        }
    }
}

fn check_structure(a: &Signature, b: &Signature) -> Result<()> {
    if a.family != b.family {
        return Err(Error::FamilyMismatch(a.family, b.family));
    }
    if a.params.len() != b.params.len() || a.levels != b.levels {
        return Err(Error::StructureMismatch(format!(
            "{} levels / {} subbands vs {} levels / {} subbands",
            a.levels,
            a.params.len(),
            b.levels,
            b.params.len()
        )));
    }
    Ok(())
}

/// Distance between two signatures: `measure` per subband, then aggregated.
pub fn signature_distance(a: &Signature, b: &Signature, measure: PairMeasure, aggregation: Aggregation) -> Result<f64> {
    check_structure(a, b)?;
    let mut acc = 0.0;
    for (p, q) in a.params.iter().zip(&b.params) {
        if p == q {
            continue;
        }
        let m =
            measure.apply(&ManifoldPoint::new(a.family, p[0], p[1])?, &ManifoldPoint::new(b.family, q[0], q[1])?)?;
        acc += match aggregation {
            Aggregation::Sum => m,
            Aggregation::L2 => m * m,
        };
    }
    Ok(match aggregation {
        Aggregation::Sum => acc,
        Aggregation::L2 => acc.sqrt(),
    })
}

/// Ranking method used by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "KLD")]
    Kld,
    #[serde(rename = "SKLD")]
    Skld,
    #[serde(rename = "GDSKLD")]
    GdSkld,
    /// Shortest paths over the database graph.
    #[serde(rename = "GDFloyd")]
    GdFloyd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Kld, Method::Skld, Method::GdSkld, Method::GdFloyd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kld => "KLD",
            Method::Skld => "SKLD",
            Method::GdSkld => "GDSKLD",
            Method::GdFloyd => "GDFloyd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown method '{s}' (expected KLD, SKLD, GDSKLD, GDFloyd)")))
    }
}

/// How class labels are read from a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layout {
    /// Every subdirectory of the root is one class.
    DirPerClass,
    /// Images sit directly in the root; each line of the manifest is
    /// `prefix class` and a file belongs to the class of its longest
    /// matching prefix.
    PrefixMap { manifest: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub path: PathBuf,
    pub class: String,
}

/// Labeled images in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    items: Vec<DatasetItem>,
    class_sizes: BTreeMap<String, usize>,
}

impl DatasetIndex {
    /// Items are sorted by id. Ids must be unique; classes with a single
    /// member are kept as retrieval targets but never used as queries.
    pub fn new(mut items: Vec<DatasetItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Invalid("dataset index has no items".into()));
        }
        items.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = items.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Invalid(format!("duplicate item id '{}'", w[0].id)));
        }
        let mut class_sizes = BTreeMap::new();
        for item in &items {
            *class_sizes.entry(item.class.clone()).or_insert(0) += 1;
        }
        for (class, n) in &class_sizes {
            if *n < 2 {
                log::warn!("class '{class}' has a single member; it is excluded from queries");
            }
        }
        if class_sizes.len() < 2 {
            log::warn!("dataset has a single class");
        }
        Ok(Self { items, class_sizes })
    }

    pub fn items(&self) -> &[DatasetItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_sizes(&self) -> &BTreeMap<String, usize> {
        &self.class_sizes
    }

    pub fn class_size(&self, class: &str) -> usize {
        self.class_sizes.get(class).copied().unwrap_or(0)
    }

    /// Common class size when all classes are equally large.
    pub fn uniform_class_size(&self) -> Option<usize> {
        let mut sizes = self.class_sizes.values();
        let first = *sizes.next()?;
        sizes.all(|s| *s == first).then_some(first)
    }

    pub fn max_class_size(&self) -> usize {
        self.class_sizes.values().copied().max().unwrap_or(0)
    }
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| ["png", "pgm", "ppm", "pnm"].contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Scan a dataset directory into an index.
pub fn ingest_dataset(root: &Path, layout: &Layout) -> Result<DatasetIndex> {
    let mut items = Vec::new();
    match layout {
        Layout::DirPerClass => {
            for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
                let class = file_name(&dir);
                for path in sorted_entries(&dir)?.into_iter().filter(|p| is_image_file(p)) {
                    items.push(DatasetItem { id: format!("{class}/{}", file_name(&path)), path, class: class.clone() });
                }
            }
        }
        Layout::PrefixMap { manifest } => {
            let text = std::fs::read_to_string(manifest)?;
            let mut prefixes: Vec<(String, String)> = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut parts = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(prefix), Some(class), None) => prefixes.push((prefix.to_string(), class.to_string())),
                    _ => {
                        return Err(Error::Invalid(format!(
                            "{}:{}: expected 'prefix class'",
                            manifest.display(),
                            lineno + 1
                        )))
                    }
                }
            }
            // Longest prefix first.
            prefixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
            for path in sorted_entries(root)?.into_iter().filter(|p| is_image_file(p)) {
                let name = file_name(&path);
                match prefixes.iter().find(|(p, _)| name.starts_with(p.as_str())) {
                    Some((_, class)) => items.push(DatasetItem { id: name, path, class: class.clone() }),
                    None => log::warn!("{name}: no manifest prefix matches; skipped"),
                }
            }
        }
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    DatasetIndex::new(items)
}

/// Settings shared by every signature in a database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbConfig {
    pub family: Family,
    pub levels: usize,
    pub edge_weight: EdgeWeight,
    pub aggregation: Aggregation,
}

impl DbConfig {
    pub fn new(family: Family, levels: usize) -> Self {
        Self { family, levels, edge_weight: EdgeWeight::default(), aggregation: Aggregation::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbEntry {
    pub class: String,
    pub signature: Signature,
}

/// Signatures keyed by item id, with lazily computed pairwise matrices.
#[derive(Debug, Default)]
pub struct SignatureDB {
    config: Option<DbConfig>,
    entries: BTreeMap<String, DbEntry>,
    measures: [OnceLock<DistanceMatrix>; 3],
    edges: OnceLock<DistanceMatrix>,
    closure: OnceLock<ShortestPathResult>,
}

impl Clone for SignatureDB {
    fn clone(&self) -> Self {
        Self { config: self.config, entries: self.entries.clone(), ..Default::default() }
    }
}

impl PartialEq for SignatureDB {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.entries == other.entries
    }
}

impl SignatureDB {
    pub fn new(config: DbConfig) -> Self {
        Self { config: Some(config), ..Default::default() }
    }

    pub fn config(&self) -> DbConfig {
        self.config.expect("constructed with a config")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, id: &str) -> Option<&DbEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &DbEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn invalidate(&mut self) {
        self.measures = Default::default();
        self.edges = OnceLock::new();
        self.closure = OnceLock::new();
    }

    /// Add or replace a signature. It must match the database's family and
    /// level count.
    pub fn insert(&mut self, id: impl Into<String>, class: impl Into<String>, signature: Signature) -> Result<()> {
        let config = self.config();
        if signature.family != config.family {
            return Err(Error::FamilyMismatch(config.family, signature.family));
        }
        if signature.levels != config.levels || signature.params.len() != ORIENTATIONS * config.levels {
            return Err(Error::StructureMismatch(format!(
                "signature has {} levels, database expects {}",
                signature.levels, config.levels
            )));
        }
        self.entries.insert(id.into(), DbEntry { class: class.into(), signature });
        self.invalidate();
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Option<DbEntry> {
        let removed = self.entries.remove(id);
        if removed.is_some() {
            self.invalidate();
        }
        removed
    }

    fn labels(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    fn signatures(&self) -> Vec<Signature> {
        self.entries.values().map(|e| e.signature.clone()).collect()
    }

    fn cached<T>(cell: &OnceLock<T>, compute: impl FnOnce() -> Result<T>) -> Result<&T> {
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let v = compute()?;
        Ok(cell.get_or_init(|| v))
    }

    /// Pairwise signature distances under `measure`, rows and columns in id
    /// order.
    pub fn measure_matrix(&self, measure: PairMeasure) -> Result<&DistanceMatrix> {
        Self::cached(&self.measures[measure.slot()], || {
            let config = self.config();
            let labels = self.labels();
            let signatures = self.signatures();
            DistanceMatrix::from_fn(labels, measure.is_symmetric(), |i, j| {
                signature_distance(&signatures[i], &signatures[j], measure, config.aggregation)
            })
        })
    }

    /// Graph edge weights under the configured edge weight.
    pub fn distance_matrix(&self) -> Result<&DistanceMatrix> {
        Self::cached(&self.edges, || {
            let config = self.config();
            build_distance_matrix(self.labels(), &self.signatures(), config.edge_weight, config.aggregation)
        })
    }

    /// Floyd-Warshall closure of [`SignatureDB::distance_matrix`].
    pub fn shortest_paths(&self) -> Result<&ShortestPathResult> {
        Self::cached(&self.closure, || floyd_warshall(self.distance_matrix()?))
    }

    /// Ranking matrix for `method` over the whole database.
    pub fn method_matrix(&self, method: Method) -> Result<&Array2<f64>> {
        Ok(match method {
            Method::Kld => self.measure_matrix(PairMeasure::Kld)?.matrix(),
            Method::Skld => self.measure_matrix(PairMeasure::Skld)?.matrix(),
            Method::GdSkld => self.measure_matrix(PairMeasure::GdSkld)?.matrix(),
            Method::GdFloyd => &self.shortest_paths()?.dist,
        })
    }
}

/// Load and fit every item of `index` in parallel. Items that fail are
/// returned with their error instead of being inserted.
pub fn extract_database(index: &DatasetIndex, config: DbConfig) -> (SignatureDB, Vec<(String, Error)>) {
    use rayon::prelude::*;
    let results: Vec<Result<Signature>> = index
        .items()
        .par_iter()
        .map(|item| {
            let img = crate::features::load_image(&item.path)?;
            crate::features::extract_signature(&img, config.family, config.levels)
        })
        .collect();
    let mut db = SignatureDB::new(config);
    let mut failures = Vec::new();
    for (item, result) in index.items().iter().zip(results) {
        match result.and_then(|s| db.insert(item.id.clone(), item.class.clone(), s)) {
            Ok(()) => {}
            Err(e) => failures.push((item.id.clone(), e)),
        }
    }
    (db, failures)
}

pub const DB_FORMAT: &str = "statgeo-signature-db";
pub const DB_VERSION: u32 = 1;

/// Shortest decimal with 17 significant digits; parses back to the same f64.
fn exact_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
struct ItemOut<'a> {
    id: &'a str,
    class: &'a str,
    params: Vec<[Box<RawValue>; 2]>,
}

#[derive(Deserialize)]
struct ItemIn {
    id: String,
    class: String,
    params: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct DbFile<'a> {
    format: String,
    version: u32,
    checksum: String,
    #[serde(borrow)]
    config: &'a RawValue,
    #[serde(borrow)]
    items: &'a RawValue,
}

fn digest(config: &str, items: &str) -> String {
    let mut h = Sha256::new();
    h.update(config.as_bytes());
    h.update(b"\n");
    h.update(items.as_bytes());
    hex::encode(h.finalize())
}

/// Serialize as versioned JSON. Output depends only on the contents.
pub fn write_db<W: Write>(db: &SignatureDB, mut w: W) -> Result<()> {
    let config = serde_json::to_string(&db.config())?;
    let mut items = String::from("[");
    for (i, (id, entry)) in db.entries().enumerate() {
        let params = entry
            .signature
            .params
            .iter()
            .map(|p| -> Result<[Box<RawValue>; 2]> {
                Ok([RawValue::from_string(exact_float(p[0]))?, RawValue::from_string(exact_float(p[1]))?])
            })
            .collect::<Result<Vec<_>>>()?;
        items.push_str(if i == 0 { "\n    " } else { ",\n    " });
        items.push_str(&serde_json::to_string(&ItemOut { id, class: &entry.class, params })?);
    }
    items.push_str(if db.is_empty() { "]" } else { "\n  ]" });
    let checksum = digest(&config, &items);
    write!(
        w,
        "{{\n  \"format\": \"{DB_FORMAT}\",\n  \"version\": {DB_VERSION},\n  \"checksum\": \"{checksum}\",\n  \"config\": {config},\n  \"items\": {items}\n}}\n"
    )?;
    Ok(())
}

pub fn read_db(text: &str) -> Result<SignatureDB> {
    let file: DbFile = serde_json::from_str(text).map_err(|e| Error::CorruptFile(e.to_string()))?;
    if file.format != DB_FORMAT {
        return Err(Error::CorruptFile(format!("unexpected format tag '{}'", file.format)));
    }
    if file.version != DB_VERSION {
        return Err(Error::VersionMismatch(format!(
            "database format version {} (supported: {DB_VERSION})",
            file.version
        )));
    }
    if digest(file.config.get(), file.items.get()) != file.checksum {
        return Err(Error::CorruptFile("checksum does not match contents".into()));
    }
    let config: DbConfig = serde_json::from_str(file.config.get()).map_err(|e| Error::CorruptFile(e.to_string()))?;
    let items: Vec<ItemIn> = serde_json::from_str(file.items.get()).map_err(|e| Error::CorruptFile(e.to_string()))?;
    let mut db = SignatureDB::new(config);
    for item in items {
        if db.get(&item.id).is_some() {
            return Err(Error::CorruptFile(format!("duplicate id '{}'", item.id)));
        }
        let signature = Signature::new(config.family, config.levels, item.params)?;
        db.insert(item.id, item.class, signature)?;
    }
    Ok(db)
}

pub fn save_db(db: &SignatureDB, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_db(db, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_db(path: &Path) -> Result<SignatureDB> {
    read_db(&std::fs::read_to_string(path)?)
}

/// Options for [`evaluate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Cut-offs at which ARR is reported; empty means the largest class size.
    pub ks: Vec<usize>,
    /// The query competes in its own ranking and takes rank 1.
    pub include_query: bool,
    /// Family and level count the caller expects the database to carry.
    pub expect: Option<(Family, usize)>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { ks: Vec::new(), include_query: true, expect: None }
    }
}

/// Precision and recall after the top N results, N = 1 ..= N_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Outcome of ranking every item against the rest of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub method: Method,
    pub include_query: bool,
    pub ks: Vec<usize>,
    /// Average retrieval rate for each entry of `ks`.
    pub arr: Vec<f64>,
    /// Ids of the items used as queries.
    pub queries: Vec<String>,
    /// Relevant items per query (class size, minus one without the query).
    pub relevant: Vec<usize>,
    /// `hits[k][q]`: same-class items among the top `ks[k]` for query q.
    pub hits: Vec<Vec<usize>>,
    pub pr: PrCurve,
}

impl RetrievalReport {
    /// ARR at the smallest reported cut-off that is at least every query's
    /// relevant count.
    pub fn headline(&self) -> Option<(usize, f64)> {
        let need = self.relevant.iter().copied().max().unwrap_or(0);
        self.ks.iter().zip(&self.arr).filter(|(k, _)| **k >= need).map(|(k, a)| (*k, *a)).next()
    }
}

/// Average retrieval rate from per-query hit counts and relevant counts.
pub fn average_retrieval_rate(hits: &[usize], relevant: &[usize]) -> f64 {
    assert_eq!(hits.len(), relevant.len());
    if hits.is_empty() {
        return 0.0;
    }
    if relevant.iter().all(|r| *r == relevant[0]) {
        // Uniform class size: a single division keeps hand-computed cases exact.
        return hits.iter().sum::<usize>() as f64 / (hits.len() * relevant[0]) as f64;
    }
    hits.iter().zip(relevant).map(|(h, r)| *h as f64 / *r as f64).sum::<f64>() / hits.len() as f64
}

struct Rankings {
    queries: Vec<usize>,
    relevant: Vec<usize>,
    /// Cumulative same-class counts along each query's ranking.
    cumulative: Vec<Vec<usize>>,
}

fn rank_all(db: &SignatureDB, index: &DatasetIndex, method: Method, opts: &EvalOptions) -> Result<Rankings> {
    let config = db.config();
    if let Some((family, levels)) = opts.expect {
        if family != config.family || levels != config.levels {
            return Err(Error::VersionMismatch(format!(
                "database holds {} signatures with {} levels, expected {family} with {levels}",
                config.family, config.levels
            )));
        }
    }
    let positions: HashMap<&str, usize> = db.ids().enumerate().map(|(i, id)| (id, i)).collect();
    let missing: Vec<&str> =
        index.items().iter().map(|it| it.id.as_str()).filter(|id| !positions.contains_key(id)).collect();
    if let Some(first) = missing.first() {
        return Err(Error::MissingSignatures(missing.len(), first.to_string()));
    }
    let rows: Vec<usize> = index.items().iter().map(|it| positions[it.id.as_str()]).collect();
    let d = db.method_matrix(method)?;

    let items = index.items();
    let mut rankings = Rankings { queries: Vec::new(), relevant: Vec::new(), cumulative: Vec::new() };
    for (q, item) in items.iter().enumerate() {
        let class_size = index.class_size(&item.class);
        if class_size < 2 {
            continue;
        }
        let mut order: Vec<usize> = (0..items.len()).filter(|&t| t != q).collect();
        // Index order is id order, so a stable sort breaks ties by id.
        order.sort_by(|&a, &b| d[[rows[q], rows[a]]].total_cmp(&d[[rows[q], rows[b]]]));
        if opts.include_query {
            order.insert(0, q);
        }
        let mut running = 0;
        let cumulative = order
            .iter()
            .map(|&t| {
                running += usize::from(items[t].class == item.class);
                running
            })
            .collect();
        rankings.queries.push(q);
        rankings.relevant.push(if opts.include_query { class_size } else { class_size - 1 });
        rankings.cumulative.push(cumulative);
    }
    if rankings.queries.is_empty() {
        return Err(Error::Invalid("no class has at least two members".into()));
    }
    Ok(rankings)
}

fn curve(r: &Rankings) -> PrCurve {
    let depth = r.cumulative[0].len();
    let nq = r.queries.len() as f64;
    let mut pr = PrCurve { precision: Vec::with_capacity(depth), recall: Vec::with_capacity(depth) };
    for n in 1..=depth {
        let p: f64 = r.cumulative.iter().map(|c| c[n - 1] as f64 / n as f64).sum();
        let rc: f64 = r.cumulative.iter().zip(&r.relevant).map(|(c, rel)| c[n - 1] as f64 / *rel as f64).sum();
        pr.precision.push(p / nq);
        pr.recall.push(rc / nq);
    }
    pr
}

/// Rank every item of `index` against all others and report ARR at `k`
/// (query included).
pub fn evaluate(db: &SignatureDB, index: &DatasetIndex, method: Method, k: usize) -> Result<RetrievalReport> {
    evaluate_with(db, index, method, &EvalOptions { ks: vec![k], ..Default::default() })
}

pub fn evaluate_with(
    db: &SignatureDB,
    index: &DatasetIndex,
    method: Method,
    opts: &EvalOptions,
) -> Result<RetrievalReport> {
    let ks = if opts.ks.is_empty() { vec![index.max_class_size()] } else { opts.ks.clone() };
    if ks.contains(&0) {
        return Err(Error::Invalid("K must be at least 1".into()));
    }
    let r = rank_all(db, index, method, opts)?;
    let depth = r.cumulative[0].len();
    let hits: Vec<Vec<usize>> =
        ks.iter().map(|&k| r.cumulative.iter().map(|c| c[k.min(depth) - 1]).collect()).collect();
    let arr = hits.iter().map(|h| average_retrieval_rate(h, &r.relevant)).collect();
    Ok(RetrievalReport {
        method,
        include_query: opts.include_query,
        ks,
        arr,
        queries: r.queries.iter().map(|&q| index.items()[q].id.clone()).collect(),
        relevant: r.relevant.clone(),
        pr: curve(&r),
        hits,
    })
}

pub fn precision_recall(db: &SignatureDB, index: &DatasetIndex, method: Method) -> Result<PrCurve> {
    Ok(curve(&rank_all(db, index, method, &EvalOptions::default())?))
}

/// Decimal with at most 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// One row per (method, K): `method,K,ARR`.
pub fn write_arr_csv<W: Write>(reports: &[RetrievalReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "K", "ARR"]).map_err(csv_err)?;
    for r in reports {
        for (k, a) in r.ks.iter().zip(&r.arr) {
            out.write_record([r.method.name().to_string(), k.to_string(), format_sig9(*a)]).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per (method, N): `method,N,precision,recall`.
pub fn write_pr_csv<W: Write>(reports: &[RetrievalReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "N", "precision", "recall"]).map_err(csv_err)?;
    for r in reports {
        for (n, (p, rc)) in r.pr.precision.iter().zip(&r.pr.recall).enumerate() {
            out.write_record([r.method.name().to_string(), (n + 1).to_string(), format_sig9(*p), format_sig9(*rc)])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Full reports including per-query hit counts.
pub fn write_reports_json<W: Write>(reports: &[RetrievalReport], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, reports)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("{other:?}")),
    }
}
