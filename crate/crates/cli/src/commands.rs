use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use statgeo::divergences::{kld, skld};
use statgeo::geometry::{gd_skld, geodesic_bvp, path_length, BvpOptions, ManifoldPoint, ParamPath};
use statgeo::graph::{
    floyd_warshall_with, read_csv_matrix, read_dmat, validate_metricity, DistanceMatrix, FwOptions, Sparsity,
    DMAT_MAGIC,
};
use statgeo::retrieval::{
    evaluate_with, extract_database, format_sig9, ingest_dataset, load_db, save_db, write_arr_csv, write_pr_csv,
    write_reports_json, DatasetIndex, DatasetItem, DbConfig, EvalOptions, RetrievalReport, SignatureDB,
};
use statgeo::synth::write_dataset;
use statgeo::Family;

use crate::config::RunConfig;
use crate::exit::{self, CliError};

/// Samples used to measure the coordinate straight line between two points.
const STRAIGHT_SAMPLES: usize = 4097;

fn single_db(cfg: &RunConfig) -> Result<&Path, CliError> {
    match cfg.db.as_slice() {
        [one] => Ok(one),
        [] => Err(CliError::config("no database given (--db)")),
        _ => Err(CliError::config("expected a single --db")),
    }
}

pub fn extract(cfg: &RunConfig) -> Result<(), CliError> {
    let root = cfg.dataset.as_deref().ok_or_else(|| CliError::config("no dataset given (--dataset)"))?;
    let db_path = single_db(cfg)?;
    if !root.is_dir() {
        return Err(CliError::io(format!("dataset root {} is not a directory", root.display())));
    }
    let index = ingest_dataset(root, &cfg.layout()).map_err(|e| CliError::at(root, e))?;
    let mut config = DbConfig::new(cfg.family(), cfg.levels());
    if let Some(w) = cfg.edge_weight {
        config.edge_weight = w;
    }
    if let Some(a) = cfg.aggregation {
        config.aggregation = a;
    }

    let (db, failures) = extract_database(&index, config);
    let failed: BTreeMap<&str, &statgeo::Error> = failures.iter().map(|(id, e)| (id.as_str(), e)).collect();
    let total = index.len();
    for (n, item) in index.items().iter().enumerate() {
        match failed.get(item.id.as_str()) {
            None => eprintln!("[{}/{total}] {}", n + 1, item.id),
            Some(e) => eprintln!("[{}/{total}] {} FAILED: {e}", n + 1, item.id),
        }
    }
    if !failures.is_empty() && !cfg.skip_bad {
        return Err(CliError::new(
            exit::EXTRACTION,
            format!("{} of {total} images failed; no database written (--skip-bad leaves them out)", failures.len()),
        ));
    }
    if db.is_empty() {
        return Err(CliError::new(exit::EXTRACTION, "no image could be processed"));
    }
    save_db(&db, db_path).map_err(|e| CliError::at(db_path, e))?;
    eprintln!(
        "wrote {} signatures ({}, {} levels) to {}{}",
        db.len(),
        config.family,
        config.levels,
        db_path.display(),
        if failures.is_empty() { String::new() } else { format!(", skipped {}", failures.len()) }
    );
    Ok(())
}

/// Index whose items and classes are those stored in the database.
fn index_of(db: &SignatureDB) -> statgeo::Result<DatasetIndex> {
    DatasetIndex::new(
        db.entries()
            .map(|(id, e)| DatasetItem { id: id.to_string(), path: PathBuf::from(id), class: e.class.clone() })
            .collect(),
    )
}

fn check_config(cfg: &RunConfig, have: DbConfig, path: &Path) -> Result<(), CliError> {
    let mut wrong = Vec::new();
    if cfg.family.is_some_and(|f| f != have.family) {
        wrong.push(format!("family {} (requested {})", have.family, cfg.family()));
    }
    if cfg.levels.is_some_and(|l| l != have.levels) {
        wrong.push(format!("{} levels (requested {})", have.levels, cfg.levels()));
    }
    if let Some(w) = cfg.edge_weight.filter(|w| *w != have.edge_weight) {
        wrong.push(format!("edge weight {} (requested {w})", have.edge_weight));
    }
    if let Some(a) = cfg.aggregation.filter(|a| *a != have.aggregation) {
        wrong.push(format!("aggregation {} (requested {a})", have.aggregation));
    }
    if wrong.is_empty() {
        Ok(())
    } else {
        Err(CliError::config(format!("database {} has {}", path.display(), wrong.join(", "))))
    }
}

struct Column {
    label: String,
    reports: Vec<RetrievalReport>,
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.db.is_empty() {
        return Err(CliError::config("no database given (--db)"));
    }
    let mut stems = BTreeSet::new();
    for path in &cfg.db {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if !stems.insert(stem.clone()) && cfg.out.is_some() {
            return Err(CliError::config(format!("two databases named '{stem}' would write the same reports")));
        }
    }
    let dataset = match &cfg.dataset {
        Some(root) => Some(ingest_dataset(root, &cfg.layout()).map_err(|e| CliError::at(root, e))?),
        None => None,
    };
    let opts = EvalOptions { ks: cfg.ks.clone(), include_query: cfg.include_query, expect: None };

    let mut columns = Vec::new();
    for path in &cfg.db {
        if !path.is_file() {
            return Err(CliError::config(format!("database {} not found", path.display())));
        }
        let db = load_db(path).map_err(|e| CliError::database(path, e))?;
        let have = db.config();
        check_config(cfg, have, path)?;
        let index = match &dataset {
            Some(index) => index.clone(),
            None => index_of(&db).map_err(|e| CliError::database(path, e))?,
        };
        let reports = cfg
            .methods()
            .into_iter()
            .map(|m| evaluate_with(&db, &index, m, &opts))
            .collect::<statgeo::Result<Vec<_>>>()
            .map_err(|e| CliError::database(path, e))?;
        if let Some(out) = &cfg.out {
            write_reports(out, path, &reports)?;
        }
        columns.push(Column { label: format!("{} L={}", have.family, have.levels), reports });
    }
    disambiguate(&mut columns, &cfg.db);
    print_table(&columns)?;
    Ok(())
}

fn write_reports(out: &Path, db_path: &Path, reports: &[RetrievalReport]) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    let stem = db_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "db".into());
    let create = |name: String| -> Result<(PathBuf, BufWriter<File>), CliError> {
        let p = out.join(name);
        let f = File::create(&p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
        Ok((p, BufWriter::new(f)))
    };
    let (p, w) = create(format!("{stem}.arr.csv"))?;
    write_arr_csv(reports, w).map_err(|e| CliError::at(&p, e))?;
    let (p, w) = create(format!("{stem}.pr.csv"))?;
    write_pr_csv(reports, w).map_err(|e| CliError::at(&p, e))?;
    let (p, w) = create(format!("{stem}.json"))?;
    write_reports_json(reports, w).map_err(|e| CliError::at(&p, e))?;
    log::info!("reports for {} written to {}", db_path.display(), out.display());
    Ok(())
}

/// Columns that would share a heading get the database name appended.
fn disambiguate(columns: &mut [Column], paths: &[PathBuf]) {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for c in columns.iter() {
        *seen.entry(c.label.clone()).or_default() += 1;
    }
    for (c, p) in columns.iter_mut().zip(paths) {
        if seen[&c.label] > 1 {
            c.label = format!("{} ({})", c.label, p.display());
        }
    }
}

/// ARR in percent, one row per (method, K), one column per database.
fn print_table(columns: &[Column]) -> Result<(), CliError> {
    let mut rows: Vec<(String, usize)> = Vec::new();
    for c in columns {
        for r in &c.reports {
            for &k in &r.ks {
                let key = (r.method.name().to_string(), k);
                if !rows.contains(&key) {
                    rows.push(key);
                }
            }
        }
    }
    let cell = |c: &Column, method: &str, k: usize| -> String {
        c.reports
            .iter()
            .filter(|r| r.method.name() == method)
            .flat_map(|r| r.ks.iter().zip(&r.arr))
            .find(|(rk, _)| **rk == k)
            .map(|(_, a)| format!("{:.2}", 100.0 * a))
            .unwrap_or_else(|| "-".into())
    };
    let method_width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(0).max("method".len());
    let k_width = rows.iter().map(|(_, k)| k.to_string().len()).max().unwrap_or(0).max(1);
    let widths: Vec<usize> = columns.iter().map(|c| c.label.len().max(6)).collect();

    let mut out = io::stdout().lock();
    let mut line = format!("{:<method_width$}  {:>k_width$}", "method", "K");
    for (c, w) in columns.iter().zip(&widths) {
        line.push_str(&format!("  {:>w$}", c.label));
    }
    writeln!(out, "{line}")?;
    for (method, k) in &rows {
        let mut line = format!("{method:<method_width$}  {k:>k_width$}");
        for (c, w) in columns.iter().zip(&widths) {
            line.push_str(&format!("  {:>w$}", cell(c, method, *k)));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out.as_deref().ok_or_else(|| CliError::config("no output directory given (--out)"))?;
    let paths = write_dataset(&cfg.synth, out).map_err(|e| CliError::at(out, e))?;
    let mut stdout = io::stdout().lock();
    for p in &paths {
        writeln!(stdout, "{}", p.display())?;
    }
    eprintln!("wrote {} images in {} classes to {}", paths.len(), cfg.synth.classes, out.display());
    Ok(())
}

fn parse_point(family: Family, text: &str) -> Result<ManifoldPoint, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [scale, shape] = parts.as_slice() else {
        return Err(CliError::config(format!("point '{text}' is not `scale,shape`")));
    };
    let num =
        |s: &str| s.parse::<f64>().map_err(|_| CliError::config(format!("point '{text}': '{s}' is not a number")));
    ManifoldPoint::new(family, num(scale)?, num(shape)?).map_err(|e| CliError::config(format!("point '{text}': {e}")))
}

pub fn geo(cfg: &RunConfig, from: &str, to: &str, steps: usize) -> Result<(), CliError> {
    let family = cfg.family();
    let a = parse_point(family, from)?;
    let b = parse_point(family, to)?;
    let straight = ParamPath::straight(&a, &b, STRAIGHT_SAMPLES)?;
    let rows = [
        ("kld_forward", kld(&a, &b)?.value()),
        ("kld_backward", kld(&b, &a)?.value()),
        ("skld", skld(&a, &b)?.value()),
        ("sqrt_two_skld", gd_skld(&a, &b)?),
        ("straight_line", path_length(&straight)),
    ];
    let geodesic = geodesic_bvp(&a, &b, BvpOptions { steps, ..Default::default() }).map(|p| path_length(&p));

    let mut out = io::stdout().lock();
    for (name, v) in rows {
        writeln!(out, "{name}\t{}", format_sig9(v))?;
    }
    match geodesic {
        Ok(d) => {
            writeln!(out, "geodesic\t{}", format_sig9(d))?;
            Ok(())
        }
        Err(e @ statgeo::Error::Invalid(_)) => Err(CliError::from(e)),
        Err(e) => Err(CliError::new(exit::NO_CONVERGENCE, format!("geodesic solver: {e}"))),
    }
}

/// Reads either format; DMAT is recognized by its magic bytes.
fn read_matrix(path: &Path) -> Result<(Vec<String>, ndarray::Array2<f64>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let parsed = if bytes.starts_with(DMAT_MAGIC) {
        read_dmat(bytes.as_slice()).map(|d| ((0..d.nrows()).map(|i| i.to_string()).collect(), d))
    } else {
        read_csv_matrix(bytes.as_slice())
    };
    parsed.map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn fw(input: &Path, output: Option<&Path>, knn: Option<usize>) -> Result<(), CliError> {
    if knn == Some(0) {
        return Err(CliError::config("--knn must be at least 1"));
    }
    let (labels, d) = read_matrix(input)?;
    let d = DistanceMatrix::new(labels, d).map_err(|e| CliError::io(format!("{}: {e}", input.display())))?;
    let opts = FwOptions { sparsity: knn.map(Sparsity::Knn).unwrap_or_default(), ..Default::default() };
    let s = floyd_warshall_with(&d, opts)?;
    let unreachable = s.dist.iter().filter(|v| v.is_infinite()).count();
    if unreachable > 0 {
        log::warn!("{unreachable} vertex pairs are not connected");
    }

    let write_csv = |w: &mut dyn Write| -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| CliError::io(e.to_string());
        out.write_record(d.labels()).map_err(csv_err)?;
        for row in s.dist.rows() {
            out.write_record(row.iter().map(|v| format_sig9(*v))).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    };
    match output {
        None => write_csv(&mut io::stdout().lock()),
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("dmat")) {
                statgeo::graph::write_dmat(&s.dist, file).map_err(|e| CliError::at(p, e))
            } else {
                write_csv(&mut BufWriter::new(file))
            }
        }
    }
}

pub fn validate(input: &Path, json: bool) -> Result<(), CliError> {
    let (_, d) = read_matrix(input)?;
    let report = validate_metricity(&d);
    let mut out = io::stdout().lock();
    if json {
        let mut value = serde_json::to_value(report).map_err(|e| CliError::io(e.to_string()))?;
        value["metric"] = serde_json::Value::Bool(report.is_metric());
        writeln!(out, "{}", serde_json::to_string_pretty(&value).map_err(|e| CliError::io(e.to_string()))?)?;
    } else {
        writeln!(out, "metric\t{}", report.is_metric())?;
        writeln!(out, "triangle_violations\t{}", report.triangle_violations)?;
        writeln!(out, "max_triangle_violation\t{}", format_sig9(report.max_triangle_violation))?;
        writeln!(out, "symmetry_defect\t{}", format_sig9(report.symmetry_defect))?;
        writeln!(out, "diagonal_defect\t{}", format_sig9(report.diagonal_defect))?;
        writeln!(out, "zero_distance_pairs\t{}", report.zero_distance_pairs)?;
    }
    Ok(())
}
