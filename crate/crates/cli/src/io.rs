//! CSV input and output for designs, draws and diagnostics.

use std::fs::File;
use std::path::Path;

use optimix_core::diagnostics::DiagnosticsReport;
use optimix_core::{pseudo_to_actual, Design, DrawMatrix, IngredientBounds, MixturePoint};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Rounded tabular input may miss the unit sum by half a unit in the last
/// printed digit per ingredient.
pub fn rounded_sum_tolerance(q: usize) -> f64 {
    0.005 * q as f64
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn num(v: f64, decimals: Option<usize>) -> String {
    match decimals {
        Some(d) => {
            let s = format!("{v:.d$}");
            // avoid "-0.00"
            if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                s.trim_start_matches('-').to_string()
            } else {
                s
            }
        }
        None => format!("{v}"),
    }
}

/// Writes `choice_set, alternative, x1..xq[, a1..aq]`, one row per
/// alternative. `decimals = None` keeps full round-trip precision.
pub fn write_design(
    path: &Path,
    design: &Design,
    bounds: Option<&IngredientBounds>,
    decimals: Option<usize>,
) -> CliResult<()> {
    let q = design.q();
    let mut w = writer(path)?;
    let mut header = vec!["choice_set".to_string(), "alternative".to_string()];
    header.extend((1..=q).map(|i| format!("x{i}")));
    if bounds.is_some() {
        header.extend((1..=q).map(|i| format!("a{i}")));
    }
    w.write_record(&header)?;
    for s in 0..design.sets() {
        for j in 0..design.alternatives() {
            let x = design.point(s, j);
            let mut row = vec![(s + 1).to_string(), (j + 1).to_string()];
            row.extend(x.iter().map(|&v| num(v, decimals)));
            if let Some(b) = bounds {
                let p = MixturePoint::renormalized(x.to_vec(), 1e-6)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                let a = pseudo_to_actual(&p, b).map_err(|e| CliError::Validation(e.to_string()))?;
                row.extend(a.iter().map(|&v| num(v, decimals)));
            }
            w.write_record(&row)?;
        }
    }
    finish(w, path)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Reads a design CSV with `q` ingredients.
///
/// Pseudocomponent columns x1..xq are used when present; otherwise actual
/// proportions a1..aq are converted with `bounds`. Rows are grouped into
/// choice sets by consecutive `choice_set` values, and every set must have the
/// same number of alternatives. Rows whose proportions are negative or miss
/// the unit sum by more than the rounding tolerance are reported by line.
pub fn read_design(path: &Path, q: usize, bounds: Option<&IngredientBounds>) -> CliResult<Design> {
    let file = File::open(path).map_err(|e| CliError::at(path, None, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let set_col = column(&headers, "choice_set")
        .ok_or_else(|| CliError::at(path, Some(1), "missing choice_set column"))?;
    let x_cols: Option<Vec<usize>> = (1..=q).map(|i| column(&headers, &format!("x{i}"))).collect();
    let a_cols: Option<Vec<usize>> = (1..=q).map(|i| column(&headers, &format!("a{i}"))).collect();
    if let Some(extra) = column(&headers, &format!("x{}", q + 1)) {
        return Err(CliError::at(
            path,
            Some(1),
            format!("column {} implies more than q = {q} ingredients", &headers[extra]),
        ));
    }
    let (cols, actual) = match (x_cols, a_cols, bounds) {
        (Some(x), _, _) => (x, false),
        (None, Some(a), Some(_)) => (a, true),
        (None, Some(_), None) => {
            return Err(CliError::at(
                path,
                Some(1),
                "only a-columns present but the config has no lower_bounds",
            ))
        }
        _ => {
            return Err(CliError::at(
                path,
                Some(1),
                format!("expected columns x1..x{q} for q = {q}"),
            ))
        }
    };

    let tol = rounded_sum_tolerance(q);
    let mut points = Vec::new();
    let mut set_sizes: Vec<(String, usize)> = Vec::new();
    let mut bad_rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let label = record.get(set_col).unwrap_or("").to_string();
        match set_sizes.last_mut() {
            Some((last, n)) if *last == label => *n += 1,
            _ => set_sizes.push((label, 1)),
        }
        let mut values = Vec::with_capacity(q);
        for &c in &cols {
            let field = record.get(c).unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(CliError::at(
                        path,
                        Some(line),
                        format!("cannot parse '{field}' as a proportion"),
                    ))
                }
            }
        }
        if actual {
            let b = bounds.expect("checked above");
            let scale = 1.0 - b.total();
            for (v, l) in values.iter_mut().zip(b.lower()) {
                *v = (*v - l) / scale;
            }
        }
        if values.iter().any(|&v| v < -1e-9) {
            bad_rows.push(line);
            continue;
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        match MixturePoint::renormalized(values, tol) {
            Ok(p) => points.push(p),
            Err(_) => bad_rows.push(line),
        }
    }
    if !bad_rows.is_empty() {
        let list: Vec<String> = bad_rows.iter().map(|l| l.to_string()).collect();
        return Err(CliError::at(
            path,
            None,
            format!("infeasible mixture on line(s) {}", list.join(", ")),
        ));
    }
    if points.is_empty() {
        return Err(CliError::at(path, None, "design has no rows"));
    }
    let alternatives = set_sizes[0].1;
    if let Some((label, n)) = set_sizes.iter().find(|(_, n)| *n != alternatives) {
        return Err(CliError::at(
            path,
            None,
            format!("choice set {label} has {n} alternatives, expected {alternatives}"),
        ));
    }
    Design::new(set_sizes.len(), alternatives, points).map_err(|e| CliError::at(path, None, e))
}

pub fn write_draws(path: &Path, draws: &DrawMatrix) -> CliResult<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = (1..=draws.params()).map(|i| format!("beta{i}")).collect();
    w.write_record(&header)?;
    for row in draws.rows() {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    finish(w, path)
}

pub fn read_draws(path: &Path, params: usize) -> CliResult<DrawMatrix> {
    let file = File::open(path).map_err(|e| CliError::at(path, None, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let width = rdr.headers()?.len();
    if width != params {
        return Err(CliError::at(
            path,
            Some(1),
            format!("draws have {width} columns, expected {params}"),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize);
        let row: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match row {
            Ok(r) if r.iter().all(|v| v.is_finite()) => rows.push(r),
            _ => return Err(CliError::at(path, line, "draw entries must be finite numbers")),
        }
    }
    DrawMatrix::from_rows(rows).map_err(|e| CliError::at(path, None, e))
}

/// SHA-256 of the draw matrix shape and little-endian values.
pub fn draws_hash(draws: &DrawMatrix) -> String {
    let mut h = Sha256::new();
    h.update((draws.len() as u64).to_le_bytes());
    h.update((draws.params() as u64).to_le_bytes());
    for v in draws.flat() {
        h.update(v.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

pub fn write_report(dir: &Path, report: &DiagnosticsReport) -> CliResult<()> {
    let path = dir.join("fds.csv");
    let mut w = writer(&path)?;
    w.write_record(["fraction", "variance"])?;
    for (f, v) in &report.fds.points {
        w.write_record([format!("{f}"), format!("{v}")])?;
    }
    finish(w, &path)?;

    let path = dir.join("balance.csv");
    let mut w = writer(&path)?;
    w.write_record(["set", "product"])?;
    for (s, p) in report.balance.iter().enumerate() {
        w.write_record([(s + 1).to_string(), format!("{p}")])?;
    }
    finish(w, &path)?;

    let path = dir.join("distances.csv");
    let mut w = writer(&path)?;
    w.write_record(["set", "distance"])?;
    for (s, ds) in report.distances.iter().enumerate() {
        for d in ds {
            w.write_record([(s + 1).to_string(), format!("{d}")])?;
        }
    }
    finish(w, &path)
}
