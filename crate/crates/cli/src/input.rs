//! CSV ingestion. The header names the design columns `x1..xd` followed by
//! the moment columns `y1..yp`; every cell must be a finite number.

use std::path::Path;

use cmi_core::{DesignMatrix, Sample};

use crate::error::{CliError, CliResult};

pub fn read_sample(path: &Path) -> CliResult<Sample> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_sample(file, &path.display().to_string())
}

/// Splits a header into `(d, p)`.
fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize), String> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let d = names.iter().take_while(|s| s.starts_with('x')).count();
    let p = names.len() - d;
    if d == 0 || p == 0 {
        return Err(format!("header must be x1..xd followed by y1..yp with d, p >= 1, got [{}]", names.join(", ")));
    }
    for (k, name) in names.iter().enumerate() {
        let expected = if k < d { format!("x{}", k + 1) } else { format!("y{}", k - d + 1) };
        if *name != expected {
            return Err(format!("header column {} is '{name}', expected '{expected}'", k + 1));
        }
    }
    Ok((d, p))
}

pub fn parse_sample<R: std::io::Read>(reader: R, source: &str) -> CliResult<Sample> {
    let schema = |msg: String| CliError::Input(format!("{source}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| schema(e.to_string()))?.clone();
    let (d, p) = parse_header(&header).map_err(schema)?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| schema(e.to_string()))?;
        let row = r + 1;
        if record.len() != d + p {
            return Err(schema(format!("row {row} has {} fields, expected {}", record.len(), d + p)));
        }
        for (c, cell) in record.iter().enumerate() {
            let value = cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                schema(format!("row {row}, column {} ('{}'): '{cell}' is not a finite number", c + 1, &header[c]))
            })?;
            if c < d {
                xs.push(value);
            } else {
                ys.push(value);
            }
        }
    }
    let n = xs.len() / d;
    if n < 2 {
        return Err(schema(format!("need at least 2 data rows, got {n}")));
    }
    let x = DesignMatrix::new(d, xs).map_err(|e| schema(e.to_string()))?;
    Sample::new(x, p, ys).map_err(|e| schema(e.to_string()))
}
