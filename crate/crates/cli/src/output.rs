//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! that reading a file back reproduces the in-memory values exactly.

use std::path::Path;

use cvt_core::ProductCvt;

use crate::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_rows<I>(path: &Path, header: Vec<String>, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// `k, x_1, ..., x_n` with `k` starting at 1.
pub fn write_centroids(path: &Path, p: &ProductCvt) -> Result<(), CliError> {
    let header = std::iter::once("k".to_string())
        .chain((1..=p.dim()).map(|i| format!("x_{i}")))
        .collect();
    let rows = p.materialize().into_iter().enumerate().map(|(k, z)| {
        std::iter::once((k + 1).to_string())
            .chain(z.into_iter().map(fmt_f64))
            .collect()
    });
    write_rows(path, header, rows)
}

/// `k, lo_1, hi_1, ..., lo_n, hi_n`.
pub fn write_cells(path: &Path, p: &ProductCvt) -> Result<(), CliError> {
    let header = std::iter::once("k".to_string())
        .chain((1..=p.dim()).flat_map(|i| [format!("lo_{i}"), format!("hi_{i}")]))
        .collect();
    let rows = (0..p.len()).map(|k| {
        let cell = p.cell_of(k).expect("k < len");
        std::iter::once((k + 1).to_string())
            .chain(
                cell.sides()
                    .iter()
                    .flat_map(|s| [fmt_f64(s.lo()), fmt_f64(s.hi())]),
            )
            .collect()
    });
    write_rows(path, header, rows)
}

pub fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    write_rows(path, header.iter().map(|s| s.to_string()).collect(), rows)
}

/// Reads a centroid file written by [`write_centroids`], in row order.
pub fn read_centroids(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |msg: String| CliError::Verify(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("k") || header.len() < 2 {
        return Err(bad("expected header `k,x_1,...`".into()));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let k: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {}: bad index", row + 1)))?;
        if k != row + 1 {
            return Err(bad(format!("row {}: index {k} out of sequence", row + 1)));
        }
        let z = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("row {}: bad coordinate", row + 1)))?;
        out.push(z);
    }
    Ok(out)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            7.5,
            f64::MIN_POSITIVE,
            12.345678901234567,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
