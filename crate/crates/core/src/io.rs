//! CSV ingestion of samples and emission of density grids.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Observations (Y_i, X_i); `x` is row-major n × p.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub p: usize,
}

impl Sample {
    pub fn new(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 || x.len() != y.len() * p {
            return Err(Error::Data(format!(
                "{} responses and {} regressor values do not form an n × {p} sample",
                y.len(),
                x.len()
            )));
        }
        Ok(Sample { y, x, p })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub sample: Sample,
    /// Rows dropped for non-finite entries.
    pub dropped: usize,
}

pub fn expected_header(p: usize) -> Vec<String> {
    std::iter::once("y".to_string())
        .chain((1..=p).map(|k| format!("x{k}")))
        .collect()
}

/// Parse `y,x1..xp` CSV from any reader. With `p = None` the dimension is
/// inferred from the header.
pub fn parse_sample_csv<R: Read>(reader: R, p: Option<usize>) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("malformed CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let p = match p {
        Some(p) => p,
        None => header.len().saturating_sub(1),
    };
    let want = expected_header(p);
    if p == 0 || header != want {
        return Err(Error::Data(format!(
            "header {:?} does not match expected columns {}",
            header,
            want.join(",")
        )));
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut dropped = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec =
            rec.map_err(|e| Error::Data(format!("malformed CSV at record {}: {e}", line + 1)))?;
        if rec.len() != p + 1 {
            return Err(Error::Data(format!(
                "record {} has {} columns, expected {}",
                line + 1,
                rec.len(),
                p + 1
            )));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("record {}: cannot parse {s:?}", line + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        y.push(vals[0]);
        x.extend_from_slice(&vals[1..]);
    }
    Ok(Ingested {
        sample: Sample { y, x, p },
        dropped,
    })
}

pub fn ingest_csv(path: &Path, p: Option<usize>) -> Result<Ingested> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_sample_csv(std::io::BufReader::new(f), p)
}

/// Long-format density grid: columns a, b1..bp, density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub p: usize,
    /// Each row holds (a, b1..bp, density).
    pub rows: Vec<Vec<f64>>,
}

pub fn density_header(p: usize) -> Vec<String> {
    std::iter::once("a".to_string())
        .chain((1..=p).map(|k| format!("b{k}")))
        .chain(std::iter::once("density".to_string()))
        .collect()
}

/// 17 significant digits; parses back to the identical f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_density_csv<W: Write>(w: W, table: &DensityTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(density_header(table.p))
        .map_err(|e| Error::Io(e.to_string()))?;
    for row in &table.rows {
        wtr.write_record(row.iter().map(|v| fmt17(*v)))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_density_csv<R: Read>(reader: R) -> Result<DensityTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("malformed CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 {
        return Err(Error::Data("density CSV needs a, b1.., density".into()));
    }
    let p = header.len() - 2;
    if header != density_header(p) {
        return Err(Error::Data(format!(
            "header {:?} does not match {}",
            header,
            density_header(p).join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("record {}: {e}", line + 1)))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("record {}: cannot parse {s:?}", line + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != p + 2 {
            return Err(Error::Data(format!(
                "record {} has {} columns",
                line + 1,
                vals.len()
            )));
        }
        rows.push(vals);
    }
    Ok(DensityTable { p, rows })
}
