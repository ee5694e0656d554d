//! Density CSV: a `#` comment line recording the schema version, the grid
//! and free-form parameters, then a `x,value` header and one row per node.
//!
//! ```text
//! # kavg-density v1 half_width=4 points=16384 K=5 sigma=0.1
//! x,value
//! -4,0
//! ...
//! ```

use std::io::{BufRead, BufReader, Read, Write};

use super::grid::{GridDensity, GridSpec};
use crate::error::{KavgError, Result};

pub const DENSITY_SCHEMA: &str = "kavg-density v1";

pub fn write_density<W: Write>(mut out: W, rho: &GridDensity, params: &[(&str, String)]) -> Result<()> {
    let grid = rho.grid();
    write!(
        out,
        "# {DENSITY_SCHEMA} half_width={} points={}",
        grid.half_width(),
        grid.points()
    )?;
    for (key, value) in params {
        write!(out, " {key}={value}")?;
    }
    writeln!(out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "value"])?;
    for (x, v) in grid.nodes().zip(rho.values()) {
        w.write_record([x.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a density written by [`write_density`] and re-validates it: the
/// grid must satisfy [`GridSpec::new`], the `x` column must match the nodes
/// and the values must form a unit-mass nonnegative density.
pub fn read_density<R: Read>(input: R) -> Result<GridDensity> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header = first
        .trim()
        .strip_prefix('#')
        .map(str::trim)
        .ok_or_else(|| KavgError::Parse("missing '# kavg-density' header line".into()))?;
    let rest = header
        .strip_prefix(DENSITY_SCHEMA)
        .ok_or_else(|| KavgError::Parse(format!("expected schema '{DENSITY_SCHEMA}', found '{header}'")))?;
    let mut half_width = None;
    let mut points = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("half_width", v)) => half_width = Some(parse_f64(v)?),
            Some(("points", v)) => {
                points = Some(
                    v.parse::<usize>()
                        .map_err(|e| KavgError::Parse(format!("points: {e}")))?,
                )
            }
            _ => {}
        }
    }
    let grid = GridSpec::new(
        half_width.ok_or_else(|| KavgError::Parse("header lacks half_width".into()))?,
        points.ok_or_else(|| KavgError::Parse("header lacks points".into()))?,
    )?;

    let mut rows = csv::Reader::from_reader(reader);
    let mut values = Vec::with_capacity(grid.points());
    for (j, record) in rows.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(KavgError::Parse(format!("row {j}: expected 2 fields")));
        }
        let x = parse_f64(&record[0])?;
        if j >= grid.points() || (x - grid.node(j)).abs() > 1e-9 * grid.half_width().max(1.0) {
            return Err(KavgError::Parse(format!("row {j}: x = {x} is not a grid node")));
        }
        values.push(parse_f64(&record[1])?);
    }
    let rho = GridDensity::from_values(grid, values)?;
    rho.check_tails(super::TAIL_THRESHOLD)?;
    Ok(rho)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| KavgError::Parse(format!("'{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read_is_lossless() {
        let grid = GridSpec::new(4.0, 512).unwrap();
        let rho = GridDensity::gaussian(&grid, 0.1, 0.3).unwrap();
        let mut buf = Vec::new();
        write_density(&mut buf, &rho, &[("K", "5".into())]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# kavg-density v1 half_width=4 points=512 K=5\nx,value\n"));
        let back = read_density(buf.as_slice()).unwrap();
        assert_eq!(back.values(), rho.values());
        assert_eq!(back.grid(), rho.grid());
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(read_density("x,value\n0,1\n".as_bytes()).is_err());
        let grid = GridSpec::new(4.0, 256).unwrap();
        let rho = GridDensity::uniform(&grid, 1.0).unwrap();
        let mut buf = Vec::new();
        write_density(&mut buf, &rho, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",0\n", ",-1\n", 1);
        assert!(read_density(text.as_bytes()).is_err());
    }
}
