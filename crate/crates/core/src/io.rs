//! Field files: a flat little-endian binary form and a CSV form for plotting.
//!
//! Binary layout: `dim: u64`, `n: u64`, `L: f64`, then `n^dim` values as `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

pub fn write_field_binary<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let g = field.grid();
    out.write_all(&(g.dim() as u64).to_le_bytes())?;
    out.write_all(&(g.points_per_dim() as u64).to_le_bytes())?;
    out.write_all(&g.half_width().to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary<R: Read>(mut input: R) -> Result<Field> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let dim = u64::from_le_bytes(next(&mut input)?) as usize;
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let l = f64::from_le_bytes(next(&mut input)?);
    let grid = GridSpec::new(dim, l, n)?;
    let mut payload = vec![0u8; 8 * grid.len()];
    input.read_exact(&mut payload)?;
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Field::new(grid, values)
}

pub fn save_field(field: &Field, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field_binary(field, std::io::BufWriter::new(file))
}

pub fn load_field(path: &Path) -> Result<Field> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_field_binary(std::io::BufReader::new(file))
}

/// CSV with coordinate columns (`x` or `x,y`) followed by one column per field.
pub fn write_fields_csv<W: Write>(columns: &[(&str, &Field)], mut out: W) -> Result<()> {
    let Some((_, first)) = columns.first() else {
        return Ok(());
    };
    let grid = *first.grid();
    if columns.iter().any(|(_, f)| *f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let coords = if grid.dim() == 1 { "x" } else { "x,y" };
    let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
    writeln!(out, "{coords},{}", names.join(","))?;
    for i in 0..grid.len() {
        let p = grid.point(i);
        let mut line = if grid.dim() == 1 { format!("{:e}", p[0]) } else { format!("{:e},{:e}", p[0], p[1]) };
        for (_, f) in columns {
            line.push_str(&format!(",{:e}", f.values()[i]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
