//! Binary PGM (P5) grid export.
//!
//! Cell `(r, c)` becomes pixel row `r`, column `c`. Values are multiplied by
//! the scale recorded in a `# scale <k>` comment and clamped to `[0, 255]`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{BinaryGrid, Grid, IntensityGrid};

pub fn write_pgm<W: Write>(mut w: W, grid: &IntensityGrid, scale: f64) -> Result<()> {
    let n = grid.size();
    write!(w, "P5\n# scale {scale}\n{n} {n}\n255\n")?;
    let bytes: Vec<u8> = grid
        .as_slice()
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Binary masks map 1 to 255.
pub fn write_mask_pgm<W: Write>(w: W, grid: &BinaryGrid) -> Result<()> {
    write_pgm(w, &grid.map(f64::from), 255.0)
}

/// Scale that maps the grid maximum to 255 (1 for an all-zero grid).
pub fn auto_scale(grid: &IntensityGrid) -> f64 {
    let max = grid.max_value();
    if max > 0.0 {
        255.0 / max
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub pixels: Grid<u8>,
    pub scale: Option<f64>,
}

fn next_token<R: BufRead>(r: &mut R, scale: &mut Option<f64>) -> Result<String> {
    let mut tok = String::new();
    loop {
        let buf = r.fill_buf()?;
        let Some(&b) = buf.first() else {
            return if tok.is_empty() {
                Err(Error::Pgm("unexpected end of header".into()))
            } else {
                Ok(tok)
            };
        };
        if b == b'#' && tok.is_empty() {
            let mut line = String::new();
            r.read_line(&mut line)?;
            if let Some(v) = line.trim_start_matches('#').trim().strip_prefix("scale") {
                *scale = v.trim().parse().ok();
            }
            continue;
        }
        r.consume(1);
        if b.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(b as char);
        }
    }
}

/// Reads a square P5 image with maxval 255.
pub fn read_pgm<R: BufRead>(mut r: R) -> Result<PgmImage> {
    let mut scale = None;
    if next_token(&mut r, &mut scale)? != "P5" {
        return Err(Error::Pgm("not a P5 file".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        next_token(&mut r, &mut scale)?
            .parse()
            .map_err(|_| Error::Pgm(format!("bad {what}")))
    };
    let (w, h, max) = (num("width")?, num("height")?, num("maxval")?);
    if w != h || max != 255 {
        return Err(Error::Pgm(format!("expected a square 8-bit image, got {w}x{h} max {max}")));
    }
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data)?;
    Ok(PgmImage {
        pixels: Grid::from_vec(w, data)?,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    #[test]
    fn round_trip_with_scale() {
        let mut g = IntensityGrid::new(4);
        *g.at_mut(0, 1) = 10.0;
        *g.at_mut(3, 2) = 400.0;
        *g.at_mut(2, 2) = -3.0;
        let mut buf = Vec::new();
        write_pgm(&mut buf, &g, 0.5).unwrap();
        assert!(buf.starts_with(b"P5\n# scale 0.5\n4 4\n255\n"));
        let img = read_pgm(&buf[..]).unwrap();
        assert_eq!(img.scale, Some(0.5));
        assert_eq!(img.pixels.at(0, 1), 5);
        assert_eq!(img.pixels.at(3, 2), 200);
        assert_eq!(img.pixels.at(2, 2), 0);
    }

    #[test]
    fn mask_export() {
        let mut m = BinaryGrid::new(3);
        m.set(Cell::new(1, 2), 1);
        let mut buf = Vec::new();
        write_mask_pgm(&mut buf, &m).unwrap();
        let img = read_pgm(&buf[..]).unwrap();
        assert_eq!(img.pixels.at(1, 2), 255);
        assert_eq!(img.pixels.as_slice().iter().filter(|&&v| v != 0).count(), 1);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(read_pgm(&b"P2\n2 2\n255\n"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 3\n255\n\0\0\0\0\0\0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\0"[..]).is_err());
    }
}
