//! ASCII grid files.
//!
//! ```text
//! ncols 4
//! nrows 3
//! xllcenter 0.0
//! yllcenter 0.0
//! cellsize 0.1
//! <top row, j = nrows-1>
//! ...
//! <bottom row, j = 0>
//! ```

use super::GridMap;
use crate::{Error, Result, Vec2};
use std::fmt::Write as _;
use std::path::Path;

const HEADER: [&str; 5] = ["ncols", "nrows", "xllcenter", "yllcenter", "cellsize"];

pub fn write_map(map: &GridMap) -> String {
    let mut out = String::new();
    let o = map.origin();
    let _ = writeln!(out, "ncols {}", map.width());
    let _ = writeln!(out, "nrows {}", map.height());
    let _ = writeln!(out, "xllcenter {}", o.x);
    let _ = writeln!(out, "yllcenter {}", o.y);
    let _ = writeln!(out, "cellsize {}", map.resolution());
    for j in (0..map.height()).rev() {
        let row: Vec<String> = (0..map.width()).map(|i| format!("{}", map.z(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_map(map: &GridMap, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_map(map))?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GridMap> {
    let text = std::fs::read_to_string(path)?;
    parse_map(&text)
}

pub fn parse_map(text: &str) -> Result<GridMap> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut header = [0.0f64; 5];
    for (slot, key) in HEADER.iter().enumerate() {
        let (line, content) = lines.next().ok_or_else(|| Error::Parse {
            line: 1 + slot,
            msg: format!("missing header '{key}'"),
        })?;
        let mut parts = content.split_whitespace();
        let name = parts.next().unwrap_or_default();
        if !name.eq_ignore_ascii_case(key) {
            return Err(Error::Parse { line, msg: format!("expected '{key}', found '{name}'") });
        }
        let value = parts
            .next()
            .ok_or_else(|| Error::Parse { line, msg: format!("'{key}' has no value") })?;
        if parts.next().is_some() {
            return Err(Error::Parse { line, msg: format!("trailing data after '{key}'") });
        }
        header[slot] = value
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("'{value}' is not a number") })?;
    }
    let dims = |v: f64, line: usize| -> Result<usize> {
        if v.fract() != 0.0 || v < 3.0 {
            return Err(Error::Parse { line, msg: format!("dimension {v} must be an integer >= 3") });
        }
        Ok(v as usize)
    };
    let cols = dims(header[0], 1)?;
    let rows = dims(header[1], 2)?;
    let mut grid = vec![0.0; cols * rows];
    let mut last_line = 5;
    for r in 0..rows {
        let (line, content) = lines.next().ok_or_else(|| Error::Parse {
            line: last_line + 1,
            msg: format!("expected {rows} data rows, found {r}"),
        })?;
        last_line = line;
        let values: Vec<&str> = content.split_whitespace().collect();
        if values.len() != cols {
            return Err(Error::Parse {
                line,
                msg: format!("expected {cols} values, found {}", values.len()),
            });
        }
        let j = rows - 1 - r;
        for (i, tok) in values.iter().enumerate() {
            let z: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("'{tok}' is not a number") })?;
            if !z.is_finite() {
                return Err(Error::Parse { line, msg: format!("'{tok}' is not finite") });
            }
            grid[j * cols + i] = z;
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, msg: format!("more than {rows} data rows") });
    }
    GridMap::new(cols, rows, header[4], Vec2::new(header[2], header[3]), grid)
        .map_err(|e| Error::Parse { line: 5, msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "ncols 3\nnrows 3\nxllcenter 0\nyllcenter 0\ncellsize 1\n7 8 9\n4 5 6\n1 2 3\n";

    #[test]
    fn rows_are_top_down() {
        let m = parse_map(SMALL).unwrap();
        assert_eq!(m.z(0, 0), 1.0);
        assert_eq!(m.z(2, 2), 9.0);
        assert_eq!(write_map(&m), SMALL);
    }

    #[test]
    fn short_grid_is_rejected() {
        let text = "ncols 3\nnrows 3\nxllcenter 0\nyllcenter 0\ncellsize 1\n1 2 3\n4 5 6\n7 8\n";
        assert_eq!(
            parse_map(text).unwrap_err(),
            Error::Parse { line: 8, msg: "expected 3 values, found 2".into() }
        );
    }

    #[test]
    fn empty_and_malformed() {
        assert!(matches!(parse_map(""), Err(Error::Parse { line: 1, .. })));
        let text = SMALL.replace("cellsize 1", "cellsize one");
        assert!(matches!(parse_map(&text), Err(Error::Parse { line: 5, .. })));
        let text = SMALL.replace("4 5 6", "4 x 6");
        assert!(matches!(parse_map(&text), Err(Error::Parse { line: 7, .. })));
        let text = SMALL.replace("nrows", "rows");
        assert!(matches!(parse_map(&text), Err(Error::Parse { line: 2, .. })));
        let text = format!("{SMALL}1 1 1\n");
        assert!(matches!(parse_map(&text), Err(Error::Parse { line: 9, .. })));
    }
}
