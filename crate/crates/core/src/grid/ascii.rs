use std::fmt::Write as _;
use std::path::Path;

use super::{Grid, GridError, GridFrame, GridKind, DEFAULT_NODATA};

const KEYWORDS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

fn format_err(path: &str, line: usize, message: impl Into<String>) -> GridError {
    GridError::Format {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

pub fn read_grid(path: impl AsRef<Path>, kind: GridKind) -> Result<Grid, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_grid(&text, kind, &path.display().to_string())
}

/// Parse ESRI ASCII grid text. Header keywords are case-insensitive;
/// `NODATA_value` is optional and defaults to -9999. Each data line must
/// hold exactly `ncols` values.
pub fn parse_grid(text: &str, kind: GridKind, origin: &str) -> Result<Grid, GridError> {
    let mut header: [Option<f64>; 6] = [None; 6];
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(i, line)) = lines.peek() {
        let mut tok = line.split_whitespace();
        let Some(key) = tok.next() else {
            lines.next();
            continue;
        };
        let lower = key.to_ascii_lowercase();
        let Some(slot) = KEYWORDS.iter().position(|k| *k == lower) else {
            if key.parse::<f64>().is_ok() {
                break;
            }
            return Err(format_err(origin, i + 1, format!("unknown header keyword `{key}`")));
        };
        if header[slot].is_some() {
            return Err(format_err(origin, i + 1, format!("duplicated header keyword `{key}`")));
        }
        let value = tok
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| format_err(origin, i + 1, format!("`{key}` needs a numeric value")))?;
        if tok.next().is_some() {
            return Err(format_err(origin, i + 1, format!("trailing tokens after `{key}`")));
        }
        header[slot] = Some(value);
        lines.next();
    }
    let need = |slot: usize| {
        header[slot].ok_or_else(|| format_err(origin, 0, format!("missing header keyword `{}`", KEYWORDS[slot])))
    };
    let count = |slot: usize| -> Result<usize, GridError> {
        let v = need(slot)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(format_err(origin, 0, format!("`{}` must be a positive integer", KEYWORDS[slot])));
        }
        Ok(v as usize)
    };
    let frame = GridFrame {
        ncols: count(0)?,
        nrows: count(1)?,
        xll: need(2)?,
        yll: need(3)?,
        cellsize: need(4)?,
    };
    if !(frame.cellsize > 0.0) {
        return Err(format_err(origin, 0, "cellsize must be positive"));
    }
    let nodata = header[5].unwrap_or(DEFAULT_NODATA);

    let mut values = Vec::with_capacity(frame.len());
    let mut rows = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        if rows > frame.nrows {
            return Err(format_err(origin, i + 1, format!("more than nrows = {} data rows", frame.nrows)));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| format_err(origin, i + 1, format!("invalid value `{tok}`")))?;
            if kind == GridKind::Categorical && v != nodata && v.fract() != 0.0 {
                return Err(format_err(origin, i + 1, format!("categorical value `{tok}` is not an integer")));
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != frame.ncols {
            return Err(format_err(
                origin,
                i + 1,
                format!("row has {got} values, ncols = {}", frame.ncols),
            ));
        }
    }
    if rows != frame.nrows {
        return Err(format_err(
            origin,
            text.lines().count(),
            format!("found {rows} data rows, nrows = {}", frame.nrows),
        ));
    }
    Ok(Grid {
        frame,
        nodata,
        kind,
        values,
    })
}

/// Canonical ESRI ASCII text. Numbers use the shortest representation that
/// reads back to the same bits.
pub fn write_grid(grid: &Grid) -> String {
    let f = &grid.frame;
    let mut out = String::with_capacity(grid.values.len() * 6 + 128);
    let _ = writeln!(out, "ncols {}", f.ncols);
    let _ = writeln!(out, "nrows {}", f.nrows);
    let _ = writeln!(out, "xllcorner {}", f.xll);
    let _ = writeln!(out, "yllcorner {}", f.yll);
    let _ = writeln!(out, "cellsize {}", f.cellsize);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in grid.values.chunks(f.ncols) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_grid_file(grid: &Grid, path: impl AsRef<Path>) -> Result<(), GridError> {
    let path = path.as_ref();
    std::fs::write(path, write_grid(grid)).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 16\nNODATA_value -9999\n1 2\n3 4\n";

    #[test]
    fn reads_two_by_two() {
        let g = parse_grid(SMALL, GridKind::Continuous, "t").unwrap();
        assert_eq!(g.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.frame.ncols, 2);
        assert_eq!(g.frame.cellsize, 16.0);
    }

    #[test]
    fn extra_value_in_row_is_error() {
        let bad = SMALL.replace("1 2\n", "1 2 5\n");
        match parse_grid(&bad, GridKind::Continuous, "t") {
            Err(GridError::Format { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nodata_cell() {
        let g = parse_grid(&SMALL.replace("3 4", "-9999 4"), GridKind::Continuous, "t").unwrap();
        assert_eq!(g.get(1, 0), None);
        assert_eq!(g.get(1, 1), Some(4.0));
    }

    #[test]
    fn header_problems() {
        let missing = SMALL.replace("cellsize 16\n", "");
        assert!(matches!(parse_grid(&missing, GridKind::Continuous, "t"), Err(GridError::Format { .. })));
        let dup = SMALL.replace("nrows 2\n", "nrows 2\nNROWS 2\n");
        assert!(matches!(parse_grid(&dup, GridKind::Continuous, "t"), Err(GridError::Format { .. })));
        let short = SMALL.replace("3 4\n", "");
        assert!(matches!(parse_grid(&short, GridKind::Continuous, "t"), Err(GridError::Format { .. })));
        let upper = SMALL.replace("ncols", "NCOLS").replace("xllcorner", "XLLCORNER");
        assert!(parse_grid(&upper, GridKind::Continuous, "t").is_ok());
        let no_nodata = SMALL.replace("NODATA_value -9999\n", "");
        assert_eq!(parse_grid(&no_nodata, GridKind::Continuous, "t").unwrap().nodata, -9999.0);
    }

    #[test]
    fn categorical_rejects_fractions() {
        let g = SMALL.replace("1 2", "1.5 2");
        assert!(parse_grid(&g, GridKind::Categorical, "t").is_err());
        assert!(parse_grid(SMALL, GridKind::Categorical, "t").is_ok());
    }

    proptest! {
        #[test]
        fn write_read_is_bit_exact(
            ncols in 1usize..6, nrows in 1usize..6,
            xll in -1e7f64..1e7, yll in -1e7f64..1e7, cellsize in 0.001f64..1000.0,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frame = GridFrame { ncols, nrows, xll, yll, cellsize };
            let mut g = Grid::filled(frame, GridKind::Continuous, 0.0);
            for v in &mut g.values {
                *v = if rng.random_bool(0.1) { DEFAULT_NODATA } else { rng.random_range(-1e5..1e5) };
            }
            let text = write_grid(&g);
            let back = parse_grid(&text, GridKind::Continuous, "t").unwrap();
            prop_assert_eq!(back.frame.xll.to_bits(), xll.to_bits());
            prop_assert_eq!(back.frame.yll.to_bits(), yll.to_bits());
            prop_assert_eq!(back.frame.cellsize.to_bits(), cellsize.to_bits());
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(write_grid(&back), text);
        }
    }
}
