//! Matrix Market reader and writer for dense real matrices.
//!
//! Reads `array` and `coordinate` files with `real` or `integer` fields and
//! `general`, `symmetric` or `skew-symmetric` symmetry. Coordinate
//! duplicates are summed. Writes `array real general` with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::FullOrderModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn perr(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_header(path: &str, line: &str) -> Result<(Layout, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(perr(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        f => return Err(perr(path, 1, format!("unsupported format '{f}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        f => return Err(perr(path, 1, format!("unsupported field '{f}'"))),
    }
    let sym = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        s => return Err(perr(path, 1, format!("unsupported symmetry '{s}'"))),
    };
    Ok((layout, sym))
}

fn number<T: std::str::FromStr>(path: &str, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(path, line, format!("{what} '{tok}' is not a number")))
}

/// Parses Matrix Market text; `path` labels error messages.
pub fn parse_matrix_market(text: &str, path: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| perr(path, 1, "empty file"))?;
    let (layout, sym) = parse_header(path, first)?;
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| perr(path, 1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let want = if layout == Layout::Array { 2 } else { 3 };
    if dims.len() != want {
        return Err(perr(path, size_line, format!("size line needs {want} integers")));
    }
    let rows: usize = number(path, size_line, dims[0], "row count")?;
    let cols: usize = number(path, size_line, dims[1], "column count")?;
    if sym != Symmetry::General && rows != cols {
        return Err(perr(path, size_line, "symmetric storage needs a square matrix"));
    }
    let mut m = DMatrix::zeros(rows, cols);
    let mirror = |m: &mut DMatrix<f64>, i: usize, j: usize, v: f64| match sym {
        Symmetry::General => {}
        _ if i == j => {}
        Symmetry::Symmetric => m[(j, i)] += v,
        Symmetry::Skew => m[(j, i)] -= v,
    };
    match layout {
        Layout::Array => {
            // Column-major; symmetric storage lists the lower triangle only.
            let slots: Vec<(usize, usize)> = (0..cols)
                .flat_map(|j| {
                    let start = match sym {
                        Symmetry::General => 0,
                        Symmetry::Symmetric => j,
                        Symmetry::Skew => j + 1,
                    };
                    (start..rows).map(move |i| (i, j))
                })
                .collect();
            let mut k = 0;
            let mut last = size_line;
            for (ln, l) in body {
                last = ln;
                for tok in l.split_whitespace() {
                    if k == slots.len() {
                        return Err(perr(path, ln, format!("more than the {} declared entries", slots.len())));
                    }
                    let v: f64 = number(path, ln, tok, "entry")?;
                    let (i, j) = slots[k];
                    m[(i, j)] = v;
                    mirror(&mut m, i, j, v);
                    k += 1;
                }
            }
            if k != slots.len() {
                return Err(perr(path, last, format!("found {k} entries, {} declared", slots.len())));
            }
        }
        Layout::Coordinate => {
            let nnz: usize = number(path, size_line, dims[2], "entry count")?;
            let mut k = 0;
            let mut last = size_line;
            for (ln, l) in body {
                last = ln;
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(perr(path, ln, "coordinate entry needs 'row col value'"));
                }
                if k == nnz {
                    return Err(perr(path, ln, format!("more than the {nnz} declared entries")));
                }
                let i: usize = number(path, ln, t[0], "row index")?;
                let j: usize = number(path, ln, t[1], "column index")?;
                let v: f64 = number(path, ln, t[2], "entry")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(perr(path, ln, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                if sym == Symmetry::Skew && i == j {
                    return Err(perr(path, ln, "skew-symmetric file stores a diagonal entry"));
                }
                m[(i - 1, j - 1)] += v;
                mirror(&mut m, i - 1, j - 1, v);
                k += 1;
            }
            if k != nnz {
                return Err(perr(path, last, format!("found {k} entries, {nnz} declared")));
            }
        }
    }
    Ok(m)
}

pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_market(&text, &path.display().to_string())
}

pub fn format_matrix_market(m: &DMatrix<f64>) -> String {
    let mut s = String::with_capacity(32 + 25 * m.len());
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn write_matrix_market(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix_market(m))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPaths {
    pub a: PathBuf,
    pub b: PathBuf,
    pub bw: PathBuf,
    pub c: PathBuf,
    pub h: PathBuf,
}

impl ModelPaths {
    /// `A.mtx`, `B.mtx`, `Bw.mtx`, `C.mtx`, `H.mtx` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            a: dir.join("A.mtx"),
            b: dir.join("B.mtx"),
            bw: dir.join("Bw.mtx"),
            c: dir.join("C.mtx"),
            h: dir.join("H.mtx"),
        }
    }

    pub fn resolve(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            a: r(&self.a),
            b: r(&self.b),
            bw: r(&self.bw),
            c: r(&self.c),
            h: r(&self.h),
        }
    }
}

/// Loads the five plant matrices and cross-checks their dimensions.
pub fn load_matrix_market(paths: &ModelPaths) -> Result<FullOrderModel> {
    let a = read_matrix_market(&paths.a)?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim(format!("{}: A^f is {}x{}, not square", paths.a.display(), n, a.ncols())));
    }
    let b = read_matrix_market(&paths.b)?;
    let bw = read_matrix_market(&paths.bw)?;
    let c = read_matrix_market(&paths.c)?;
    let h = read_matrix_market(&paths.h)?;
    for (p, rows) in [(&paths.b, b.nrows()), (&paths.bw, bw.nrows())] {
        if rows != n {
            return Err(Error::dim(format!("{}: {rows} rows, A^f has {n}", p.display())));
        }
    }
    for (p, cols) in [(&paths.c, c.ncols()), (&paths.h, h.ncols())] {
        if cols != n {
            return Err(Error::dim(format!("{}: {cols} columns, A^f has {n}", p.display())));
        }
    }
    FullOrderModel::new(a, b, bw, c, h)
}

pub fn save_matrix_market(paths: &ModelPaths, fom: &FullOrderModel) -> Result<()> {
    for (p, m) in [(&paths.a, &fom.a), (&paths.b, &fom.b), (&paths.bw, &fom.bw), (&paths.c, &fom.c), (&paths.h, &fom.h)] {
        write_matrix_market(p, m)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_array() {
        let m = parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n", "i.mtx").unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
    }

    #[test]
    fn array_is_column_major() {
        let m = parse_matrix_market("%%MatrixMarket matrix array real general\n% c\n2 3\n1 2\n3 4\n5 6\n", "x").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
    }

    #[test]
    fn coordinate_duplicates_are_summed() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.5\n2 1 -1\n1 1 2.25\n";
        let m = parse_matrix_market(text, "d.mtx").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[3.75, 0.0, -1.0, 0.0]));
    }

    #[test]
    fn symmetric_storage_is_mirrored() {
        let c = parse_matrix_market("%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 1 4\n2 1 7\n", "s").unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[4.0, 7.0, 7.0, 0.0]));
        let a = parse_matrix_market("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n", "s").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
        let k = parse_matrix_market("%%MatrixMarket matrix array real skew-symmetric\n2 2\n5\n", "k").unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[0.0, -5.0, 5.0, 0.0]));
    }

    fn line_of(text: &str) -> (usize, String) {
        match parse_matrix_market(text, "bad.mtx").unwrap_err() {
            Error::Parse { line, msg, path } => {
                assert_eq!(path, "bad.mtx");
                (line, msg)
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("%%MatrixMarket tensor array real general\n1 1\n1\n").0, 1);
        assert_eq!(line_of("%%MatrixMarket matrix array complex general\n1 1\n1\n").0, 1);
        let (l, msg) = line_of("%%MatrixMarket matrix array real general\n% c\n2 1\n1\nx\n");
        assert_eq!(l, 5);
        assert!(msg.contains("not a number"));
        let (l, msg) = line_of("%%MatrixMarket matrix array real general\n2 1\n1\n");
        assert_eq!(l, 3);
        assert!(msg.contains("1 entries, 2 declared"));
        assert_eq!(line_of("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").0, 3);
        assert_eq!(line_of("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 1\n").0, 4);
        assert_eq!(line_of("%%MatrixMarket matrix coordinate real general\n2 x 1\n").0, 2);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DMatrix::from_fn(7, 5, |_, _| {
            let mant: f64 = rng.gen_range(-1.0..1.0);
            mant * 10f64.powi(rng.gen_range(-300..300))
        });
        let mut m = m;
        m[(0, 0)] = f64::MIN_POSITIVE / 3.0;
        m[(1, 0)] = f64::MAX;
        m[(2, 0)] = -0.0;
        m[(3, 0)] = 0.1 + 0.2;
        let back = parse_matrix_market(&format_matrix_market(&m), "rt").unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn model_files_are_cross_checked() {
        let dir = tempfile::tempdir().unwrap();
        let fom = crate::model::tests::random_fom(4, 2, 1, 2, 3);
        let paths = ModelPaths::in_dir(dir.path());
        save_matrix_market(&paths, &fom).unwrap();
        let back = load_matrix_market(&paths).unwrap();
        assert_eq!(back, fom);
        write_matrix_market(&paths.c, &DMatrix::zeros(1, 3)).unwrap();
        let err = load_matrix_market(&paths).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)) && err.to_string().contains("C.mtx"), "{err}");
    }
}
