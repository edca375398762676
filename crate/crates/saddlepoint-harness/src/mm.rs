//! Matrix Market (dense array format) input and output for quadratic
//! instances.
//!
//! An instance is five files plus a JSON sidecar:
//!
//! ```json
//! { "a": "A.mtx", "b": "B.mtx", "c": "C.mtx", "u": "u.mtx", "v": "v.mtx",
//!   "params": { "m_x": 1, "m_y": 1, "l_x": 10, "l_xy": 2, "l_y": 10 },
//!   "seed": 3 }
//! ```
//!
//! `params` and `seed` are optional. Without `params` the constants are
//! measured from the matrices. File names resolve against the sidecar's
//! directory. Vectors are stored as one-column arrays.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use saddlepoint::{QuadraticSaddle, SmoothnessParams};

use crate::config::ParamsConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub a: PathBuf,
    pub b: PathBuf,
    pub c: PathBuf,
    pub u: PathBuf,
    pub v: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn mm_error(path: &Path, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::MatrixMarket { path: path.to_path_buf(), line, message: message.into() }
}

/// Parses a real general array-format matrix.
pub fn parse_array(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines.next().ok_or_else(|| mm_error(path, 1, "empty file"))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(mm_error(path, ln, "expected a `%%MatrixMarket matrix ...` header"));
    }
    if words[2] != "array" {
        return Err(mm_error(path, ln, format!("unsupported format `{}`, only `array`", words[2])));
    }
    if words[3] != "real" && words[3] != "double" && words[3] != "integer" {
        return Err(mm_error(path, ln, format!("unsupported field `{}`", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(mm_error(path, ln, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (ln, size) = data.next().ok_or_else(|| mm_error(path, ln, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| w.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| mm_error(path, ln, "size line must be two nonnegative integers"))?;
    let [rows, cols] = dims[..] else {
        return Err(mm_error(path, ln, "size line must be two nonnegative integers"));
    };
    if symmetric && rows != cols {
        return Err(mm_error(path, ln, "symmetric matrix must be square"));
    }

    let expected = if symmetric { rows * (rows + 1) / 2 } else { rows * cols };
    let mut values = Vec::with_capacity(expected);
    let mut last = ln;
    for (ln, line) in data {
        last = ln;
        for w in line.split_whitespace() {
            let v: f64 = w.parse().map_err(|_| mm_error(path, ln, format!("bad number `{w}`")))?;
            if !v.is_finite() {
                return Err(mm_error(path, ln, "non-finite entry"));
            }
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(mm_error(path, last, format!("expected {expected} entries, found {}", values.len())));
    }

    if !symmetric {
        return Ok(DMatrix::from_column_slice(rows, cols, &values));
    }
    // Lower triangle, column by column.
    let mut m = DMatrix::zeros(rows, rows);
    let mut it = values.into_iter();
    for j in 0..rows {
        for i in j..rows {
            let v = it.next().expect("count checked");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Array format, general, column-major, 17 significant digits.
pub fn format_array(m: &DMatrix<f64>) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_array(&text, path)
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(mm_error(path, 2, format!("expected one column, found {}", m.ncols())));
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}

/// A loaded instance with the parameters the solvers should use.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub quadratic: QuadraticSaddle,
    pub params: SmoothnessParams,
    pub seed: Option<u64>,
}

pub fn read_instance(sidecar_path: &Path) -> Result<LoadedInstance> {
    let text = std::fs::read_to_string(sidecar_path).map_err(|e| HarnessError::io(sidecar_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|source| HarnessError::Json { path: sidecar_path.display().to_string(), source })?;
    let dir = sidecar_path.parent().unwrap_or_else(|| Path::new("."));
    let at = |p: &Path| if p.is_relative() { dir.join(p) } else { p.to_path_buf() };
    let q = QuadraticSaddle::new(
        read_matrix(&at(&sidecar.a))?,
        read_matrix(&at(&sidecar.b))?,
        read_matrix(&at(&sidecar.c))?,
        read_vector(&at(&sidecar.u))?,
        read_vector(&at(&sidecar.v))?,
    )
    .map_err(|e| HarnessError::config("instance.sidecar", e.to_string()))?;
    let params = match sidecar.params {
        Some(p) => p.to_params("sidecar.params")?,
        None => q.measured_params()?,
    };
    Ok(LoadedInstance { quadratic: q, params, seed: sidecar.seed })
}

/// Writes `A.mtx`, `B.mtx`, `C.mtx`, `u.mtx`, `v.mtx` and `instance.json`
/// into `dir`, returning the sidecar path.
pub fn write_instance(
    dir: &Path,
    q: &QuadraticSaddle,
    params: Option<&SmoothnessParams>,
    seed: Option<u64>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let put = |name: &str, m: &DMatrix<f64>| -> Result<PathBuf> {
        let p = dir.join(name);
        std::fs::write(&p, format_array(m)).map_err(|e| HarnessError::io(&p, e))?;
        Ok(PathBuf::from(name))
    };
    let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let sidecar = Sidecar {
        a: put("A.mtx", q.a())?,
        b: put("B.mtx", q.b())?,
        c: put("C.mtx", q.c())?,
        u: put("u.mtx", &col(q.u()))?,
        v: put("v.mtx", &col(q.v()))?,
        params: params.map(|p| ParamsConfig::from(*p)),
        seed,
    };
    let path = dir.join("instance.json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}
