//! Matrix, trace, and sweep-summary files.
//!
//! Matrices are plain delimiter-separated text: one row per line, comma
//! (or whitespace) separated values with a '.' decimal point. Lines
//! starting with '#' are comments; a single non-numeric header line is
//! auto-detected and skipped. Values are written with 17 significant
//! digits so read(write(M)) reproduces M exactly. All writes go through
//! a temp file in the target directory followed by a rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::optimize::TraceRecord;
use crate::sweep::SweepRow;

pub const TRACE_HEADER: &str = "iter,time_s,fidelity,orth_defect,energy,grad_norm,lr,best_energy";
pub const SWEEP_HEADER: &str = "w,seed,fidelity,orth_defect,sparsity,iters,wall_time_s";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header_allowed = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if values.len() != first.len() {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: lineno + 1,
                            msg: format!(
                                "ragged row: {} values, expected {}",
                                values.len(),
                                first.len()
                            ),
                        });
                    }
                }
                if !values.iter().all(|v| v.is_finite()) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        msg: "non-finite value".into(),
                    });
                }
                rows.push(values);
                header_allowed = false;
            }
            Err(_) if header_allowed => {
                // single auto-detected header line
                header_allowed = false;
            }
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: e.to_string(),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no data rows".into(),
        });
    }
    DenseMatrix::from_rows(&rows)
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| io_err(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DenseMatrix, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| fmt_full(m.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn write_trace(path: &Path, traces: &[TraceRecord], comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in traces {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t.iter,
            fmt_full(t.wall_time),
            fmt_full(t.fidelity),
            fmt_full(t.orth_defect),
            fmt_full(t.energy),
            fmt_full(t.grad_norm),
            fmt_full(t.lr),
            fmt_full(t.best_energy_so_far),
        ));
    }
    write_atomic(path, &out)
}

pub fn write_sweep_summary(path: &Path, rows: &[SweepRow], comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_full(r.w),
            r.seed,
            fmt_full(r.fidelity),
            fmt_full(r.orth_defect),
            fmt_full(r.sparsity),
            r.iters,
            fmt_full(r.wall_time),
        ));
    }
    write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_normal_matrix;
    use tempfile::tempdir;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        for seed in 0..100u64 {
            let m = random_normal_matrix(4, 3, seed).scaled(10f64.powi(seed as i32 % 9 - 4));
            write_matrix(&path, &m, &[]).unwrap();
            let back = read_matrix(&path).unwrap();
            assert_eq!(back.data(), m.data(), "seed {seed}");
        }
    }

    #[test]
    fn comments_and_header_are_skipped() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.csv");
        fs::write(
            &path,
            "# seed: 7\n# generator: chacha8\ncol_a,col_b\n1.0,2.0\n3.0,4.0\n",
        )
        .unwrap();
        let m = read_matrix(&path).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn whitespace_delimiters_accepted() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ws.txt");
        fs::write(&path, "1.0 2.0\t3.0\n4.0 5.0 6.0\n").unwrap();
        let m = read_matrix(&path).unwrap();
        assert_eq!(m.shape(), (2, 3));
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn late_garbage_is_an_error_not_a_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1.0,2.0\nx,y\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_matrix(Path::new("/nonexistent/m.csv")),
            Err(Error::Io { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn round_trip_arbitrary_finite(values in proptest::collection::vec(
                prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
                6,
            )) {
                let dir = tempdir().unwrap();
                let path = dir.path().join("p.csv");
                let m = DenseMatrix::new(2, 3, values).unwrap();
                write_matrix(&path, &m, &["prop".into()]).unwrap();
                let back = read_matrix(&path).unwrap();
                prop_assert_eq!(back.data(), m.data());
            }
        }
    }
}
