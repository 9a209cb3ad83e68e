//! Dense symmetric kernel matrices and the plain-CSV kernel file format.
//!
//! A kernel file holds `n` rows of `n` comma-separated decimals. It may start
//! with a label row `#labels,<y_1>,...,<y_n>` carrying `+1`/`-1` class labels.
//! Parsing always uses `.` as the decimal separator.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::{Label, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> KernelMatrix<T> {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self { n, entries }
    }

    /// Builds a matrix from rows. Only squareness is checked here; use
    /// [`KernelMatrix::validate`] for the kernel invariants.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            entries.extend(row);
        }
        Ok(Self { n, entries })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)` together.
    #[inline]
    pub fn set_symmetric(&mut self, i: usize, j: usize, value: T) {
        self.entries[i * self.n + j] = value;
        self.entries[j * self.n + i] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Smallest eigenvalue of the symmetric part, via cyclic Jacobi rotations.
    pub fn min_eigenvalue(&self) -> T {
        let n = self.n;
        if n == 0 {
            return T::zero();
        }
        let mut a: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                0.5 * (self.get(i, j).as_f64() + self.get(j, i).as_f64())
            })
            .collect();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum();
            let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
            if off <= 1e-30 * diag.max(1e-300) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let min = (0..n).map(|i| a[i * n + i]).fold(f64::INFINITY, f64::min);
        T::lit(min)
    }

    /// Checks symmetry (exact), unit diagonal, the `[0, 1]` range and the
    /// eigenvalue floor `lambda_min >= -psd_tol`. Never mutates `self`.
    pub fn validate(&self, psd_tol: T) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.n;
        for i in 0..n {
            let d = self.get(i, i);
            if d != T::one() {
                violations.push(Violation::Diagonal {
                    i,
                    value: d.as_f64(),
                });
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !(v >= T::zero() && v <= T::one()) {
                    violations.push(Violation::OutOfRange {
                        i,
                        j,
                        value: v.as_f64(),
                    });
                }
                if j > i && v != self.get(j, i) {
                    violations.push(Violation::Asymmetric { i, j });
                }
            }
        }
        // Eigenvalues are meaningless on a matrix with non-finite entries.
        if self.entries.iter().all(|v| v.is_finite()) {
            let min = self.min_eigenvalue();
            if min < -psd_tol {
                violations.push(Violation::NotPsd {
                    min_eigenvalue: min.as_f64(),
                });
            }
        }
        ValidationReport { violations }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Asymmetric { i: usize, j: usize },
    Diagonal { i: usize, value: f64 },
    OutOfRange { i: usize, j: usize, value: f64 },
    NotPsd { min_eigenvalue: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Asymmetric { i, j } => write!(f, "K[{i},{j}] != K[{j},{i}]"),
            Violation::Diagonal { i, value } => write!(f, "K[{i},{i}] = {value}, expected 1"),
            Violation::OutOfRange { i, j, value } => {
                write!(f, "K[{i},{j}] = {value} outside [0, 1]")
            }
            Violation::NotPsd { min_eigenvalue } => {
                write!(f, "smallest eigenvalue {min_eigenvalue:e} below tolerance")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the only complaint is a negative eigenvalue, which is
    /// expected for shot-noise estimates.
    pub fn only_psd(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::NotPsd { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        let shown: Vec<String> = self
            .violations
            .iter()
            .take(5)
            .map(|v| v.to_string())
            .collect();
        write!(f, "{}", shown.join("; "))?;
        if self.violations.len() > 5 {
            write!(f, "; ... ({} total)", self.violations.len())?;
        }
        Ok(())
    }
}

const LABEL_PREFIX: &str = "#labels";

/// Parses the kernel CSV format. Performs no kernel validation.
pub fn read_kernel_csv<T: Scalar, R: BufRead>(
    reader: R,
) -> Result<(KernelMatrix<T>, Option<Vec<Label>>)> {
    let mut labels = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(LABEL_PREFIX) {
            if labels.is_some() || !rows.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    column: 1,
                    message: "label row must precede the matrix and appear once".into(),
                });
            }
            let rest = rest.strip_prefix(',').ok_or_else(|| Error::Parse {
                line: lineno,
                column: LABEL_PREFIX.len() + 1,
                message: "expected ',' after #labels".into(),
            })?;
            let mut ys = Vec::new();
            for (col, field) in rest.split(',').enumerate() {
                let y = match field.trim() {
                    "1" | "+1" | "1.0" | "+1.0" => 1,
                    "-1" | "-1.0" => -1,
                    other => {
                        return Err(Error::Parse {
                            line: lineno,
                            column: col + 2,
                            message: format!("label {other:?} is not +1 or -1"),
                        })
                    }
                };
                ys.push(y);
            }
            labels = Some(ys);
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in trimmed.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                column: col + 1,
                message: format!("{:?} is not a decimal number", field.trim()),
            })?;
            row.push(T::lit(v));
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if let Some(width) = rows.first().map(Vec::len) {
        if width != n {
            return Err(Error::Parse {
                line: 1,
                column: width,
                message: format!("matrix is {n}x{width}, expected square"),
            });
        }
    }
    if let Some(ys) = &labels {
        if ys.len() != n {
            return Err(Error::Parse {
                line: 1,
                column: ys.len() + 1,
                message: format!("{} labels for a {n}x{n} kernel", ys.len()),
            });
        }
    }
    Ok((KernelMatrix::from_rows(rows)?, labels))
}

/// Writes the kernel CSV format with round-trip precision.
pub fn write_kernel_csv<T: Scalar, W: Write>(
    mut writer: W,
    k: &KernelMatrix<T>,
    labels: Option<&[Label]>,
) -> Result<()> {
    if let Some(ys) = labels {
        let ys: Vec<String> = ys.iter().map(|y| y.to_string()).collect();
        writeln!(writer, "{LABEL_PREFIX},{}", ys.join(","))?;
    }
    for i in 0..k.n() {
        let row: Vec<String> = k
            .row(i)
            .iter()
            .map(|v| format!("{:?}", v.as_f64()))
            .collect();
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_valid() {
        for n in [1, 2, 7] {
            assert!(KernelMatrix::<f64>::identity(n).validate(0.0).is_valid());
        }
    }

    #[test]
    fn out_of_range_entry_is_reported_at_its_index() {
        let k = KernelMatrix::from_rows(vec![vec![1.0, 1.2], vec![1.2, 1.0]]).unwrap();
        let report = k.validate(1e-8);
        assert!(report.violations.contains(&Violation::OutOfRange {
            i: 0,
            j: 1,
            value: 1.2
        }));
    }

    #[test]
    fn near_singular_two_by_two_passes() {
        // eigenvalues 1.99 and 0.01
        let k = KernelMatrix::<f64>::from_rows(vec![vec![1.0, 0.99], vec![0.99, 1.0]]).unwrap();
        assert!(k.validate(0.0).is_valid());
        assert!((k.min_eigenvalue() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_flagged_not_rejected() {
        // eigenvalues of [[1,1,0],[1,1,1],[0,1,1]] are 1 and 1 +- sqrt(2)
        let k = KernelMatrix::<f64>::from_rows(vec![
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        let report = k.validate(1e-8);
        assert!(report.only_psd() && !report.is_valid());
        assert!((k.min_eigenvalue() - (1.0 - 2f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn asymmetry_and_diagonal() {
        let k = KernelMatrix::from_rows(vec![vec![0.9, 0.2], vec![0.3, 1.0]]).unwrap();
        let v = k.validate(1.0).violations;
        assert!(v.contains(&Violation::Asymmetric { i: 0, j: 1 }));
        assert!(v.contains(&Violation::Diagonal { i: 0, value: 0.9 }));
    }

    #[test]
    fn csv_with_labels() {
        let text = "#labels,1,-1\n1,0.5\n0.5,1\n";
        let (k, y) = read_kernel_csv::<f64, _>(text.as_bytes()).unwrap();
        assert_eq!(y, Some(vec![1, -1]));
        assert_eq!(k.get(0, 1), 0.5);

        let mut out = Vec::new();
        write_kernel_csv(&mut out, &k, y.as_deref()).unwrap();
        let (k2, y2) = read_kernel_csv::<f64, _>(out.as_slice()).unwrap();
        assert_eq!((k2, y2), (k, y));
    }

    #[test]
    fn csv_parse_errors_carry_position() {
        match read_kernel_csv::<f64, _>("1,0.5\n0.5,abc\n".as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_kernel_csv::<f64, _>("1,0.5\n0.5\n".as_bytes()).is_err());
        assert!(read_kernel_csv::<f64, _>("#labels,1,0\n1,0\n0,1\n".as_bytes()).is_err());
        // comma decimal separators are not accepted
        assert!(read_kernel_csv::<f64, _>("1;0,5\n0,5;1\n".as_bytes()).is_err());
    }
}
