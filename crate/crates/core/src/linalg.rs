//! Small dense row-major matrices.
//!
//! State space dimensions here are tiny (usually 1), so everything is plain
//! `Vec<f64>` storage with naive loops. The ridge solver is the only consumer
//! of larger systems and goes through [`cholesky_solve`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot ratio above which a matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}[", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(r, c)])?;
            }
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// 1×1 matrix.
    pub fn scalar(v: f64) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// Column vector.
    pub fn column(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Value of a 1×1 matrix (or the first entry otherwise).
    pub fn value(&self) -> f64 {
        self.data[0]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// ‖M − Mᵀ‖∞ over entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in 0..self.cols.min(self.rows) {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }

    /// (M + Mᵀ)/2 with negative diagonal entries clamped to zero.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert!(self.is_square());
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                let avg = 0.5 * (self[(r, c)] + self[(c, r)]);
                out[(r, c)] = avg;
                out[(c, r)] = avg;
            }
            if out[(r, r)] < 0.0 {
                out[(r, r)] = 0.0;
            }
        }
        out
    }

    pub fn try_mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.data[k * rhs.cols + c];
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Matrix, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "cannot {op} {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn try_add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "subtract", |a, b| a - b)
    }

    /// Gauss–Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Inverse> {
        gauss_jordan(self)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

// Operator forms panic on shape mismatch; callers validate shapes up front.
impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.try_mul(rhs).expect("matrix product shape")
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix sum shape")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("matrix difference shape")
    }
}

/// Result of a Gauss–Jordan inversion.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub matrix: Matrix,
    /// log |det|
    pub log_abs_det: f64,
    /// max |pivot| / min |pivot|
    pub condition: f64,
}

fn gauss_jordan(m: &Matrix) -> Result<Inverse> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cannot invert a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;
    let mut log_abs_det = 0.0;

    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[(col, col)].abs();
        for r in (col + 1)..n {
            let v = a[(r, col)].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if !(best > 0.0) || !best.is_finite() {
            return Err(Error::Singular {
                what: "matrix",
                step: None,
                cond: f64::INFINITY,
            });
        }
        max_pivot = max_pivot.max(best);
        min_pivot = min_pivot.min(best);
        log_abs_det += best.ln();

        if pivot_row != col {
            for c in 0..n {
                a.data.swap(col * n + c, pivot_row * n + c);
                inv.data.swap(col * n + c, pivot_row * n + c);
            }
        }

        let p = a[(col, col)];
        for c in 0..n {
            a[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for c in 0..n {
                a[(r, c)] -= factor * a[(col, c)];
                inv[(r, c)] -= factor * inv[(col, c)];
            }
        }
    }

    let condition = if n == 0 { 1.0 } else { max_pivot / min_pivot };
    if condition > SINGULAR_CONDITION {
        return Err(Error::Singular {
            what: "matrix",
            step: None,
            cond: condition,
        });
    }
    Ok(Inverse {
        matrix: inv,
        log_abs_det,
        condition,
    })
}

/// Solves `a · X = b` for symmetric positive definite `a` (n×n, row-major)
/// and `k` right-hand sides stored column-wise in `b` (n×k, row-major).
///
/// Fails when a pivot drops below `1e-12` times the largest diagonal entry.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64], k: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n * k {
        return Err(Error::Dimension("cholesky_solve operand sizes".into()));
    }
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a[i * n + i].abs()));
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            let (li, lj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            s -= li.iter().zip(lj).map(|(x, y)| x * y).sum::<f64>();
            if i == j {
                if !(s > tol) {
                    return Err(Error::Singular {
                        what: "normal equations",
                        step: None,
                        cond: if s > 0.0 { max_diag / s } else { f64::INFINITY },
                    });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for col in 0..k {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[i * k + col];
            for j in 0..i {
                s -= l[i * n + j] * x[j * k + col];
            }
            x[i * k + col] = s / l[i * n + i];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x[i * k + col];
            for j in (i + 1)..n {
                s -= l[j * n + i] * x[j * k + col];
            }
            x[i * k + col] = s / l[i * n + i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_known_matrix() {
        let m = Matrix::from_rows(&[&[4.0, 7.0], &[2.0, 6.0]]).unwrap();
        let inv = m.inverse().unwrap();
        let expect = [0.6, -0.7, -0.2, 0.4];
        for (got, want) in inv.matrix.as_slice().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((inv.log_abs_det - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let inv = m.inverse().unwrap();
        assert_eq!(inv.matrix, m);
    }

    #[test]
    fn singular_is_rejected() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(m.inverse(), Err(Error::Singular { .. })));
        let ill = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1e-13]]).unwrap();
        assert!(matches!(ill.inverse(), Err(Error::Singular { .. })));
    }

    #[test]
    fn product_with_inverse_is_identity() {
        let m =
            Matrix::from_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 2.0]]).unwrap();
        let inv = m.inverse().unwrap().matrix;
        let id = &m * &inv;
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((id[(r, c)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetrize_clamps_negative_diagonal() {
        let m = Matrix::from_rows(&[&[-1e-15, 1.0], &[3.0, 2.0]]).unwrap();
        let s = m.symmetrized();
        assert_eq!(s[(0, 0)], 0.0);
        assert_eq!(s[(0, 1)], 2.0);
        assert_eq!(s.asymmetry(), 0.0);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let b = [2.0, 8.0, 1.0, 3.0];
        let x = cholesky_solve(&a, 2, &b, 2).unwrap();
        // column 0: [2,1] -> x = [0.5, 0]; column 1: [8,3] -> x = [2.25, -0.5]
        assert!((x[0] - 0.5).abs() < 1e-12 && x[2].abs() < 1e-12);
        assert!((x[1] - 2.25).abs() < 1e-12 && (x[3] + 0.5).abs() < 1e-12);
        assert!(cholesky_solve(&[1.0, 1.0, 1.0, 1.0], 2, &[1.0, 1.0], 1).is_err());
    }
}
