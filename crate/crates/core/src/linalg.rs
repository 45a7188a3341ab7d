//! Small dense matrices and the two linear solvers used by the engine.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Systems up to this many unknowns are solved by dense elimination;
/// larger ones fall back to Gauss-Seidel sweeps.
pub const DENSE_LIMIT: usize = 2000;
/// Relative tolerance of the Gauss-Seidel iteration.
pub const GS_TOL: f64 = 1e-12;
/// Sweep cap of the Gauss-Seidel iteration.
pub const GS_MAX_SWEEPS: usize = 1_000_000;

pub(crate) fn fabs(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

/// Dense row-major matrix of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (d, s) in out.data.iter_mut().zip(&other.data) {
            *d += s;
        }
        out
    }

    /// Block-diagonal combination with zero off-blocks.
    pub fn block_diag(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out.set(self.rows + i, self.cols + j, other.get(i, j));
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Mat, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Total order on matrices of equal shape, entry by entry.
    pub fn total_cmp(&self, other: &Mat) -> core::cmp::Ordering {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter().zip(&other.data) {
            let ord = a.total_cmp(b);
            if ord != core::cmp::Ordering::Equal {
                return ord;
            }
        }
        core::cmp::Ordering::Equal
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                writeln!(f)?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// The pruned linear system was singular after all; indicates a bug in the
/// pruning step or a malformed input matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingularSystem(pub String);

impl fmt::Display for SingularSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "singular linear system: {}", self.0)
    }
}

/// LU factorization with partial pivoting of a dense square matrix.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: Mat) -> Result<Lu, SingularSystem> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.data;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            let mut best = fabs(lu[k * n + k]);
            for i in (k + 1)..n {
                let v = fabs(lu[i * n + k]);
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best < 1e-300 {
                return Err(SingularSystem(format!("zero pivot in column {k}")));
            }
            if pivot != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot * n + j);
                }
                perm.swap(k, pivot);
            }
            let d = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / d;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Solves x = b + A·x for substochastic sparse A by Gauss-Seidel sweeps in
/// the given update order. `rows[i]` lists the nonzero (column, value)
/// entries of row i.
pub fn gauss_seidel(
    rows: &[Vec<(usize, f64)>],
    b: &[f64],
    order: &[usize],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>, SingularSystem> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for sweep in 0..max_sweeps {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for &i in order {
            let mut s = b[i];
            let mut diag = 0.0;
            for &(j, v) in &rows[i] {
                if j == i {
                    diag = v;
                } else {
                    s += v * x[j];
                }
            }
            // Row equation x_i = b_i + diag·x_i + Σ_{j≠i} v·x_j.
            let next = if diag != 0.0 { s / (1.0 - diag) } else { s };
            delta = delta.max(fabs(next - x[i]));
            scale = scale.max(fabs(next));
            x[i] = next;
        }
        if delta <= tol * scale {
            return Ok(x);
        }
        if sweep == max_sweeps - 1 {
            return Err(SingularSystem(format!(
                "Gauss-Seidel did not converge in {max_sweeps} sweeps (residual {delta:e})"
            )));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        // (I - P)x = b with P = [[0.2, 0.3], [0.0, 0.5]].
        let a = Mat::from_rows(&[&[0.8, -0.3], &[0.0, 0.5]]);
        let lu = Lu::factor(a).unwrap();
        let x = lu.solve(&[0.5, 0.5]);
        assert!(fabs(x[1] - 1.0) < 1e-12);
        assert!(fabs(x[0] - 1.0) < 1e-12);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(Lu::factor(a).is_err());
    }

    #[test]
    fn gauss_seidel_matches_lu() {
        // x = b + P x, P substochastic.
        let rows = alloc::vec![
            alloc::vec![(0usize, 0.2), (1usize, 0.3)],
            alloc::vec![(1usize, 0.5)],
        ];
        let b = [0.5, 0.5];
        let order = [1usize, 0];
        let x = gauss_seidel(&rows, &b, &order, GS_TOL, GS_MAX_SWEEPS).unwrap();
        assert!(fabs(x[0] - 1.0) < 1e-9);
        assert!(fabs(x[1] - 1.0) < 1e-9);
    }

    #[test]
    fn mat_block_and_mul() {
        let a = Mat::from_rows(&[&[1.0, 2.0]]);
        let b = Mat::from_rows(&[&[3.0], &[4.0]]);
        assert_eq!(a.mul(&b).get(0, 0), 11.0);
        let d = a.block_diag(&b);
        assert_eq!(d.rows(), 3);
        assert_eq!(d.cols(), 3);
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.get(2, 2), 4.0);
    }
}
