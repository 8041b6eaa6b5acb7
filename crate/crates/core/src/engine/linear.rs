//! Dense LU with partial pivoting. MNA systems here stay under ~30 unknowns.

use thiserror::Error;

/// Pivots smaller than this are treated as structurally singular.
pub const PIVOT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("singular matrix: pivot {pivot:e} in column {column}")]
pub struct SingularMatrix {
    pub column: usize,
    pub pivot: f64,
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self { n, data: rows.concat() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n + c]
    }
}

/// Solves `a * x = b` in place: `a` is overwritten by its LU factors and
/// `b` by the solution.
pub fn solve_in_place(a: &mut DenseMatrix, b: &mut [f64]) -> Result<(), SingularMatrix> {
    let n = a.n;
    assert_eq!(b.len(), n, "rhs length must match matrix size");
    let data = &mut a.data;
    for k in 0..n {
        let (mut p, mut best) = (k, data[k * n + k].abs());
        for r in k + 1..n {
            let v = data[r * n + k].abs();
            if v > best {
                p = r;
                best = v;
            }
        }
        if !(best >= PIVOT_FLOOR) {
            return Err(SingularMatrix { column: k, pivot: best });
        }
        if p != k {
            for c in 0..n {
                data.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let pivot = data[k * n + k];
        for r in k + 1..n {
            let f = data[r * n + k] / pivot;
            if f == 0.0 {
                continue;
            }
            data[r * n + k] = f;
            let (upper, lower) = data.split_at_mut(r * n);
            let src = &upper[k * n + k + 1..k * n + n];
            let dst = &mut lower[k + 1..n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= f * s;
            }
            b[r] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let row = &data[k * n..k * n + n];
        let s: f64 = row[k + 1..].iter().zip(&b[k + 1..]).map(|(a, x)| a * x).sum();
        b[k] = (b[k] - s) / row[k];
    }
    Ok(())
}

/// Non-destructive wrapper around [`solve_in_place`].
pub fn solve_linear(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    let mut lu = a.clone();
    let mut x = b.to_vec();
    solve_in_place(&mut lu, &mut x)?;
    Ok(x)
}
