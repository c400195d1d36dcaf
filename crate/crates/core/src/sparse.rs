//! Compressed-row matrices and a banded direct solver.
//!
//! Structured P1 meshes numbered row by row give matrices whose bandwidth is
//! about one grid row, so a banded LU with partial pivoting factors the
//! desk-scale systems used here in well under a millisecond per step.

use thiserror::Error;

/// Largest system accepted by [`dense_inverse_oracle`].
pub const DENSE_ORACLE_MAX: usize = 500;

/// Acceptance threshold for `|Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange { row: usize, col: usize, n_rows: usize, n_cols: usize },
    #[error("matrix must be square (got {0}x{1})")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular matrix: no usable pivot in column {0}")]
    Singular(usize),
    #[error("solve residual {0:e} above tolerance")]
    IllConditioned(f64),
    #[error("dense oracle limited to {DENSE_ORACLE_MAX} unknowns (got {0})")]
    TooLarge(usize),
}

/// Row-compressed sparse matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> SparseMatrix {
        SparseMatrix {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Triplets are sorted before compression so the result does not depend on
    /// their order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<SparseMatrix, SparseError> {
        if let Some(&(row, col, _)) = triplets.iter().find(|t| t.0 >= n_rows || t.1 >= n_cols) {
            return Err(SparseError::IndexOutOfRange { row, col, n_rows, n_cols });
        }
        let mut sorted = triplets.to_vec();
        // total_cmp keeps the summation order fixed for equal (row, col) keys
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_offsets = vec![0; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(SparseMatrix { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Square assembly shorthand.
    pub fn assemble(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseMatrix, SparseError> {
        SparseMatrix::from_triplets(n, n, triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension");
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[c] += v;
            }
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entrywise sum of two matrices of equal shape.
    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix, SparseError> {
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols) {
            return Err(SparseError::DimensionMismatch { expected: self.n_rows, got: other.n_rows });
        }
        let mut trip = self.triplets();
        trip.extend(other.triplets());
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &trip)
    }

    /// Returns `self + diag(d)`.
    pub fn with_added_diagonal(&self, d: &[f64]) -> Result<SparseMatrix, SparseError> {
        if d.len() != self.n_rows || self.n_rows != self.n_cols {
            return Err(SparseError::DimensionMismatch { expected: self.n_rows, got: d.len() });
        }
        let mut trip = self.triplets();
        trip.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &trip)
    }

    /// Returns `s * self`.
    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Extracts the block `rows x cols` (index lists into this matrix).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut trip = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    trip.push((k, col_map[c], v));
                }
            }
        }
        SparseMatrix::from_triplets(rows.len(), cols.len(), &trip).expect("indices mapped in range")
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_rows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for r in 0..self.n_rows {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }
}

/// Banded LU factorization with partial pivoting, `P A = L U`.
///
/// Row interchanges are confined to the `kl` rows below the pivot, so `U`
/// keeps an upper bandwidth of at most `kl + ku`. Gauss transforms are stored
/// per elimination step and applied in order during the solve.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<BandedLu, SparseError> {
        if a.n_rows != a.n_cols {
            return Err(SparseError::NotSquare(a.n_rows, a.n_cols));
        }
        let n = a.n_rows;
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            multipliers: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for r in 0..n {
            for (c, v) in a.row(r) {
                let idx = lu.idx(r, c);
                lu.band[idx] = v;
            }
        }
        let scale = a.norm_inf();
        let tiny = f64::EPSILON * 1e-3 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.band[lu.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = lu.band[lu.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(SparseError::Singular(k));
            }
            lu.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (i, j) = (lu.idx(k, c), lu.idx(p, c));
                    lu.band.swap(i, j);
                }
            }
            let pivot = lu.band[lu.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = lu.idx(r, k);
                let l = lu.band[ir] / pivot;
                lu.band[ir] = 0.0;
                lu.multipliers[k * kl.max(1) + (r - k - 1)] = l;
                if l != 0.0 {
                    for c in k + 1..=last_col {
                        let v = lu.band[lu.idx(k, c)];
                        let i = lu.idx(r, c);
                        lu.band[i] -= l * v;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        if b.len() != self.n {
            return Err(SparseError::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let kl = self.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    x[r] -= self.multipliers[k * kl.max(1) + (r - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + self.ku).min(n - 1);
            let mut acc = x[k];
            for c in k + 1..=last_col {
                acc -= self.band[self.idx(k, c)] * x[c];
            }
            x[k] = acc / self.band[self.idx(k, k)];
        }
        Ok(x)
    }
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let denom = a.norm_inf() * xn + bn;
    (r, if denom > 0.0 { rn / denom } else { rn })
}

/// Solves `A x = b` with a banded LU and checks the relative residual,
/// applying one step of iterative refinement if needed.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, SparseError> {
    if b.len() != a.n_rows {
        return Err(SparseError::DimensionMismatch { expected: a.n_rows, got: b.len() });
    }
    let lu = BandedLu::factor(a)?;
    let mut x = lu.solve(b)?;
    let (r, rel) = relative_residual(a, &x, b);
    if rel <= SOLVE_RESIDUAL_TOL {
        return Ok(x);
    }
    let dx = lu.solve(&r)?;
    x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
    let (_, rel) = relative_residual(a, &x, b);
    if rel <= SOLVE_RESIDUAL_TOL && rel.is_finite() {
        Ok(x)
    } else {
        Err(SparseError::IllConditioned(rel))
    }
}

/// Full inverse by Gauss-Jordan elimination with partial pivoting. Test-scale
/// only; used to inspect entrywise signs of inverses of M-matrices.
pub fn dense_inverse_oracle(a: &SparseMatrix) -> Result<Vec<Vec<f64>>, SparseError> {
    if a.n_rows != a.n_cols {
        return Err(SparseError::NotSquare(a.n_rows, a.n_cols));
    }
    let n = a.n_rows;
    if n > DENSE_ORACLE_MAX {
        return Err(SparseError::TooLarge(n));
    }
    let mut m = a.to_dense();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale = a.norm_inf().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .expect("nonempty range");
        if !(m[p][k].abs() > f64::EPSILON * 1e-3 * scale) {
            return Err(SparseError::Singular(k));
        }
        m.swap(k, p);
        inv.swap(k, p);
        let pivot = m[k][k];
        for j in 0..n {
            m[k][j] /= pivot;
            inv[k][j] /= pivot;
        }
        for i in 0..n {
            if i != k && m[i][k] != 0.0 {
                let f = m[i][k];
                for j in 0..n {
                    m[i][j] -= f * m[k][j];
                    inv[i][j] -= f * inv[k][j];
                }
            }
        }
    }
    Ok(inv)
}

/// `inv * b` for a dense matrix.
pub fn dense_matvec(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(b).map(|(a, x)| a * x).sum()).collect()
}
