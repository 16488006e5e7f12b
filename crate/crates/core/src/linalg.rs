//! Complex dense and banded LU factorizations and a compressed sparse row
//! matrix.

use std::ops::{AddAssign, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, Complex64> {
        self.data.chunks_mut(self.cols)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn lu(self) -> Result<DenseLu> {
        DenseLu::factor(self)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Row-pivoted LU factors of a square dense matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Internal(format!(
                "LU of a non-square {}x{} matrix",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.data;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let (mut p, mut best) = (k, 0.0);
            for i in k..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            max_pivot = max_pivot.max(best);
            if best < PIVOT_FLOOR {
                return Err(Error::Singular {
                    column: k,
                    pivot: best,
                    condition: max_pivot / best.max(f64::MIN_POSITIVE),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    lu.swap(p * n + j, k * n + j);
                }
            }
            let inv = 1.0 / lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            for row in tail.chunks_mut(n) {
                let f = row[k] * inv;
                row[k] = f;
                if f.re != 0.0 || f.im != 0.0 {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Field element usable in the banded factorization.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Send
    + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    fn modulus(&self) -> f64;
    fn is_zero(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

/// Banded matrix in LAPACK `gb` layout with room for pivoting fill.
#[derive(Debug, Clone)]
pub struct BandMatrix<T = Complex64> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![T::zero(); ldab * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i <= j + self.kl && j <= i + self.ku
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            T::zero()
        }
    }

    /// Replace row `i` by the unit row.
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let k = self.idx(i, j);
            self.ab[k] = if i == j { T::one() } else { T::zero() };
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.ab[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    pub fn lu(self) -> Result<BandLu<T>> {
        BandLu::factor(self)
    }
}

/// Partial-pivoting LU of a banded matrix.
#[derive(Debug, Clone)]
pub struct BandLu<T = Complex64> {
    m: BandMatrix<T>,
    ipiv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn factor(mut m: BandMatrix<T>) -> Result<Self> {
        let (n, kl, ku, ld) = (m.n, m.kl, m.ku, m.ldab);
        let kv = kl + ku;
        let mut ipiv = vec![0; n];
        let mut ju = 0;
        let mut max_pivot: f64 = 0.0;
        let ab = &mut m.ab;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld + kv;
            let mut jp = 0;
            let mut best = 0.0;
            for t in 0..=km {
                let v = ab[col + t].modulus();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            max_pivot = max_pivot.max(best);
            if best < PIVOT_FLOOR {
                return Err(Error::Singular {
                    column: j,
                    pivot: best,
                    condition: max_pivot / best.max(f64::MIN_POSITIVE),
                });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = c * ld + kv + j - c;
                    ab.swap(a, a + jp);
                }
            }
            if km > 0 {
                let inv = T::one() / ab[col];
                for t in 1..=km {
                    ab[col + t] *= inv;
                }
                for c in j + 1..=ju {
                    let top = c * ld + kv + j - c;
                    let u = ab[top];
                    if u.is_zero() {
                        continue;
                    }
                    for t in 1..=km {
                        let l = ab[col + t];
                        ab[top + t] -= l * u;
                    }
                }
            }
        }
        Ok(Self { m, ipiv })
    }

    pub fn size(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, kl, ku, ld) = (self.m.n, self.m.kl, self.m.ku, self.m.ldab);
        let kv = kl + ku;
        let ab = &self.m.ab;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if !bj.is_zero() {
                for t in 1..=km {
                    b[j + t] -= ab[j * ld + kv + t] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] = b[j] / ab[j * ld + kv];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= ab[j * ld + kv + i - j] * bj;
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solve `A X = B` in place for a small row-major `n x n` matrix and an
/// `n x nrhs` right-hand side, with partial pivoting. `a` is overwritten.
pub fn solve_dense_in_place<T: Scalar>(a: &mut [T], n: usize, b: &mut [T], nrhs: usize) -> Result<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * nrhs);
    let mut max_pivot: f64 = 0.0;
    for k in 0..n {
        let (mut piv, mut best) = (k, 0.0);
        for i in k..n {
            let v = a[i * n + k].modulus();
            if v > best {
                best = v;
                piv = i;
            }
        }
        max_pivot = max_pivot.max(best);
        if best < PIVOT_FLOOR {
            return Err(Error::Singular {
                column: k,
                pivot: best,
                condition: max_pivot / best.max(f64::MIN_POSITIVE),
            });
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            for j in 0..nrhs {
                b.swap(k * nrhs + j, piv * nrhs + j);
            }
        }
        let inv = T::one() / a[k * n + k];
        for i in k + 1..n {
            let l = a[i * n + k] * inv;
            if l.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let u = a[k * n + j];
                a[i * n + j] -= l * u;
            }
            for j in 0..nrhs {
                let u = b[k * nrhs + j];
                b[i * nrhs + j] -= l * u;
            }
        }
    }
    for k in (0..n).rev() {
        let inv = T::one() / a[k * n + k];
        for j in 0..nrhs {
            let mut s = b[k * nrhs + j];
            for i in k + 1..n {
                s -= a[k * n + i] * b[i * nrhs + j];
            }
            b[k * nrhs + j] = s * inv;
        }
    }
    Ok(())
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T> CsrMatrix<T>
where
    T: Copy + Default + AddAssign + Mul<Output = T>,
{
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => T::default(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn matvec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Copy + Default + AddAssign + Mul<T, Output = U>,
    {
        (0..self.rows)
            .map(|i| {
                let mut s = U::default();
                for (j, v) in self.row(i) {
                    s += x[j] * v;
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(a: &DenseMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_returns_rhs() {
        let lu = DenseMatrix::identity(4).lu().unwrap();
        let b = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 0.0), c(3.0, -3.0)];
        assert_eq!(lu.solve(&b), b);
    }

    #[test]
    fn small_real_solve() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let a0 = a.clone();
        let mut b = vec![1.0, 0.0, 2.0, 1.0, 3.0, 0.0];
        let b0 = b.clone();
        solve_dense_in_place(&mut a, 3, &mut b, 2).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                let s: f64 = (0..3).map(|k| a0[r * 3 + k] * b[k * 2 + c]).sum();
                assert!((s - b0[r * 2 + c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_reported() {
        let a = DenseMatrix::from_rows(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(a.lu(), Err(Error::Singular { .. })));
    }

    #[test]
    fn band_matches_dense() {
        let n = 40;
        let (kl, ku) = (3, 5);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DenseMatrix::zeros(n, n);
        let mut s: u64 = 7;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal forces pivoting
                let v = c(rnd(), rnd()) + if i == j { c(0.01, 0.0) } else { c(0.0, 0.0) };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0)).collect();
        let xb = band.clone().lu().unwrap().solve(&b);
        let xd = dense.clone().lu().unwrap().solve(&b);
        for (p, q) in xb.iter().zip(&xd) {
            assert!((p - q).norm() < 1e-9 * (1.0 + q.norm()));
        }
        assert!(residual(&dense, &xb, &b) < 1e-10);
        let y = band.matvec(&xb);
        for (p, q) in y.iter().zip(&b) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn csr_sums_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5), (0, 0, 3.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
        let y = m.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![6.0, 6.0]);
    }

    proptest! {
        #[test]
        fn dense_lu_solves(seed in 0u64..1000, n in 1usize..12) {
            let mut s = seed.wrapping_add(1);
            let mut rnd = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = c(rnd(), rnd()) + if i == j { c(2.0, 0.0) } else { c(0.0, 0.0) };
                }
            }
            let b: Vec<Complex64> = (0..n).map(|_| c(rnd(), rnd())).collect();
            let x = a.clone().lu().unwrap().solve(&b);
            prop_assert!(residual(&a, &x, &b) < 1e-12);
        }
    }
}
