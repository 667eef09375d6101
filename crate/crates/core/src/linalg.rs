//! Sparse symmetric linear algebra: CSR matrices, LDLᵀ factorization with
//! fill-reducing ordering, preconditioned conjugate gradients, and a small
//! dense symmetric eigensolver for projected problems.
//!
//! The factorization is a simplicial up-looking LDLᵀ on the AMD-permuted
//! matrix. D carries plain 1x1 pivots, so indefinite matrices (the shifted
//! systems A - sigma M of shift-invert) factor as long as no pivot lands on
//! zero; near-zero pivots are bumped to a floor and the solve runs iterative
//! refinement against the retained matrix until the residual contract holds.

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("triplet ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite matrix value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not structurally symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("zero pivot at elimination step {step}")]
    ZeroPivot { step: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fill-reducing ordering failed: {0}")]
    OrderingFailed(String),
    #[error("pcg did not converge in {iterations} iterations (relative residual {rel_residual:e})")]
    PcgNoConvergence {
        iterations: usize,
        rel_residual: f64,
    },
    #[error(
        "factorization residual {rel_residual:e} exceeds {tol:e} after {refinements} refinement steps"
    )]
    RefinementStalled {
        rel_residual: f64,
        tol: f64,
        refinements: usize,
    },
}

/// Symmetric sparse matrix in CSR with the full (both triangles) pattern.
#[derive(Debug, Clone)]
pub struct SparseSym<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<T>,
}

/// Rectangular sparse matrix in CSR.
#[derive(Debug, Clone)]
pub struct SparseRect<T> {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<T>,
}

fn csr_from_triplets<T: Real>(
    rows: usize,
    cols: usize,
    triplets: &[(usize, usize, T)],
) -> Result<(Vec<usize>, Vec<usize>, Vec<T>), LinalgError> {
    for &(i, j, v) in triplets {
        if i >= rows || j >= cols {
            return Err(LinalgError::IndexOutOfRange {
                row: i,
                col: j,
                rows,
                cols,
            });
        }
        if !v.is_finite() {
            return Err(LinalgError::NonFinite { row: i, col: j });
        }
    }
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
    let mut row_ptr = vec![0usize; rows + 1];
    let mut col_idx: Vec<usize> = Vec::new();
    let mut vals: Vec<T> = Vec::new();
    let mut last: Option<(usize, usize)> = None;
    for &k in &order {
        let (i, j, v) = triplets[k];
        if last == Some((i, j)) {
            *vals.last_mut().unwrap() += v;
        } else {
            col_idx.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
    }
    for i in 0..rows {
        row_ptr[i + 1] += row_ptr[i];
    }
    Ok((row_ptr, col_idx, vals))
}

impl<T: Real> SparseSym<T> {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self, LinalgError> {
        let (row_ptr, col_idx, vals) = csr_from_triplets(n, n, triplets)?;
        Ok(SparseSym {
            n,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(p) => self.vals[span.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = T::zero();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
    }

    /// Quadratic form xᵀ S y.
    pub fn quad_form(&self, x: &[T], y: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.n {
            let mut row = T::zero();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[p] * y[self.col_idx[p]];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Pattern symmetry check; FEM assembly produces exactly symmetric
    /// matrices, so this is a guard against misuse, not a repair step.
    pub fn structural_symmetry(&self) -> Result<(), LinalgError> {
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let span = self.row_ptr[j]..self.row_ptr[j + 1];
                if self.col_idx[span].binary_search(&i).is_err() {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// `self + alpha * other`, merging the patterns.
    pub fn add_scaled(&self, other: &SparseSym<T>, alpha: T) -> SparseSym<T> {
        assert_eq!(self.n, other.n);
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut vals = Vec::with_capacity(self.nnz().max(other.nnz()));
        for i in 0..self.n {
            let (mut a, enda) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut b, endb) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while a < enda || b < endb {
                let ja = if a < enda { self.col_idx[a] } else { usize::MAX };
                let jb = if b < endb { other.col_idx[b] } else { usize::MAX };
                if ja < jb {
                    col_idx.push(ja);
                    vals.push(self.vals[a]);
                    a += 1;
                } else if jb < ja {
                    col_idx.push(jb);
                    vals.push(alpha * other.vals[b]);
                    b += 1;
                } else {
                    col_idx.push(ja);
                    vals.push(self.vals[a] + alpha * other.vals[b]);
                    a += 1;
                    b += 1;
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        SparseSym {
            n: self.n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn to_rect(&self) -> SparseRect<T> {
        SparseRect {
            rows: self.n,
            cols: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals: self.vals.clone(),
        }
    }

    /// Dense copy, row-major; oracle and test helper.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

impl<T: Real> SparseRect<T> {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self, LinalgError> {
        let (row_ptr, col_idx, vals) = csr_from_triplets(rows, cols, triplets)?;
        Ok(SparseRect {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::zero();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.vals[p] * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseRect<T> {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut cursor = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut vals = vec![T::zero(); self.nnz()];
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let dst = cursor[j];
                col_idx[dst] = i;
                vals[dst] = self.vals[p];
                cursor[j] += 1;
            }
        }
        SparseRect {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// CSR sparse product `self * other`.
    pub fn matmul(&self, other: &SparseRect<T>) -> SparseRect<T> {
        assert_eq!(self.cols, other.rows);
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut acc = vec![T::zero(); other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.rows {
            touched.clear();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.col_idx[p];
                let v = self.vals[p];
                for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let j = other.col_idx[q];
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = T::zero();
                        touched.push(j);
                    }
                    acc[j] += v * other.vals[q];
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                vals.push(acc[j]);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        SparseRect {
            rows: self.rows,
            cols: other.cols,
            row_ptr,
            col_idx,
            vals,
        }
    }
}

/// Gram triple product Gᵀ M G (SPD when G has full column rank).
pub fn gram_product<T: Real>(g: &SparseRect<T>, m: &SparseSym<T>) -> SparseSym<T> {
    let mg = m.to_rect().matmul(g);
    let gtmg = g.transpose().matmul(&mg);
    SparseSym {
        n: g.cols,
        row_ptr: gtmg.row_ptr,
        col_idx: gtmg.col_idx,
        vals: gtmg.vals,
    }
}

/// LDLᵀ factorization of a symmetric (possibly indefinite) sparse matrix.
///
/// Holds the permutation, the unit lower-triangular factor, pivot
/// diagnostics, and a copy of the matrix for residual-checked solves.
#[derive(Debug, Clone)]
pub struct Factorization<T> {
    n: usize,
    perm: Vec<usize>,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_vals: Vec<T>,
    d: Vec<T>,
    /// Number of pivots bumped away from zero during elimination.
    pub pivot_bumps: usize,
    matrix: SparseSym<T>,
}

const SOLVE_TOL: f64 = 1e-12;
const MAX_REFINEMENTS: usize = 6;

/// Factor a symmetric sparse matrix with AMD ordering and simplicial LDLᵀ.
pub fn factor<T: Real>(s: &SparseSym<T>) -> Result<Factorization<T>, LinalgError> {
    s.structural_symmetry()?;
    let n = s.n;
    if n == 0 {
        return Ok(Factorization {
            n,
            perm: Vec::new(),
            l_colptr: vec![0],
            l_rowidx: Vec::new(),
            l_vals: Vec::new(),
            d: Vec::new(),
            pivot_bumps: 0,
            matrix: s.clone(),
        });
    }

    let perm = amd_order(n, &s.row_ptr, &s.col_idx)?;
    let mut perm_inv = vec![0usize; n];
    for (k, &orig) in perm.iter().enumerate() {
        perm_inv[orig] = k;
    }

    // upper triangle of the permuted matrix, CSC with sorted row indices
    let mut trips: Vec<(usize, usize, T)> = Vec::with_capacity(s.nnz() / 2 + n);
    for i in 0..n {
        for p in s.row_ptr[i]..s.row_ptr[i + 1] {
            let j = s.col_idx[p];
            let (pi, pj) = (perm_inv[i], perm_inv[j]);
            if pi <= pj {
                trips.push((pj, pi, s.vals[p])); // keyed (column, row)
            }
        }
    }
    trips.sort_unstable_by_key(|&(c, r, _)| (c, r));
    let mut up_colptr = vec![0usize; n + 1];
    let mut up_row = Vec::with_capacity(trips.len());
    let mut up_val = Vec::with_capacity(trips.len());
    for &(c, r, v) in &trips {
        up_row.push(r);
        up_val.push(v);
        up_colptr[c + 1] += 1;
    }
    for c in 0..n {
        up_colptr[c + 1] += up_colptr[c];
    }

    // symbolic pass: elimination tree and column counts
    let mut parent = vec![usize::MAX; n];
    let mut flag = vec![usize::MAX; n];
    let mut l_nz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for p in up_colptr[k]..up_colptr[k + 1] {
            let mut i = up_row[p];
            while i < k && flag[i] != k {
                if parent[i] == usize::MAX {
                    parent[i] = k;
                }
                l_nz[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut l_colptr = vec![0usize; n + 1];
    for k in 0..n {
        l_colptr[k + 1] = l_colptr[k] + l_nz[k];
    }
    let nnz_l = l_colptr[n];
    let mut l_rowidx = vec![0usize; nnz_l];
    let mut l_vals = vec![T::zero(); nnz_l];
    let mut d = vec![T::zero(); n];

    let scale = s.vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Err(LinalgError::ZeroPivot { step: 0 });
    }
    let floor = scale * T::epsilon() * T::of(1e3);

    // numeric pass, up-looking row by row
    let mut y = vec![T::zero(); n];
    let mut pattern = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut fill = vec![0usize; n];
    let mut flag2 = vec![usize::MAX; n];
    let mut bumps = 0usize;
    for k in 0..n {
        let mut top = n;
        flag2[k] = k;
        let mut dk = T::zero();
        for p in up_colptr[k]..up_colptr[k + 1] {
            let i = up_row[p];
            if i == k {
                dk += up_val[p];
                continue;
            }
            y[i] += up_val[p];
            let mut len = 0usize;
            let mut ii = i;
            while flag2[ii] != k {
                stack[len] = ii;
                len += 1;
                flag2[ii] = k;
                ii = parent[ii];
            }
            while len > 0 {
                len -= 1;
                top -= 1;
                pattern[top] = stack[len];
            }
        }
        for idx in top..n {
            let i = pattern[idx];
            let yi = y[i];
            y[i] = T::zero();
            let p2 = l_colptr[i] + fill[i];
            for p in l_colptr[i]..p2 {
                y[l_rowidx[p]] -= l_vals[p] * yi;
            }
            let lki = yi / d[i];
            dk -= lki * yi;
            l_rowidx[p2] = k;
            l_vals[p2] = lki;
            fill[i] += 1;
        }
        if !dk.is_finite() {
            return Err(LinalgError::ZeroPivot { step: k });
        }
        if dk.abs() < floor {
            bumps += 1;
            dk = if dk >= T::zero() { floor } else { -floor };
        }
        d[k] = dk;
    }

    Ok(Factorization {
        n,
        perm,
        l_colptr,
        l_rowidx,
        l_vals,
        d,
        pivot_bumps: bumps,
        matrix: s.clone(),
    })
}

impl<T: Real> Factorization<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Signs of the pivots (positive, negative); the matrix inertia when no
    /// pivot was bumped.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|&&v| v > T::zero()).count();
        (pos, self.n - pos)
    }

    fn solve_raw(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut z: Vec<T> = (0..n).map(|k| b[self.perm[k]]).collect();
        for k in 0..n {
            let zk = z[k];
            for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                z[self.l_rowidx[p]] -= self.l_vals[p] * zk;
            }
        }
        for k in 0..n {
            z[k] /= self.d[k];
        }
        for k in (0..n).rev() {
            let mut acc = z[k];
            for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                acc -= self.l_vals[p] * z[self.l_rowidx[p]];
            }
            z[k] = acc;
        }
        let mut x = vec![T::zero(); n];
        for k in 0..n {
            x[self.perm[k]] = z[k];
        }
        x
    }

    /// Solve to the residual contract ‖Sx − b‖ ≤ 1e-10 ‖b‖, refining against
    /// the retained matrix as needed.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        assert_eq!(b.len(), self.n);
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let tol = T::of(SOLVE_TOL).max(T::epsilon() * T::of(32.0));
        let norm_b = vnorm2(b);
        if norm_b == T::zero() {
            return Ok(vec![T::zero(); self.n]);
        }
        let mut x = self.solve_raw(b);
        let mut rel = T::infinity();
        for step in 0..=MAX_REFINEMENTS {
            let mut r = self.matrix.matvec(&x);
            for (ri, bi) in r.iter_mut().zip(b.iter()) {
                *ri = *bi - *ri;
            }
            rel = vnorm2(&r) / norm_b;
            if rel <= tol {
                return Ok(x);
            }
            if step == MAX_REFINEMENTS {
                break;
            }
            let dx = self.solve_raw(&r);
            for (xi, di) in x.iter_mut().zip(dx.iter()) {
                *xi += *di;
            }
        }
        if rel <= T::of(1e-10) {
            Ok(x)
        } else {
            Err(LinalgError::RefinementStalled {
                rel_residual: rel.to_f64().unwrap_or(f64::NAN),
                tol: 1e-10,
                refinements: MAX_REFINEMENTS,
            })
        }
    }
}

fn amd_order(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> Result<Vec<usize>, LinalgError> {
    let control = amd::Control::default();
    match amd::order(n, row_ptr, col_idx, &control) {
        Ok((p, _pinv, _info)) => Ok(p),
        Err(e) => Err(LinalgError::OrderingFailed(format!("{e:?}"))),
    }
}

/// Preconditioner for [`pcg`].
pub enum Preconditioner<T> {
    Identity,
    Jacobi(Vec<T>),
}

impl<T: Real> Preconditioner<T> {
    pub fn jacobi(s: &SparseSym<T>) -> Self {
        Preconditioner::Jacobi(
            s.diag()
                .into_iter()
                .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
                .collect(),
        )
    }

    fn apply(&self, r: &[T]) -> Vec<T> {
        match self {
            Preconditioner::Identity => r.to_vec(),
            Preconditioner::Jacobi(inv_d) => {
                r.iter().zip(inv_d.iter()).map(|(&r, &d)| r * d).collect()
            }
        }
    }
}

/// Preconditioned conjugate gradients for SPD (or consistent positive
/// semidefinite) systems.
pub fn pcg<T: Real>(
    s: &SparseSym<T>,
    b: &[T],
    precond: &Preconditioner<T>,
    tol: T,
    maxit: usize,
) -> Result<Vec<T>, LinalgError> {
    if b.len() != s.n {
        return Err(LinalgError::DimensionMismatch {
            expected: s.n,
            got: b.len(),
        });
    }
    let norm_b = vnorm2(b);
    if norm_b == T::zero() {
        return Ok(vec![T::zero(); s.n]);
    }
    let mut x = vec![T::zero(); s.n];
    let mut r = b.to_vec();
    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = vdot(&r, &z);
    let mut sp = vec![T::zero(); s.n];
    for _ in 0..maxit {
        s.matvec_into(&p, &mut sp);
        let alpha = rz / vdot(&p, &sp);
        for i in 0..s.n {
            x[i] += alpha * p[i];
            r[i] -= alpha * sp[i];
        }
        if vnorm2(&r) <= tol * norm_b {
            return Ok(x);
        }
        z = precond.apply(&r);
        let rz_new = vdot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..s.n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::PcgNoConvergence {
        iterations: maxit,
        rel_residual: (vnorm2(&r) / norm_b).to_f64().unwrap_or(f64::NAN),
    })
}

pub fn vdot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

pub fn vnorm2<T: Real>(a: &[T]) -> T {
    vdot(a, a).sqrt()
}

/// Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues ascending and eigenvectors column-major
/// (`evecs[j * n + i]` is component i of eigenvector j).
pub fn sym_eigen_dense<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    if n > 1 {
        let frob = m.iter().map(|&x| x * x).sum::<T>().sqrt();
        let tol = frob * T::epsilon() * T::of_usize(n);
        for _sweep in 0..200 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[p * n + q] * m[p * n + q];
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[p * n + p];
                    let aqq = m[q * n + q];
                    let tau = (aqq - app) / (T::of(2.0) * apq);
                    let t = if tau >= T::zero() {
                        T::one() / (tau + (T::one() + tau * tau).sqrt())
                    } else {
                        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let sn = t * c;
                    // right multiply columns p, q
                    for k in 0..n {
                        let mkp = m[k * n + p];
                        let mkq = m[k * n + q];
                        m[k * n + p] = c * mkp - sn * mkq;
                        m[k * n + q] = sn * mkp + c * mkq;
                    }
                    // left multiply rows p, q
                    for k in 0..n {
                        let mpk = m[p * n + k];
                        let mqk = m[q * n + k];
                        m[p * n + k] = c * mpk - sn * mqk;
                        m[q * n + k] = sn * mpk + c * mqk;
                    }
                    // accumulate the rotation into the eigenvector columns
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - sn * vkq;
                        v[k * n + q] = sn * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let evals: Vec<T> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut evecs = vec![T::zero(); n * n];
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            evecs[col * n + k] = v[k * n + i];
        }
    }
    (evals, evecs)
}
