//! Compressed sparse row storage and the symmetric positive definite solvers
//! used by both plate models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed in the
    /// order they appear, so equal inputs give bit-identical matrices.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j)); // stable
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 4);
        let mut values = Vec::with_capacity(triplets.len() / 4);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `b - A (hi + lo)` accumulated without rounding loss: every product
    /// `A_ij hi_j` is split exactly with a fused multiply-add and summed in
    /// double-double arithmetic. Used to refine solutions whose ordinary
    /// residual is dominated by cancellation.
    pub fn residual_extended(&self, b: &[f64], hi: &[f64], lo: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (mut s, mut c) = (b[i], 0.0);
                for (j, v) in self.row(i) {
                    let p = v * hi[j];
                    let pe = v.mul_add(hi[j], -p);
                    let (t, e) = two_sum(s, -p);
                    s = t;
                    c += e - pe - v * lo[j];
                }
                s + c
            })
            .collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on the rows/columns where `keep` is true, with the
    /// index map from reduced to full numbering.
    pub fn principal_submatrix(&self, keep: &[bool]) -> (CsrMatrix, Vec<usize>) {
        let mut map = vec![usize::MAX; self.n];
        let mut inverse = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                map[i] = inverse.len();
                inverse.push(i);
            }
        }
        let m = inverse.len();
        let mut row_ptr = Vec::with_capacity(m + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &i in &inverse {
            for (j, v) in self.row(i) {
                if keep[j] {
                    col_idx.push(map[j]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        (
            CsrMatrix {
                n: m,
                row_ptr,
                col_idx,
                values,
            },
            inverse,
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `(hi, lo) += d` in double-double arithmetic.
pub fn extended_add(hi: &mut [f64], lo: &mut [f64], d: &[f64]) {
    for i in 0..hi.len() {
        let (s, e) = two_sum(hi[i], d[i]);
        let e = e + lo[i];
        let t = s + e;
        lo[i] = e - (t - s);
        hi[i] = t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Dense Cholesky for small systems, envelope Cholesky otherwise.
    #[default]
    Auto,
    Dense,
    Envelope,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual target of the iterative solver.
    pub tol: f64,
    /// Iteration cap is `max_iter_factor * sqrt(n)`.
    pub max_iter_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            tol: 1e-12,
            max_iter_factor: 50.0,
        }
    }
}

/// Systems below this size are factored densely under [`SolverKind::Auto`].
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub kind: SolverKind,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solution of a linear system. The solution is `x + correction`, the
/// correction being the low-order part of a double-double refinement (zero
/// for the iterative solver).
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub correction: Vec<f64>,
    pub stats: SolveStats,
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<Solution> {
    assert_eq!(a.n, b.len());
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; a.n],
            correction: vec![0.0; a.n],
            stats: SolveStats {
                kind: opts.kind,
                iterations: 0,
                relative_residual: 0.0,
            },
        });
    }
    let kind = match opts.kind {
        SolverKind::Auto if a.n < DENSE_LIMIT => SolverKind::Dense,
        SolverKind::Auto => SolverKind::Envelope,
        k => k,
    };
    match kind {
        SolverKind::Dense => {
            let chol = a
                .to_dense()
                .cholesky()
                .ok_or_else(|| Error::Singular("dense Cholesky failed".into()))?;
            refine(a, b, kind, |r| {
                chol.solve(&DVector::from_column_slice(r)).as_slice().to_vec()
            })
        }
        SolverKind::Envelope => {
            let f = EnvelopeCholesky::factor(a)?;
            refine(a, b, kind, |r| f.solve(r))
        }
        SolverKind::Pcg => pcg(a, b, opts).map(|(x, stats)| Solution {
            correction: vec![0.0; x.len()],
            x,
            stats,
        }),
        SolverKind::Auto => unreachable!(),
    }
}

/// Steps of iterative refinement after the direct solve.
const MAX_REFINEMENT: usize = 10;

/// Direct solve followed by iterative refinement with residuals computed in
/// double-double arithmetic and the iterate kept as a double-double pair.
/// The refined residual is then limited by the factorization's contraction
/// rather than by the rounding of `A x`.
fn refine(
    a: &CsrMatrix,
    b: &[f64],
    kind: SolverKind,
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Solution> {
    let bnorm = norm(b);
    let mut hi = solve(b);
    let mut lo = vec![0.0; a.n];
    let mut r = a.residual_extended(b, &hi, &lo);
    let mut rel = norm(&r) / bnorm;
    let mut steps = 0;
    while steps < MAX_REFINEMENT && rel > 1e-15 {
        let dx = solve(&r);
        let (mut h2, mut l2) = (hi.clone(), lo.clone());
        extended_add(&mut h2, &mut l2, &dx);
        let rc = a.residual_extended(b, &h2, &l2);
        let rel_c = norm(&rc) / bnorm;
        steps += 1;
        if !(rel_c < rel) {
            break;
        }
        let stalled = rel_c > 0.5 * rel;
        hi = h2;
        lo = l2;
        r = rc;
        rel = rel_c;
        if stalled {
            break;
        }
    }
    if !rel.is_finite() || hi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok(Solution {
        x: hi,
        correction: lo,
        stats: SolveStats {
            kind,
            iterations: steps,
            relative_residual: rel,
        },
    })
}

fn pcg(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Singular("non-positive diagonal entry".into()));
    }
    let max_iter = (opts.max_iter_factor * (n as f64).sqrt()).ceil().max(1.0) as usize;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= opts.tol {
            return Ok((
                x,
                SolveStats {
                    kind: SolverKind::Pcg,
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: rel,
    })
}

/// Cholesky factor stored by rows over the lower envelope (profile) of the
/// matrix. Fill stays inside the envelope, so banded FE matrices factor in
/// `O(n b^2)`.
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let (head, tail) = data.split_at_mut(start[i]);
            let row_i = &mut tail[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = &head[start[j]..start[j] + j - fj + 1];
                let s: f64 = row_i[lo - fi..j - fi]
                    .iter()
                    .zip(&row_j[lo - fj..j - fj])
                    .map(|(a, b)| a * b)
                    .sum();
                row_i[j - fi] = (row_i[j - fi] - s) / row_j[j - fj];
            }
            let s: f64 = row_i[..i - fi].iter().map(|v| v * v).sum();
            let d = row_i[i - fi] - s;
            if !(d > 0.0) {
                return Err(Error::Singular(format!(
                    "envelope Cholesky: non-positive pivot {d:e} at row {i}"
                )));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky { first, start, data })
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[self.start[i] + j - self.first[i]]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, y)| l * y).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            y[i] /= self.entry(i, i);
            let yi = y[i];
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        y
    }
}
