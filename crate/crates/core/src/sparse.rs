//! Compressed-row complex operators and state vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance used when hermiticity is verified at assembly.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hermiticity {
    Yes,
    No,
    Unchecked,
}

/// Square sparse matrix in CSR layout. Rows are sorted by column and hold
/// no duplicate entries.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
    hermitian: Hermiticity,
}

// Equality is on the stored matrix; the cached hermiticity flag is ignored.
impl PartialEq for SparseOperator {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.row_ptr == other.row_ptr
            && self.cols == other.cols
            && self.values == other.values
    }
}

impl SparseOperator {
    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return invalid(format!("entry ({r},{c}) outside dimension {dim}"));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = Self {
            dim,
            row_ptr,
            cols,
            values,
            hermitian: Hermiticity::Unchecked,
        };
        op.prune();
        Ok(op)
    }

    /// Builds from per-row entry lists already sorted by column.
    pub(crate) fn from_rows(dim: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        debug_assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            values,
            hermitian: Hermiticity::Unchecked,
        }
    }

    pub fn diagonal_from(values: &[C64]) -> Self {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![(i, v)])
            .collect();
        let mut op = Self::from_rows(values.len(), rows);
        if values.iter().all(|v| v.im == 0.0) {
            op.hermitian = Hermiticity::Yes;
        }
        op
    }

    pub fn diagonal_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal_from(&v)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal_real(&vec![1.0; dim])
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            values: Vec::new(),
            hermitian: Hermiticity::Yes,
        }
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != ZERO) {
            return;
        }
        let rows: Vec<Vec<(usize, C64)>> = (0..self.dim).map(|r| self.row(r).collect()).collect();
        *self = Self::from_rows(self.dim, rows);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn hermitian(&self) -> Hermiticity {
        self.hermitian
    }

    /// Iterates `(col, value)` of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        let mut out = Self::from_triplets(self.dim, t).expect("indices valid");
        out.hermitian = self.hermitian;
        out
    }

    /// Largest entrywise deviation from the conjugate transpose.
    pub fn hermiticity_defect(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Runs the hermiticity check and records the verdict.
    pub fn check_hermitian(&mut self) -> bool {
        let ok = self.hermiticity_defect() <= HERMITIAN_TOL;
        self.hermitian = if ok {
            Hermiticity::Yes
        } else {
            Hermiticity::No
        };
        ok
    }

    pub fn with_checked_hermiticity(mut self) -> Self {
        self.check_hermitian();
        self
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        if factor.im != 0.0 {
            out.hermitian = Hermiticity::Unchecked;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        self.check_dim(other.dim)?;
        let rows = (0..self.dim)
            .map(|r| merge_rows(self.row(r), other.row(r)))
            .collect();
        let mut out = Self::from_rows(self.dim, rows);
        out.hermitian = match (self.hermitian, other.hermitian) {
            (Hermiticity::Yes, Hermiticity::Yes) => Hermiticity::Yes,
            _ => Hermiticity::Unchecked,
        };
        Ok(out)
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &SparseOperator) -> Result<Self> {
        self.check_dim(other.dim)?;
        let mut acc = vec![ZERO; self.dim];
        let mut touched = vec![false; self.dim];
        let mut rows = Vec::with_capacity(self.dim);
        for r in 0..self.dim {
            let mut used = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        used.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            used.sort_unstable();
            let row = used
                .iter()
                .map(|&c| {
                    touched[c] = false;
                    (c, std::mem::replace(&mut acc[c], ZERO))
                })
                .collect();
            rows.push(row);
        }
        Ok(Self::from_rows(self.dim, rows))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &SparseOperator) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm of a
    /// hermitian operator.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `out = self · x`.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(x.len(), self.dim, "vector length does not match operator");
        assert_eq!(out.len(), self.dim, "output length does not match operator");
        let row_dot = |r: usize| -> C64 {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            self.cols[span.clone()]
                .iter()
                .zip(&self.values[span])
                .fold(ZERO, |acc, (&c, &v)| acc + v * x[c])
        };
        #[cfg(feature = "parallel")]
        if self.nnz() > PARALLEL_NNZ {
            use rayon::prelude::*;
            out.par_iter_mut()
                .enumerate()
                .for_each(|(r, o)| *o = row_dot(r));
            return;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o = row_dot(r);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return invalid(format!("dimension mismatch: {} vs {dim}", self.dim));
        }
        Ok(())
    }
}

#[cfg(feature = "parallel")]
const PARALLEL_NNZ: usize = 1 << 16;

fn merge_rows(
    a: impl Iterator<Item = (usize, C64)>,
    b: impl Iterator<Item = (usize, C64)>,
) -> Vec<(usize, C64)> {
    let mut out: Vec<(usize, C64)> = a.chain(b).collect();
    out.sort_by_key(|&(c, _)| c);
    let mut merged: Vec<(usize, C64)> = Vec::with_capacity(out.len());
    for (c, v) in out {
        match merged.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += v,
            _ => merged.push((c, v)),
        }
    }
    merged
}

/// A vector of complex amplitudes over some basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return invalid("state has non-finite amplitudes");
        }
        Ok(Self { amplitudes })
    }

    pub(crate) fn from_vec_unchecked(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![ZERO; dim],
        }
    }

    /// Unit vector on basis index `k`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amplitudes[k] = ONE;
        s
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return invalid("cannot normalize the zero vector");
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        dot(&self.amplitudes, &other.amplitudes)
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.sub(other).norm()
    }

    pub fn apply(&self, op: &SparseOperator) -> StateVector {
        Self {
            amplitudes: op.apply(&self.amplitudes),
        }
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
