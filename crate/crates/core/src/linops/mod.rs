//! Matrix-free linear operators.
//!
//! Every operator knows its declared shape and provides both the forward
//! application and the adjoint. Dense materialization is available at desk
//! scale through [`to_dense`]; everything else in the crate only needs
//! `apply_into` / `adjoint_into`.

mod dct;
mod dictionary;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::vecops::{dot, norm2};

pub use dct::PartialDct;
pub use dictionary::DictionarySpec;

/// Largest number of entries [`to_dense`] materializes by default.
pub const DEFAULT_DENSE_LIMIT: usize = 4_000_000;

/// A linear map between finite-dimensional real spaces with an adjoint.
///
/// The `*_into` methods do not check lengths beyond debug assertions; the
/// provided `apply` / `adjoint` wrappers do.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    fn adjoint_into(&self, u: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint", self.rows(), u.len())?;
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(u, &mut out);
        Ok(out)
    }
}

/// Operator family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindTag {
    Identity,
    Dense,
    Mask,
    Subsample,
    CircularConv,
    PartialDct,
    FiniteDiff1d,
    FiniteDiff2d,
    HaarShiftInvariant,
    Composition,
    Scaled,
    Adjoint,
}

#[derive(Clone)]
enum Kind {
    Identity,
    Dense(Arc<DMatrix<f64>>),
    Mask(Arc<Vec<usize>>),
    Subsample { factor: usize },
    CircularConv(Arc<Vec<f64>>),
    PartialDct(Arc<PartialDct>),
    FiniteDiff1d,
    FiniteDiff2d { height: usize, width: usize },
    Haar { levels: usize },
    Composition(Arc<LinearMap>, Arc<LinearMap>),
    Scaled(f64, Arc<LinearMap>),
    Adjoint(Arc<LinearMap>),
}

/// An immutable matrix-free operator of shape `rows × cols`.
#[derive(Clone)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    kind: Kind,
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearMap({:?}, {}x{})", self.kind(), self.rows, self.cols)
    }
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, kind: Kind::Identity }
    }

    pub fn dense(matrix: DMatrix<f64>) -> Self {
        Self {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
            kind: Kind::Dense(Arc::new(matrix)),
        }
    }

    /// Row selection keeping the coordinates listed in `keep` (in that order).
    pub fn mask(n: usize, keep: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = keep.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "mask index {bad} out of range for length {n}"
            )));
        }
        Ok(Self {
            rows: keep.len(),
            cols: n,
            kind: Kind::Mask(Arc::new(keep)),
        })
    }

    /// Keeps every `factor`-th sample starting at index 0.
    pub fn subsample(n: usize, factor: usize) -> Result<Self> {
        if factor == 0 || n == 0 {
            return Err(Error::InvalidArgument("subsample needs n > 0 and factor > 0".into()));
        }
        Ok(Self {
            rows: n.div_ceil(factor),
            cols: n,
            kind: Kind::Subsample { factor },
        })
    }

    /// Vertical subsampling of a row-major `height × width` image: keeps
    /// image rows `0, factor, 2·factor, …`.
    pub fn subsample_rows_2d(height: usize, width: usize, factor: usize) -> Result<Self> {
        if factor == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument("degenerate vertical subsampling".into()));
        }
        let keep = (0..height)
            .step_by(factor)
            .flat_map(|r| (0..width).map(move |c| r * width + c))
            .collect();
        Self::mask(height * width, keep)
    }

    /// Periodic convolution `(k ⊛ x)_i = Σ_t k_t x_{(i - t) mod n}`.
    pub fn circular_conv(kernel: Vec<f64>, n: usize) -> Result<Self> {
        if kernel.is_empty() || kernel.len() > n {
            return Err(Error::InvalidArgument(format!(
                "kernel length {} must be in 1..={n}",
                kernel.len()
            )));
        }
        Ok(Self { rows: n, cols: n, kind: Kind::CircularConv(Arc::new(kernel)) })
    }

    /// `Q` seeded rows of the orthonormal type-II DCT of size `N`.
    pub fn partial_dct(q: usize, n: usize, seed: u64) -> Result<Self> {
        let plan = PartialDct::new(q, n, seed)?;
        Ok(Self { rows: q, cols: n, kind: Kind::PartialDct(Arc::new(plan)) })
    }

    /// Forward differences `x_{i+1} - x_i`, `R^n -> R^{n-1}`.
    pub fn finite_diff_1d(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("finite differences need n >= 2".into()));
        }
        Ok(Self { rows: n - 1, cols: n, kind: Kind::FiniteDiff1d })
    }

    /// Horizontal then vertical forward differences of a row-major image,
    /// Neumann boundary (no wrap).
    pub fn finite_diff_2d(height: usize, width: usize) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidArgument(format!(
                "2-D differences need both dims >= 2, got {height}x{width}"
            )));
        }
        Ok(Self {
            rows: height * (width - 1) + (height - 1) * width,
            cols: height * width,
            kind: Kind::FiniteDiff2d { height, width },
        })
    }

    /// Undecimated periodic Haar detail bands for scales `1..=levels`.
    /// Band `j` correlates with `2^{-j/2}(+1 × 2^{j-1}, -1 × 2^{j-1})`, so each
    /// row has unit norm.
    pub fn haar_shift_invariant(n: usize, levels: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("Haar length {n} is not a power of two")));
        }
        let max_levels = n.trailing_zeros() as usize;
        if levels == 0 || levels > max_levels {
            return Err(Error::InvalidArgument(format!(
                "levels must be in 1..={max_levels}, got {levels}"
            )));
        }
        Ok(Self { rows: levels * n, cols: n, kind: Kind::Haar { levels } })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMap) -> Result<Self> {
        check_len("compose", self.cols, inner.rows)?;
        Ok(Self {
            rows: self.rows,
            cols: inner.cols,
            kind: Kind::Composition(Arc::new(self.clone()), Arc::new(inner.clone())),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            kind: Kind::Scaled(factor, Arc::new(self.clone())),
        }
    }

    /// The adjoint as an operator in its own right.
    pub fn adjoint_map(&self) -> Self {
        if let Kind::Adjoint(inner) = &self.kind {
            return (**inner).clone();
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            kind: Kind::Adjoint(Arc::new(self.clone())),
        }
    }

    pub fn kind(&self) -> KindTag {
        match &self.kind {
            Kind::Identity => KindTag::Identity,
            Kind::Dense(_) => KindTag::Dense,
            Kind::Mask(_) => KindTag::Mask,
            Kind::Subsample { .. } => KindTag::Subsample,
            Kind::CircularConv(_) => KindTag::CircularConv,
            Kind::PartialDct(_) => KindTag::PartialDct,
            Kind::FiniteDiff1d => KindTag::FiniteDiff1d,
            Kind::FiniteDiff2d { .. } => KindTag::FiniteDiff2d,
            Kind::Haar { .. } => KindTag::HaarShiftInvariant,
            Kind::Composition(..) => KindTag::Composition,
            Kind::Scaled(..) => KindTag::Scaled,
            Kind::Adjoint(_) => KindTag::Adjoint,
        }
    }

    /// Row-selection operators (mask, subsample, identity) satisfy `ΦΦ* = Id`.
    pub fn is_row_selection(&self) -> bool {
        match &self.kind {
            Kind::Identity | Kind::Subsample { .. } => true,
            Kind::Mask(keep) => {
                let mut seen = vec![false; self.cols];
                keep.iter().all(|&i| !std::mem::replace(&mut seen[i], true))
            }
            _ => false,
        }
    }

    /// Whether `ΦΦ* = Id` is known structurally (row selections and partial DCT).
    pub fn has_orthonormal_rows(&self) -> bool {
        self.is_row_selection() || matches!(self.kind, Kind::PartialDct(_))
    }

    /// Edge list `(a, b)` such that row `r` computes `x_b - x_a`, for
    /// finite-difference kinds.
    pub fn difference_edges(&self) -> Option<Vec<(usize, usize)>> {
        match self.kind {
            Kind::FiniteDiff1d => Some((0..self.cols - 1).map(|i| (i, i + 1)).collect()),
            Kind::FiniteDiff2d { height, width } => {
                let mut edges = Vec::with_capacity(self.rows);
                for r in 0..height {
                    for c in 0..width - 1 {
                        edges.push((r * width + c, r * width + c + 1));
                    }
                }
                for r in 0..height - 1 {
                    for c in 0..width {
                        edges.push((r * width + c, (r + 1) * width + c));
                    }
                }
                Some(edges)
            }
            _ => None,
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        to_dense(self, DEFAULT_DENSE_LIMIT)
    }
}

impl LinearOperator for LinearMap {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        match &self.kind {
            Kind::Identity => out.copy_from_slice(x),
            Kind::Dense(m) => {
                out.fill(0.0);
                let data = m.as_slice();
                for (j, &xj) in x.iter().enumerate() {
                    if xj == 0.0 {
                        continue;
                    }
                    let col = &data[j * self.rows..(j + 1) * self.rows];
                    for (o, &a) in out.iter_mut().zip(col) {
                        *o += a * xj;
                    }
                }
            }
            Kind::Mask(keep) => {
                for (o, &i) in out.iter_mut().zip(keep.iter()) {
                    *o = x[i];
                }
            }
            Kind::Subsample { factor } => {
                for (o, xi) in out.iter_mut().zip(x.iter().step_by(*factor)) {
                    *o = *xi;
                }
            }
            Kind::CircularConv(kernel) => {
                let n = self.cols;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = kernel
                        .iter()
                        .enumerate()
                        .map(|(t, &k)| k * x[(i + n - t) % n])
                        .sum();
                }
            }
            Kind::PartialDct(plan) => plan.forward(x, out),
            Kind::FiniteDiff1d => {
                for (o, w) in out.iter_mut().zip(x.windows(2)) {
                    *o = w[1] - w[0];
                }
            }
            Kind::FiniteDiff2d { height, width } => {
                let (h, w) = (*height, *width);
                let mut k = 0;
                for r in 0..h {
                    let row = &x[r * w..(r + 1) * w];
                    for c in 0..w - 1 {
                        out[k] = row[c + 1] - row[c];
                        k += 1;
                    }
                }
                for r in 0..h - 1 {
                    for c in 0..w {
                        out[k] = x[(r + 1) * w + c] - x[r * w + c];
                        k += 1;
                    }
                }
            }
            Kind::Haar { levels } => haar_analysis(x, *levels, out),
            Kind::Composition(a, b) => {
                let mut tmp = vec![0.0; b.rows];
                b.apply_into(x, &mut tmp);
                a.apply_into(&tmp, out);
            }
            Kind::Scaled(c, a) => {
                a.apply_into(x, out);
                out.iter_mut().for_each(|v| *v *= c);
            }
            Kind::Adjoint(a) => a.adjoint_into(x, out),
        }
    }

    fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        match &self.kind {
            Kind::Identity => out.copy_from_slice(u),
            Kind::Dense(m) => {
                let data = m.as_slice();
                for (j, o) in out.iter_mut().enumerate() {
                    *o = dot(&data[j * self.rows..(j + 1) * self.rows], u);
                }
            }
            Kind::Mask(keep) => {
                out.fill(0.0);
                for (&ui, &i) in u.iter().zip(keep.iter()) {
                    out[i] += ui;
                }
            }
            Kind::Subsample { factor } => {
                out.fill(0.0);
                for (k, &ui) in u.iter().enumerate() {
                    out[k * factor] = ui;
                }
            }
            Kind::CircularConv(kernel) => {
                let n = self.cols;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = kernel
                        .iter()
                        .enumerate()
                        .map(|(t, &k)| k * u[(i + t) % n])
                        .sum();
                }
            }
            Kind::PartialDct(plan) => plan.adjoint(u, out),
            Kind::FiniteDiff1d => {
                let m = u.len();
                for (i, o) in out.iter_mut().enumerate() {
                    let left = if i > 0 { u[i - 1] } else { 0.0 };
                    let right = if i < m { u[i] } else { 0.0 };
                    *o = left - right;
                }
            }
            Kind::FiniteDiff2d { height, width } => {
                let (h, w) = (*height, *width);
                out.fill(0.0);
                let mut k = 0;
                for r in 0..h {
                    for c in 0..w - 1 {
                        out[r * w + c + 1] += u[k];
                        out[r * w + c] -= u[k];
                        k += 1;
                    }
                }
                for r in 0..h - 1 {
                    for c in 0..w {
                        out[(r + 1) * w + c] += u[k];
                        out[r * w + c] -= u[k];
                        k += 1;
                    }
                }
            }
            Kind::Haar { levels } => haar_synthesis(u, *levels, out),
            Kind::Composition(a, b) => {
                let mut tmp = vec![0.0; a.cols];
                a.adjoint_into(u, &mut tmp);
                b.adjoint_into(&tmp, out);
            }
            Kind::Scaled(c, a) => {
                a.adjoint_into(u, out);
                out.iter_mut().for_each(|v| *v *= c);
            }
            Kind::Adjoint(a) => a.apply_into(u, out),
        }
    }
}

fn haar_analysis(x: &[f64], levels: usize, out: &mut [f64]) {
    let n = x.len();
    // prefix[i] = x_0 + … + x_{i-1} over two periods, so windows never wrap.
    let mut prefix = vec![0.0; 2 * n + 1];
    for i in 0..2 * n {
        prefix[i + 1] = prefix[i] + x[i % n];
    }
    for j in 1..=levels {
        let half = 1usize << (j - 1);
        let c = (0.5f64).powf(j as f64 / 2.0);
        let band = &mut out[(j - 1) * n..j * n];
        for (i, b) in band.iter_mut().enumerate() {
            let first = prefix[i + half] - prefix[i];
            let second = prefix[i + 2 * half] - prefix[i + half];
            *b = c * (first - second);
        }
    }
}

fn haar_synthesis(u: &[f64], levels: usize, out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    for j in 1..=levels {
        let half = 1usize << (j - 1);
        let c = (0.5f64).powf(j as f64 / 2.0);
        let band = &u[(j - 1) * n..j * n];
        for (i, &b) in band.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for t in 0..half {
                out[(i + t) % n] += c * b;
                out[(i + half + t) % n] -= c * b;
            }
        }
    }
}

/// Column-by-column materialization through `apply_into` on basis vectors.
pub fn to_dense<O: LinearOperator + ?Sized>(op: &O, limit: usize) -> Result<DMatrix<f64>> {
    let (m, n) = (op.rows(), op.cols());
    let entries = m.saturating_mul(n);
    if entries > limit {
        return Err(Error::Capacity { entries, limit });
    }
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(out)
}

/// Spectral norm estimate by power iteration on `A*A` from a seeded start.
pub fn operator_norm<O: LinearOperator + ?Sized>(op: &O, iters: usize) -> f64 {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f70_6e6f_726d);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut av = vec![0.0; op.rows()];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let nv = norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply_into(&v, &mut av);
        op.adjoint_into(&av, &mut w);
        estimate = dot(&v, &w).max(0.0).sqrt();
        std::mem::swap(&mut v, &mut w);
    }
    estimate
}

/// Maximum over `probes` random pairs of `|<Ax,u> - <x,A*u>| / (‖x‖‖u‖)`.
pub fn adjoint_mismatch<O: LinearOperator + ?Sized>(op: &O, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut ax = vec![0.0; op.rows()];
    let mut atu = vec![0.0; op.cols()];
    for _ in 0..probes {
        let x: Vec<f64> = (0..op.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let u: Vec<f64> = (0..op.rows()).map(|_| StandardNormal.sample(&mut rng)).collect();
        op.apply_into(&x, &mut ax);
        op.adjoint_into(&u, &mut atu);
        let scale = norm2(&x) * norm2(&u);
        if scale > 0.0 {
            worst = worst.max((dot(&ax, &u) - dot(&x, &atu)).abs() / scale);
        }
    }
    worst
}

/// `A*A` as a symmetric operator.
pub struct Gram<'a, O: LinearOperator + ?Sized> {
    op: &'a O,
}

impl<'a, O: LinearOperator + ?Sized> Gram<'a, O> {
    pub fn new(op: &'a O) -> Self {
        Self { op }
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for Gram<'_, O> {
    fn rows(&self) -> usize {
        self.op.cols()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.op.rows()];
        self.op.apply_into(x, &mut tmp);
        self.op.adjoint_into(&tmp, out);
    }
    fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        self.apply_into(u, out)
    }
}

/// `AA*` as a symmetric operator.
pub struct CoGram<'a, O: LinearOperator + ?Sized> {
    op: &'a O,
}

impl<'a, O: LinearOperator + ?Sized> CoGram<'a, O> {
    pub fn new(op: &'a O) -> Self {
        Self { op }
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for CoGram<'_, O> {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.rows()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.op.cols()];
        self.op.adjoint_into(x, &mut tmp);
        self.op.apply_into(&tmp, out);
    }
    fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        self.apply_into(u, out)
    }
}

/// Dense matrix-vector product used by oracles and dense paths.
pub(crate) fn dense_mul(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
                *o += a * xj;
            }
        }
    }
    out
}

pub(crate) fn dense_mul_t(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (0..m.ncols()).map(|j| m.column(j).iter().zip(u).map(|(a, b)| a * b).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_selection() {
        let id = LinearMap::identity(3);
        assert_eq!(id.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(id.adjoint(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let s = LinearMap::subsample(4, 2).unwrap();
        assert_eq!(s.apply(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 3.0]);
        assert_eq!(s.adjoint(&[5.0, 6.0]).unwrap(), vec![5.0, 0.0, 6.0, 0.0]);
    }

    #[test]
    fn forward_differences() {
        let d = LinearMap::finite_diff_1d(4).unwrap();
        assert_eq!(d.apply(&[1.0, 1.0, 2.0, 2.0]).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let id = LinearMap::identity(3);
        assert!(matches!(id.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(id.adjoint(&[1.0; 4]), Err(Error::DimensionMismatch { .. })));
        let a = LinearMap::identity(2);
        assert!(a.compose(&id).is_err());
    }

    #[test]
    fn dense_small_examples() {
        let i2 = LinearMap::identity(2).to_dense().unwrap();
        assert_eq!(i2, DMatrix::identity(2, 2));
        let m = LinearMap::mask(3, vec![0, 2]).unwrap().to_dense().unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn capacity_limit() {
        let id = LinearMap::identity(10);
        assert!(matches!(to_dense(&id, 50), Err(Error::Capacity { .. })));
    }

    #[test]
    fn haar_rejects_bad_sizes() {
        assert!(LinearMap::haar_shift_invariant(12, 1).is_err());
        assert!(LinearMap::haar_shift_invariant(8, 4).is_err());
        assert!(LinearMap::haar_shift_invariant(8, 3).is_ok());
    }

    #[test]
    fn norm_of_identity() {
        let n = operator_norm(&LinearMap::identity(5), 20);
        assert!((n - 1.0).abs() < 1e-12);
    }
}
