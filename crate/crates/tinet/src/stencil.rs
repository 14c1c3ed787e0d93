//! Finite matrix stencils on the integer lattice and their Fourier symbols.
//!
//! A stencil is a finitely supported map from lattice offsets to real
//! matrix blocks. It represents one block-Toeplitz operator of a
//! translation-invariant network: acting by convolution in physical space
//! and by multiplication with its symbol in the spatial frequency domain.
//! Finite support makes every symbol an exact matrix trigonometric
//! polynomial, so the induced operator norms are finite automatically.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::la::{self, CMatrix};

/// Finitely supported map from offsets in Z^nu to real `rows x cols` blocks.
///
/// Absent offsets are zero blocks. The block map is ordered, so iteration,
/// serialization and all derived sweeps are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStencil {
    dim_nu: usize,
    rows: usize,
    cols: usize,
    blocks: BTreeMap<Vec<i64>, DMatrix<f64>>,
}

impl MatrixStencil {
    /// Empty (zero) stencil of the given shape.
    pub fn new(dim_nu: usize, rows: usize, cols: usize) -> Result<Self> {
        if dim_nu == 0 {
            return Err(Error::InvalidArgument("lattice dimension nu must be positive".into()));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("block shape must be positive".into()));
        }
        Ok(Self { dim_nu, rows, cols, blocks: BTreeMap::new() })
    }

    /// Insert (or replace) the block at an offset.
    pub fn insert(&mut self, offset: &[i64], block: DMatrix<f64>) -> Result<()> {
        if offset.len() != self.dim_nu {
            return Err(Error::DimensionMismatch {
                what: "stencil offset length",
                expected: self.dim_nu,
                got: offset.len(),
            });
        }
        if block.nrows() != self.rows || block.ncols() != self.cols {
            return Err(Error::InvalidArgument(format!(
                "block at {offset:?} has shape {}x{}, stencil is {}x{}",
                block.nrows(),
                block.ncols(),
                self.rows,
                self.cols
            )));
        }
        self.blocks.insert(offset.to_vec(), block);
        Ok(())
    }

    /// Builder-style `insert`.
    pub fn with_block(mut self, offset: &[i64], block: DMatrix<f64>) -> Result<Self> {
        self.insert(offset, block)?;
        Ok(self)
    }

    /// Scalar (1x1 blocks) stencil from (offset, value) pairs.
    pub fn from_scalar_entries(dim_nu: usize, entries: &[(&[i64], f64)]) -> Result<Self> {
        let mut s = Self::new(dim_nu, 1, 1)?;
        for (off, val) in entries {
            s.insert(off, DMatrix::from_element(1, 1, *val))?;
        }
        Ok(s)
    }

    /// alpha * I at the zero offset.
    pub fn scaled_identity(dim_nu: usize, n: usize, alpha: f64) -> Result<Self> {
        let s = Self::new(dim_nu, n, n)?;
        s.with_block(&vec![0; dim_nu], DMatrix::identity(n, n) * alpha)
    }

    pub fn identity(dim_nu: usize, n: usize) -> Result<Self> {
        Self::scaled_identity(dim_nu, n, 1.0)
    }

    pub fn dim_nu(&self) -> usize {
        self.dim_nu
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block(&self, offset: &[i64]) -> Option<&DMatrix<f64>> {
        self.blocks.get(offset)
    }

    /// Iterate blocks in lexicographic offset order.
    pub fn blocks(&self) -> impl Iterator<Item = (&[i64], &DMatrix<f64>)> {
        self.blocks.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn support_len(&self) -> usize {
        self.blocks.len()
    }

    /// True when the stencil has no blocks or only zero blocks.
    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.iter().all(|&x| x == 0.0))
    }

    /// Largest |offset| per axis; all zeros for an empty stencil.
    pub fn max_offset_per_axis(&self) -> Vec<i64> {
        let mut m = vec![0i64; self.dim_nu];
        for off in self.blocks.keys() {
            for (ax, &o) in off.iter().enumerate() {
                m[ax] = m[ax].max(o.abs());
            }
        }
        m
    }

    /// Sum of all blocks (the symbol at sigma = 0, computed exactly).
    pub fn block_sum(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for b in self.blocks.values() {
            acc += b;
        }
        acc
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            *b *= alpha;
        }
        out
    }

    /// Blockwise sum of two stencils of identical shape.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (off, b) in &other.blocks {
            match out.blocks.get_mut(off) {
                Some(existing) => *existing += b,
                None => {
                    out.blocks.insert(off.clone(), b.clone());
                }
            }
        }
        Ok(out)
    }

    /// The reflected transpose: block at l becomes (block at -l)^T.
    ///
    /// A stencil equal to its reflected transpose has a Hermitian symbol.
    pub fn reflected_transpose(&self) -> Self {
        let mut out = Self {
            dim_nu: self.dim_nu,
            rows: self.cols,
            cols: self.rows,
            blocks: BTreeMap::new(),
        };
        for (off, b) in &self.blocks {
            let neg: Vec<i64> = off.iter().map(|&o| -o).collect();
            out.blocks.insert(neg, b.transpose());
        }
        out
    }

    /// Stencil convolution: (self * other)_l = sum_j self_{l-j} other_j.
    ///
    /// This is composition of the corresponding block-Toeplitz operators;
    /// symbols multiply pointwise.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.dim_nu != other.dim_nu {
            return Err(Error::DimensionMismatch {
                what: "stencil lattice dimension",
                expected: self.dim_nu,
                got: other.dim_nu,
            });
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "stencil convolution inner dimension",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::new(self.dim_nu, self.rows, other.cols)?;
        for (oa, ba) in &self.blocks {
            for (ob, bb) in &other.blocks {
                let off: Vec<i64> = oa.iter().zip(ob).map(|(&x, &y)| x + y).collect();
                let prod = ba * bb;
                match out.blocks.get_mut(&off) {
                    Some(existing) => *existing += prod,
                    None => {
                        out.blocks.insert(off, prod);
                    }
                }
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim_nu != other.dim_nu {
            return Err(Error::DimensionMismatch {
                what: "stencil lattice dimension",
                expected: self.dim_nu,
                got: other.dim_nu,
            });
        }
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidArgument(format!(
                "stencil shapes differ: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Fourier symbol at sigma: sum over offsets l of e^{-i l.sigma} * block_l.
    pub fn symbol(&self, sigma: &[f64]) -> Result<CMatrix> {
        if sigma.len() != self.dim_nu {
            return Err(Error::DimensionMismatch {
                what: "sigma length",
                expected: self.dim_nu,
                got: sigma.len(),
            });
        }
        let mut acc = CMatrix::zeros(self.rows, self.cols);
        for (off, block) in &self.blocks {
            let phase: f64 = off.iter().zip(sigma).map(|(&l, &s)| l as f64 * s).sum();
            let w = Complex64::new(0.0, -phase).exp();
            for j in 0..self.cols {
                for i in 0..self.rows {
                    acc[(i, j)] += w * block[(i, j)];
                }
            }
        }
        Ok(acc)
    }

    /// Grid approximation of the L2-induced operator norm: the maximum
    /// over grid nodes of the spectral norm of the symbol.
    ///
    /// The value is a lower bound of the ess-sup over the torus; it is
    /// exact for constant symbols and nondecreasing under grid doubling.
    pub fn operator_norm(&self, grid: &TorusGrid) -> Result<f64> {
        if grid.dim_nu() != self.dim_nu {
            return Err(Error::DimensionMismatch {
                what: "grid lattice dimension",
                expected: self.dim_nu,
                got: grid.dim_nu(),
            });
        }
        let mut best = 0.0f64;
        for sigma in grid.nodes() {
            let norm = la::spectral_norm(&self.symbol(&sigma)?);
            best = best.max(norm);
        }
        Ok(best)
    }

    /// Periodic truncation: the block-circulant matrix of period L per axis
    /// whose (j, k) block is the stencil block at (j - k) mod L.
    ///
    /// Requires L > 2*|offset| on every axis so that distinct offsets stay
    /// distinct modulo L. For square stencils the eigenvalues of the result
    /// are exactly the union of the symbol spectra over the circulant
    /// frequencies 2*pi*k/L.
    pub fn circulant_embed(&self, period: usize) -> Result<DMatrix<f64>> {
        if period == 0 {
            return Err(Error::InvalidArgument("circulant period must be positive".into()));
        }
        for (off, _) in self.blocks() {
            for (ax, &o) in off.iter().enumerate() {
                if period as i64 <= 2 * o.abs() {
                    return Err(Error::PeriodTooSmall {
                        axis: ax,
                        offset: off.to_vec(),
                        period,
                    });
                }
            }
        }
        let sites = period.pow(self.dim_nu as u32);
        let mut out = DMatrix::zeros(sites * self.rows, sites * self.cols);
        let strides = site_strides(self.dim_nu, period);
        let mut site_index = vec![0usize; self.dim_nu];
        for k in 0..sites {
            unflatten(k, period, &mut site_index);
            for (off, block) in &self.blocks {
                // j = (k + off) mod L per axis
                let mut j = 0usize;
                for ax in 0..self.dim_nu {
                    let p = period as i64;
                    let idx = (site_index[ax] as i64 + off[ax]).rem_euclid(p) as usize;
                    j += idx * strides[ax];
                }
                let mut view = out.view_mut((j * self.rows, k * self.cols), (self.rows, self.cols));
                view += block;
            }
        }
        Ok(out)
    }
}

fn site_strides(dim_nu: usize, period: usize) -> Vec<usize> {
    let mut strides = vec![1usize; dim_nu];
    for ax in (0..dim_nu.saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * period;
    }
    strides
}

fn unflatten(flat: usize, period: usize, out: &mut [usize]) {
    let mut rem = flat;
    for ax in (0..out.len()).rev() {
        out[ax] = rem % period;
        rem /= period;
    }
}

/// Circulant frequencies sigma_k = 2*pi*k/L per axis, k = 0..L-1,
/// enumerated lexicographically (first axis slowest) to match the site
/// ordering used by [`MatrixStencil::circulant_embed`].
pub fn circulant_frequencies(dim_nu: usize, period: usize) -> Vec<Vec<f64>> {
    let sites = period.pow(dim_nu as u32);
    let mut out = Vec::with_capacity(sites);
    let mut idx = vec![0usize; dim_nu];
    for k in 0..sites {
        unflatten(k, period, &mut idx);
        out.push(
            idx.iter()
                .map(|&i| 2.0 * std::f64::consts::PI * i as f64 / period as f64)
                .collect(),
        );
    }
    out
}

/// A symbol evaluated at one torus node.
#[derive(Debug, Clone)]
pub struct SymbolValue {
    pub sigma: Vec<f64>,
    pub value: CMatrix,
}

/// Evaluate a stencil symbol over a whole grid.
pub fn symbol_sweep(stencil: &MatrixStencil, grid: &TorusGrid) -> Result<Vec<SymbolValue>> {
    grid.nodes()
        .map(|sigma| {
            let value = stencil.symbol(&sigma)?;
            Ok(SymbolValue { sigma, value })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn laplacian_1d() -> MatrixStencil {
        MatrixStencil::from_scalar_entries(1, &[(&[-1], 1.0), (&[0], -2.0), (&[1], 1.0)]).unwrap()
    }

    #[test]
    fn empty_symbol_is_zero() {
        let s = MatrixStencil::new(2, 3, 2).unwrap();
        let v = s.symbol(&[0.3, -1.1]).unwrap();
        assert_eq!(v.nrows(), 3);
        assert_eq!(v.ncols(), 2);
        assert!(v.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn single_block_at_origin_is_constant_symbol() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = MatrixStencil::new(1, 2, 2).unwrap().with_block(&[0], m.clone()).unwrap();
        for sigma in [-2.0, 0.0, 1.3] {
            let v = s.symbol(&[sigma]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(v[(i, j)].re, m[(i, j)]);
                    assert_relative_eq!(v[(i, j)].im, 0.0);
                }
            }
        }
    }

    #[test]
    fn laplacian_symbol_closed_form() {
        // symbol is 2 cos(sigma) - 2
        let s = laplacian_1d();
        let at_pi = s.symbol(&[PI]).unwrap();
        assert_relative_eq!(at_pi[(0, 0)].re, -4.0, epsilon = 1e-12);
        assert_relative_eq!(at_pi[(0, 0)].im, 0.0, epsilon = 1e-12);
        let at_zero = s.symbol(&[0.0]).unwrap();
        assert_relative_eq!(at_zero[(0, 0)].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_length_mismatch_is_rejected() {
        let s = laplacian_1d();
        assert!(matches!(
            s.symbol(&[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn operator_norm_examples() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let id = MatrixStencil::identity(1, 3).unwrap();
        assert_relative_eq!(id.operator_norm(&grid).unwrap(), 1.0);

        // sup |2 cos sigma - 2| = 4, attained at sigma = -pi which is a node
        let lap = laplacian_1d();
        assert_relative_eq!(lap.operator_norm(&grid).unwrap(), 4.0, epsilon = 1e-12);

        let zero = MatrixStencil::new(1, 2, 2).unwrap();
        assert_relative_eq!(zero.operator_norm(&grid).unwrap(), 0.0);
    }

    #[test]
    fn operator_norm_scaled_identity_exact() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let s = MatrixStencil::scaled_identity(2, 2, -2.5).unwrap();
        assert_relative_eq!(s.operator_norm(&grid).unwrap(), 2.5);
    }

    #[test]
    fn operator_norm_monotone_under_grid_doubling() {
        let lap = laplacian_1d();
        let mut prev = 0.0;
        for p in [8, 16, 32, 64] {
            let grid = TorusGrid::new(1, p).unwrap();
            let n = lap.operator_norm(&grid).unwrap();
            assert!(n >= prev - 1e-15);
            prev = n;
        }
    }

    #[test]
    fn circulant_identity_block() {
        let s = MatrixStencil::identity(1, 1).unwrap();
        let c = s.circulant_embed(3).unwrap();
        assert_eq!(c, DMatrix::identity(3, 3));
    }

    #[test]
    fn circulant_laplacian_eigenvalues() {
        let lap = laplacian_1d();
        let c = lap.circulant_embed(8).unwrap();
        let mut eig: Vec<f64> = c.complex_eigenvalues().iter().map(|e| e.re).collect();
        // dense eigensolve against the closed form 2 cos(2 pi k / 8) - 2
        let mut expect: Vec<f64> =
            (0..8).map(|k| 2.0 * (2.0 * PI * k as f64 / 8.0).cos() - 2.0).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, x) in eig.iter().zip(&expect) {
            assert_relative_eq!(e, x, epsilon = 1e-10);
        }
        let imag_max = c.complex_eigenvalues().iter().map(|e| e.im.abs()).fold(0.0f64, f64::max);
        assert!(imag_max < 1e-10);
    }

    #[test]
    fn circulant_2d_row_sums_match_block_sum() {
        let m = DMatrix::from_row_slice(1, 1, &[0.7]);
        let s = MatrixStencil::new(2, 1, 1).unwrap().with_block(&[1, -1], m).unwrap();
        let c = s.circulant_embed(4).unwrap();
        let total = s.block_sum()[(0, 0)];
        for i in 0..c.nrows() {
            let row_sum: f64 = c.row(i).iter().sum();
            assert_relative_eq!(row_sum, total, epsilon = 1e-14);
        }
    }

    #[test]
    fn circulant_period_too_small_names_offset() {
        let s = MatrixStencil::from_scalar_entries(2, &[(&[0, 3], 1.0)]).unwrap();
        match s.circulant_embed(6) {
            Err(Error::PeriodTooSmall { axis, offset, period }) => {
                assert_eq!(axis, 1);
                assert_eq!(offset, vec![0, 3]);
                assert_eq!(period, 6);
            }
            other => panic!("expected PeriodTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn convolution_squares_symbol() {
        let lap = laplacian_1d();
        let sq = lap.convolve(&lap).unwrap();
        for sigma in [-2.3, 0.0, 0.5, PI] {
            let a = lap.symbol(&[sigma]).unwrap()[(0, 0)];
            let b = sq.symbol(&[sigma]).unwrap()[(0, 0)];
            assert_relative_eq!(b.re, (a * a).re, epsilon = 1e-12);
            assert_relative_eq!(b.im, (a * a).im, epsilon = 1e-12);
        }
    }

    fn arb_stencil() -> impl Strategy<Value = MatrixStencil> {
        // nu = 2, 2x2 blocks, offsets in [-2, 2]^2
        proptest::collection::vec(
            ((-2i64..=2, -2i64..=2), proptest::collection::vec(-3.0f64..3.0, 4)),
            1..6,
        )
        .prop_map(|entries| {
            let mut s = MatrixStencil::new(2, 2, 2).unwrap();
            for ((ox, oy), vals) in entries {
                let m = DMatrix::from_row_slice(2, 2, &vals);
                s.insert(&[ox, oy], m).unwrap();
            }
            s
        })
    }

    proptest! {
        #[test]
        fn symbol_conjugate_symmetry(s in arb_stencil(), sx in -3.0f64..3.0, sy in -3.0f64..3.0) {
            let plus = s.symbol(&[sx, sy]).unwrap();
            let minus = s.symbol(&[-sx, -sy]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((minus[(i, j)] - plus[(i, j)].conj()).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn symbol_linearity(a in arb_stencil(), b in arb_stencil(), sx in -3.0f64..3.0, sy in -3.0f64..3.0) {
            let sum = a.add(&b).unwrap();
            let lhs = sum.symbol(&[sx, sy]).unwrap();
            let rhs = a.symbol(&[sx, sy]).unwrap() + b.symbol(&[sx, sy]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((lhs[(i, j)] - rhs[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conjugate_symmetry_at_paired_grid_nodes() {
        let s = MatrixStencil::from_scalar_entries(1, &[(&[-1], 0.3), (&[0], 1.0), (&[2], -0.7)])
            .unwrap();
        let grid = TorusGrid::new(1, 16).unwrap();
        for flat in 0..grid.node_count() {
            let v = s.symbol(&grid.node(flat)).unwrap();
            let w = s.symbol(&grid.node(grid.mirror_index(flat))).unwrap();
            assert!((w[(0, 0)] - v[(0, 0)].conj()).norm() < 1e-12);
        }
    }
}
