//! The tensor train value type: dense cores, canonicalization,
//! evaluation, dense conversion, inner products and norms.
//!
//! Core `q` is stored as a dense array with axes
//! `(left rank, digit_1, ..., digit_k, right rank)`, the group's digits
//! in shape order, row-major with the leftmost index slowest. All
//! unfoldings in the crate follow this single convention.

use ndarray::{Array1, Array2, ArrayD, ArrayViewD, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::{lq_reduced, qr_reduced, truncated_svd, TruncationRule};
use crate::error::{Error, Result};
use crate::trainshape::TrainShape;

/// Scalar kind of a train. Cores are stored as complex doubles either
/// way; a `Real` train keeps all imaginary parts exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    Real,
    Complex,
}

impl ScalarKind {
    pub fn promote(a: ScalarKind, b: ScalarKind) -> ScalarKind {
        if a == ScalarKind::Complex || b == ScalarKind::Complex {
            ScalarKind::Complex
        } else {
            ScalarKind::Real
        }
    }
}

/// Default guard for dense expansion, in entries.
pub const DENSE_GUARD: usize = 1 << 24;

/// Reshape preserving element order, copying only when the layout is not
/// already standard.
pub(crate) fn reshaped(a: ArrayD<Complex64>, shape: &[usize]) -> ArrayD<Complex64> {
    let std = if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().to_owned()
    };
    std.into_shape_with_order(IxDyn(shape))
        .expect("reshape preserves element count")
}

/// Unfold an array into a matrix, merging axes `[0, split)` into rows
/// and `[split, ndim)` into columns.
pub(crate) fn unfold(a: ArrayViewD<Complex64>, split: usize) -> Array2<Complex64> {
    let rows: usize = a.shape()[..split].iter().product();
    let cols: usize = a.shape()[split..].iter().product();
    let std = a.as_standard_layout();
    Array2::from_shape_vec((rows, cols), std.iter().copied().collect())
        .expect("unfold preserves element count")
}

/// Fold a matrix back into an array with axes `left ++ right`.
pub(crate) fn fold(m: Array2<Complex64>, left: &[usize], right: &[usize]) -> ArrayD<Complex64> {
    let mut dims: Vec<usize> = left.to_vec();
    dims.extend_from_slice(right);
    let (data, offset) = m.into_raw_vec_and_offset();
    debug_assert!(offset == Some(0) || data.is_empty());
    ArrayD::from_shape_vec(IxDyn(&dims), data).expect("fold preserves element count")
}

/// A tensor train: a shape plus one dense core per digit group.
#[derive(Debug, Clone)]
pub struct TensorTrain {
    shape: TrainShape,
    cores: Vec<ArrayD<Complex64>>,
    kind: ScalarKind,
    center: Option<usize>,
}

impl TensorTrain {
    /// Build a train from explicit complex cores, validating extents and
    /// the rank chain against the shape.
    pub fn from_cores(
        shape: TrainShape,
        cores: Vec<ArrayD<Complex64>>,
        kind: ScalarKind,
    ) -> Result<Self> {
        if cores.len() != shape.ncores() {
            return Err(Error::Shape(format!(
                "{} cores for a {}-core shape",
                cores.len(),
                shape.ncores()
            )));
        }
        for (q, core) in cores.iter().enumerate() {
            let bases = shape.group_bases(q);
            if core.ndim() != bases.len() + 2 {
                return Err(Error::Shape(format!(
                    "core {q} has {} axes, expected {}",
                    core.ndim(),
                    bases.len() + 2
                )));
            }
            for (k, &b) in bases.iter().enumerate() {
                if core.shape()[k + 1] != b {
                    return Err(Error::Shape(format!(
                        "core {q} digit axis {k} has extent {}, expected {b}",
                        core.shape()[k + 1]
                    )));
                }
            }
        }
        if cores[0].shape()[0] != 1 {
            return Err(Error::Shape("first core must have left rank 1".into()));
        }
        if cores.last().unwrap().shape().last() != Some(&1) {
            return Err(Error::Shape("last core must have right rank 1".into()));
        }
        for q in 0..cores.len() - 1 {
            let right = *cores[q].shape().last().unwrap();
            let left = cores[q + 1].shape()[0];
            if right != left {
                return Err(Error::Shape(format!(
                    "rank chain mismatch between cores {q} and {}: {right} vs {left}",
                    q + 1
                )));
            }
        }
        if kind == ScalarKind::Real {
            for core in &cores {
                if core.iter().any(|z| z.im != 0.0) {
                    return Err(Error::Numeric(
                        "real scalar kind with nonzero imaginary part".into(),
                    ));
                }
            }
        }
        Ok(Self::from_parts(shape, cores, kind, None))
    }

    /// Build a real train from real cores.
    pub fn from_real_cores(shape: TrainShape, cores: Vec<ArrayD<f64>>) -> Result<Self> {
        let cores = cores
            .into_iter()
            .map(|c| c.mapv(|x| Complex64::new(x, 0.0)))
            .collect();
        Self::from_cores(shape, cores, ScalarKind::Real)
    }

    /// Internal constructor; recomputes shape ranks from the cores and
    /// skips per-entry validation.
    pub(crate) fn from_parts(
        mut shape: TrainShape,
        cores: Vec<ArrayD<Complex64>>,
        kind: ScalarKind,
        center: Option<usize>,
    ) -> Self {
        let mut ranks: Vec<usize> = Vec::with_capacity(cores.len() + 1);
        ranks.push(cores[0].shape()[0]);
        for core in &cores {
            ranks.push(*core.shape().last().unwrap());
        }
        shape.set_ranks(ranks);
        Self {
            shape,
            cores,
            kind,
            center,
        }
    }

    /// Approximate a dense tensor (axes in dimension order) by a train
    /// under the given truncation rule via sequential SVD splits.
    /// Returns the train and the sum of discarded weights.
    pub fn from_dense(
        shape: &TrainShape,
        data: ArrayViewD<Complex64>,
        kind: ScalarKind,
        rule: &TruncationRule,
    ) -> Result<(Self, f64)> {
        let sizes: Vec<usize> = shape.dims().iter().map(|d| d.size()).collect();
        if data.shape() != sizes.as_slice() {
            return Err(Error::Shape(format!(
                "dense data has shape {:?}, expected {:?}",
                data.shape(),
                sizes
            )));
        }
        // Split every dimension axis into its digit axes (digit 0 slowest,
        // matching the descending factors), then order axes core by core.
        let mut digit_axes: Vec<usize> = Vec::new();
        for dim in shape.dims() {
            digit_axes.extend(dim.bases());
        }
        let mut offsets = Vec::with_capacity(shape.dims().len());
        let mut acc = 0;
        for dim in shape.dims() {
            offsets.push(acc);
            acc += dim.ndigits();
        }
        let split = reshaped(data.to_owned(), &digit_axes);
        let perm: Vec<usize> = shape
            .groups()
            .iter()
            .flatten()
            .map(|r| offsets[r.dim] + r.pos)
            .collect();
        let mut rest = reshaped(
            split.permuted_axes(IxDyn(&perm)).to_owned().into_dyn(),
            &{
                let mut dims = vec![1usize];
                for q in 0..shape.ncores() {
                    dims.push(shape.core_extent(q));
                }
                dims.push(1);
                dims
            },
        );

        let n = shape.ncores();
        let mut cores: Vec<ArrayD<Complex64>> = Vec::with_capacity(n);
        let mut discarded = 0.0;
        for q in 0..n - 1 {
            // rest: (left, extent_q, extent_{q+1}, ..., 1)
            let left = rest.shape()[0];
            let extent = rest.shape()[1];
            let cols: usize = rest.shape()[2..].iter().product();
            let m = unfold(rest.view(), 2);
            let svd = truncated_svd(m.view(), rule)?;
            discarded += svd.discarded_weight;
            let (u, s, vh) = (svd.u, svd.s, svd.vh);
            let rank = s.len().max(1);
            let (u, sv) = if s.is_empty() {
                (Array2::zeros((left * extent, 1)), Array2::zeros((1, cols)))
            } else {
                let mut sv = vh;
                for (k, &sk) in s.iter().enumerate() {
                    for c in 0..cols {
                        sv[[k, c]] *= Complex64::new(sk, 0.0);
                    }
                }
                (u, sv)
            };
            cores.push(fold(
                u,
                &[left],
                &{
                    let mut d = shape.group_bases(q);
                    d.push(rank);
                    d
                },
            ));
            let mut rest_dims = vec![rank];
            rest_dims.extend_from_slice(&rest.shape()[2..]);
            rest = reshaped(fold(sv, &[rank], &[cols]), &rest_dims);
        }
        cores.push(rest);
        let kind = match kind {
            ScalarKind::Real => ScalarKind::Real,
            ScalarKind::Complex => ScalarKind::Complex,
        };
        let mut train = Self::from_parts(shape.clone(), cores, kind, Some(n - 1));
        if kind == ScalarKind::Real {
            train.scrub_imaginary();
        }
        Ok((train, discarded))
    }

    /// Seeded random train with the requested interior rank (clipped
    /// where boundary extents force smaller ranks).
    pub fn random(shape: &TrainShape, interior_rank: usize, seed: u64, kind: ScalarKind) -> Self {
        let n = shape.ncores();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut p = 1usize;
        prefix.push(1);
        for q in 0..n {
            p = p.saturating_mul(shape.core_extent(q)).min(1 << 60);
            prefix.push(p);
        }
        let mut suffix = vec![1usize; n + 1];
        let mut s = 1usize;
        for q in (0..n).rev() {
            s = s.saturating_mul(shape.core_extent(q)).min(1 << 60);
            suffix[q] = s;
        }
        let mut ranks = vec![1usize; n + 1];
        for q in 1..n {
            ranks[q] = interior_rank.min(prefix[q]).min(suffix[q]).max(1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cores = (0..n)
            .map(|q| {
                let mut dims = vec![ranks[q]];
                dims.extend(shape.group_bases(q));
                dims.push(ranks[q + 1]);
                ArrayD::from_shape_fn(IxDyn(&dims), |_| match kind {
                    ScalarKind::Real => Complex64::new(rng.gen_range(-1.0..1.0), 0.0),
                    ScalarKind::Complex => {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    }
                })
            })
            .collect();
        Self::from_parts(shape.clone(), cores, kind, None)
    }

    pub fn shape(&self) -> &TrainShape {
        &self.shape
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub(crate) fn set_kind(&mut self, kind: ScalarKind) {
        self.kind = kind;
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn ncores(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[ArrayD<Complex64>] {
        &self.cores
    }

    pub fn core(&self, q: usize) -> &ArrayD<Complex64> {
        &self.cores[q]
    }

    pub(crate) fn core_mut(&mut self, q: usize) -> &mut ArrayD<Complex64> {
        self.center = None;
        &mut self.cores[q]
    }

    pub fn ranks(&self) -> &[usize] {
        self.shape.ranks()
    }

    /// Interior bond ranks (between adjacent cores).
    pub fn interior_ranks(&self) -> &[usize] {
        let r = self.shape.ranks();
        &r[1..r.len() - 1]
    }

    /// Drop imaginary parts that are exactly representable as zero noise;
    /// used after decompositions on real-kind data.
    pub(crate) fn scrub_imaginary(&mut self) {
        if self.kind == ScalarKind::Real {
            for core in &mut self.cores {
                core.mapv_inplace(|z| Complex64::new(z.re, 0.0));
            }
        }
    }

    /// Evaluate at one multi-index (one flat index per dimension).
    pub fn value_at(&self, idxs: &[usize]) -> Result<Complex64> {
        let per_dim: Vec<&[usize]> = idxs.iter().map(std::slice::from_ref).collect();
        Ok(self.evaluate(&per_dim)?[0])
    }

    /// Batched evaluation: one index array per dimension, all of equal
    /// length. Exact (no approximation).
    pub fn evaluate(&self, idxs: &[&[usize]]) -> Result<Array1<Complex64>> {
        let dims = self.shape.dims();
        if idxs.len() != dims.len() {
            return Err(Error::Shape(format!(
                "expected {} index arrays, got {}",
                dims.len(),
                idxs.len()
            )));
        }
        let batch = idxs.first().map_or(0, |a| a.len());
        if idxs.iter().any(|a| a.len() != batch) {
            return Err(Error::Shape("index arrays differ in length".into()));
        }
        let digit_tables: Vec<Array2<usize>> = dims
            .iter()
            .zip(idxs)
            .map(|(dim, axis_idxs)| dim.to_digits(axis_idxs))
            .collect::<Result<_>>()?;
        let sites = self.sites_from_digit_tables(&digit_tables, batch);
        Ok(self.evaluate_sites(&sites, batch))
    }

    fn sites_from_digit_tables(&self, tables: &[Array2<usize>], batch: usize) -> Vec<Vec<usize>> {
        (0..self.ncores())
            .map(|q| {
                let group = self.shape.group(q);
                let bases = self.shape.group_bases(q);
                (0..batch)
                    .map(|b| {
                        let mut flat = 0usize;
                        for (r, &base) in group.iter().zip(&bases) {
                            flat = flat * base + tables[r.dim][[b, r.pos]];
                        }
                        flat
                    })
                    .collect()
            })
            .collect()
    }

    /// Evaluate at per-core flattened digit indices (`sites[q][b]`).
    pub(crate) fn evaluate_sites(&self, sites: &[Vec<usize>], batch: usize) -> Array1<Complex64> {
        let mut v = Array2::from_elem((batch, 1), Complex64::new(1.0, 0.0));
        for (q, core) in self.cores.iter().enumerate() {
            let left = core.shape()[0];
            let right = *core.shape().last().unwrap();
            let extent: usize = core.shape()[1..core.ndim() - 1].iter().product();
            let mat = unfold(core.view(), 1); // (left, extent*right)
            let mut next = Array2::zeros((batch, right));
            for b in 0..batch {
                let site = sites[q][b];
                for l in 0..left {
                    let vl = v[[b, l]];
                    if vl == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for r in 0..right {
                        next[[b, r]] += vl * mat[[l, site * right + r]];
                    }
                }
                debug_assert!(site < extent);
            }
            v = next;
        }
        v.column(0).to_owned()
    }

    /// Expand to a dense array over the original (unfactorized)
    /// dimensions, refusing above `guard` entries.
    pub fn to_tensor_guarded(&self, guard: usize) -> Result<ArrayD<Complex64>> {
        let size = self.shape.total_size();
        if size > guard {
            return Err(Error::SizeGuard { size, guard });
        }
        // Contract cores left to right into (processed digits, right rank).
        let mut acc = unfold(self.cores[0].view(), self.cores[0].ndim() - 1);
        for core in &self.cores[1..] {
            let rest: usize = core.shape()[1..].iter().product();
            let mat = unfold(core.view(), 1); // (left, extent*right)
            let prod = acc.dot(&mat); // (digits, extent*right)
            let right = *core.shape().last().unwrap();
            let rows = prod.nrows() * rest / right;
            acc = fold(prod, &[rows], &[right])
                .into_dimensionality::<ndarray::Ix2>()
                .expect("two axes");
        }
        // acc: (all digits in core order, 1)
        let mut core_axis_dims = Vec::new();
        for q in 0..self.ncores() {
            core_axis_dims.extend(self.shape.group_bases(q));
        }
        if core_axis_dims.is_empty() {
            core_axis_dims.push(1);
        }
        let digits = reshaped(acc.into_dyn(), &core_axis_dims);
        // Permute digit axes from core order to dimension-major order.
        let flat_refs: Vec<_> = self.shape.groups().iter().flatten().collect();
        let mut offsets = Vec::new();
        let mut acc_off = 0;
        for dim in self.shape.dims() {
            offsets.push(acc_off);
            acc_off += dim.ndigits();
        }
        let mut perm = vec![0usize; flat_refs.len().max(1)];
        if !flat_refs.is_empty() {
            let mut source_of = vec![0usize; flat_refs.len()];
            for (axis, r) in flat_refs.iter().enumerate() {
                source_of[offsets[r.dim] + r.pos] = axis;
            }
            perm = source_of;
        }
        let ordered = digits.permuted_axes(IxDyn(&perm));
        let sizes: Vec<usize> = self.shape.dims().iter().map(|d| d.size()).collect();
        Ok(reshaped(ordered.to_owned(), &sizes))
    }

    pub fn to_tensor(&self) -> Result<ArrayD<Complex64>> {
        self.to_tensor_guarded(DENSE_GUARD)
    }

    /// Move the canonical center to `center` by QR sweeps from both
    /// ends; the represented tensor is unchanged.
    pub fn normalize(&mut self, center: usize) -> Result<()> {
        let n = self.ncores();
        if center >= n {
            return Err(Error::IndexOutOfRange {
                index: center,
                size: n,
            });
        }
        for q in 0..center {
            self.left_orthonormalize_step(q);
        }
        for q in (center + 1..n).rev() {
            self.right_orthonormalize_step(q);
        }
        self.center = Some(center);
        self.refresh_ranks();
        self.scrub_imaginary();
        Ok(())
    }

    fn left_orthonormalize_step(&mut self, q: usize) {
        let core = &self.cores[q];
        let ndim = core.ndim();
        let left_dims: Vec<usize> = core.shape()[..ndim - 1].to_vec();
        let m = unfold(core.view(), ndim - 1);
        let (qmat, rmat) = qr_reduced(m.view());
        let k = qmat.ncols();
        self.cores[q] = fold(qmat, &left_dims, &[k]);
        let next = &self.cores[q + 1];
        let next_right: Vec<usize> = next.shape()[1..].to_vec();
        let merged = rmat.dot(&unfold(next.view(), 1));
        self.cores[q + 1] = fold(merged, &[k], &next_right);
    }

    fn right_orthonormalize_step(&mut self, q: usize) {
        let core = &self.cores[q];
        let right_dims: Vec<usize> = core.shape()[1..].to_vec();
        let m = unfold(core.view(), 1);
        let (lmat, qmat) = lq_reduced(m.view());
        let k = qmat.nrows();
        self.cores[q] = fold(qmat, &[k], &right_dims);
        let prev = &self.cores[q - 1];
        let prev_left: Vec<usize> = prev.shape()[..prev.ndim() - 1].to_vec();
        let merged = unfold(prev.view(), prev.ndim() - 1).dot(&lmat);
        self.cores[q - 1] = fold(merged, &prev_left, &[k]);
    }

    /// Left-orthonormalize core `q`, absorbing the factor into `q + 1`.
    pub(crate) fn shift_center_right(&mut self, q: usize) {
        self.left_orthonormalize_step(q);
        self.center = None;
        self.refresh_ranks();
    }

    /// Right-orthonormalize core `q`, absorbing the factor into `q - 1`.
    pub(crate) fn shift_center_left(&mut self, q: usize) {
        self.right_orthonormalize_step(q);
        self.center = None;
        self.refresh_ranks();
    }

    pub(crate) fn refresh_ranks(&mut self) {
        let mut ranks = Vec::with_capacity(self.cores.len() + 1);
        ranks.push(self.cores[0].shape()[0]);
        for core in &self.cores {
            ranks.push(*core.shape().last().unwrap());
        }
        self.shape.set_ranks(ranks);
    }

    /// Inner product, conjugate-linear in `self`:
    /// `<self, other> = sum conj(self_i) * other_i`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if !self.shape.addition_compatible(other.shape()) {
            return Err(Error::Shape(
                "inner product requires identical dims and digit layout".into(),
            ));
        }
        let mut env = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
        for (a, b) in self.cores.iter().zip(&other.cores) {
            // X[la, extent*rb'] = env . unfold(b)
            let x = env.dot(&unfold(b.view(), 1));
            let rb = *b.shape().last().unwrap();
            let rows = x.nrows() * x.ncols() / rb;
            let x = fold(x, &[rows], &[rb])
                .into_dimensionality::<ndarray::Ix2>()
                .expect("2d");
            let a_mat = unfold(a.view(), a.ndim() - 1); // (la*extent, ra')
            env = a_mat.t().mapv(|z| z.conj()).dot(&x);
        }
        Ok(env[[0, 0]])
    }

    /// Frobenius norm, `sqrt(<t, t>)`, computed through a QR sweep so
    /// that near-cancelling trains lose no precision.
    pub fn frobenius_norm(&self) -> f64 {
        let mut copy = self.clone();
        copy.kind = ScalarKind::Complex; // skip imaginary scrubbing work
        copy.normalize(0).expect("center 0 is always valid");
        copy.cores[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Complex conjugate of every core entry.
    pub fn conj(&self) -> Self {
        let cores = self
            .cores
            .iter()
            .map(|c| c.mapv(|z| z.conj()))
            .collect();
        Self {
            shape: self.shape.clone(),
            cores,
            kind: self.kind,
            center: self.center,
        }
    }

    /// Concatenate the core sequences: the result represents the outer
    /// product of the two tensors on the concatenated dimensions.
    pub fn extend(&self, other: &Self) -> Result<Self> {
        if *self.shape.ranks().last().unwrap() != 1 || other.shape.ranks()[0] != 1 {
            return Err(Error::Shape(
                "extend requires terminal ranks of 1 at the junction".into(),
            ));
        }
        let mut dims = self.shape.dims().to_vec();
        dims.extend_from_slice(other.shape.dims());
        let offset = self.shape.dims().len();
        let mut groups = self.shape.groups().to_vec();
        for g in other.shape.groups() {
            groups.push(
                g.iter()
                    .map(|r| crate::trainshape::DigitRef {
                        dim: r.dim + offset,
                        pos: r.pos,
                    })
                    .collect(),
            );
        }
        let shape = TrainShape::explicit_unordered(dims, groups)?;
        let mut cores = self.cores.clone();
        cores.extend(other.cores.iter().cloned());
        Ok(Self::from_parts(
            shape,
            cores,
            ScalarKind::promote(self.kind, other.kind),
            None,
        ))
    }

    /// Multiply the represented tensor by a scalar (applied to the first
    /// core).
    pub fn scale(&mut self, factor: Complex64) {
        self.cores[0].mapv_inplace(|z| z * factor);
        if factor.im != 0.0 {
            self.kind = ScalarKind::Complex;
        }
    }

    /// Relabel the dimensions by `order` (entry `k` of the new dims is
    /// old dim `order[k]`); cores are untouched, so the represented
    /// tensor has its axes permuted accordingly.
    pub fn permute_dims(&self, order: &[usize]) -> Result<Self> {
        Ok(Self {
            shape: self.shape.permute_dims(order)?,
            cores: self.cores.clone(),
            kind: self.kind,
            center: self.center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantics::Dimension;
    use crate::trainshape::GroupMode;

    fn shape_of(size: usize) -> TrainShape {
        TrainShape::new(vec![Dimension::new(size).unwrap()], None).unwrap()
    }

    fn constant_cores(shape: &TrainShape, v: f64) -> Vec<ArrayD<f64>> {
        (0..shape.ncores())
            .map(|q| {
                let mut dims = vec![1usize];
                dims.extend(shape.group_bases(q));
                dims.push(1);
                let fill = if q == 0 { v } else { 1.0 };
                ArrayD::from_elem(IxDyn(&dims), fill)
            })
            .collect()
    }

    #[test]
    fn constant_train_evaluates_everywhere() {
        let shape = shape_of(8);
        let t = TensorTrain::from_real_cores(shape.clone(), constant_cores(&shape, 1.0)).unwrap();
        let idxs: Vec<usize> = (0..8).collect();
        let vals = t.evaluate(&[&idxs]).unwrap();
        for v in vals {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let dense = t.to_tensor().unwrap();
        assert_eq!(dense.shape(), &[8]);
        assert!(dense.iter().all(|z| (z.re - 1.0).abs() < 1e-15));
    }

    #[test]
    fn mismatched_rank_chain_rejected() {
        let shape = shape_of(4);
        let cores = vec![
            ArrayD::from_elem(IxDyn(&[1, 2, 3]), 1.0),
            ArrayD::from_elem(IxDyn(&[4, 2, 1]), 1.0),
        ];
        assert!(TensorTrain::from_real_cores(shape, cores).is_err());
    }

    #[test]
    fn single_core_train_is_dense_tensor() {
        let dim = Dimension::from_bases(&[5]).unwrap();
        let shape = TrainShape::new(vec![dim], None).unwrap();
        let core = ArrayD::from_shape_fn(IxDyn(&[1, 5, 1]), |ix| ix[1] as f64);
        let t = TensorTrain::from_real_cores(shape, vec![core]).unwrap();
        let dense = t.to_tensor().unwrap();
        for i in 0..5 {
            assert_eq!(dense[[i]].re, i as f64);
        }
    }

    #[test]
    fn dense_roundtrip_matches_evaluate() {
        let dim = Dimension::new(12).unwrap();
        let shape = TrainShape::new(vec![dim], None).unwrap();
        let t = TensorTrain::random(&shape, 2, 99, ScalarKind::Real);
        let dense = t.to_tensor().unwrap();
        let idxs: Vec<usize> = (0..12).collect();
        let vals = t.evaluate(&[&idxs]).unwrap();
        for i in 0..12 {
            assert!((dense[[i]] - vals[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_roundtrip_2d_interleaved() {
        let dims = vec![Dimension::new(8).unwrap(), Dimension::new(8).unwrap()];
        let shape = TrainShape::new(dims, Some(GroupMode::Interleaved)).unwrap();
        let t = TensorTrain::random(&shape, 3, 5, ScalarKind::Complex);
        let dense = t.to_tensor().unwrap();
        assert_eq!(dense.shape(), &[8, 8]);
        for i in 0..8 {
            for j in 0..8 {
                let v = t.value_at(&[i, j]).unwrap();
                assert!((dense[[i, j]] - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn from_dense_reconstructs_exactly() {
        let dims = vec![Dimension::new(6).unwrap(), Dimension::new(4).unwrap()];
        let shape = TrainShape::new(dims, Some(GroupMode::Block)).unwrap();
        let data = ArrayD::from_shape_fn(IxDyn(&[6, 4]), |ix| {
            Complex64::new((ix[0] * 4 + ix[1]) as f64, 0.5)
        });
        let (t, discarded) =
            TensorTrain::from_dense(&shape, data.view(), ScalarKind::Complex, &TruncationRule::exact())
                .unwrap();
        assert!(discarded < 1e-12);
        let back = t.to_tensor().unwrap();
        for (a, b) in back.iter().zip(data.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn normalize_preserves_values_and_norm() {
        let shape = shape_of(16);
        let t = TensorTrain::random(&shape, 3, 11, ScalarKind::Complex);
        let dense = t.to_tensor().unwrap();
        let dense_norm = dense.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for center in 0..t.ncores() {
            let mut copy = t.clone();
            copy.normalize(center).unwrap();
            assert_eq!(copy.center(), Some(center));
            let after = copy.to_tensor().unwrap();
            for (a, b) in after.iter().zip(dense.iter()) {
                assert!((a - b).norm() < 1e-13 * dense_norm.max(1.0));
            }
            assert!((copy.frobenius_norm() - dense_norm).abs() < 1e-12 * dense_norm);
            // Cores left of the center are left-orthonormal.
            for q in 0..center {
                let core = copy.core(q);
                let m = unfold(core.view(), core.ndim() - 1);
                let gram = m.t().mapv(|z| z.conj()).dot(&m);
                for i in 0..gram.nrows() {
                    for j in 0..gram.ncols() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((gram[[i, j]] - Complex64::new(expect, 0.0)).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let shape = shape_of(20);
        let mut t = TensorTrain::random(&shape, 2, 3, ScalarKind::Real);
        t.normalize(1).unwrap();
        let first = t.to_tensor().unwrap();
        t.normalize(1).unwrap();
        let second = t.to_tensor().unwrap();
        for (a, b) in first.iter().zip(second.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn rank_one_constant_orthonormal_after_normalize() {
        let shape = shape_of(8);
        let mut t =
            TensorTrain::from_real_cores(shape.clone(), constant_cores(&shape, 2.0)).unwrap();
        t.normalize(2).unwrap();
        for q in 0..2 {
            let m = unfold(t.core(q).view(), t.core(q).ndim() - 1);
            let col_norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((col_norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_matches_dense_dot() {
        let shape = shape_of(16);
        let a = TensorTrain::random(&shape, 2, 21, ScalarKind::Complex);
        let b = TensorTrain::random(&shape, 2, 22, ScalarKind::Complex);
        let da = a.to_tensor().unwrap();
        let db = b.to_tensor().unwrap();
        let dense: Complex64 = da.iter().zip(db.iter()).map(|(x, y)| x.conj() * y).sum();
        let fast = a.inner(&b).unwrap();
        assert!((dense - fast).norm() < 1e-12 * dense.norm().max(1.0));
        // Cauchy-Schwarz
        assert!(fast.norm() <= a.frobenius_norm() * b.frobenius_norm() + 1e-12);
    }

    #[test]
    fn inner_with_self_is_squared_norm() {
        let shape = shape_of(30);
        let t = TensorTrain::random(&shape, 3, 7, ScalarKind::Real);
        let ip = t.inner(&t).unwrap();
        assert!(ip.im.abs() < 1e-12);
        let norm = t.frobenius_norm();
        assert!((ip.re - norm * norm).abs() < 1e-12 * norm * norm);
    }

    #[test]
    fn inner_with_ones_is_entry_sum() {
        let shape = shape_of(12);
        let ones =
            TensorTrain::from_real_cores(shape.clone(), constant_cores(&shape, 1.0)).unwrap();
        let t = TensorTrain::random(&shape, 2, 4, ScalarKind::Real);
        let dense = t.to_tensor().unwrap();
        let total: Complex64 = dense.iter().sum();
        let ip = ones.inner(&t).unwrap();
        assert!((ip - total).norm() < 1e-12 * total.norm().max(1.0));
    }

    #[test]
    fn conj_of_real_train_is_identical() {
        let shape = shape_of(8);
        let t = TensorTrain::random(&shape, 2, 17, ScalarKind::Real);
        let c = t.conj();
        for (a, b) in t.cores().iter().zip(c.cores()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn extend_is_outer_product() {
        let sa = shape_of(4);
        let sb = shape_of(6);
        let a = TensorTrain::random(&sa, 2, 1, ScalarKind::Real);
        let b = TensorTrain::random(&sb, 2, 2, ScalarKind::Real);
        let joined = a.extend(&b).unwrap();
        let da = a.to_tensor().unwrap();
        let db = b.to_tensor().unwrap();
        let dj = joined.to_tensor().unwrap();
        assert_eq!(dj.shape(), &[4, 6]);
        for i in 0..4 {
            for j in 0..6 {
                assert!((dj[[i, j]] - da[[i]] * db[[j]]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn extend_of_constants_is_constant_product() {
        let sa = shape_of(4);
        let sb = shape_of(3);
        let a = TensorTrain::from_real_cores(sa.clone(), constant_cores(&sa, 2.0)).unwrap();
        let b = TensorTrain::from_real_cores(sb.clone(), constant_cores(&sb, 3.0)).unwrap();
        let joined = a.extend(&b).unwrap();
        let dense = joined.to_tensor().unwrap();
        assert!(dense.iter().all(|z| (z.re - 6.0).abs() < 1e-13));
    }

    #[test]
    fn permute_dims_transposes() {
        let dims = vec![Dimension::new(4).unwrap(), Dimension::new(6).unwrap()];
        let shape = TrainShape::new(dims, Some(GroupMode::Block)).unwrap();
        let t = TensorTrain::random(&shape, 2, 8, ScalarKind::Real);
        let tt = t.permute_dims(&[1, 0]).unwrap();
        let d = t.to_tensor().unwrap();
        let dt = tt.to_tensor().unwrap();
        assert_eq!(dt.shape(), &[6, 4]);
        for i in 0..4 {
            for j in 0..6 {
                assert!((d[[i, j]] - dt[[j, i]]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn to_tensor_size_guard() {
        let shape = shape_of(64);
        let t = TensorTrain::random(&shape, 1, 0, ScalarKind::Real);
        assert!(matches!(
            t.to_tensor_guarded(32),
            Err(Error::SizeGuard { size: 64, guard: 32 })
        ));
    }

    #[test]
    fn evaluate_rejects_bad_indices() {
        let shape = shape_of(8);
        let t = TensorTrain::random(&shape, 1, 0, ScalarKind::Real);
        assert!(t.evaluate(&[&[8usize][..]]).is_err());
    }
}
