//! Zip-up pass: sequential exact-contract-then-SVD-truncate over the
//! cores of an operation recipe.
//!
//! A super-core of `window` merged result cores is maintained; its
//! leftmost factor is split off and the next exact core is absorbed on
//! the right. Each split is weighted by the Gram matrix of the exact
//! right environment (precomputed right to left over the recipe cores),
//! so every discarded weight is the global-norm error of that
//! truncation and the total error is bounded by their sum. The kept
//! factor of the SVD is orthonormal as is, so no explicit QR restore of
//! the remainder is needed.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayD};
use num_complex::Complex64;

use crate::decomp::{to_nalgebra, to_ndarray, truncated_svd, TruncationRule};
use crate::error::Result;
use crate::train::{fold, reshaped, unfold, ScalarKind, TensorTrain};

use super::ops::LocalOp;
use super::plan::merge_bond;

/// Run the zip-up pass. Returns the truncated train together with the
/// sum of all per-split discarded weights (each measured in the global
/// norm).
pub(crate) fn zip_up(
    op: &dyn LocalOp,
    rule: &TruncationRule,
    window: usize,
) -> Result<(TensorTrain, f64)> {
    let n = op.len();
    let window = window.max(1).min(n);
    let shape = op.result_shape().clone();

    if n == 1 {
        let mut t = TensorTrain::from_parts(shape, vec![op.core(0)], op.kind(), Some(0));
        t.scrub_imaginary();
        return Ok((t, 0.0));
    }

    // Right-environment Grams of the exact result: grams[q] couples the
    // bond left of recipe core q with itself.
    let mut grams: Vec<Array2<Complex64>> = vec![Array2::zeros((0, 0)); n + 1];
    grams[n] = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    for q in (1..=n - 1).rev() {
        grams[q] = gram_step(&op.core(q), &grams[q + 1]);
    }
    let roots: Vec<Array2<Complex64>> = grams[1..=n - 1]
        .iter()
        .map(psd_root)
        .chain(std::iter::once(Array2::from_elem(
            (1, 1),
            Complex64::new(1.0, 0.0),
        )))
        .collect(); // roots[q-1] is the root at bond q, roots[n-1] at bond n

    let mut supercore = op.core(0);
    let mut absorbed = 1;
    while absorbed < window {
        supercore = merge_bond(supercore, op.core(absorbed));
        absorbed += 1;
    }

    let mut cores: Vec<ArrayD<Complex64>> = Vec::with_capacity(n);
    let mut discarded = 0.0;
    for q in 0..n - 1 {
        let ndigits_q = shape.group(q).len();
        let left_dims: Vec<usize> = supercore.shape()[..ndigits_q + 1].to_vec();
        let m = unfold(supercore.view(), ndigits_q + 1);

        // Weight the trailing bond by the environment root so singular
        // values measure global error.
        let bond = *supercore.shape().last().unwrap();
        let root = &roots[absorbed - 1];
        debug_assert_eq!(root.nrows(), bond);
        let cols = m.ncols();
        let inner = cols / bond;
        let m3 = reshaped(m.clone().into_dyn(), &[m.nrows() * inner, bond])
            .into_dimensionality::<ndarray::Ix2>()
            .expect("2d");
        let weighted = m3.dot(root);
        let weighted = reshaped(weighted.into_dyn(), &[m.nrows(), cols])
            .into_dimensionality::<ndarray::Ix2>()
            .expect("2d");

        let svd = truncated_svd(weighted.view(), rule)?;
        discarded += svd.discarded_weight;
        let u = if svd.rank() == 0 {
            Array2::zeros((m.nrows(), 1))
        } else {
            svd.u
        };
        let rank = u.ncols();
        // Project the unweighted remainder onto the kept basis.
        let carry = u.t().mapv(|z| z.conj()).dot(&m);
        cores.push(fold(u, &left_dims, &[rank]));
        let mut rest_dims = vec![rank];
        rest_dims.extend_from_slice(&supercore.shape()[ndigits_q + 1..]);
        supercore = reshaped(fold(carry, &[rank], &[cols]), &rest_dims);
        if absorbed < n {
            supercore = merge_bond(supercore, op.core(absorbed));
            absorbed += 1;
        }
    }
    cores.push(supercore);

    let center = n - 1;
    let mut t = TensorTrain::from_parts(shape, cores, op.kind(), Some(center));
    if t.kind() == ScalarKind::Real {
        t.scrub_imaginary();
    }
    Ok((t, discarded))
}

/// `g'[l, l'] = sum_{d, r, r'} c[l, d, r] g[r, r'] conj(c[l', d, r'])`.
fn gram_step(core: &ArrayD<Complex64>, g: &Array2<Complex64>) -> Array2<Complex64> {
    let c_mat = unfold(core.view(), core.ndim() - 1); // (l*D, r)
    let t = c_mat.dot(g); // (l*D, r')
    let l = core.shape()[0];
    let rest = t.nrows() / l * t.ncols();
    let t2 = reshaped(t.into_dyn(), &[l, rest])
        .into_dimensionality::<ndarray::Ix2>()
        .expect("2d");
    let c2 = reshaped(c_mat.into_dyn(), &[l, rest])
        .into_dimensionality::<ndarray::Ix2>()
        .expect("2d");
    t2.dot(&c2.mapv(|z| z.conj()).t())
}

/// Hermitian PSD square root via eigendecomposition, clipping negative
/// rounding noise.
fn psd_root(g: &Array2<Complex64>) -> Array2<Complex64> {
    let eig = SymmetricEigen::new(to_nalgebra(g.view()));
    let n = g.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for k in 0..n {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, k)] *= Complex64::new(s, 0.0);
        }
    }
    let root: DMatrix<Complex64> = &scaled * eig.eigenvectors.adjoint();
    to_ndarray(&root)
}
