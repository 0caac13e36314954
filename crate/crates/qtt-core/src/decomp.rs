//! Dense matrix primitives behind train arithmetic and the solvers:
//! rank-truncated SVD, reduced QR/LQ, and maxvol row selection.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Rank-truncation policy for SVD splits.
///
/// `cutoff` is relative to the full Frobenius norm of the matrix being
/// split, which makes accumulated zip-up errors additive in the reported
/// discarded weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRule {
    pub max_rank: Option<usize>,
    pub cutoff: f64,
}

impl TruncationRule {
    pub fn new(max_rank: Option<usize>, cutoff: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&cutoff) {
            return Err(Error::Numeric(format!(
                "cutoff must lie in [0, 1), got {cutoff}"
            )));
        }
        if max_rank == Some(0) {
            return Err(Error::Numeric("max_rank must be >= 1".into()));
        }
        Ok(Self { max_rank, cutoff })
    }

    /// No truncation at all: unbounded rank, cutoff 0.
    pub fn exact() -> Self {
        Self {
            max_rank: None,
            cutoff: 0.0,
        }
    }

    pub fn with_max_rank(max_rank: usize) -> Self {
        Self {
            max_rank: Some(max_rank),
            cutoff: 0.0,
        }
    }
}

/// Result of [`truncated_svd`]: `m ~= u * diag(s) * vh` with
/// `discarded_weight = sqrt(sum of squared dropped singular values)`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Array2<Complex64>,
    pub s: Vec<f64>,
    pub vh: Array2<Complex64>,
    pub discarded_weight: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

pub(crate) fn to_nalgebra(a: ArrayView2<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_ndarray(m: &DMatrix<Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Truncated singular value decomposition.
///
/// The kept rank is the smallest `r` with
/// `sqrt(sum_{k>r} s_k^2) <= cutoff * sqrt(sum_k s_k^2)`, further capped
/// by `max_rank`. A rank of zero (only possible for an exactly zero or
/// empty matrix) returns empty factors; callers splitting train cores
/// treat that as rank one of zeros.
pub fn truncated_svd(m: ArrayView2<Complex64>, rule: &TruncationRule) -> Result<TruncatedSvd> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite entry in SVD input".into()));
    }
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 {
        return Ok(TruncatedSvd {
            u: Array2::zeros((rows, 0)),
            s: vec![],
            vh: Array2::zeros((0, cols)),
            discarded_weight: 0.0,
        });
    }
    let svd = to_nalgebra(m).svd_unordered(true, true);
    let u_full = svd.u.as_ref().expect("u requested");
    let vh_full = svd.v_t.as_ref().expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let s_sorted: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();

    // tail[r] = sqrt(sum of s_k^2 for k >= r)
    let mut tail = vec![0.0f64; s_sorted.len() + 1];
    for r in (0..s_sorted.len()).rev() {
        tail[r] = tail[r + 1] + s_sorted[r] * s_sorted[r];
    }
    let total = tail[0].sqrt();
    let threshold = rule.cutoff * total;
    let mut rank = s_sorted.len();
    while rank > 0 && tail[rank - 1].sqrt() <= threshold {
        rank -= 1;
    }
    if let Some(cap) = rule.max_rank {
        rank = rank.min(cap);
    }
    let discarded_weight = tail[rank].sqrt();

    let mut u = Array2::zeros((rows, rank));
    let mut vh = Array2::zeros((rank, cols));
    for (new, &old) in order.iter().take(rank).enumerate() {
        for i in 0..rows {
            u[[i, new]] = u_full[(i, old)];
        }
        for j in 0..cols {
            vh[[new, j]] = vh_full[(old, j)];
        }
    }
    Ok(TruncatedSvd {
        u,
        s: s_sorted[..rank].to_vec(),
        vh,
        discarded_weight,
    })
}

/// Reduced QR: `m = q * r` with `q^H q = I`, `q` of shape
/// `(rows, min(rows, cols))`.
pub fn qr_reduced(m: ArrayView2<Complex64>) -> (Array2<Complex64>, Array2<Complex64>) {
    let qr = to_nalgebra(m).qr();
    let (q, r) = (qr.q(), qr.r());
    (to_ndarray(&q), to_ndarray(&r))
}

/// Reduced LQ: `m = l * q` with `q q^H = I`, `q` of shape
/// `(min(rows, cols), cols)`. Computed as the adjoint of a QR.
pub fn lq_reduced(m: ArrayView2<Complex64>) -> (Array2<Complex64>, Array2<Complex64>) {
    let adj = to_nalgebra(m).adjoint();
    let qr = adj.qr();
    let (q, r) = (qr.q(), qr.r());
    (to_ndarray(&r.adjoint()), to_ndarray(&q.adjoint()))
}

/// Quasi-maximum-volume row selection on a tall matrix (`cols <= rows`).
///
/// Returns `cols` row indices such that every entry of
/// `m * inv(m[rows])` has magnitude at most `1 + tol`. Starts from a
/// greedy pivoted selection and swaps the worst-dominance row until the
/// bound holds or 100 iterations pass; falls back to the pivoted
/// selection when the pivot block is singular. Ties break towards the
/// lowest row index, so the selection is deterministic.
pub fn maxvol(m: ArrayView2<Complex64>, tol: f64) -> Result<Vec<usize>> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if cols > rows {
        return Err(Error::Shape(format!(
            "maxvol needs cols <= rows, got {rows}x{cols}"
        )));
    }
    if cols == 0 {
        return Ok(vec![]);
    }
    let mat = to_nalgebra(m);
    let mut selected = pivoted_rows(&mat, cols);
    if selected.len() < cols {
        // Rank-deficient input: pad deterministically with unused rows.
        for i in 0..rows {
            if selected.len() == cols {
                break;
            }
            if !selected.contains(&i) {
                selected.push(i);
            }
        }
    }
    let fallback = selected.clone();

    for _ in 0..100 {
        let block = select_rows(&mat, &selected);
        let lu = block.transpose().lu();
        let bt = match lu.solve(&mat.transpose()) {
            Some(x) => x,
            None => {
                let mut rows = fallback;
                rows.sort_unstable();
                return Ok(rows);
            }
        };
        // bt is (cols x rows); b[i][j] = bt[(j, i)]
        let mut worst = (0usize, 0usize, 1.0 + tol);
        for i in 0..rows {
            for j in 0..cols {
                let mag = bt[(j, i)].norm();
                if mag > worst.2 {
                    worst = (i, j, mag);
                }
            }
        }
        if worst.2 <= 1.0 + tol {
            break;
        }
        selected[worst.1] = worst.0;
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Greedy volume-maximizing row selection (column-pivoted QR applied to
/// the transpose): repeatedly pick the row of largest residual norm and
/// orthogonalize the remainder against it.
fn pivoted_rows(m: &DMatrix<Complex64>, count: usize) -> Vec<usize> {
    let rows = m.nrows();
    let mut work = m.clone();
    let mut selected = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best = (usize::MAX, 0.0f64);
        for i in 0..rows {
            if selected.contains(&i) {
                continue;
            }
            let norm = work.row(i).norm();
            if norm > best.1 + 1e-300 {
                best = (i, norm);
            }
        }
        if best.0 == usize::MAX || best.1 <= 0.0 {
            break;
        }
        let pivot = best.0;
        selected.push(pivot);
        let pivot_row = work.row(pivot).clone_owned() / Complex64::new(best.1, 0.0);
        for i in 0..rows {
            if selected.contains(&i) {
                continue;
            }
            let overlap = work.row(i).dotc(&pivot_row).conj();
            let update = pivot_row.clone() * overlap;
            for c in 0..work.ncols() {
                work[(i, c)] -= update[c];
            }
        }
    }
    selected
}

fn select_rows(m: &DMatrix<Complex64>, rows: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}
