//! Closed-form trains: constants, exponentials, trigonometric functions,
//! polynomials, shift matrices, Toeplitz tensors and the DFT matrix.

use ndarray::{Array2, ArrayD, Dimension as NdDimension, IxDyn};
use num_complex::Complex64;

use crate::arithmetic::{einsum, ApproxPolicy};
use crate::decomp::TruncationRule;
use crate::error::{Error, Result};
use crate::quantics::{Dimension, UniformGrid};
use crate::train::{ScalarKind, TensorTrain};
use crate::trainshape::{DigitRef, GroupMode, TrainShape};

// ---------------------------------------------------------------------
// Rank product
// ---------------------------------------------------------------------

/// A 2D grid of dense sub-cores sharing digit extents: the block form of
/// a train core for all bond indices at once.
#[derive(Debug, Clone)]
pub struct RankBlock {
    rows: usize,
    cols: usize,
    digit_shape: Vec<usize>,
    /// Row-major block storage, each with shape `digit_shape`.
    blocks: Vec<ArrayD<Complex64>>,
}

impl RankBlock {
    pub fn new(
        rows: usize,
        cols: usize,
        digit_shape: Vec<usize>,
        blocks: Vec<ArrayD<Complex64>>,
    ) -> Result<Self> {
        if blocks.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} blocks for a {rows}x{cols} grid",
                blocks.len()
            )));
        }
        for b in &blocks {
            if b.shape() != digit_shape.as_slice() {
                return Err(Error::Shape(format!(
                    "block shape {:?} differs from {:?}",
                    b.shape(),
                    digit_shape
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            digit_shape,
            blocks,
        })
    }

    /// A `1 x n` or `n x 1` grid of scalars (empty digit shape), used to
    /// select block rows or columns by rank multiplication.
    pub fn scalar_row(values: &[f64]) -> Self {
        let blocks = values
            .iter()
            .map(|&v| ArrayD::from_elem(IxDyn(&[]), Complex64::new(v, 0.0)))
            .collect();
        Self {
            rows: 1,
            cols: values.len(),
            digit_shape: vec![],
            blocks,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block(&self, r: usize, c: usize) -> &ArrayD<Complex64> {
        &self.blocks[r * self.cols + c]
    }

    /// View the grid as one train core with axes
    /// `(rows, digit_shape..., cols)`.
    pub fn into_core(self) -> ArrayD<Complex64> {
        let mut dims = vec![self.rows];
        dims.extend(&self.digit_shape);
        dims.push(self.cols);
        let mut out = ArrayD::zeros(IxDyn(&dims));
        for r in 0..self.rows {
            for c in 0..self.cols {
                let b = self.block(r, c);
                for (idx, &v) in b.indexed_iter() {
                    let mut target = Vec::with_capacity(dims.len());
                    target.push(r);
                    target.extend(idx.slice());
                    target.push(c);
                    out[IxDyn(&target)] = v;
                }
            }
        }
        out
    }
}

/// Matrix-of-blocks multiplication whose scalar product is the outer
/// product on digit axes: `(a ⊠ b)(i, k) = sum_j a(i, j) ⊗ b(j, k)`.
pub fn rank_product(a: &RankBlock, b: &RankBlock) -> Result<RankBlock> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "rank product of {}x{} with {}x{} blocks",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut digit_shape = a.digit_shape.clone();
    digit_shape.extend(&b.digit_shape);
    let mut blocks = Vec::with_capacity(a.rows * b.cols);
    for i in 0..a.rows {
        for k in 0..b.cols {
            let mut acc = ArrayD::zeros(IxDyn(&digit_shape));
            for j in 0..a.cols {
                let lhs = a.block(i, j);
                let rhs = b.block(j, k);
                for (li, &lv) in lhs.indexed_iter() {
                    if lv == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (ri, &rv) in rhs.indexed_iter() {
                        let mut target = Vec::with_capacity(digit_shape.len());
                        target.extend(li.slice());
                        target.extend(ri.slice());
                        acc[IxDyn(&target)] += lv * rv;
                    }
                }
            }
            blocks.push(acc);
        }
    }
    RankBlock::new(a.rows, b.cols, digit_shape, blocks)
}

// ---------------------------------------------------------------------
// Scalar-function constructors on one-dimensional grids
// ---------------------------------------------------------------------

fn single_axis(grid: &UniformGrid) -> Result<(&Dimension, f64, f64)> {
    if grid.ndims() != 1 {
        return Err(Error::Shape(format!(
            "constructor needs a single-axis grid, got {} axes",
            grid.ndims()
        )));
    }
    let dom = grid.domains()[0];
    Ok((grid.dim(0), dom.lower, dom.upper))
}

fn grid_spacing(dim: &Dimension, lower: f64, upper: f64) -> f64 {
    let n = dim.size();
    if n > 1 {
        (upper - lower) / (n - 1) as f64
    } else {
        1.0
    }
}

/// Rank-1 train with every entry equal to `v`.
pub fn constant(shape: &TrainShape, v: Complex64) -> TensorTrain {
    let cores = (0..shape.ncores())
        .map(|q| {
            let mut dims = vec![1usize];
            dims.extend(shape.group_bases(q));
            dims.push(1);
            let fill = if q == 0 { v } else { Complex64::new(1.0, 0.0) };
            ArrayD::from_elem(IxDyn(&dims), fill)
        })
        .collect();
    let kind = if v.im == 0.0 {
        ScalarKind::Real
    } else {
        ScalarKind::Complex
    };
    TensorTrain::from_parts(shape.clone(), cores, kind, None)
}

/// Rank-1 train of `exp(v * (x(i) - x0))` on a one-dimensional grid.
pub fn exp_train(grid: &UniformGrid, v: Complex64, x0: f64) -> Result<TensorTrain> {
    let (dim, lower, upper) = single_axis(grid)?;
    let h = grid_spacing(dim, lower, upper);
    let shape = TrainShape::new(vec![dim.clone()], Some(GroupMode::Block))?;
    let cores = dim
        .digits()
        .iter()
        .enumerate()
        .map(|(q, digit)| {
            let mut core = ArrayD::zeros(IxDyn(&[1, digit.base, 1]));
            for i in 0..digit.base {
                let mut arg = v * (digit.factor as f64 * h * i as f64);
                if q == 0 {
                    arg += v * (lower - x0);
                }
                core[IxDyn(&[0, i, 0])] = arg.exp();
            }
            core
        })
        .collect();
    let kind = if v.im == 0.0 {
        ScalarKind::Real
    } else {
        ScalarKind::Complex
    };
    Ok(TensorTrain::from_parts(shape, cores, kind, None))
}

/// Rank-2 real train of `cos(v * (x(i) - x0))`, built from rotation
/// cores.
pub fn cos_train(grid: &UniformGrid, v: f64, x0: f64) -> Result<TensorTrain> {
    let (dim, lower, upper) = single_axis(grid)?;
    let h = grid_spacing(dim, lower, upper);
    let n = dim.ndigits();
    let shape = TrainShape::new(vec![dim.clone()], Some(GroupMode::Block))?;
    let offset = v * (lower - x0) / n as f64;
    let phase = |q: usize, i: usize| v * dim.digit(q).factor as f64 * h * i as f64 + offset;

    let cores = (0..n)
        .map(|q| {
            let base = dim.digit(q).base;
            let (l, r) = match (q == 0, q == n - 1) {
                (true, true) => (1, 1),
                (true, false) => (1, 2),
                (false, true) => (2, 1),
                (false, false) => (2, 2),
            };
            let mut core = ArrayD::zeros(IxDyn(&[l, base, r]));
            for i in 0..base {
                let (s, c) = phase(q, i).sin_cos();
                let entries: Vec<(usize, usize, f64)> = match (q == 0, q == n - 1) {
                    // Single core: the function value itself.
                    (true, true) => vec![(0, 0, c)],
                    // First core row: 0.5 * [c + s, c - s].
                    (true, false) => vec![(0, 0, 0.5 * (c + s)), (0, 1, 0.5 * (c - s))],
                    // Last core column: [c - s, s + c].
                    (false, true) => vec![(0, 0, c - s), (1, 0, s + c)],
                    // Rotation matrix.
                    (false, false) => {
                        vec![(0, 0, c), (0, 1, -s), (1, 0, s), (1, 1, c)]
                    }
                };
                for (a, b, val) in entries {
                    core[IxDyn(&[a, i, b])] = Complex64::new(val, 0.0);
                }
            }
            core
        })
        .collect();
    Ok(TensorTrain::from_parts(shape, cores, ScalarKind::Real, None))
}

/// Rank-2 real train of `sin(v * (x(i) - x0))`, via the quarter-period
/// shift of the cosine. `v = 0` degenerates to the constant zero train.
pub fn sin_train(grid: &UniformGrid, v: f64, x0: f64) -> Result<TensorTrain> {
    if v == 0.0 {
        let (dim, _, _) = single_axis(grid)?;
        let shape = TrainShape::new(vec![dim.clone()], Some(GroupMode::Block))?;
        return Ok(constant(&shape, Complex64::new(0.0, 0.0)));
    }
    cos_train(grid, v, x0 + std::f64::consts::FRAC_PI_2 / v)
}

/// Train of the polynomial `sum_s coeffs[s] * (x - x0)^s` with
/// `coeffs` in descending degree order (`[1.0, 0.0, 0.1]` is
/// `(x-x0)^2 + 0.1`). Interior ranks equal `degree + 1`.
pub fn polyval_train(grid: &UniformGrid, coeffs: &[f64], x0: f64) -> Result<TensorTrain> {
    if coeffs.is_empty() {
        return Err(Error::Shape("polyval needs at least one coefficient".into()));
    }
    let (dim, lower, upper) = single_axis(grid)?;
    let h = grid_spacing(dim, lower, upper);
    let n = dim.ndigits();
    let shape = TrainShape::new(vec![dim.clone()], Some(GroupMode::Block))?;
    let p = coeffs.len() - 1;
    let ascending: Vec<f64> = coeffs.iter().rev().copied().collect();
    let offset = (lower - x0) / n as f64;
    let x_tilde = |q: usize, i: usize| dim.digit(q).factor as f64 * h * i as f64 + offset;

    let binom = |a: usize, b: usize| -> f64 {
        let mut acc = 1.0f64;
        for k in 0..b.min(a - b) {
            acc = acc * (a - k) as f64 / (k + 1) as f64;
        }
        if b > a {
            0.0
        } else {
            acc
        }
    };

    let cores = (0..n)
        .map(|q| {
            let base = dim.digit(q).base;
            if n == 1 {
                let mut core = ArrayD::zeros(IxDyn(&[1, base, 1]));
                for i in 0..base {
                    let x = x_tilde(q, i);
                    let val: f64 = ascending
                        .iter()
                        .enumerate()
                        .map(|(t, &a)| a * x.powi(t as i32))
                        .sum();
                    core[IxDyn(&[0, i, 0])] = Complex64::new(val, 0.0);
                }
                return core;
            }
            if q == 0 {
                // Row core: entry s = sum_{t>=s} a_t C(t, s) x^(t-s).
                let mut core = ArrayD::zeros(IxDyn(&[1, base, p + 1]));
                for i in 0..base {
                    let x = x_tilde(q, i);
                    for s in 0..=p {
                        let val: f64 = (s..=p)
                            .map(|t| ascending[t] * binom(t, s) * x.powi((t - s) as i32))
                            .sum();
                        core[IxDyn(&[0, i, s])] = Complex64::new(val, 0.0);
                    }
                }
                core
            } else if q == n - 1 {
                // Column core: entry t = x^t.
                let mut core = ArrayD::zeros(IxDyn(&[p + 1, base, 1]));
                for i in 0..base {
                    let x = x_tilde(q, i);
                    for t in 0..=p {
                        core[IxDyn(&[t, i, 0])] = Complex64::new(x.powi(t as i32), 0.0);
                    }
                }
                core
            } else {
                // Binomial transfer core, lower-triangular: entry (s, t) =
                // C(s, t) x^(s-t) for s >= t.
                let mut core = ArrayD::zeros(IxDyn(&[p + 1, base, p + 1]));
                for i in 0..base {
                    let x = x_tilde(q, i);
                    for s in 0..=p {
                        for t in 0..=s {
                            core[IxDyn(&[s, i, t])] =
                                Complex64::new(binom(s, t) * x.powi((s - t) as i32), 0.0);
                        }
                    }
                }
                core
            }
        })
        .collect();
    Ok(TensorTrain::from_parts(shape, cores, ScalarKind::Real, None))
}

// ---------------------------------------------------------------------
// Shift and Toeplitz operators
// ---------------------------------------------------------------------

/// Lower shift block: `q[i, j] = 1` iff `i - j = d` (zero outside the
/// representable range).
fn q_block(base: usize, d: i64) -> ArrayD<Complex64> {
    let mut m = ArrayD::zeros(IxDyn(&[base, base]));
    for i in 0..base as i64 {
        let j = i - d;
        if (0..base as i64).contains(&j) {
            m[IxDyn(&[i as usize, j as usize])] = Complex64::new(1.0, 0.0);
        }
    }
    m
}

/// Wrap-around companion: `r = transpose(q(base - d))`.
fn r_block(base: usize, d: i64) -> ArrayD<Complex64> {
    let mut m = ArrayD::zeros(IxDyn(&[base, base]));
    for j in 0..base as i64 {
        let i = j - (base as i64 - d);
        if (0..base as i64).contains(&i) {
            m[IxDyn(&[i as usize, j as usize])] = Complex64::new(1.0, 0.0);
        }
    }
    m
}

/// The 2x2 shift block grid at one digit: `[[Q_d, Q_{d+1}], [R_d,
/// R_{d+1}]]`.
fn shift_block(base: usize, d: i64) -> RankBlock {
    RankBlock::new(
        2,
        2,
        vec![base, base],
        vec![
            q_block(base, d),
            q_block(base, d + 1),
            r_block(base, d),
            r_block(base, d + 1),
        ],
    )
    .expect("2x2 shift block")
}

/// Digits of the shift distance in the dimension's mixed radix. The
/// leading digit may overflow its base by one, which encodes `d = N` in
/// circular mode.
fn shift_digits(dim: &Dimension, d: usize) -> Vec<i64> {
    let mut rest = d;
    dim.digits()
        .iter()
        .map(|digit| {
            let v = rest / digit.factor;
            rest -= v * digit.factor;
            v as i64
        })
        .collect()
}

/// Shift matrix as a two-dimensional interleaved train: entry `(i, j)`
/// is 1 iff `i - j = d` (plus the wrap-around block when `circular`).
/// Interior ranks are at most 2.
pub fn shift_train(dim: &Dimension, d: usize, circular: bool) -> Result<TensorTrain> {
    let n_total = dim.size();
    if d > n_total {
        return Err(Error::IndexOutOfRange {
            index: d,
            size: n_total + 1,
        });
    }
    let digits = shift_digits(dim, d);
    let n = dim.ndigits();
    let shape = TrainShape::new(
        vec![dim.clone(), dim.clone()],
        Some(GroupMode::Interleaved),
    )?;
    let selector = if circular {
        RankBlock::scalar_row(&[1.0, 1.0])
    } else {
        RankBlock::scalar_row(&[1.0, 0.0])
    };
    let cores: Vec<ArrayD<Complex64>> = (0..n)
        .map(|q| {
            let base = dim.digit(q).base;
            let block = shift_block(base, digits[q]);
            if q == 0 && n == 1 {
                let column = RankBlock::new(
                    2,
                    1,
                    vec![base, base],
                    vec![q_block(base, digits[q]), r_block(base, digits[q])],
                )
                .expect("terminal block");
                rank_product(&selector, &column)
                    .expect("1x1 chain")
                    .into_core()
            } else if q == 0 {
                rank_product(&selector, &block)
                    .expect("row selection")
                    .into_core()
            } else if q == n - 1 {
                RankBlock::new(
                    2,
                    1,
                    vec![base, base],
                    vec![q_block(base, digits[q]), r_block(base, digits[q])],
                )
                .expect("terminal block")
                .into_core()
            } else {
                block.into_core()
            }
        })
        .collect();
    Ok(TensorTrain::from_parts(shape, cores, ScalarKind::Real, None))
}

/// Layout of the stacking index of a Toeplitz tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToeplitzMode {
    /// `T(i, j, k) = 1` iff `(i - j) mod N = k`; `k` shares the
    /// dimension's factorization.
    Circular,
    /// `T(i, j, k) = 1` iff `(i - j) mod 2N = k`; `k` gains one leading
    /// base-2 digit (circulant embedding), so contracting `k` with a
    /// zero-padded length-2N kernel yields the dense Toeplitz matrix.
    Full,
}

/// Toeplitz tensor: all shift matrices stacked along a third dimension.
pub fn toeplitz_train(dim: &Dimension, mode: ToeplitzMode) -> Result<TensorTrain> {
    let n = dim.ndigits();
    match mode {
        ToeplitzMode::Circular => {
            let shape = TrainShape::new(
                vec![dim.clone(), dim.clone(), dim.clone()],
                Some(GroupMode::Interleaved),
            )?;
            let cores = (0..n)
                .map(|q| {
                    let base = dim.digit(q).base;
                    toeplitz_core(base, q == 0, q == n - 1, true)
                })
                .collect();
            Ok(TensorTrain::from_parts(shape, cores, ScalarKind::Real, None))
        }
        ToeplitzMode::Full => {
            let mut k_bases = vec![2usize];
            k_bases.extend(dim.bases());
            let k_dim = Dimension::from_bases(&k_bases)?;
            let mut groups: Vec<Vec<DigitRef>> = vec![vec![DigitRef { dim: 2, pos: 0 }]];
            for q in 0..n {
                groups.push(vec![
                    DigitRef { dim: 0, pos: q },
                    DigitRef { dim: 1, pos: q },
                    DigitRef { dim: 2, pos: q + 1 },
                ]);
            }
            let shape = TrainShape::new(
                vec![dim.clone(), dim.clone(), k_dim],
                Some(GroupMode::Explicit(groups)),
            )?;
            // Leading core routes k's top digit to the Q (k0 = 0) or R
            // (k0 = 1) block row.
            let mut head = ArrayD::zeros(IxDyn(&[1, 2, 2]));
            head[IxDyn(&[0, 0, 0])] = Complex64::new(1.0, 0.0);
            head[IxDyn(&[0, 1, 1])] = Complex64::new(1.0, 0.0);
            let mut cores = vec![head];
            for q in 0..n {
                let base = dim.digit(q).base;
                cores.push(toeplitz_core(base, false, q == n - 1, false));
            }
            Ok(TensorTrain::from_parts(shape, cores, ScalarKind::Real, None))
        }
    }
}

/// Core of the Toeplitz train at one digit: the shift block grid with
/// the local shift value replaced by the open digit index `k`.
fn toeplitz_core(base: usize, head: bool, tail: bool, circular_head: bool) -> ArrayD<Complex64> {
    let (l, r) = match (head, tail) {
        (true, true) => (1, 1),
        (true, false) => (1, 2),
        (false, true) => (2, 1),
        (false, false) => (2, 2),
    };
    let mut core = ArrayD::zeros(IxDyn(&[l, base, base, base, r]));
    for k in 0..base {
        let grid = [
            [q_block(base, k as i64), q_block(base, k as i64 + 1)],
            [r_block(base, k as i64), r_block(base, k as i64 + 1)],
        ];
        for (bl, row) in grid.iter().enumerate() {
            for (br, block) in row.iter().enumerate() {
                if tail && br > 0 {
                    continue;
                }
                for i in 0..base {
                    for j in 0..base {
                        let v = block[IxDyn(&[i, j])];
                        if v == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        if head {
                            // Row selection: plain Q row for the shift
                            // definition, Q + R for the circular stack.
                            if bl == 0 || circular_head {
                                core[IxDyn(&[0, i, j, k, br])] += v;
                            }
                        } else {
                            core[IxDyn(&[bl, i, j, k, br])] += v;
                        }
                    }
                }
            }
        }
    }
    core
}

// ---------------------------------------------------------------------
// Discrete Fourier transform
// ---------------------------------------------------------------------

/// Shape of vectors that conform with [`dft_train`]'s column layout:
/// the reversed-base dimension with one digit per core, reversed across
/// the cores.
pub fn dft_vector_shape(dim: &Dimension) -> TrainShape {
    let j_dim = dim.reversed();
    let n = j_dim.ndigits();
    let groups = (0..n)
        .map(|q| vec![DigitRef { dim: 0, pos: n - 1 - q }])
        .collect();
    TrainShape::explicit_unordered(vec![j_dim], groups).expect("reversed layout")
}

/// Tensorized DFT matrix `M(i, j) = w^(i*j)` with `w = exp(-2*pi*I/N)`
/// (scaled by `1/sqrt(N)` when `normalized`). Core `q` carries digits
/// `(i_q, j_{n-1-q})`; the column dimension uses the reversed bases. The
/// train is assembled as an element-wise zip-up product of `n` factor
/// trains of rank `b_q`, truncated under `rule`.
pub fn dft_train(dim: &Dimension, normalized: bool, rule: &TruncationRule) -> Result<TensorTrain> {
    let n = dim.ndigits();
    let n_total = dim.size();
    let j_dim = dim.reversed();
    let groups: Vec<Vec<DigitRef>> = (0..n)
        .map(|q| {
            vec![
                DigitRef { dim: 0, pos: q },
                DigitRef { dim: 1, pos: n - 1 - q },
            ]
        })
        .collect();
    let shape = TrainShape::explicit_unordered(vec![dim.clone(), j_dim.clone()], groups)?;

    let omega = |exponent: u128| -> Complex64 {
        let m = (exponent % n_total as u128) as f64;
        let angle = -2.0 * std::f64::consts::PI * m / n_total as f64;
        Complex64::new(angle.cos(), angle.sin())
    };

    if n == 1 {
        let mut core = ArrayD::zeros(IxDyn(&[1, n_total, n_total, 1]));
        for i in 0..n_total {
            for j in 0..n_total {
                core[IxDyn(&[0, i, j, 0])] = omega((i * j) as u128);
            }
        }
        let mut t = TensorTrain::from_parts(shape, vec![core], ScalarKind::Complex, None);
        if normalized {
            t.scale(Complex64::new(1.0 / (n_total as f64).sqrt(), 0.0));
        }
        return Ok(t);
    }

    // Factor train for digit q of i: rank b_q, diagonal in the bond.
    let factor = |q: usize| -> TensorTrain {
        let s_dim = dim.digit(q).base;
        let ci = dim.digit(q).factor as u128;
        let cores = (0..n)
            .map(|m| {
                let bi = dim.digit(m).base;
                let jp = n - 1 - m;
                let bj = j_dim.digit(jp).base;
                let cj = j_dim.digit(jp).factor as u128;
                let (l, r) = match (m == 0, m == n - 1) {
                    (true, true) => unreachable!("n > 1"),
                    (true, false) => (1, s_dim),
                    (false, true) => (s_dim, 1),
                    (false, false) => (s_dim, s_dim),
                };
                let mut core = ArrayD::zeros(IxDyn(&[l, bi, bj, r]));
                for s in 0..s_dim {
                    for t in 0..bi {
                        if m == q && t != s {
                            continue;
                        }
                        for u in 0..bj {
                            let phase = omega(s as u128 * ci * cj * u as u128);
                            let (a, b) = if m == 0 { (0, s) } else if m == n - 1 { (s, 0) } else { (s, s) };
                            core[IxDyn(&[a, t, u, b])] = phase;
                        }
                    }
                }
                core
            })
            .collect();
        TensorTrain::from_parts(shape.clone(), cores, ScalarKind::Complex, None)
    };

    let policy = ApproxPolicy::Decomposition {
        rule: *rule,
        window: 2,
    };
    let mut acc = factor(0);
    for q in 1..n {
        let f = factor(q);
        acc = einsum(&policy, "ij,ij->ij", &[&acc, &f])?;
    }
    if normalized {
        acc.scale(Complex64::new(1.0 / (n_total as f64).sqrt(), 0.0));
    }
    Ok(acc)
}

/// Dense DFT matrix for oracle comparisons at small sizes.
pub fn dense_dft(n: usize, normalized: bool) -> Array2<Complex64> {
    let scale = if normalized {
        1.0 / (n as f64).sqrt()
    } else {
        1.0
    };
    Array2::from_shape_fn((n, n), |(i, j)| {
        let m = ((i as u128 * j as u128) % n as u128) as f64;
        let angle = -2.0 * std::f64::consts::PI * m / n as f64;
        Complex64::new(angle.cos(), angle.sin()) * scale
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantics::Domain;

    fn grid(size: usize, lower: f64, upper: f64) -> UniformGrid {
        UniformGrid::new(
            vec![Dimension::new(size).unwrap()],
            vec![Domain::new(lower, upper).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn exp_train_is_rank_one_and_exact() {
        let g = grid(512, 0.0, 1.0);
        let t = exp_train(&g, Complex64::new(1.0, 0.0), 0.0).unwrap();
        assert!(t.interior_ranks().iter().all(|&r| r == 1));
        for i in [0usize, 1, 100, 511] {
            let x = g.coord_one(0, i).unwrap();
            let v = t.value_at(&[i]).unwrap();
            let expect = x.exp();
            assert!(
                (v.re - expect).abs() <= 1e-13 * expect.abs(),
                "i={i}: {v} vs {expect}"
            );
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn exp_train_zero_rate_is_constant_one() {
        let g = grid(64, -1.0, 1.0);
        let t = exp_train(&g, Complex64::new(0.0, 0.0), 0.3).unwrap();
        let idxs: Vec<usize> = (0..64).collect();
        for v in t.evaluate(&[&idxs]).unwrap() {
            assert!((v.re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cos_train_matches_scalar_cosine() {
        let g = grid(729, -std::f64::consts::PI, std::f64::consts::PI);
        let t = cos_train(&g, 1.0, 0.0).unwrap();
        assert_eq!(t.kind(), ScalarKind::Real);
        assert!(t.interior_ranks().iter().all(|&r| r == 2));
        for i in [0usize, 1, 128, 364, 728] {
            let x = g.coord_one(0, i).unwrap();
            let v = t.value_at(&[i]).unwrap();
            assert!((v.re - x.cos()).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn sin_equals_shifted_cos() {
        let g = grid(128, 0.0, 2.0 * std::f64::consts::PI);
        let v = 1.7;
        let x0 = 0.2;
        let s = sin_train(&g, v, x0).unwrap();
        for i in [0usize, 3, 77, 127] {
            let x = g.coord_one(0, i).unwrap();
            let val = s.value_at(&[i]).unwrap();
            assert!((val.re - (v * (x - x0)).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn polyval_matches_scalar_polynomial() {
        let g = grid(600, -1.0, 1.0);
        // 1.0*(x-x0)^2 + 0.1
        let t = polyval_train(&g, &[1.0, 0.0, 0.1], 0.5).unwrap();
        assert!(t.interior_ranks().iter().all(|&r| r == 3));
        for i in [0usize, 10, 299, 599] {
            let x = g.coord_one(0, i).unwrap();
            let expect = (x - 0.5) * (x - 0.5) + 0.1;
            let v = t.value_at(&[i]).unwrap();
            assert!((v.re - expect).abs() < 1e-12, "i={i}: {} vs {expect}", v.re);
        }
    }

    #[test]
    fn constant_polynomial_is_rank_one() {
        let g = grid(20, 0.0, 1.0);
        let t = polyval_train(&g, &[2.5], 0.0).unwrap();
        assert!(t.interior_ranks().iter().all(|&r| r == 1));
        assert!((t.value_at(&[7]).unwrap().re - 2.5).abs() < 1e-14);
    }

    #[test]
    fn shift_zero_is_identity() {
        let dim = Dimension::new(12).unwrap();
        let t = shift_train(&dim, 0, false).unwrap();
        let dense = t.to_tensor().unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(dense[IxDyn(&[i, j])].re, expect);
            }
        }
    }

    #[test]
    fn shift_matches_definition_for_all_distances() {
        let dim = Dimension::from_bases(&[2, 2, 3]).unwrap();
        let n = dim.size();
        for d in 0..=n {
            for circular in [false, true] {
                let t = shift_train(&dim, d, circular).unwrap();
                assert!(t.interior_ranks().iter().all(|&r| r <= 2));
                let dense = t.to_tensor().unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let hit = if circular {
                            (i + n - j) % n == d % n
                        } else {
                            i >= j && i - j == d
                        };
                        let expect = if hit { 1.0 } else { 0.0 };
                        assert_eq!(
                            dense[IxDyn(&[i, j])].re,
                            expect,
                            "d={d} circ={circular} ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rank_product_reproduces_shift_assembly() {
        let dim = Dimension::from_bases(&[2, 2]).unwrap();
        for d in 0..4usize {
            let digits = shift_digits(&dim, d);
            let head = rank_product(&RankBlock::scalar_row(&[1.0, 0.0]), &shift_block(2, digits[0]))
                .unwrap();
            let tail = RankBlock::new(
                2,
                1,
                vec![2, 2],
                vec![q_block(2, digits[1]), r_block(2, digits[1])],
            )
            .unwrap();
            let full = rank_product(&head, &tail).unwrap();
            assert_eq!((full.rows(), full.cols()), (1, 1));
            // Digit axes come out as (i1, j1, i2, j2).
            let block = full.block(0, 0);
            for i in 0..4usize {
                for j in 0..4usize {
                    let expect = if i >= j && i - j == d { 1.0 } else { 0.0 };
                    let v = block[IxDyn(&[i / 2, j / 2, i % 2, j % 2])];
                    assert_eq!(v.re, expect, "d={d} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn scalar_row_selection_picks_block_row() {
        let grid2 = shift_block(2, 1);
        let picked = rank_product(&RankBlock::scalar_row(&[1.0, 0.0]), &grid2).unwrap();
        assert_eq!((picked.rows(), picked.cols()), (1, 2));
        assert_eq!(picked.block(0, 0), &q_block(2, 1));
        assert_eq!(picked.block(0, 1), &q_block(2, 2));
    }

    #[test]
    fn circular_toeplitz_slices_are_circular_shifts() {
        let dim = Dimension::from_bases(&[2, 3]).unwrap();
        let n = dim.size();
        let t = toeplitz_train(&dim, ToeplitzMode::Circular).unwrap();
        let dense = t.to_tensor().unwrap();
        for k in 0..n {
            let shift = shift_train(&dim, k, true).unwrap();
            let ds = shift.to_tensor().unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(
                        dense[IxDyn(&[i, j, k])].re,
                        ds[IxDyn(&[i, j])].re,
                        "k={k} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn full_toeplitz_matches_definition() {
        let dim = Dimension::new(6).unwrap();
        let n = dim.size();
        let t = toeplitz_train(&dim, ToeplitzMode::Full).unwrap();
        let dense = t.to_tensor().unwrap();
        assert_eq!(dense.shape(), &[6, 6, 12]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..2 * n {
                    let expect = if (i + 2 * n - j) % (2 * n) == k { 1.0 } else { 0.0 };
                    assert_eq!(dense[IxDyn(&[i, j, k])].re, expect, "({i},{j},{k})");
                }
            }
        }
    }

    #[test]
    fn dft_small_sizes_match_dense() {
        for bases in [vec![2usize, 2], vec![2, 3], vec![3, 2, 2]] {
            let dim = Dimension::from_bases(&bases).unwrap();
            let n = dim.size();
            let t = dft_train(&dim, false, &TruncationRule::exact()).unwrap();
            let dense = t.to_tensor().unwrap();
            let reference = dense_dft(n, false);
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((dense[IxDyn(&[i, j])] - reference[[i, j]]).norm());
                }
            }
            assert!(worst < 1e-12, "bases {bases:?}: max err {worst}");
        }
    }

    #[test]
    fn normalized_dft_is_unitary_scale() {
        let dim = Dimension::from_bases(&[2, 2]).unwrap();
        let t = dft_train(&dim, true, &TruncationRule::exact()).unwrap();
        let norm = t.frobenius_norm();
        // Unitary matrix has Frobenius norm sqrt(N).
        assert!((norm - 2.0).abs() < 1e-12);
    }
}
