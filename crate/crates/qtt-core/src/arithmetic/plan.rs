//! Conformance analysis and local kernels for Einstein summations.
//!
//! A pairwise einsum is mapped onto the trains core by core: letters
//! shared by both operands must have their digits on a contiguous window
//! of cores that aligns one-to-one between the operands, cores outside
//! the window belong to one operand only, and at most one operand may
//! contribute cores on each side of the window so that the result is
//! again a linear train.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantics::Dimension;
use crate::train::{reshaped, ScalarKind, TensorTrain};
use crate::trainshape::{DigitRef, TrainShape};

/// Role of one digit axis of the first operand core in a pair step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ARole {
    /// Exclusive letter, kept in the output.
    Kept,
    /// Exclusive letter, summed out locally.
    Summed,
    /// Shared letter kept in the output; multiplies element-wise with
    /// the given B digit axis.
    Hadamard(usize),
    /// Shared letter not in the output; contracted with the given B
    /// digit axis.
    Contracted(usize),
}

#[derive(Debug, Clone)]
pub(crate) enum Step {
    TakeA {
        core: usize,
        sum_axes: Vec<usize>,
    },
    TakeB {
        core: usize,
        sum_axes: Vec<usize>,
    },
    Pair {
        a_core: usize,
        b_core: usize,
        /// Role per digit axis of the A core (digit axes numbered from 0).
        a_roles: Vec<ARole>,
        /// Exclusive kept digit axes of the B core, in B order.
        b_kept: Vec<usize>,
        /// Exclusive summed digit axes of the B core.
        b_sum: Vec<usize>,
    },
}

/// Pairwise contraction plan: ordered steps, their grouping into result
/// cores, and the shape of the result train.
#[derive(Debug, Clone)]
pub(crate) struct PairPlan {
    pub steps: Vec<Step>,
    /// Kept digit refs per step, on the output dimensions, in the order
    /// the kernels produce them.
    pub kept_refs: Vec<Vec<DigitRef>>,
    /// Step index ranges per result core (each range holds exactly one
    /// digit-carrying step; digit-less neighbours are absorbed into it).
    pub macro_ranges: Vec<(usize, usize)>,
    pub result_shape: TrainShape,
    pub kind: ScalarKind,
    /// True when the output is empty and the result is a scalar wrapped
    /// in a single size-one dimension.
    pub scalar_result: bool,
}

fn letter_core_error(letter: char, core: usize, detail: &str) -> Error {
    Error::Conformance {
        letter,
        core,
        detail: detail.into(),
    }
}

/// Build the plan for a two-operand einsum.
pub(crate) fn plan_pair(
    letters_a: &[char],
    letters_b: &[char],
    out: &[char],
    a: (&TrainShape, ScalarKind),
    b: (&TrainShape, ScalarKind),
) -> Result<PairPlan> {
    let (sa, kind_a) = a;
    let (sb, kind_b) = b;
    if letters_a.len() != sa.dims().len() || letters_b.len() != sb.dims().len() {
        return Err(Error::Spec(format!(
            "subscripts name {}+{} dimensions, operands have {}+{}",
            letters_a.len(),
            letters_b.len(),
            sa.dims().len(),
            sb.dims().len()
        )));
    }
    let shared: Vec<char> = letters_a
        .iter()
        .copied()
        .filter(|c| letters_b.contains(c))
        .collect();
    for &c in &shared {
        let da = &sa.dims()[pos_of(letters_a, c)];
        let db = &sb.dims()[pos_of(letters_b, c)];
        if da != db {
            return Err(letter_core_error(
                c,
                0,
                "shared letter names differently factorized dimensions",
            ));
        }
    }

    // Per-core shared digit content as (letter, digit position) lists.
    let shared_content = |shape: &TrainShape, letters: &[char]| -> Vec<Vec<(char, usize)>> {
        shape
            .groups()
            .iter()
            .map(|g| {
                g.iter()
                    .filter(|r| shared.contains(&letters[r.dim]))
                    .map(|r| (letters[r.dim], r.pos))
                    .collect()
            })
            .collect()
    };
    let content_a = shared_content(sa, letters_a);
    let content_b = shared_content(sb, letters_b);
    let window_a = content_window(&content_a);
    let window_b = content_window(&content_b);

    let steps = match (window_a, window_b) {
        (None, None) => {
            // No shared letters: outer product, A cores then B cores.
            let mut steps: Vec<Step> = (0..sa.ncores())
                .map(|q| take_step(true, q, sa, letters_a, out))
                .collect();
            steps.extend((0..sb.ncores()).map(|q| take_step(false, q, sb, letters_b, out)));
            steps
        }
        (Some((a0, a1)), Some((b0, b1))) => {
            let letter = shared[0];
            if a1 - a0 != b1 - b0 {
                return Err(letter_core_error(
                    letter,
                    a0,
                    "shared digit windows differ in length",
                ));
            }
            for k in 0..a1 - a0 {
                if content_a[a0 + k] != content_b[b0 + k] {
                    let bad = content_a[a0 + k]
                        .first()
                        .or(content_b[b0 + k].first())
                        .map(|&(c, _)| c)
                        .unwrap_or(letter);
                    return Err(letter_core_error(
                        bad,
                        a0 + k,
                        "shared digits do not align core by core",
                    ));
                }
            }
            if a0 > 0 && b0 > 0 {
                return Err(letter_core_error(
                    letter,
                    a0,
                    "both operands extend left of the shared window; the result would not be a linear train",
                ));
            }
            if a1 < sa.ncores() && b1 < sb.ncores() {
                return Err(letter_core_error(
                    letter,
                    a1,
                    "both operands extend right of the shared window; the result would not be a linear train",
                ));
            }
            let mut steps = Vec::new();
            for q in 0..a0 {
                steps.push(take_step(true, q, sa, letters_a, out));
            }
            for q in 0..b0 {
                steps.push(take_step(false, q, sb, letters_b, out));
            }
            for k in 0..a1 - a0 {
                steps.push(pair_step(a0 + k, b0 + k, sa, sb, letters_a, letters_b, out));
            }
            for q in a1..sa.ncores() {
                steps.push(take_step(true, q, sa, letters_a, out));
            }
            for q in b1..sb.ncores() {
                steps.push(take_step(false, q, sb, letters_b, out));
            }
            steps
        }
        // Shared letters exist in both operands by construction, so the
        // windows are either both present or both absent.
        _ => unreachable!("shared window exists in one operand only"),
    };

    build_plan(steps, out, sa, sb, letters_a, letters_b, kind_a, kind_b)
}

/// Build the plan for a single-operand einsum (local sums and dimension
/// relabeling).
pub(crate) fn plan_single(
    letters: &[char],
    out: &[char],
    a: (&TrainShape, ScalarKind),
) -> Result<PairPlan> {
    let (sa, kind_a) = a;
    if letters.len() != sa.dims().len() {
        return Err(Error::Spec(format!(
            "subscripts name {} dimensions, operand has {}",
            letters.len(),
            sa.dims().len()
        )));
    }
    let steps: Vec<Step> = (0..sa.ncores())
        .map(|q| take_step(true, q, sa, letters, out))
        .collect();
    build_plan(steps, out, sa, sa, letters, letters, kind_a, kind_a)
}

fn pos_of(letters: &[char], c: char) -> usize {
    letters.iter().position(|&x| x == c).expect("letter present")
}

/// Window of cores with nonempty shared content, or None when no core
/// carries shared digits.
fn content_window(content: &[Vec<(char, usize)>]) -> Option<(usize, usize)> {
    let first = content.iter().position(|c| !c.is_empty())?;
    let last = content.iter().rposition(|c| !c.is_empty()).unwrap();
    Some((first, last + 1))
}

fn take_step(
    is_a: bool,
    core: usize,
    shape: &TrainShape,
    letters: &[char],
    out: &[char],
) -> Step {
    let sum_axes: Vec<usize> = shape
        .group(core)
        .iter()
        .enumerate()
        .filter(|(_, r)| !out.contains(&letters[r.dim]))
        .map(|(k, _)| k)
        .collect();
    if is_a {
        Step::TakeA { core, sum_axes }
    } else {
        Step::TakeB { core, sum_axes }
    }
}

fn pair_step(
    a_core: usize,
    b_core: usize,
    sa: &TrainShape,
    sb: &TrainShape,
    letters_a: &[char],
    letters_b: &[char],
    out: &[char],
) -> Step {
    let ga = sa.group(a_core);
    let gb = sb.group(b_core);
    let b_axis_of = |c: char, pos: usize| -> usize {
        gb.iter()
            .position(|r| letters_b[r.dim] == c && r.pos == pos)
            .expect("aligned shared digit")
    };
    let a_roles: Vec<ARole> = ga
        .iter()
        .map(|r| {
            let c = letters_a[r.dim];
            if letters_b.contains(&c) {
                let b_axis = b_axis_of(c, r.pos);
                if out.contains(&c) {
                    ARole::Hadamard(b_axis)
                } else {
                    ARole::Contracted(b_axis)
                }
            } else if out.contains(&c) {
                ARole::Kept
            } else {
                ARole::Summed
            }
        })
        .collect();
    let mut b_kept = Vec::new();
    let mut b_sum = Vec::new();
    for (k, r) in gb.iter().enumerate() {
        let c = letters_b[r.dim];
        if letters_a.contains(&c) {
            continue; // handled from the A side
        }
        if out.contains(&c) {
            b_kept.push(k);
        } else {
            b_sum.push(k);
        }
    }
    Step::Pair {
        a_core,
        b_core,
        a_roles,
        b_kept,
        b_sum,
    }
}

/// Digit refs a step keeps, already remapped onto the output dimensions.
fn step_kept_refs(
    step: &Step,
    sa: &TrainShape,
    sb: &TrainShape,
    letters_a: &[char],
    letters_b: &[char],
    out: &[char],
) -> Vec<DigitRef> {
    let out_pos = |c: char| out.iter().position(|&x| x == c).expect("kept letter");
    match step {
        Step::TakeA { core, .. } => sa
            .group(*core)
            .iter()
            .filter(|r| out.contains(&letters_a[r.dim]))
            .map(|r| DigitRef {
                dim: out_pos(letters_a[r.dim]),
                pos: r.pos,
            })
            .collect(),
        Step::TakeB { core, .. } => sb
            .group(*core)
            .iter()
            .filter(|r| out.contains(&letters_b[r.dim]))
            .map(|r| DigitRef {
                dim: out_pos(letters_b[r.dim]),
                pos: r.pos,
            })
            .collect(),
        Step::Pair {
            a_core,
            b_core,
            a_roles,
            b_kept,
            ..
        } => {
            let mut refs = Vec::new();
            for (k, r) in sa.group(*a_core).iter().enumerate() {
                match a_roles[k] {
                    ARole::Kept | ARole::Hadamard(_) => refs.push(DigitRef {
                        dim: out_pos(letters_a[r.dim]),
                        pos: r.pos,
                    }),
                    _ => {}
                }
            }
            for &k in b_kept {
                let r = sb.group(*b_core)[k];
                refs.push(DigitRef {
                    dim: out_pos(letters_b[r.dim]),
                    pos: r.pos,
                });
            }
            refs
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_plan(
    steps: Vec<Step>,
    out: &[char],
    sa: &TrainShape,
    sb: &TrainShape,
    letters_a: &[char],
    letters_b: &[char],
    kind_a: ScalarKind,
    kind_b: ScalarKind,
) -> Result<PairPlan> {
    let kept_refs: Vec<Vec<DigitRef>> = steps
        .iter()
        .map(|s| step_kept_refs(s, sa, sb, letters_a, letters_b, out))
        .collect();
    let anchors: Vec<usize> = (0..steps.len())
        .filter(|&k| !kept_refs[k].is_empty())
        .collect();

    let (macro_ranges, groups, dims, scalar_result) = if anchors.is_empty() {
        // Fully contracted: scalar result on one size-one dimension.
        let dims = vec![Dimension::from_bases(&[1]).expect("base-1 dimension")];
        let groups = vec![vec![DigitRef { dim: 0, pos: 0 }]];
        (vec![(0, steps.len())], groups, dims, true)
    } else {
        // Digit-less steps merge into the nearest anchor on their left
        // (or the first anchor for a digit-less prefix).
        let mut ranges = Vec::with_capacity(anchors.len());
        for (k, &anchor) in anchors.iter().enumerate() {
            let start = if k == 0 { 0 } else { anchor };
            let end = if k + 1 < anchors.len() {
                anchors[k + 1]
            } else {
                steps.len()
            };
            ranges.push((start, end));
        }
        let groups: Vec<Vec<DigitRef>> = anchors.iter().map(|&k| kept_refs[k].clone()).collect();
        let dims: Vec<Dimension> = out
            .iter()
            .map(|&c| {
                if let Some(p) = letters_a.iter().position(|&x| x == c) {
                    sa.dims()[p].clone()
                } else {
                    sb.dims()[pos_of(letters_b, c)].clone()
                }
            })
            .collect();
        (ranges, groups, dims, false)
    };
    let result_shape = TrainShape::explicit_unordered(dims, groups)?;
    Ok(PairPlan {
        steps,
        kept_refs,
        macro_ranges,
        result_shape,
        kind: ScalarKind::promote(kind_a, kind_b),
        scalar_result,
    })
}

// ---------------------------------------------------------------------
// Materialization kernels
// ---------------------------------------------------------------------

/// Row-major element strides for a shape.
fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Offsets of every value combination of the chosen axes, enumerated
/// row-major over `axes` order.
fn axis_offsets(shape: &[usize], strides: &[usize], axes: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &ax in axes {
        let mut next = Vec::with_capacity(offsets.len() * shape[ax]);
        for &base in &offsets {
            for v in 0..shape[ax] {
                next.push(base + v * strides[ax]);
            }
        }
        offsets = next;
    }
    offsets
}

/// Sum a core over the given digit axes (axis numbers exclude the bond
/// axes; digit axis `k` is array axis `k + 1`).
fn sum_digit_axes(core: &ArrayD<Complex64>, sum_axes: &[usize]) -> ArrayD<Complex64> {
    let mut out = core.clone();
    let mut axes: Vec<usize> = sum_axes.iter().map(|&k| k + 1).collect();
    axes.sort_unstable_by(|x, y| y.cmp(x));
    for ax in axes {
        out = out.sum_axis(ndarray::Axis(ax));
    }
    out
}

/// Exact local pair contraction producing a result core with axes
/// `(la*lb, kept digits..., ra*rb)`; kept digits are A's kept and
/// Hadamard axes in A order followed by B's exclusive kept axes.
fn pair_core(
    a: &ArrayD<Complex64>,
    b: &ArrayD<Complex64>,
    a_roles: &[ARole],
    b_kept: &[usize],
    b_sum: &[usize],
) -> ArrayD<Complex64> {
    // Pre-sum the locally summed axes and renumber the remaining ones.
    let a_sum: Vec<usize> = a_roles
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r, ARole::Summed))
        .map(|(k, _)| k)
        .collect();
    let b_ndigits_orig = b.ndim() - 2;
    let a = sum_digit_axes(a, &a_sum);
    let b = sum_digit_axes(b, b_sum);
    let a_axis_map = renumber(a_roles.len(), &a_sum);
    let b_axis_map = renumber(b_ndigits_orig, b_sum);

    let sa = a.shape().to_vec();
    let sb = b.shape().to_vec();
    let stra = strides_of(&sa);
    let strb = strides_of(&sb);
    let (la, ra) = (sa[0], *sa.last().unwrap());
    let (lb, rb) = (sb[0], *sb.last().unwrap());

    // Kept axes in result order with their contributions.
    let mut kept_dims: Vec<usize> = Vec::new();
    let mut kept_a_axes: Vec<Option<usize>> = Vec::new();
    let mut kept_b_axes: Vec<Option<usize>> = Vec::new();
    let mut contracted: Vec<(usize, usize)> = Vec::new();
    for (k, role) in a_roles.iter().enumerate() {
        match role {
            ARole::Kept => {
                let ax = a_axis_map[k];
                kept_dims.push(sa[ax + 1]);
                kept_a_axes.push(Some(ax + 1));
                kept_b_axes.push(None);
            }
            ARole::Hadamard(bk) => {
                let ax = a_axis_map[k];
                let bx = b_axis_map[*bk];
                kept_dims.push(sa[ax + 1]);
                kept_a_axes.push(Some(ax + 1));
                kept_b_axes.push(Some(bx + 1));
            }
            ARole::Contracted(bk) => {
                contracted.push((a_axis_map[k] + 1, b_axis_map[*bk] + 1));
            }
            ARole::Summed => {}
        }
    }
    for &bk in b_kept {
        let bx = b_axis_map[bk];
        kept_dims.push(sb[bx + 1]);
        kept_a_axes.push(None);
        kept_b_axes.push(Some(bx + 1));
    }

    // Offset tables.
    let kept_count: usize = kept_dims.iter().product();
    let mut kept_offsets_a = vec![0usize; kept_count.max(1)];
    let mut kept_offsets_b = vec![0usize; kept_count.max(1)];
    {
        let mut idx = vec![0usize; kept_dims.len()];
        for k in 0..kept_count.max(1) {
            let mut oa = 0;
            let mut ob = 0;
            for (d, &v) in idx.iter().enumerate() {
                if let Some(ax) = kept_a_axes[d] {
                    oa += v * stra[ax];
                }
                if let Some(bx) = kept_b_axes[d] {
                    ob += v * strb[bx];
                }
            }
            kept_offsets_a[k] = oa;
            kept_offsets_b[k] = ob;
            for d in (0..kept_dims.len()).rev() {
                idx[d] += 1;
                if idx[d] < kept_dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
    let con_a: Vec<usize> = contracted.iter().map(|&(x, _)| x).collect();
    let con_b: Vec<usize> = contracted.iter().map(|&(_, y)| y).collect();
    let con_offsets_a = axis_offsets(&sa, &stra, &con_a);
    let con_offsets_b = axis_offsets(&sb, &strb, &con_b);

    let a_flat = a.as_standard_layout();
    let b_flat = b.as_standard_layout();
    let a_data = a_flat.as_slice().expect("standard layout");
    let b_data = b_flat.as_slice().expect("standard layout");

    let mut out = vec![Complex64::new(0.0, 0.0); la * lb * kept_count.max(1) * ra * rb];
    let out_bond = ra * rb;
    for lai in 0..la {
        for lbi in 0..lb {
            let lrow = lai * lb + lbi;
            for (k, (&koa, &kob)) in kept_offsets_a.iter().zip(&kept_offsets_b).enumerate() {
                let base_a = lai * stra[0] + koa;
                let base_b = lbi * strb[0] + kob;
                let out_base = (lrow * kept_count.max(1) + k) * out_bond;
                for rai in 0..ra {
                    let oa_r = base_a + rai * stra[sa.len() - 1];
                    for rbi in 0..rb {
                        let ob_r = base_b + rbi * strb[sb.len() - 1];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (coa, cob) in con_offsets_a.iter().zip(&con_offsets_b) {
                            acc += a_data[oa_r + coa] * b_data[ob_r + cob];
                        }
                        out[out_base + rai * rb + rbi] = acc;
                    }
                }
            }
        }
    }
    let mut dims = vec![la * lb];
    dims.extend(&kept_dims);
    dims.push(ra * rb);
    ArrayD::from_shape_vec(IxDyn(&dims), out).expect("kernel output shape")
}

/// Map original axis numbers to post-sum axis numbers.
fn renumber(n_axes: usize, removed: &[usize]) -> Vec<usize> {
    let mut map = vec![usize::MAX; n_axes];
    let mut next = 0;
    for k in 0..n_axes {
        if !removed.contains(&k) {
            map[k] = next;
            next += 1;
        }
    }
    map
}

impl PairPlan {
    /// Materialize the exact core for one step.
    pub(crate) fn step_core(
        &self,
        step: &Step,
        a: &TensorTrain,
        b: &TensorTrain,
    ) -> ArrayD<Complex64> {
        match step {
            Step::TakeA { core, sum_axes } => sum_digit_axes(a.core(*core), sum_axes),
            Step::TakeB { core, sum_axes } => sum_digit_axes(b.core(*core), sum_axes),
            Step::Pair {
                a_core,
                b_core,
                a_roles,
                b_kept,
                b_sum,
            } => pair_core(a.core(*a_core), b.core(*b_core), a_roles, b_kept, b_sum),
        }
    }

    /// Materialize the exact result core `q` (digit-less neighbours
    /// contracted in along the bond).
    pub(crate) fn macro_core(
        &self,
        q: usize,
        a: &TensorTrain,
        b: &TensorTrain,
    ) -> ArrayD<Complex64> {
        let (start, end) = self.macro_ranges[q];
        let mut acc = self.step_core(&self.steps[start], a, b);
        for step in &self.steps[start + 1..end] {
            let core = self.step_core(step, a, b);
            acc = merge_bond(acc, core);
        }
        if self.scalar_result && acc.ndim() == 2 {
            let dims = [acc.shape()[0], 1, acc.shape()[1]];
            acc = reshaped(acc, &dims);
        }
        acc
    }

    pub(crate) fn ncores(&self) -> usize {
        self.macro_ranges.len()
    }

    /// Evaluate the exact contraction at fixed output indices (one flat
    /// index per output dimension) without building the result train.
    pub(crate) fn evaluate(
        &self,
        a: &TensorTrain,
        b: &TensorTrain,
        idxs: &[&[usize]],
    ) -> Result<ndarray::Array1<Complex64>> {
        let dims = self.result_shape.dims();
        if idxs.len() != dims.len() {
            return Err(Error::Shape(format!(
                "expected {} index arrays, got {}",
                dims.len(),
                idxs.len()
            )));
        }
        let batch = idxs.first().map_or(0, |v| v.len());
        let digit_tables: Vec<ndarray::Array2<usize>> = dims
            .iter()
            .zip(idxs)
            .map(|(dim, axis)| dim.to_digits(axis))
            .collect::<Result<_>>()?;
        let mut out = ndarray::Array1::zeros(batch);
        for sample in 0..batch {
            let mut v = ndarray::Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
            for (step, refs) in self.steps.iter().zip(&self.kept_refs) {
                let values: Vec<usize> = refs
                    .iter()
                    .map(|r| digit_tables[r.dim][[sample, r.pos]])
                    .collect();
                let m = self.step_matrix(step, a, b, &values);
                v = v.dot(&m);
            }
            out[sample] = v[[0, 0]];
        }
        Ok(out)
    }

    /// Local bond matrix of one step at fixed kept digit values.
    fn step_matrix(
        &self,
        step: &Step,
        a: &TensorTrain,
        b: &TensorTrain,
        kept_values: &[usize],
    ) -> ndarray::Array2<Complex64> {
        let core = self.step_core(step, a, b);
        // core: (L, kept..., R); fix the kept axes at the given values.
        let l = core.shape()[0];
        let r = *core.shape().last().unwrap();
        let strides = strides_of(core.shape());
        let mut offset = 0usize;
        for (d, &v) in kept_values.iter().enumerate() {
            offset += v * strides[d + 1];
        }
        let last = *strides.last().unwrap();
        let std = core.as_standard_layout();
        let data = std.as_slice().expect("standard layout");
        ndarray::Array2::from_shape_fn((l, r), |(i, j)| {
            data[offset + i * strides[0] + j * last]
        })
    }
}

/// Contract the last axis of `x` with the first axis of `y`.
pub(crate) fn merge_bond(x: ArrayD<Complex64>, y: ArrayD<Complex64>) -> ArrayD<Complex64> {
    let m = crate::train::unfold(x.view(), x.ndim() - 1);
    let n = crate::train::unfold(y.view(), 1);
    let prod = m.dot(&n);
    let mut dims: Vec<usize> = x.shape()[..x.ndim() - 1].to_vec();
    dims.extend_from_slice(&y.shape()[1..]);
    reshaped(prod.into_dyn(), &dims)
}
