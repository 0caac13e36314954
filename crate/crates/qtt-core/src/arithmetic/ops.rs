//! Recipes exposing the exact result of a linear train operation core by
//! core, without materializing the whole exact train. Zip-up splits and
//! variational environments consume cores through this interface one
//! position at a time.

use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;

use crate::train::{ScalarKind, TensorTrain};
use crate::trainshape::TrainShape;

use super::plan::PairPlan;

pub(crate) trait LocalOp {
    fn len(&self) -> usize;
    /// Exact result core at position `q`, axes `(left, digits..., right)`.
    fn core(&self, q: usize) -> ArrayD<Complex64>;
    fn result_shape(&self) -> &TrainShape;
    fn kind(&self) -> ScalarKind;
}

/// Pairwise einsum recipe over (usually normalized copies of) the
/// operands.
pub(crate) struct PairOp {
    pub plan: PairPlan,
    pub a: TensorTrain,
    pub b: TensorTrain,
}

impl LocalOp for PairOp {
    fn len(&self) -> usize {
        self.plan.ncores()
    }

    fn core(&self, q: usize) -> ArrayD<Complex64> {
        self.plan.macro_core(q, &self.a, &self.b)
    }

    fn result_shape(&self) -> &TrainShape {
        &self.plan.result_shape
    }

    fn kind(&self) -> ScalarKind {
        self.plan.kind
    }
}

/// Element-wise sum of several addition-compatible trains; cores have
/// the block structure whose bond ranks are the sums of the operand
/// ranks.
pub(crate) struct AddOp {
    pub operands: Vec<TensorTrain>,
    kind: ScalarKind,
}

impl AddOp {
    pub fn new(operands: Vec<TensorTrain>) -> Self {
        let kind = operands
            .iter()
            .fold(ScalarKind::Real, |k, t| ScalarKind::promote(k, t.kind()));
        Self { operands, kind }
    }
}

impl LocalOp for AddOp {
    fn len(&self) -> usize {
        self.operands[0].ncores()
    }

    fn core(&self, q: usize) -> ArrayD<Complex64> {
        let n = self.len();
        if n == 1 {
            // Single-core trains add entry-wise.
            let mut acc = self.operands[0].core(0).clone();
            for t in &self.operands[1..] {
                acc += t.core(0);
            }
            return acc;
        }
        let lefts: Vec<usize> = self.operands.iter().map(|t| t.core(q).shape()[0]).collect();
        let rights: Vec<usize> = self
            .operands
            .iter()
            .map(|t| *t.core(q).shape().last().unwrap())
            .collect();
        let digit_dims: Vec<usize> =
            self.operands[0].core(q).shape()[1..self.operands[0].core(q).ndim() - 1].to_vec();
        let (l_total, r_total) = if q == 0 {
            (1, rights.iter().sum())
        } else if q == n - 1 {
            (lefts.iter().sum(), 1)
        } else {
            (lefts.iter().sum(), rights.iter().sum())
        };
        let mut dims = vec![l_total];
        dims.extend(&digit_dims);
        dims.push(r_total);
        let mut out = ArrayD::zeros(IxDyn(&dims));
        let mut l_off = 0;
        let mut r_off = 0;
        for (k, t) in self.operands.iter().enumerate() {
            let core = t.core(q);
            let (dl, dr) = (if q == 0 { 0 } else { l_off }, if q == n - 1 { 0 } else { r_off });
            for (idx, &v) in core.indexed_iter() {
                let mut target: Vec<usize> = idx.slice().to_vec();
                target[0] += dl;
                let last = target.len() - 1;
                target[last] += dr;
                out[IxDyn(&target)] = v;
            }
            l_off += lefts[k];
            r_off += rights[k];
        }
        out
    }

    fn result_shape(&self) -> &TrainShape {
        self.operands[0].shape()
    }

    fn kind(&self) -> ScalarKind {
        self.kind
    }
}

/// Identity recipe over a single train; zip-up over it is plain rank
/// truncation.
pub(crate) struct IdentityOp {
    pub t: TensorTrain,
}

impl LocalOp for IdentityOp {
    fn len(&self) -> usize {
        self.t.ncores()
    }

    fn core(&self, q: usize) -> ArrayD<Complex64> {
        self.t.core(q).clone()
    }

    fn result_shape(&self) -> &TrainShape {
        self.t.shape()
    }

    fn kind(&self) -> ScalarKind {
        self.t.kind()
    }
}

/// Materialize every core of a recipe: the exact result train.
pub(crate) fn exact_train(op: &dyn LocalOp) -> TensorTrain {
    let cores: Vec<ArrayD<Complex64>> = (0..op.len()).map(|q| op.core(q)).collect();
    let mut t = TensorTrain::from_parts(op.result_shape().clone(), cores, op.kind(), None);
    t.scrub_imaginary();
    t
}
