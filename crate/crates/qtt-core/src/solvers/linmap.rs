//! Einsum-defined linear operators over trains, aligned core by core
//! with the shape they act on, plus the environment machinery shared by
//! the sweeping solvers.

use ndarray::{Array3, ArrayD, IxDyn};
use num_complex::Complex64;

use crate::arithmetic::plan::{plan_pair, ARole, Step};
use crate::arithmetic::{einsum, ApproxPolicy, EinsumSpec};
use crate::error::{Error, Result};
use crate::train::{reshaped, unfold, ScalarKind, TensorTrain};
use crate::trainshape::TrainShape;

/// A linear map defined by an einsum spec whose last input slot is the
/// train the map acts on. The remaining operands are composed into a
/// single operator train whose cores align one-to-one with the input
/// shape's cores (each carrying that core's output and input digits).
#[derive(Debug, Clone)]
pub struct LinearMap {
    spec: String,
    operands: Vec<TensorTrain>,
    x_shape: TrainShape,
    /// Composed operator cores, permuted and flattened to
    /// `(wl, out extent, in extent, wr)` per site.
    site_ops: Vec<Array3Plus>,
    kind: ScalarKind,
}

/// One aligned operator core `(wl, e_out, e_in, wr)` stored with flat
/// digit extents.
pub(crate) type Array3Plus = ArrayD<Complex64>;

impl LinearMap {
    /// Build from a spec like `"ij,jl,l->i"`, the operand trains (all
    /// inputs except the last), and the shape of the input slot.
    pub fn new(spec: &str, operands: Vec<TensorTrain>, x_shape: TrainShape) -> Result<Self> {
        let parsed = EinsumSpec::parse(spec)?;
        if parsed.n_inputs() != operands.len() + 1 {
            return Err(Error::Spec(format!(
                "spec has {} inputs, expected {} operands plus the input slot",
                parsed.n_inputs(),
                operands.len() + 1
            )));
        }
        if operands.is_empty() {
            return Err(Error::Spec("linear map needs at least one operand".into()));
        }
        let x_letters = parsed.inputs.last().unwrap().clone();

        // Compose all operator inputs into a single train. Letters kept:
        // anything still needed by the input slot or the output.
        let mut composed = operands[0].clone();
        let mut letters = parsed.inputs[0].clone();
        for k in 1..operands.len() {
            let mut needed: Vec<char> = Vec::new();
            for &c in letters.iter().chain(&parsed.inputs[k]) {
                let later = parsed.inputs[k + 1..].iter().any(|inp| inp.contains(&c))
                    || parsed.output.contains(&c);
                if later && !needed.contains(&c) {
                    needed.push(c);
                }
            }
            let subspec: String = format!(
                "{},{}->{}",
                letters.iter().collect::<String>(),
                parsed.inputs[k].iter().collect::<String>(),
                needed.iter().collect::<String>()
            );
            composed = einsum(&ApproxPolicy::Exact, &subspec, &[&composed, &operands[k]])?;
            letters = needed;
        }

        // Plan the action of the composed operator on the input shape.
        let kind = ScalarKind::promote(composed.kind(), ScalarKind::Real);
        let plan = plan_pair(
            &letters,
            &x_letters,
            &parsed.output,
            (composed.shape(), composed.kind()),
            (&x_shape, ScalarKind::Real),
        )?;
        if !plan.result_shape.addition_compatible(&x_shape) {
            return Err(Error::Shape(
                "linear map output shape must equal the input shape".into(),
            ));
        }
        if plan.steps.len() != x_shape.ncores() {
            return Err(Error::Shape(
                "linear map requires operator digits on every input core".into(),
            ));
        }

        let mut site_ops = Vec::with_capacity(plan.steps.len());
        for (site, step) in plan.steps.iter().enumerate() {
            let Step::Pair {
                a_core,
                b_core,
                a_roles,
                b_kept,
                b_sum,
            } = step
            else {
                return Err(Error::Shape(
                    "linear map requires operator digits on every input core".into(),
                ));
            };
            if *b_core != site {
                return Err(Error::Shape(
                    "linear map input cores must align with the operator".into(),
                ));
            }
            if !b_kept.is_empty() || !b_sum.is_empty() {
                return Err(Error::Shape(
                    "pass-through input digits are not supported by the sweeping solvers".into(),
                ));
            }
            // Classify operator digit axes: kept -> output, contracted ->
            // input (paired with the x core's digit axes).
            let w = composed.core(*a_core);
            let ndig = a_roles.len();
            let mut out_axes = Vec::new();
            let mut in_axes = vec![usize::MAX; x_shape.group(site).len()];
            for (ax, role) in a_roles.iter().enumerate() {
                match role {
                    ARole::Kept => out_axes.push(ax + 1),
                    ARole::Contracted(b_axis) => in_axes[*b_axis] = ax + 1,
                    ARole::Hadamard(_) | ARole::Summed => {
                        return Err(Error::Shape(
                            "linear map operator axes must be plain matrix digits".into(),
                        ))
                    }
                }
            }
            if in_axes.iter().any(|&a| a == usize::MAX) {
                return Err(Error::Shape(
                    "every input digit needs a matching operator digit".into(),
                ));
            }
            // Permute to (wl, out..., in..., wr) and flatten the digits.
            let mut perm = vec![0usize];
            perm.extend(&out_axes);
            perm.extend(&in_axes);
            perm.push(ndig + 1);
            let permuted = w.clone().permuted_axes(IxDyn(&perm));
            let e_out: usize = out_axes.iter().map(|&a| w.shape()[a]).product();
            let e_in: usize = in_axes.iter().map(|&a| w.shape()[a]).product();
            let dims = [
                w.shape()[0],
                e_out,
                e_in,
                *w.shape().last().unwrap(),
            ];
            site_ops.push(reshaped(permuted.to_owned(), &dims));
        }

        Ok(Self {
            spec: spec.to_string(),
            operands,
            x_shape,
            site_ops,
            kind,
        })
    }

    pub fn x_shape(&self) -> &TrainShape {
        &self.x_shape
    }

    pub fn nsites(&self) -> usize {
        self.site_ops.len()
    }

    pub(crate) fn site_op(&self, q: usize) -> &Array3Plus {
        &self.site_ops[q]
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    /// Apply the map through the einsum machinery under the given
    /// policy; identical to calling `einsum` with the original spec and
    /// the input appended to the operands.
    pub fn apply(&self, x: &TensorTrain, policy: &ApproxPolicy) -> Result<TensorTrain> {
        let mut all: Vec<&TensorTrain> = self.operands.iter().collect();
        all.push(x);
        einsum(policy, &self.spec, &all)
    }
}

// ---------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------

/// Three-layer environment `(bra bond, operator bond, ket bond)`.
pub(crate) type Env = Array3<Complex64>;

pub(crate) fn unit_env() -> Env {
    Array3::from_elem((1, 1, 1), Complex64::new(1.0, 0.0))
}

fn to2(a: ArrayD<Complex64>, rows: usize, cols: usize) -> ndarray::Array2<Complex64> {
    reshaped(a, &[rows, cols])
        .into_dimensionality::<ndarray::Ix2>()
        .expect("2d")
}

/// Extend a left environment by one site: conj(bra) on top, operator in
/// the middle, ket at the bottom.
pub(crate) fn env_step_left(
    env: &Env,
    bra: &ArrayD<Complex64>,
    op4: &Array3Plus,
    ket: &ArrayD<Complex64>,
) -> Env {
    let (b, w, k) = env.dim();
    let (kl, kr) = (ket.shape()[0], *ket.shape().last().unwrap());
    debug_assert_eq!(k, kl);
    let e_out = op4.shape()[1];
    let e_in = op4.shape()[2];
    let (wl, wr) = (op4.shape()[0], op4.shape()[3]);
    debug_assert_eq!(w, wl);
    let (bl, br) = (bra.shape()[0], *bra.shape().last().unwrap());
    debug_assert_eq!(b, bl);

    // t1[(b,w), (Ei,kr)] = env . ket
    let env2 = to2(env.clone().into_dyn(), b * w, k);
    let ket2 = unfold(ket.view(), 1);
    let t1 = env2.dot(&ket2); // (b*w, Ei*kr)
    // t2[(b,kr),(w,Ei)] -> multiply op4[(w,Ei),(Eo,wr)]
    let t1 = reshaped(t1.into_dyn(), &[b, w, e_in, kr]);
    let t1 = t1.permuted_axes(IxDyn(&[0, 3, 1, 2])); // (b, kr, w, Ei)
    let t1 = to2(t1.to_owned(), b * kr, w * e_in);
    let op_p = op4.clone().permuted_axes(IxDyn(&[0, 2, 1, 3])); // (wl, Ei, Eo, wr)
    let op2 = to2(op_p.to_owned(), wl * e_in, e_out * wr);
    let t2 = t1.dot(&op2); // (b*kr, Eo*wr)
    // env'[br, wr, kr] = sum_{b,Eo} conj(bra[b,Eo,br]) t2[b,kr,Eo,wr]
    let t2 = reshaped(t2.into_dyn(), &[b, kr, e_out, wr]);
    let t2 = t2.permuted_axes(IxDyn(&[0, 2, 3, 1])); // (b, Eo, wr, kr)
    let t2 = to2(t2.to_owned(), b * e_out, wr * kr);
    let bra2 = unfold(bra.view(), bra.ndim() - 1); // (b*Eo, br)
    let out = bra2.t().mapv(|z| z.conj()).dot(&t2); // (br, wr*kr)
    reshaped(out.into_dyn(), &[br, wr, kr])
        .into_dimensionality::<ndarray::Ix3>()
        .expect("3d")
}

/// Extend a right environment by one site.
pub(crate) fn env_step_right(
    env: &Env,
    bra: &ArrayD<Complex64>,
    op4: &Array3Plus,
    ket: &ArrayD<Complex64>,
) -> Env {
    let (b, w, k) = env.dim();
    let (kl, kr) = (ket.shape()[0], *ket.shape().last().unwrap());
    debug_assert_eq!(k, kr);
    let e_out = op4.shape()[1];
    let e_in = op4.shape()[2];
    let (wl, wr) = (op4.shape()[0], op4.shape()[3]);
    debug_assert_eq!(w, wr);
    let (bl, br) = (bra.shape()[0], *bra.shape().last().unwrap());
    debug_assert_eq!(b, br);

    // t1[(kl,Ei),(b,w)] = ket . env
    let ket2 = unfold(ket.view(), ket.ndim() - 1); // (kl*Ei, kr)
    let env2 = to2(
        env.clone()
            .into_dyn()
            .permuted_axes(IxDyn(&[2, 0, 1]))
            .to_owned(),
        k,
        b * w,
    );
    let t1 = ket2.dot(&env2); // (kl*Ei, b*w)
    // t2[(wl,Eo),(kl,b)] = op . t1
    let t1 = reshaped(t1.into_dyn(), &[kl, e_in, b, w]);
    let t1 = t1.permuted_axes(IxDyn(&[1, 3, 0, 2])); // (Ei, w, kl, b)
    let t1 = to2(t1.to_owned(), e_in * w, kl * b);
    let op2 = to2(op4.clone().into_dyn(), wl * e_out, e_in * wr);
    let t2 = op2.dot(&t1); // (wl*Eo, kl*b)
    // env'[bl, wl, kl] = sum_{Eo,b} conj(bra[bl,Eo,b]) t2[wl,Eo,kl,b]
    let t2 = reshaped(t2.into_dyn(), &[wl, e_out, kl, b]);
    let t2 = t2.permuted_axes(IxDyn(&[0, 2, 1, 3])); // (wl, kl, Eo, b)
    let t2 = to2(t2.to_owned(), wl * kl, e_out * b);
    let bra2 = to2(
        unfold(bra.view(), 1).into_dyn(), // (bl, Eo*b)
        bl,
        e_out * b,
    );
    let out = bra2.mapv(|z| z.conj()).dot(&t2.t()); // (bl, wl*kl)
    reshaped(out.into_dyn(), &[bl, wl, kl])
        .into_dimensionality::<ndarray::Ix3>()
        .expect("3d")
}

/// Merge the aligned operator cores of a window into one
/// `(wl, E_out, E_in, wr)` super-operator.
pub(crate) fn merge_ops(ops: &[&Array3Plus]) -> Array3Plus {
    let mut acc = ops[0].clone();
    for op in &ops[1..] {
        let (al, ao, ai, am) = (
            acc.shape()[0],
            acc.shape()[1],
            acc.shape()[2],
            acc.shape()[3],
        );
        let (bm, bo, bi, br) = (op.shape()[0], op.shape()[1], op.shape()[2], op.shape()[3]);
        debug_assert_eq!(am, bm);
        let a2 = to2(acc.into_dyn(), al * ao * ai, am);
        let b2 = to2((*op).clone().into_dyn(), bm, bo * bi * br);
        let prod = a2.dot(&b2);
        let t = reshaped(prod.into_dyn(), &[al, ao, ai, bo, bi, br]);
        let t = t.permuted_axes(IxDyn(&[0, 1, 3, 2, 4, 5])); // (al, ao, bo, ai, bi, br)
        acc = reshaped(t.to_owned(), &[al, ao * bo, ai * bi, br]);
    }
    acc
}

/// Apply the effective local operator `L * W * R` to a window tensor
/// `v (kl, E_in, kr)`, producing `(bl, E_out, br)`.
pub(crate) fn local_apply(
    l_env: &Env,
    r_env: &Env,
    super_op: &Array3Plus,
    v: &ArrayD<Complex64>,
) -> ArrayD<Complex64> {
    let (lb, lw, lk) = l_env.dim();
    let (rb, rw, rk) = r_env.dim();
    let e_out = super_op.shape()[1];
    let e_in = super_op.shape()[2];
    let kl = v.shape()[0];
    let kr = *v.shape().last().unwrap();
    debug_assert_eq!(lk, kl);
    debug_assert_eq!(rk, kr);

    // t1[(lb,lw),(Ei,kr)] = l_env . v
    let l2 = to2(l_env.clone().into_dyn(), lb * lw, lk);
    let v2 = unfold(v.view(), 1);
    let t1 = l2.dot(&v2); // (lb*lw, Ei*kr)
    // t2[(lb,kr),(Eo,wr)] via super_op
    let t1 = reshaped(t1.into_dyn(), &[lb, lw, e_in, kr]);
    let t1 = t1.permuted_axes(IxDyn(&[0, 3, 1, 2]));
    let t1 = to2(t1.to_owned(), lb * kr, lw * e_in);
    let op_p = super_op.clone().permuted_axes(IxDyn(&[0, 2, 1, 3]));
    let op2 = to2(op_p.to_owned(), lw * e_in, e_out * rw);
    let t2 = t1.dot(&op2); // (lb*kr, Eo*rw)
    // y[lb, Eo, rb] = sum_{rw,kr} t2[lb,kr,Eo,rw] r_env[rb,rw,kr]
    let t2 = reshaped(t2.into_dyn(), &[lb, kr, e_out, rw]);
    let t2 = t2.permuted_axes(IxDyn(&[0, 2, 3, 1])); // (lb, Eo, rw, kr)
    let t2 = to2(t2.to_owned(), lb * e_out, rw * kr);
    let r2 = to2(
        r_env
            .clone()
            .into_dyn()
            .permuted_axes(IxDyn(&[1, 2, 0]))
            .to_owned(),
        rw * rk,
        rb,
    );
    let y = t2.dot(&r2); // (lb*Eo, rb)
    reshaped(y.into_dyn(), &[lb, e_out, rb])
}

/// Two-layer environments between the iterate (bra) and a plain train
/// (ket), used for right-hand sides.
pub(crate) fn pair_env_step_left(
    env: &ndarray::Array2<Complex64>,
    bra: &ArrayD<Complex64>,
    ket: &ArrayD<Complex64>,
) -> ndarray::Array2<Complex64> {
    let t = env.dot(&unfold(ket.view(), 1));
    let kr = *ket.shape().last().unwrap();
    let rows = t.nrows() * t.ncols() / kr;
    let t = to2(t.into_dyn(), rows, kr);
    let bra2 = unfold(bra.view(), bra.ndim() - 1);
    bra2.t().mapv(|z| z.conj()).dot(&t)
}

pub(crate) fn pair_env_step_right(
    env: &ndarray::Array2<Complex64>,
    bra: &ArrayD<Complex64>,
    ket: &ArrayD<Complex64>,
) -> ndarray::Array2<Complex64> {
    let ket2 = unfold(ket.view(), ket.ndim() - 1); // (kl*E, kr)
    let t = ket2.dot(&env.t()); // (kl*E, bl?) -> env is (bra, ket) indexed (b, k)
    let kl = ket.shape()[0];
    let cols = t.nrows() / kl * t.ncols();
    let t = to2(t.into_dyn(), kl, cols);
    let bra2 = unfold(bra.view(), 1); // (bl, E*br)
    bra2.mapv(|z| z.conj()).dot(&t.t()) // (bl, kl)
}

/// Project a train window against two-layer environments:
/// `g = L . ket_window . R^T`, axes `(bra_l, digits..., bra_r)`.
pub(crate) fn pair_project_window(
    l_env: &ndarray::Array2<Complex64>,
    r_env: &ndarray::Array2<Complex64>,
    kets: &[&ArrayD<Complex64>],
) -> ArrayD<Complex64> {
    let mut g = l_env.clone().into_dyn();
    for ket in kets {
        g = crate::arithmetic::plan::merge_bond(g, (*ket).clone());
    }
    let mat = unfold(g.view(), g.ndim() - 1);
    let prod = mat.dot(&r_env.t());
    let mut dims: Vec<usize> = g.shape()[..g.ndim() - 1].to_vec();
    dims.push(r_env.nrows());
    reshaped(prod.into_dyn(), &dims)
}
