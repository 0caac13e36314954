//! Sweeping linear solvers: DMRG-style local GMRES solves and the AMEn
//! variant with residual-projection basis enrichment.

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64;

use crate::arithmetic::plan::merge_bond;
use crate::arithmetic::variational::insert_window;
use crate::arithmetic::{add, ApproxPolicy};
use crate::decomp::{qr_reduced, truncated_svd, TruncationRule};
use crate::error::{Error, Result};
use crate::train::{fold, reshaped, unfold, TensorTrain};

use super::krylov::gmres;
use super::linmap::{
    env_step_left, env_step_right, local_apply, merge_ops, pair_env_step_left,
    pair_env_step_right, pair_project_window, unit_env, Env, LinearMap,
};
use super::SweepPlan;

/// Linear-solver flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinSolveMethod {
    /// Local GMRES solves on super-cores; intended for well-conditioned
    /// or Hermitian positive-definite maps.
    Dmrg,
    /// Single-core updates with residual enrichment of the bond basis.
    Amen,
}

/// Result of a linear solve: iterate, per-sweep relative residuals, and
/// status flags. `stagnated` is set when a full sweep improved the
/// residual by less than 1%.
#[derive(Debug, Clone)]
pub struct LinSolveResult {
    pub x: TensorTrain,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub stagnated: bool,
    pub warnings: Vec<String>,
}

/// AMEn enrichment rank appended to the bond basis per update.
const ENRICH_RANK: usize = 3;

pub fn linsolve(
    map: &LinearMap,
    b: &TensorTrain,
    guess: &TensorTrain,
    plan: &SweepPlan,
    method: LinSolveMethod,
) -> Result<LinSolveResult> {
    if !guess.shape().addition_compatible(map.x_shape()) {
        return Err(Error::Shape(
            "guess shape must equal the map's input shape".into(),
        ));
    }
    if !b.shape().addition_compatible(map.x_shape()) {
        return Err(Error::Shape(
            "right-hand side shape must equal the map's input shape".into(),
        ));
    }
    let b_norm = b.frobenius_norm();
    if b_norm == 0.0 {
        return Err(Error::InvalidGuess("right-hand side is identically zero".into()));
    }
    let mut x = guess.clone();
    if x.frobenius_norm() == 0.0 {
        return Err(Error::InvalidGuess("guess train is identically zero".into()));
    }
    x.normalize(0)?;

    let mut result = LinSolveResult {
        x: x.clone(),
        residual_history: vec![],
        converged: false,
        stagnated: false,
        warnings: vec![],
    };

    let mut prev_residual = f64::INFINITY;
    for _ in 0..plan.nsweeps {
        match method {
            LinSolveMethod::Dmrg => dmrg_sweep(map, b, &mut x, plan, &mut result.warnings)?,
            LinSolveMethod::Amen => amen_sweep(map, b, &mut x, plan, &mut result.warnings)?,
        }
        let residual = relative_residual(map, b, &x, b_norm)?;
        result.residual_history.push(residual);
        if residual <= plan.tol {
            result.converged = true;
            break;
        }
        if residual > 0.99 * prev_residual {
            result.stagnated = true;
            break;
        }
        prev_residual = residual;
    }
    result.x = x;
    Ok(result)
}

fn relative_residual(
    map: &LinearMap,
    b: &TensorTrain,
    x: &TensorTrain,
    b_norm: f64,
) -> Result<f64> {
    let mut ax = map.apply(x, &ApproxPolicy::Exact)?;
    ax.scale(Complex64::new(-1.0, 0.0));
    let diff = add(&ApproxPolicy::Exact, &[b, &ax])?;
    Ok(diff.frobenius_norm() / b_norm)
}

/// One full DMRG sweep (left-to-right then right-to-left).
fn dmrg_sweep(
    map: &LinearMap,
    b: &TensorTrain,
    x: &mut TensorTrain,
    plan: &SweepPlan,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let n = map.nsites();
    let nc = plan.ncores.clamp(1, n);

    let mut r_envs: Vec<Env> = vec![unit_env(); n + 1];
    let mut rb_envs: Vec<Array2<Complex64>> =
        vec![Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)); n + 1];
    for q in (nc..n).rev() {
        r_envs[q] = env_step_right(&r_envs[q + 1], x.core(q), map.site_op(q), x.core(q));
        rb_envs[q] = pair_env_step_right(&rb_envs[q + 1], x.core(q), b.core(q));
    }

    let ident = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    let mut l_envs: Vec<Env> = vec![unit_env()];
    let mut lb_envs: Vec<Array2<Complex64>> = vec![ident.clone()];
    for q in 0..=n - nc {
        local_solve_update(
            map, b, x, &l_envs[q], &r_envs[q + nc], &lb_envs[q], &rb_envs[q + nc], q, nc, plan,
            true, warnings,
        )?;
        if q + nc < n {
            l_envs.push(env_step_left(&l_envs[q], x.core(q), map.site_op(q), x.core(q)));
            lb_envs.push(pair_env_step_left(&lb_envs[q], x.core(q), b.core(q)));
        }
    }
    for q in (0..=n - nc).rev() {
        local_solve_update(
            map, b, x, &l_envs[q], &r_envs[q + nc], &lb_envs[q], &rb_envs[q + nc], q, nc, plan,
            false, warnings,
        )?;
        if q > 0 {
            r_envs[q + nc - 1] = env_step_right(
                &r_envs[q + nc],
                x.core(q + nc - 1),
                map.site_op(q + nc - 1),
                x.core(q + nc - 1),
            );
            rb_envs[q + nc - 1] =
                pair_env_step_right(&rb_envs[q + nc], x.core(q + nc - 1), b.core(q + nc - 1));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn local_solve_update(
    map: &LinearMap,
    b: &TensorTrain,
    x: &mut TensorTrain,
    l_env: &Env,
    r_env: &Env,
    lb_env: &Array2<Complex64>,
    rb_env: &Array2<Complex64>,
    q: usize,
    nc: usize,
    plan: &SweepPlan,
    rightward: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let ops: Vec<_> = (q..q + nc).map(|k| map.site_op(k)).collect();
    let super_op = merge_ops(&ops);

    let kets: Vec<_> = (q..q + nc).map(|k| b.core(k)).collect();
    let rhs_arr = pair_project_window(lb_env, rb_env, &kets);
    let rhs: Vec<Complex64> = rhs_arr.iter().copied().collect();

    let mut window = x.core(q).clone();
    for k in q + 1..q + nc {
        window = merge_bond(window, x.core(k).clone());
    }
    let window_dims: Vec<usize> = window.shape().to_vec();
    let dim: usize = window_dims.iter().product();
    let start: Vec<Complex64> = window.iter().copied().collect();

    let mut matvec = |v: &[Complex64]| -> Vec<Complex64> {
        let arr = reshaped(
            ArrayD::from_shape_vec(IxDyn(&[dim]), v.to_vec()).expect("flat"),
            &window_dims,
        );
        local_apply(l_env, r_env, &super_op, &arr)
            .iter()
            .copied()
            .collect()
    };
    let (solution, rel, converged) =
        gmres(&mut matvec, &rhs, plan.local_iters, plan.tol, 30, Some(&start))?;
    if !converged {
        warnings.push(format!(
            "local solve at core {q} stopped at relative residual {rel:.2e}"
        ));
    }
    let g = reshaped(
        ArrayD::from_shape_vec(IxDyn(&[dim]), solution).expect("flat"),
        &window_dims,
    );
    insert_window(x, g, q, nc, &plan.rule, rightward)?;
    if nc == 1 {
        if rightward && q + 1 < map.nsites() {
            x.shift_center_right(q);
        } else if !rightward && q > 0 {
            x.shift_center_left(q);
        }
    }
    Ok(())
}

/// One full AMEn sweep: single-core solves with residual enrichment on
/// the way right, single-core solves with rank truncation on the way
/// back.
fn amen_sweep(
    map: &LinearMap,
    b: &TensorTrain,
    x: &mut TensorTrain,
    plan: &SweepPlan,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let n = map.nsites();

    let mut r_envs: Vec<Env> = vec![unit_env(); n + 1];
    let mut rb_envs: Vec<Array2<Complex64>> =
        vec![Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)); n + 1];
    for q in (1..n).rev() {
        r_envs[q] = env_step_right(&r_envs[q + 1], x.core(q), map.site_op(q), x.core(q));
        rb_envs[q] = pair_env_step_right(&rb_envs[q + 1], x.core(q), b.core(q));
    }

    let ident = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    let mut l_env = unit_env();
    let mut lb_env = ident.clone();
    for q in 0..n {
        // Local solve at the single site.
        let super_op = map.site_op(q).clone();
        let rhs_arr = pair_project_window(&lb_env, &rb_envs[q + 1], &[b.core(q)]);
        let rhs: Vec<Complex64> = rhs_arr.iter().copied().collect();
        let window_dims: Vec<usize> = x.core(q).shape().to_vec();
        let dim: usize = window_dims.iter().product();
        let start: Vec<Complex64> = x.core(q).iter().copied().collect();
        let l_env_local = l_env.clone();
        let r_env_local = r_envs[q + 1].clone();
        let mut matvec = |v: &[Complex64]| -> Vec<Complex64> {
            let arr = reshaped(
                ArrayD::from_shape_vec(IxDyn(&[dim]), v.to_vec()).expect("flat"),
                &window_dims,
            );
            local_apply(&l_env_local, &r_env_local, &super_op, &arr)
                .iter()
                .copied()
                .collect()
        };
        let (solution, rel, converged) =
            gmres(&mut matvec, &rhs, plan.local_iters, plan.tol, 30, Some(&start))?;
        if !converged {
            warnings.push(format!(
                "local solve at core {q} stopped at relative residual {rel:.2e}"
            ));
        }
        let u = reshaped(
            ArrayD::from_shape_vec(IxDyn(&[dim]), solution).expect("flat"),
            &window_dims,
        );
        *x.core_mut(q) = u.clone();
        x.refresh_ranks();
        if q + 1 == n {
            break;
        }

        // Residual directions with the right bonds left open.
        let z_b = merge_bond(lb_env.clone().into_dyn(), b.core(q).clone());
        let (wr, kr) = (
            map.site_op(q).shape()[3],
            *x.core(q).shape().last().unwrap(),
        );
        let mut open = Env::zeros((wr * kr, wr, kr));
        for w in 0..wr {
            for k in 0..kr {
                open[(w * kr + k, w, k)] = Complex64::new(1.0, 0.0);
            }
        }
        let z_a = local_apply(&l_env, &open, &super_op, &u);
        let rows: usize = z_b.shape()[..z_b.ndim() - 1].iter().product();
        let zb_mat = unfold(z_b.view(), z_b.ndim() - 1);
        let za_mat = unfold(z_a.view(), z_a.ndim() - 1);
        debug_assert_eq!(zb_mat.nrows(), rows);
        let mut z = Array2::zeros((rows, zb_mat.ncols() + za_mat.ncols()));
        for r in 0..rows {
            for c in 0..zb_mat.ncols() {
                z[[r, c]] = zb_mat[[r, c]];
            }
            for c in 0..za_mat.ncols() {
                z[[r, zb_mat.ncols() + c]] = -za_mat[[r, c]];
            }
        }
        let zsvd = truncated_svd(
            z.view(),
            &TruncationRule {
                max_rank: Some(ENRICH_RANK),
                cutoff: 1e-12,
            },
        )?;

        // Left-orthonormalize the solved core and append the enrichment
        // directions (orthogonalized against it) to the bond basis.
        let u_mat = unfold(u.view(), u.ndim() - 1);
        let (qmat, rmat) = qr_reduced(u_mat.view());
        let mut enrich = zsvd.u;
        for _ in 0..2 {
            let overlap = qmat.t().mapv(|z| z.conj()).dot(&enrich);
            enrich = &enrich - &qmat.dot(&overlap);
        }
        let (eq, _) = qr_reduced(enrich.view());
        // Drop numerically null enrichment columns.
        let keep: Vec<usize> = (0..eq.ncols())
            .filter(|&c| {
                let norm: f64 = (0..eq.nrows()).map(|r| eq[[r, c]].norm_sqr()).sum();
                norm > 0.5
            })
            .collect();
        let r_old = qmat.ncols();
        let r_new = r_old + keep.len();
        let mut combined = Array2::zeros((qmat.nrows(), r_new));
        for r in 0..qmat.nrows() {
            for c in 0..r_old {
                combined[[r, c]] = qmat[[r, c]];
            }
            for (kk, &c) in keep.iter().enumerate() {
                combined[[r, r_old + kk]] = eq[[r, c]];
            }
        }
        let mut left_dims: Vec<usize> = window_dims[..window_dims.len() - 1].to_vec();
        left_dims.push(r_new);
        let new_core = fold(
            combined,
            &window_dims[..window_dims.len() - 1],
            &[r_new],
        );
        let _ = left_dims;
        *x.core_mut(q) = new_core;

        // Pad the next core with zero rows and fold the R factor in.
        let next = x.core(q + 1).clone();
        let next_rest: Vec<usize> = next.shape()[1..].to_vec();
        let next_mat = unfold(next.view(), 1);
        let folded = rmat.dot(&next_mat);
        let mut padded = Array2::zeros((r_new, next_mat.ncols()));
        for r in 0..folded.nrows() {
            for c in 0..folded.ncols() {
                padded[[r, c]] = folded[[r, c]];
            }
        }
        *x.core_mut(q + 1) = fold(padded, &[r_new], &next_rest);
        x.refresh_ranks();

        l_env = env_step_left(&l_env, x.core(q), map.site_op(q), x.core(q));
        lb_env = pair_env_step_left(&lb_env, x.core(q), b.core(q));
    }

    // Backward compression pass with plain single-site solves.
    let mut r_env = unit_env();
    let mut rb_env = ident.clone();
    let mut l_envs: Vec<Env> = vec![unit_env()];
    let mut lb_envs: Vec<Array2<Complex64>> = vec![ident];
    for q in 0..n - 1 {
        l_envs.push(env_step_left(&l_envs[q], x.core(q), map.site_op(q), x.core(q)));
        lb_envs.push(pair_env_step_left(&lb_envs[q], x.core(q), b.core(q)));
    }
    for q in (0..n).rev() {
        let super_op = map.site_op(q).clone();
        let rhs_arr = pair_project_window(&lb_envs[q], &rb_env, &[b.core(q)]);
        let rhs: Vec<Complex64> = rhs_arr.iter().copied().collect();
        let window_dims: Vec<usize> = x.core(q).shape().to_vec();
        let dim: usize = window_dims.iter().product();
        let start: Vec<Complex64> = x.core(q).iter().copied().collect();
        let l_env_local = l_envs[q].clone();
        let r_env_local = r_env.clone();
        let mut matvec = |v: &[Complex64]| -> Vec<Complex64> {
            let arr = reshaped(
                ArrayD::from_shape_vec(IxDyn(&[dim]), v.to_vec()).expect("flat"),
                &window_dims,
            );
            local_apply(&l_env_local, &r_env_local, &super_op, &arr)
                .iter()
                .copied()
                .collect()
        };
        let (solution, _, _) =
            gmres(&mut matvec, &rhs, plan.local_iters, plan.tol, 30, Some(&start))?;
        let u = reshaped(
            ArrayD::from_shape_vec(IxDyn(&[dim]), solution).expect("flat"),
            &window_dims,
        );
        if q == 0 {
            *x.core_mut(0) = u;
            x.refresh_ranks();
            break;
        }
        // Truncate the left bond while right-orthonormalizing.
        let right_dims: Vec<usize> = u.shape()[1..].to_vec();
        let m = unfold(u.view(), 1);
        let svd = truncated_svd(m.view(), &plan.rule)?;
        let (us, vh) = if svd.rank() == 0 {
            (
                Array2::zeros((m.nrows(), 1)),
                Array2::zeros((1, m.ncols())),
            )
        } else {
            let mut us = svd.u;
            for (k, &s) in svd.s.iter().enumerate() {
                for r in 0..us.nrows() {
                    us[[r, k]] *= Complex64::new(s, 0.0);
                }
            }
            (us, svd.vh)
        };
        let rank = vh.nrows();
        *x.core_mut(q) = fold(vh, &[rank], &right_dims);
        let prev = x.core(q - 1).clone();
        let prev_left: Vec<usize> = prev.shape()[..prev.ndim() - 1].to_vec();
        let merged = unfold(prev.view(), prev.ndim() - 1).dot(&us);
        *x.core_mut(q - 1) = fold(merged, &prev_left, &[rank]);
        x.refresh_ranks();

        r_env = env_step_right(&r_env, x.core(q), map.site_op(q), x.core(q));
        rb_env = pair_env_step_right(&rb_env, x.core(q), b.core(q));
    }
    Ok(())
}
