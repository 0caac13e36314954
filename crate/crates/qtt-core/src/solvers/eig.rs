//! DMRG eigensolver: the global eigenvalue problem collapses into local
//! ones through the canonical gauge; each stop solves the smallest
//! eigenpair of the effective local operator with Lanczos and re-splits
//! the super-core.

use num_complex::Complex64;

use crate::arithmetic::plan::merge_bond;
use crate::arithmetic::variational::insert_window;
use crate::error::{Error, Result};
use crate::train::{reshaped, TensorTrain};

use super::krylov::lanczos;
use super::linmap::{env_step_left, env_step_right, local_apply, merge_ops, unit_env, Env, LinearMap};
use super::SweepPlan;

/// Result of an eigenvalue sweep: Rayleigh quotient, normalized
/// eigenvector, per-update history and any local-solver warnings.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub eigenvalue: f64,
    pub eigenvector: TensorTrain,
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn eigsolve(map: &LinearMap, guess: &TensorTrain, plan: &SweepPlan) -> Result<EigResult> {
    if !guess.shape().addition_compatible(map.x_shape()) {
        return Err(Error::Shape(
            "guess shape must equal the map's input shape".into(),
        ));
    }
    let guess_norm = guess.frobenius_norm();
    if guess_norm == 0.0 {
        return Err(Error::InvalidGuess("guess train is identically zero".into()));
    }
    let n = map.nsites();
    let nc = plan.ncores.clamp(1, n);
    let mut x = guess.clone();
    x.normalize(0)?;
    x.scale(Complex64::new(1.0 / guess_norm, 0.0));

    let mut history = Vec::new();
    let mut warnings = Vec::new();

    let mut r_envs: Vec<Env> = vec![unit_env(); n + 1];
    for q in (nc..n).rev() {
        r_envs[q] = env_step_right(&r_envs[q + 1], x.core(q), map.site_op(q), x.core(q));
    }

    for _ in 0..plan.nsweeps {
        let mut l_envs: Vec<Env> = vec![unit_env()];
        for q in 0..=n - nc {
            let lambda = local_eig_update(
                map, &mut x, &l_envs[q], &r_envs[q + nc], q, nc, plan, true, &mut warnings,
            )?;
            history.push(lambda);
            if q + nc < n {
                let l = env_step_left(&l_envs[q], x.core(q), map.site_op(q), x.core(q));
                l_envs.push(l);
            }
        }
        for q in (0..=n - nc).rev() {
            let lambda = local_eig_update(
                map, &mut x, &l_envs[q], &r_envs[q + nc], q, nc, plan, false, &mut warnings,
            )?;
            history.push(lambda);
            if q > 0 {
                r_envs[q + nc - 1] = env_step_right(
                    &r_envs[q + nc],
                    x.core(q + nc - 1),
                    map.site_op(q + nc - 1),
                    x.core(q + nc - 1),
                );
            }
        }
    }

    let norm = x.frobenius_norm();
    x.scale(Complex64::new(1.0 / norm, 0.0));
    let eigenvalue = *history.last().expect("at least one update");
    Ok(EigResult {
        eigenvalue,
        eigenvector: x,
        history,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn local_eig_update(
    map: &LinearMap,
    x: &mut TensorTrain,
    l_env: &Env,
    r_env: &Env,
    q: usize,
    nc: usize,
    plan: &SweepPlan,
    rightward: bool,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let ops: Vec<_> = (q..q + nc).map(|k| map.site_op(k)).collect();
    let super_op = merge_ops(&ops);

    // Current window as the Lanczos start vector.
    let mut window = x.core(q).clone();
    for k in q + 1..q + nc {
        window = merge_bond(window, x.core(k).clone());
    }
    let window_dims: Vec<usize> = window.shape().to_vec();
    let dim: usize = window_dims.iter().product();
    let start: Vec<Complex64> = window.iter().copied().collect();

    let mut matvec = |v: &[Complex64]| -> Vec<Complex64> {
        let arr = reshaped(
            ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[dim]), v.to_vec()).expect("flat"),
            &window_dims,
        );
        local_apply(l_env, r_env, &super_op, &arr)
            .iter()
            .copied()
            .collect()
    };
    let (lambda, vec, converged) = lanczos(&mut matvec, dim, plan.local_iters, plan.tol, Some(&start))?;
    if !converged {
        warnings.push(format!("local eigensolve at core {q} hit the iteration cap"));
    }
    let g = reshaped(
        ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[dim]), vec).expect("flat"),
        &window_dims,
    );
    insert_window(x, g, q, nc, &plan.rule, rightward)?;
    if nc == 1 {
        // Single-site updates keep no orthonormal factor; restore the
        // gauge expected by the environment update.
        if rightward && q + 1 < map.nsites() {
            x.shift_center_right(q);
        } else if !rightward && q > 0 {
            x.shift_center_left(q);
        }
    }
    Ok(lambda)
}
