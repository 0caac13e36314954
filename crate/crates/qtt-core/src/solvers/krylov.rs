//! Dense Krylov solvers for the local problems of the sweeping
//! algorithms: Lanczos for smallest eigenpairs and GMRES for linear
//! systems. Both operate on flat complex vectors through a matvec
//! closure.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type MatVec<'a> = dyn FnMut(&[Complex64]) -> Vec<Complex64> + 'a;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Smallest eigenpair of a Hermitian operator by restarted Lanczos with
/// full reorthogonalization. Returns `(eigenvalue, eigenvector,
/// converged)`.
pub fn lanczos(
    matvec: &mut MatVec,
    dim: usize,
    iters: usize,
    tol: f64,
    start: Option<&[Complex64]>,
) -> Result<(f64, Vec<Complex64>, bool)> {
    if dim == 0 {
        return Err(Error::Numeric("lanczos on an empty space".into()));
    }
    let mut v0: Vec<Complex64> = match start {
        Some(v) if norm(v) > 0.0 => v.to_vec(),
        _ => (0..dim)
            .map(|k| Complex64::new(1.0 + (k as f64 * 0.7).sin(), 0.0))
            .collect(),
    };
    let n0 = norm(&v0);
    for z in v0.iter_mut() {
        *z /= n0;
    }

    let cycle_len = 30.min(dim);
    let mut used = 0;
    let mut perturbed = false;
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    while used < iters {
        let mut basis: Vec<Vec<Complex64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut breakdown = false;
        for j in 0..cycle_len {
            if used >= iters {
                break;
            }
            used += 1;
            let mut w = matvec(&basis[j]);
            let alpha = dot(&basis[j], &w).re;
            alphas.push(alpha);
            // Full reorthogonalization, twice for safety.
            for _ in 0..2 {
                for b in &basis {
                    let overlap = dot(b, &w);
                    axpy(&mut w, -overlap, b);
                }
            }
            let beta = norm(&w);
            if beta < 1e-14 {
                breakdown = true;
                break;
            }
            if basis.len() < cycle_len {
                betas.push(beta);
                basis.push(w.iter().map(|z| z / beta).collect());
            } else {
                break;
            }
        }
        // Smallest Ritz pair of the tridiagonal matrix.
        let k = alphas.len();
        let mut tri = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            tri[(i, i)] = alphas[i];
            if i + 1 < k {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let mut min_idx = 0;
        for i in 1..k {
            if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
                min_idx = i;
            }
        }
        let lambda = eig.eigenvalues[min_idx];
        let weights: DVector<f64> = eig.eigenvectors.column(min_idx).into();
        let mut ritz = vec![Complex64::new(0.0, 0.0); dim];
        for (j, b) in basis.iter().take(k).enumerate() {
            axpy(&mut ritz, Complex64::new(weights[j], 0.0), b);
        }
        let nr = norm(&ritz);
        for z in ritz.iter_mut() {
            *z /= nr;
        }
        // Residual bound |beta_k * s_k| for Lanczos, or direct check on
        // breakdown (exact invariant subspace).
        let resid = if breakdown || k == betas.len() {
            let mut r = matvec(&ritz);
            axpy(&mut r, Complex64::new(-lambda, 0.0), &ritz);
            used += 1;
            norm(&r)
        } else {
            (betas[k - 1] * weights[k - 1]).abs()
        };
        let scale = lambda.abs().max(1.0);
        best = Some((lambda, ritz.clone()));
        if resid <= tol * scale {
            return Ok((lambda, ritz, true));
        }
        if breakdown && !perturbed {
            // Restart once from a perturbed vector.
            perturbed = true;
            v0 = ritz
                .iter()
                .enumerate()
                .map(|(k, z)| z + Complex64::new(1e-8 * ((k + 1) as f64).sin(), 0.0))
                .collect();
            let n = norm(&v0);
            for z in v0.iter_mut() {
                *z /= n;
            }
            continue;
        }
        v0 = ritz;
    }
    let (lambda, vec) = best.expect("at least one cycle");
    Ok((lambda, vec, false))
}

/// Restarted GMRES. Returns `(solution, relative residual, converged)`.
pub fn gmres(
    matvec: &mut MatVec,
    rhs: &[Complex64],
    iters: usize,
    tol: f64,
    restart: usize,
    start: Option<&[Complex64]>,
) -> Result<(Vec<Complex64>, f64, bool)> {
    let dim = rhs.len();
    if dim == 0 {
        return Err(Error::Numeric("gmres on an empty space".into()));
    }
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); dim], 0.0, true));
    }
    let restart = restart.max(1).min(dim);
    let mut x: Vec<Complex64> = match start {
        Some(v) => v.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); dim],
    };
    let mut used = 0;
    let mut rel = f64::INFINITY;
    while used < iters {
        let ax = matvec(&x);
        used += 1;
        let mut r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let r_norm = norm(&r);
        rel = r_norm / b_norm;
        if rel <= tol {
            return Ok((x, rel, true));
        }
        for z in r.iter_mut() {
            *z /= r_norm;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        // Hessenberg matrix columns.
        let mut h: Vec<Vec<Complex64>> = Vec::new();
        let mut k = 0;
        while k < restart && used < iters {
            let mut w = matvec(&basis[k]);
            used += 1;
            let mut col = vec![Complex64::new(0.0, 0.0); k + 2];
            for (j, b) in basis.iter().enumerate() {
                let overlap = dot(b, &w);
                col[j] = overlap;
                axpy(&mut w, -overlap, b);
            }
            let beta = norm(&w);
            col[k + 1] = Complex64::new(beta, 0.0);
            h.push(col);
            k += 1;
            if beta < 1e-14 {
                break;
            }
            basis.push(w.iter().map(|z| z / beta).collect());
        }
        // Solve the (k+1) x k least squares min ||r_norm e1 - H y||.
        let mut hm = DMatrix::<Complex64>::zeros(k + 1, k);
        for (c, col) in h.iter().enumerate() {
            for (rr, &v) in col.iter().enumerate() {
                if rr <= k {
                    hm[(rr, c)] = v;
                }
            }
        }
        let mut e1 = DVector::<Complex64>::zeros(k + 1);
        e1[0] = Complex64::new(r_norm, 0.0);
        let y = hm
            .clone()
            .svd(true, true)
            .solve(&e1, 1e-300)
            .map_err(|e| Error::Numeric(format!("gmres least squares: {e}")))?;
        for (j, b) in basis.iter().take(k).enumerate() {
            axpy(&mut x, y[j], b);
        }
    }
    let ax = matvec(&x);
    let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    rel = norm(&r) / b_norm;
    Ok((x, rel, rel <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matvec(m: &[Vec<f64>]) -> impl FnMut(&[Complex64]) -> Vec<Complex64> + '_ {
        move |v| {
            m.iter()
                .map(|row| {
                    row.iter()
                        .zip(v)
                        .map(|(&a, &x)| Complex64::new(a, 0.0) * x)
                        .sum()
                })
                .collect()
        }
    }

    #[test]
    fn lanczos_diagonal() {
        let m = vec![vec![1.0, 0.0], vec![0.0, 3.0]];
        let mut mv = dense_matvec(&m);
        let (lambda, _, converged) = lanczos(&mut mv, 2, 100, 1e-10, None).unwrap();
        assert!(converged);
        assert!((lambda - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gmres_identity_converges_immediately() {
        let rhs = vec![Complex64::new(2.0, 0.0), Complex64::new(-1.0, 1.0)];
        let mut mv = |v: &[Complex64]| v.to_vec();
        let (x, rel, converged) = gmres(&mut mv, &rhs, 10, 1e-12, 5, None).unwrap();
        assert!(converged);
        assert!(rel < 1e-12);
        for (a, b) in x.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn both_match_dense_reference_on_random_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        // SPD: m = a^T a + n*I
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[k][i] * a[k][j];
                }
                m[i][j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        let nal = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
        let eig = nalgebra::SymmetricEigen::new(nal.clone());
        let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);

        let mut mv = dense_matvec(&m);
        let (lambda, _, converged) = lanczos(&mut mv, n, 500, 1e-10, None).unwrap();
        assert!(converged);
        assert!((lambda - lambda_min).abs() < 1e-8 * lambda_min.abs().max(1.0));

        let rhs: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((k as f64).cos(), 0.0))
            .collect();
        let mut mv2 = dense_matvec(&m);
        let (x, rel, converged) = gmres(&mut mv2, &rhs, 200, 1e-10, 30, None).unwrap();
        assert!(converged, "gmres rel resid {rel}");
        let reference = nal
            .lu()
            .solve(&nalgebra::DVector::from_fn(n, |i, _| rhs[i].re))
            .unwrap();
        for (xc, &xr) in x.iter().zip(reference.iter()) {
            assert!((xc.re - xr).abs() < 1e-8);
            assert!(xc.im.abs() < 1e-10);
        }
    }
}
