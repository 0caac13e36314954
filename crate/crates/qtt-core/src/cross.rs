//! Tensor cross interpolation: building trains from black-box index
//! functions, plus the element-wise operations based on it.
//!
//! A 2-site sweeping scheme with maxvol pivoting is used. At each bond
//! the function is sampled on `(I x digits) x (digits x J)`, the block is
//! factorized by truncated SVD, and maxvol selects nested row and column
//! pivot sets. Convergence is declared when the maximum relative error
//! on a probe set of 1000 seeded random indices drops below `eps`.

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arithmetic::ApproxPolicy;
use crate::decomp::{maxvol, to_nalgebra, to_ndarray, truncated_svd, TruncationRule};
use crate::error::{Error, Result};
use crate::train::{ScalarKind, TensorTrain};
use crate::trainshape::TrainShape;

/// Batched index function: one flat index array per dimension, one value
/// per sample. Must be deterministic within one build.
pub type IndexFunction<'a> = dyn FnMut(&[&[usize]]) -> Result<Array1<Complex64>> + 'a;

/// Pivot state of one cross build: nested prefix sets `I_b` (sites
/// `0..b`) and suffix sets `J_b` (sites `b..n`) per bond.
struct CrossState {
    prefixes: Vec<Vec<Vec<usize>>>,
    suffixes: Vec<Vec<Vec<usize>>>,
}

/// Build a train that interpolates `f` on the given shape under a
/// [`ApproxPolicy::Cross`] policy.
pub fn cross_build(
    shape: &TrainShape,
    f: &mut IndexFunction,
    policy: &ApproxPolicy,
) -> Result<TensorTrain> {
    match policy {
        ApproxPolicy::Cross {
            max_rank,
            eps,
            nsweeps,
            seed,
        } => cross_build_seeded(shape, f, *max_rank, *eps, *nsweeps, *seed),
        _ => Err(Error::Spec("cross_build requires the cross policy".into())),
    }
}

pub(crate) fn cross_build_seeded(
    shape: &TrainShape,
    f: &mut IndexFunction,
    max_rank: usize,
    eps: f64,
    nsweeps: usize,
    seed: u64,
) -> Result<TensorTrain> {
    if eps <= 0.0 {
        return Err(Error::Numeric(format!("cross eps must be > 0, got {eps}")));
    }
    if max_rank == 0 {
        return Err(Error::Numeric("cross max_rank must be >= 1".into()));
    }
    let n = shape.ncores();
    let extents: Vec<usize> = (0..n).map(|q| shape.core_extent(q)).collect();
    let mut sampler = Sampler::new(shape, f);

    if n == 1 {
        let rows: Vec<Vec<usize>> = (0..extents[0]).map(|s| vec![s]).collect();
        let values = sampler.eval(&rows)?;
        let mut core = ArrayD::zeros(IxDyn(&[1, extents[0], 1]));
        for (s, &v) in values.iter().enumerate() {
            core[IxDyn(&[0, s, 0])] = v;
        }
        let kind = sampler.kind();
        return TensorTrain::from_cores(shape.clone(), vec![core], kind);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<usize> = extents.iter().map(|&e| rng.gen_range(0..e)).collect();
    let mut state = CrossState {
        prefixes: (0..=n).map(|b| vec![start[..b].to_vec()]).collect(),
        suffixes: (0..=n).map(|b| vec![start[b..].to_vec()]).collect(),
    };
    let rule = TruncationRule {
        max_rank: Some(max_rank),
        cutoff: (eps * 1e-2).min(1e-3),
    };

    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9));
    let probes = probe_set(shape, &extents, &mut probe_rng);
    let probe_values = sampler.eval(&probes)?;
    let scale = probe_values
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut train = None;
    for _ in 0..nsweeps.max(1) {
        for b in 1..n {
            update_bond(&mut state, &mut sampler, &extents, b, &rule)?;
        }
        for b in (1..n).rev() {
            update_bond(&mut state, &mut sampler, &extents, b, &rule)?;
        }
        let t = assemble(shape, &state, &mut sampler)?;
        let approx = t.evaluate_sites(
            &transpose_sites(&probes, n),
            probes.len(),
        );
        let err = approx
            .iter()
            .zip(probe_values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max)
            / scale;
        train = Some(t);
        if err <= eps {
            break;
        }
    }
    Ok(train.expect("at least one sweep"))
}

/// Sampler bridging site tuples to the per-dimension index function,
/// with finiteness checks and scalar-kind tracking.
struct Sampler<'a, 'b> {
    shape: &'a TrainShape,
    f: &'a mut IndexFunction<'b>,
    all_real: bool,
}

impl<'a, 'b> Sampler<'a, 'b> {
    fn new(shape: &'a TrainShape, f: &'a mut IndexFunction<'b>) -> Self {
        Self {
            shape,
            f,
            all_real: true,
        }
    }

    fn eval(&mut self, site_rows: &[Vec<usize>]) -> Result<Vec<Complex64>> {
        let ndims = self.shape.dims().len();
        let mut per_dim: Vec<Vec<usize>> = vec![Vec::with_capacity(site_rows.len()); ndims];
        for row in site_rows {
            let idxs = self.shape.sites_to_dim_idxs(row)?;
            for (d, &i) in idxs.iter().enumerate() {
                per_dim[d].push(i);
            }
        }
        let views: Vec<&[usize]> = per_dim.iter().map(|v| v.as_slice()).collect();
        let values = (self.f)(&views)?;
        for (k, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFiniteSample {
                    idxs: per_dim.iter().map(|col| col[k]).collect(),
                });
            }
            if v.im != 0.0 {
                self.all_real = false;
            }
        }
        Ok(values.to_vec())
    }

    fn kind(&self) -> ScalarKind {
        if self.all_real {
            ScalarKind::Real
        } else {
            ScalarKind::Complex
        }
    }
}

/// Sample the 2-site block at bond `b` and refresh both pivot sets from
/// its maxvol rows and columns.
fn update_bond(
    state: &mut CrossState,
    sampler: &mut Sampler,
    extents: &[usize],
    b: usize,
    rule: &TruncationRule,
) -> Result<()> {
    let lefts = &state.prefixes[b - 1];
    let rights = &state.suffixes[b + 1];
    let (el, er) = (extents[b - 1], extents[b]);
    let nrows = lefts.len() * el;
    let ncols = er * rights.len();

    let mut site_rows = Vec::with_capacity(nrows * ncols);
    for prefix in lefts {
        for s in 0..el {
            for sp in 0..er {
                for suffix in rights {
                    let mut row = prefix.clone();
                    row.push(s);
                    row.push(sp);
                    row.extend_from_slice(suffix);
                    site_rows.push(row);
                }
            }
        }
    }
    let values = sampler.eval(&site_rows)?;
    let block = Array2::from_shape_vec((nrows, ncols), values).expect("block shape");

    let svd = truncated_svd(block.view(), rule)?;
    let (u, vh) = if svd.rank() == 0 {
        (Array2::zeros((nrows, 1)), Array2::zeros((1, ncols)))
    } else {
        (svd.u, svd.vh)
    };

    let row_pivots = maxvol(u.view(), 0.01)?;
    let col_pivots = maxvol(vh.t().mapv(|z| z.conj()).view(), 0.01)?;

    state.prefixes[b] = row_pivots
        .iter()
        .map(|&r| {
            let mut p = lefts[r / el].clone();
            p.push(r % el);
            p
        })
        .collect();
    state.suffixes[b] = col_pivots
        .iter()
        .map(|&c| {
            let mut s = vec![c / rights.len()];
            s.extend_from_slice(&rights[c % rights.len()]);
            s
        })
        .collect();
    Ok(())
}

/// Assemble the interpolant `F_0 P_1^{-1} F_1 ... P_{n-1}^{-1} F_{n-1}`.
fn assemble(
    shape: &TrainShape,
    state: &CrossState,
    sampler: &mut Sampler,
) -> Result<TensorTrain> {
    let n = shape.ncores();
    let mut cores = Vec::with_capacity(n);
    for q in 0..n {
        let lefts = &state.prefixes[q];
        let rights = &state.suffixes[q + 1];
        let e = shape.core_extent(q);
        let mut rows = Vec::with_capacity(lefts.len() * e * rights.len());
        for prefix in lefts {
            for s in 0..e {
                for suffix in rights {
                    let mut row = prefix.clone();
                    row.push(s);
                    row.extend_from_slice(suffix);
                    rows.push(row);
                }
            }
        }
        let values = sampler.eval(&rows)?;
        let mut slice =
            Array2::from_shape_vec((lefts.len() * e, rights.len()), values).expect("slice shape");
        if q + 1 < n {
            // Fold in the inverse pivot cross block.
            let pivots = &state.prefixes[q + 1];
            let mut prows = Vec::with_capacity(pivots.len() * rights.len());
            for p in pivots {
                for suffix in rights {
                    let mut row = p.clone();
                    row.extend_from_slice(suffix);
                    prows.push(row);
                }
            }
            let pvals = sampler.eval(&prows)?;
            let pmat = Array2::from_shape_vec((pivots.len(), rights.len()), pvals)
                .expect("pivot block shape");
            slice = solve_right(&slice, &pmat)?;
        }
        let mut dims = vec![lefts.len()];
        dims.extend(shape.group_bases(q));
        dims.push(slice.ncols());
        let (data, offset) = slice.into_raw_vec_and_offset();
        debug_assert!(offset == Some(0) || data.is_empty());
        cores.push(ArrayD::from_shape_vec(IxDyn(&dims), data).expect("core shape"));
    }
    let kind = sampler.kind();
    let mut t = TensorTrain::from_parts(shape.clone(), cores, kind, None);
    if kind == ScalarKind::Real {
        t.scrub_imaginary();
    }
    Ok(t)
}

/// `x = a * p^{-1}` via LU, with an SVD pseudo-inverse fallback for
/// singular pivot blocks.
fn solve_right(a: &Array2<Complex64>, p: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let pm = to_nalgebra(p.view());
    let am = to_nalgebra(a.view());
    let lu = pm.clone().transpose().lu();
    if let Some(xt) = lu.solve(&am.transpose()) {
        if xt.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Ok(to_ndarray(&xt.transpose()));
        }
    }
    // Pseudo-inverse fallback.
    let svd = truncated_svd(
        p.view(),
        &TruncationRule {
            max_rank: None,
            cutoff: 1e-13,
        },
    )?;
    let mut pinv = Array2::zeros((p.ncols(), p.nrows()));
    for (k, &s) in svd.s.iter().enumerate() {
        if s <= 0.0 {
            continue;
        }
        for i in 0..p.ncols() {
            for j in 0..p.nrows() {
                pinv[[i, j]] += svd.vh[[k, i]].conj() * svd.u[[j, k]].conj() / s;
            }
        }
    }
    Ok(a.dot(&pinv))
}

fn probe_set(
    shape: &TrainShape,
    extents: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let total = shape.total_size();
    if total <= 1000 {
        // Small tensors: enumerate everything.
        let mut rows = Vec::with_capacity(total);
        let mut idx = vec![0usize; extents.len()];
        loop {
            rows.push(idx.clone());
            let mut k = extents.len();
            loop {
                if k == 0 {
                    return rows;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < extents[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    (0..1000)
        .map(|_| extents.iter().map(|&e| rng.gen_range(0..e)).collect())
        .collect()
}

fn transpose_sites(rows: &[Vec<usize>], ncores: usize) -> Vec<Vec<usize>> {
    (0..ncores)
        .map(|q| rows.iter().map(|r| r[q]).collect())
        .collect()
}

/// Element-wise transform `g(t)` through cross interpolation.
pub fn transform(
    t: &TensorTrain,
    g: &dyn Fn(Complex64) -> Complex64,
    policy: &ApproxPolicy,
) -> Result<TensorTrain> {
    cross_build(
        t.shape(),
        &mut |idxs| Ok(t.evaluate(idxs)?.mapv(g)),
        policy,
    )
}

/// Element-wise quotient `a / b`; fails with the offending index when
/// `b` vanishes at a sampled point.
pub fn elementwise_div(
    a: &TensorTrain,
    b: &TensorTrain,
    policy: &ApproxPolicy,
) -> Result<TensorTrain> {
    if !a.shape().addition_compatible(b.shape()) {
        return Err(Error::Shape(
            "element-wise division requires identical layouts".into(),
        ));
    }
    cross_build(
        a.shape(),
        &mut |idxs| {
            let num = a.evaluate(idxs)?;
            let den = b.evaluate(idxs)?;
            for (k, d) in den.iter().enumerate() {
                if d.norm() == 0.0 {
                    return Err(Error::DomainSample {
                        idxs: idxs.iter().map(|col| col[k]).collect(),
                        detail: "division by zero".into(),
                    });
                }
            }
            Ok(&num / &den)
        },
        policy,
    )
}

/// Element-wise power. Exponent 2 routes to the exact Hadamard einsum;
/// any other exponent samples through cross interpolation and requires
/// positive entries when the exponent is not an integer.
pub fn pow(t: &TensorTrain, e: f64, policy: &ApproxPolicy) -> Result<TensorTrain> {
    if e == 2.0 {
        return hadamard_square(t);
    }
    let integer = e.fract() == 0.0;
    cross_build(
        t.shape(),
        &mut |idxs| {
            let vals = t.evaluate(idxs)?;
            let mut out = Array1::zeros(vals.len());
            for (k, v) in vals.iter().enumerate() {
                if !integer && (v.re <= 0.0 || v.im != 0.0) {
                    return Err(Error::DomainSample {
                        idxs: idxs.iter().map(|col| col[k]).collect(),
                        detail: format!("non-positive base for exponent {e}"),
                    });
                }
                out[k] = v.powf(e);
            }
            Ok(out)
        },
        policy,
    )
}

/// Element-wise absolute value through cross interpolation.
pub fn abs(t: &TensorTrain, policy: &ApproxPolicy) -> Result<TensorTrain> {
    transform(t, &|z| Complex64::new(z.norm(), 0.0), policy)
}

/// Exact Hadamard square via einsum on matching letters.
fn hadamard_square(t: &TensorTrain) -> Result<TensorTrain> {
    let letters: String = ('a'..='z')
        .take(t.shape().dims().len())
        .collect();
    let spec = format!("{letters},{letters}->{letters}");
    crate::arithmetic::einsum(&ApproxPolicy::Exact, &spec, &[t, t])
}
