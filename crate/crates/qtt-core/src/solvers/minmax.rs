//! Approximate extrema of a real train by candidate-tracking sweeps.
//!
//! Up to `k` partial multi-indices per bond are kept, scored by the norm
//! of their interpolation vector in the orthogonal gauge (which equals
//! the norm of the sub-tensor they select). A second round runs on the
//! train shifted by the first round's dominant value, so the opposite
//! signed extremum also shows up with a large magnitude. All returned
//! values are genuine entries, re-evaluated through `evaluate`.

use std::collections::BTreeSet;

use ndarray::Array1;
use num_complex::Complex64;

use crate::arithmetic::{add, ApproxPolicy};
use crate::constructors::constant;
use crate::error::{Error, Result};
use crate::train::{unfold, ScalarKind, TensorTrain};

#[derive(Debug, Clone, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub idxs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxResult {
    pub min: Extremum,
    pub max: Extremum,
}

pub fn min_max(t: &TensorTrain, k: usize) -> Result<MinMaxResult> {
    if k == 0 {
        return Err(Error::Numeric("min_max needs k >= 1".into()));
    }
    if t.kind() != ScalarKind::Real {
        return Err(Error::Numeric(
            "min_max is defined for real-valued trains".into(),
        ));
    }

    let mut candidates: BTreeSet<Vec<usize>> = BTreeSet::new();
    for sites in sweep_candidates(t, k)? {
        candidates.insert(t.shape().sites_to_dim_idxs(&sites)?);
    }
    let first_round: Vec<Vec<usize>> = candidates.iter().cloned().collect();
    let values = evaluate_rows(t, &first_round)?;

    // Shift by the dominant value so the other signed extremum stands
    // out by magnitude, then rescan.
    let dominant = values
        .iter()
        .cloned()
        .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    let shift = constant(t.shape(), Complex64::new(-dominant, 0.0));
    let shifted = add(&ApproxPolicy::Exact, &[t, &shift])?;
    for sites in sweep_candidates(&shifted, k)? {
        candidates.insert(t.shape().sites_to_dim_idxs(&sites)?);
    }

    let rows: Vec<Vec<usize>> = candidates.into_iter().collect();
    let values = evaluate_rows(t, &rows)?;
    let mut min = Extremum {
        value: f64::INFINITY,
        idxs: vec![],
    };
    let mut max = Extremum {
        value: f64::NEG_INFINITY,
        idxs: vec![],
    };
    for (row, &v) in rows.iter().zip(values.iter()) {
        if v < min.value {
            min = Extremum {
                value: v,
                idxs: row.clone(),
            };
        }
        if v > max.value {
            max = Extremum {
                value: v,
                idxs: row.clone(),
            };
        }
    }
    Ok(MinMaxResult { min, max })
}

fn evaluate_rows(t: &TensorTrain, rows: &[Vec<usize>]) -> Result<Vec<f64>> {
    let ndims = t.shape().dims().len();
    let mut per_dim: Vec<Vec<usize>> = vec![Vec::with_capacity(rows.len()); ndims];
    for row in rows {
        for (d, &i) in row.iter().enumerate() {
            per_dim[d].push(i);
        }
    }
    let views: Vec<&[usize]> = per_dim.iter().map(|v| v.as_slice()).collect();
    Ok(t.evaluate(&views)?.iter().map(|z| z.re).collect())
}

/// Candidate site tuples from one forward and one backward sweep.
fn sweep_candidates(t: &TensorTrain, k: usize) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();

    // Forward: right-orthogonal gauge, prefixes scored by vector norm.
    let mut fwd = t.clone();
    fwd.normalize(0)?;
    let mut cands: Vec<(Vec<usize>, Array1<Complex64>)> =
        vec![(vec![], Array1::from_elem(1, Complex64::new(1.0, 0.0)))];
    for q in 0..fwd.ncores() {
        let core = fwd.core(q);
        let right = *core.shape().last().unwrap();
        let extent: usize = core.shape()[1..core.ndim() - 1].iter().product();
        let mat = unfold(core.view(), 1); // (left, extent*right)
        let mut expanded: Vec<(Vec<usize>, Array1<Complex64>)> = Vec::new();
        for (sites, v) in &cands {
            for s in 0..extent {
                let mut next = Array1::from_elem(right, Complex64::new(0.0, 0.0));
                for l in 0..v.len() {
                    let vl = v[l];
                    for r in 0..right {
                        next[r] += vl * mat[[l, s * right + r]];
                    }
                }
                let mut sites = sites.clone();
                sites.push(s);
                expanded.push((sites, next));
            }
        }
        keep_top(&mut expanded, k);
        cands = expanded;
    }
    out.extend(cands.into_iter().map(|(sites, _)| sites));

    // Backward: left-orthogonal gauge, suffixes; the new site goes at
    // the front of the tuple.
    let mut bwd = t.clone();
    let last = bwd.ncores() - 1;
    bwd.normalize(last)?;
    let mut cands: Vec<(Vec<usize>, Array1<Complex64>)> =
        vec![(vec![], Array1::from_elem(1, Complex64::new(1.0, 0.0)))];
    for q in (0..bwd.ncores()).rev() {
        let core = bwd.core(q);
        let left = core.shape()[0];
        let right = *core.shape().last().unwrap();
        let extent: usize = core.shape()[1..core.ndim() - 1].iter().product();
        let mat = unfold(core.view(), 1);
        let mut expanded: Vec<(Vec<usize>, Array1<Complex64>)> = Vec::new();
        for (sites, v) in &cands {
            for s in 0..extent {
                let mut next = Array1::from_elem(left, Complex64::new(0.0, 0.0));
                for l in 0..left {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..right {
                        acc += mat[[l, s * right + r]] * v[r];
                    }
                    next[l] = acc;
                }
                let mut tuple = Vec::with_capacity(sites.len() + 1);
                tuple.push(s);
                tuple.extend_from_slice(sites);
                expanded.push((tuple, next));
            }
        }
        keep_top(&mut expanded, k);
        cands = expanded;
    }
    out.extend(cands.into_iter().map(|(sites, _)| sites));
    Ok(out)
}

fn keep_top(cands: &mut Vec<(Vec<usize>, Array1<Complex64>)>, k: usize) {
    cands.sort_by(|a, b| {
        let sa: f64 = a.1.iter().map(|z| z.norm_sqr()).sum();
        let sb: f64 = b.1.iter().map(|z| z.norm_sqr()).sum();
        sb.partial_cmp(&sa).unwrap().then_with(|| a.0.cmp(&b.0))
    });
    cands.truncate(k);
}
