//! Train addition, Einstein summation and rank truncation under four
//! execution policies: exact, decomposition (zip-up), variational and
//! cross interpolation.

pub(crate) mod ops;
pub(crate) mod plan;
mod spec;
pub(crate) mod variational;
mod zipup;

pub use spec::EinsumSpec;

use crate::decomp::TruncationRule;
use crate::error::{Error, Result};
use crate::train::TensorTrain;

use ops::{exact_train, AddOp, IdentityOp, PairOp};
use plan::{plan_pair, plan_single, PairPlan};

/// Execution policy for train operations.
///
/// The policy is passed explicitly to every operation; there is no
/// ambient global state.
#[derive(Debug, Clone, PartialEq)]
pub enum ApproxPolicy {
    /// Exact block/product construction; ranks add (addition) or
    /// multiply (einsum).
    Exact,
    /// Zip-up pass with the given truncation rule, maintaining a
    /// super-core of `window` result cores.
    Decomposition { rule: TruncationRule, window: usize },
    /// Zip-up followed by ALS refinement sweeps.
    Variational {
        rule: TruncationRule,
        ncores: usize,
        nsweeps: usize,
    },
    /// Sample the exact operation through cross interpolation.
    Cross {
        max_rank: usize,
        eps: f64,
        nsweeps: usize,
        seed: u64,
    },
}

impl ApproxPolicy {
    pub fn decomposition(rule: TruncationRule) -> Self {
        Self::Decomposition { rule, window: 2 }
    }

    pub fn variational(rule: TruncationRule) -> Self {
        Self::Variational {
            rule,
            ncores: 2,
            nsweeps: 2,
        }
    }

    pub fn cross(max_rank: usize, eps: f64) -> Self {
        Self::Cross {
            max_rank,
            eps,
            nsweeps: 8,
            seed: 0,
        }
    }
}

/// Diagnostics of one approximate operation.
#[derive(Debug, Clone, Default)]
pub struct OpReport {
    /// Sum of SVD discarded weights over all zip-up splits.
    pub discarded_weight: f64,
    /// Distance-to-exact history of the variational sweeps, one entry
    /// per super-core update.
    pub distances: Vec<f64>,
}

/// Element-wise sum of one or more addition-compatible trains.
pub fn add(policy: &ApproxPolicy, trains: &[&TensorTrain]) -> Result<TensorTrain> {
    Ok(add_report(policy, trains)?.0)
}

/// [`add`] with zip-up/variational diagnostics.
pub fn add_report(
    policy: &ApproxPolicy,
    trains: &[&TensorTrain],
) -> Result<(TensorTrain, OpReport)> {
    if trains.is_empty() {
        return Err(Error::Shape("add requires at least one train".into()));
    }
    for t in &trains[1..] {
        if !trains[0].shape().addition_compatible(t.shape()) {
            return Err(Error::Shape(
                "addition requires identical dims and digit layout".into(),
            ));
        }
    }
    if trains.len() == 1 {
        return Ok((trains[0].clone(), OpReport::default()));
    }
    match policy {
        ApproxPolicy::Exact => {
            let op = AddOp::new(trains.iter().map(|t| (*t).clone()).collect());
            Ok((exact_train(&op), OpReport::default()))
        }
        ApproxPolicy::Decomposition { rule, window } => {
            let op = AddOp::new(normalized_copies(trains)?);
            let (t, discarded) = zipup::zip_up(&op, rule, *window)?;
            Ok((
                t,
                OpReport {
                    discarded_weight: discarded,
                    distances: vec![],
                },
            ))
        }
        ApproxPolicy::Variational {
            rule,
            ncores,
            nsweeps,
        } => {
            let op = AddOp::new(normalized_copies(trains)?);
            let (guess, discarded) = zipup::zip_up(&op, rule, 2)?;
            let (t, distances) = variational::variational_fit(&op, guess, rule, *ncores, *nsweeps)?;
            Ok((
                t,
                OpReport {
                    discarded_weight: discarded,
                    distances,
                },
            ))
        }
        ApproxPolicy::Cross {
            max_rank,
            eps,
            nsweeps,
            seed,
        } => {
            let shape = trains[0].shape().clone();
            let operands: Vec<TensorTrain> = trains.iter().map(|t| (*t).clone()).collect();
            let t = crate::cross::cross_build_seeded(
                &shape,
                &mut |idxs| {
                    let mut acc = operands[0].evaluate(idxs)?;
                    for t in &operands[1..] {
                        acc = acc + t.evaluate(idxs)?;
                    }
                    Ok(acc)
                },
                *max_rank,
                *eps,
                *nsweeps,
                *seed,
            )?;
            Ok((t, OpReport::default()))
        }
    }
}

/// Einstein summation over one or more trains; n-ary specs reduce
/// pairwise left to right under the same policy.
pub fn einsum(policy: &ApproxPolicy, spec: &str, operands: &[&TensorTrain]) -> Result<TensorTrain> {
    Ok(einsum_report(policy, spec, operands)?.0)
}

/// [`einsum`] with zip-up/variational diagnostics (of the final pairwise
/// step for n-ary specs).
pub fn einsum_report(
    policy: &ApproxPolicy,
    spec: &str,
    operands: &[&TensorTrain],
) -> Result<(TensorTrain, OpReport)> {
    let parsed = EinsumSpec::parse(spec)?;
    if parsed.n_inputs() != operands.len() {
        return Err(Error::Spec(format!(
            "spec names {} operands, got {}",
            parsed.n_inputs(),
            operands.len()
        )));
    }
    if operands.is_empty() {
        return Err(Error::Spec("einsum requires at least one operand".into()));
    }
    if operands.len() == 1 {
        let plan = plan_single(
            &parsed.inputs[0],
            &parsed.output,
            (operands[0].shape(), operands[0].kind()),
        )?;
        return run_pair(policy, plan, operands[0].clone(), operands[0].clone());
    }

    let mut current = operands[0].clone();
    let mut letters = parsed.inputs[0].clone();
    let mut result = None;
    for k in 1..operands.len() {
        let is_last = k + 1 == operands.len();
        let out_letters: Vec<char> = if is_last {
            parsed.output.clone()
        } else {
            // Keep letters still needed by later operands or the output.
            let mut needed: Vec<char> = Vec::new();
            for &c in letters.iter().chain(&parsed.inputs[k]) {
                let later = parsed.inputs[k + 1..].iter().any(|inp| inp.contains(&c))
                    || parsed.output.contains(&c);
                if later && !needed.contains(&c) {
                    needed.push(c);
                }
            }
            needed
        };
        let plan = plan_pair(
            &letters,
            &parsed.inputs[k],
            &out_letters,
            (current.shape(), current.kind()),
            (operands[k].shape(), operands[k].kind()),
        )?;
        let (t, report) = run_pair(policy, plan, current, operands[k].clone())?;
        if is_last {
            result = Some((t, report));
            break;
        }
        current = t;
        letters = out_letters;
    }
    Ok(result.expect("n >= 2 loop always sets the result"))
}

fn run_pair(
    policy: &ApproxPolicy,
    plan: PairPlan,
    a: TensorTrain,
    b: TensorTrain,
) -> Result<(TensorTrain, OpReport)> {
    match policy {
        ApproxPolicy::Exact => {
            let op = PairOp { plan, a, b };
            Ok((exact_train(&op), OpReport::default()))
        }
        ApproxPolicy::Decomposition { rule, window } => {
            let (a, b) = (normalized(a)?, normalized(b)?);
            let op = PairOp { plan, a, b };
            let (t, discarded) = zipup::zip_up(&op, rule, *window)?;
            Ok((
                t,
                OpReport {
                    discarded_weight: discarded,
                    distances: vec![],
                },
            ))
        }
        ApproxPolicy::Variational {
            rule,
            ncores,
            nsweeps,
        } => {
            let (a, b) = (normalized(a)?, normalized(b)?);
            let op = PairOp { plan, a, b };
            let (guess, discarded) = zipup::zip_up(&op, rule, 2)?;
            let (t, distances) = variational::variational_fit(&op, guess, rule, *ncores, *nsweeps)?;
            Ok((
                t,
                OpReport {
                    discarded_weight: discarded,
                    distances,
                },
            ))
        }
        ApproxPolicy::Cross {
            max_rank,
            eps,
            nsweeps,
            seed,
        } => {
            let shape = plan.result_shape.clone();
            let t = crate::cross::cross_build_seeded(
                &shape,
                &mut |idxs| plan.evaluate(&a, &b, idxs),
                *max_rank,
                *eps,
                *nsweeps,
                *seed,
            )?;
            Ok((t, OpReport::default()))
        }
    }
}

/// Zip-up (or variational) rank reduction of a single train.
pub fn truncate(policy: &ApproxPolicy, t: &TensorTrain) -> Result<TensorTrain> {
    Ok(truncate_report(policy, t)?.0)
}

/// [`truncate`] with diagnostics.
pub fn truncate_report(policy: &ApproxPolicy, t: &TensorTrain) -> Result<(TensorTrain, OpReport)> {
    match policy {
        ApproxPolicy::Exact => Ok((t.clone(), OpReport::default())),
        ApproxPolicy::Decomposition { rule, window } => {
            let op = IdentityOp {
                t: normalized(t.clone())?,
            };
            let (out, discarded) = zipup::zip_up(&op, rule, *window)?;
            Ok((
                out,
                OpReport {
                    discarded_weight: discarded,
                    distances: vec![],
                },
            ))
        }
        ApproxPolicy::Variational {
            rule,
            ncores,
            nsweeps,
        } => {
            let op = IdentityOp {
                t: normalized(t.clone())?,
            };
            let (guess, discarded) = zipup::zip_up(&op, rule, 2)?;
            let (out, distances) =
                variational::variational_fit(&op, guess, rule, *ncores, *nsweeps)?;
            Ok((
                out,
                OpReport {
                    discarded_weight: discarded,
                    distances,
                },
            ))
        }
        ApproxPolicy::Cross { .. } => Err(Error::Spec(
            "truncate accepts the exact, decomposition or variational policies".into(),
        )),
    }
}

fn normalized(mut t: TensorTrain) -> Result<TensorTrain> {
    t.normalize(0)?;
    Ok(t)
}

fn normalized_copies(trains: &[&TensorTrain]) -> Result<Vec<TensorTrain>> {
    trains.iter().map(|t| normalized((*t).clone())).collect()
}
