//! Exact and approximate train arithmetic against dense oracles.

mod common;

use common::*;
use ndarray::IxDyn;
use num_complex::Complex64;
use qtt_core::{
    add, einsum, truncate, ApproxPolicy, Dimension, Error, GroupMode, ScalarKind, TensorTrain,
    TrainShape, TruncationRule,
};

fn dim(size: usize) -> Dimension {
    Dimension::new(size).unwrap()
}

fn vec_shape(size: usize) -> TrainShape {
    TrainShape::new(vec![dim(size)], None).unwrap()
}

fn mat_shape(rows: usize, cols: usize) -> TrainShape {
    TrainShape::new(vec![dim(rows), dim(cols)], Some(GroupMode::Interleaved)).unwrap()
}

// ---------------------------------------------------------------- add

#[test]
fn exact_add_doubles_values_and_ranks() {
    let shape = vec_shape(16);
    let t = TensorTrain::random(&shape, 2, 1, ScalarKind::Real);
    let sum = add(&ApproxPolicy::Exact, &[&t, &t]).unwrap();
    let expected = dense(&t).mapv(|z| z * c(2.0));
    assert!(rel_dist(&dense(&sum), &expected) < 1e-13);
    for (&r, &r0) in sum.interior_ranks().iter().zip(t.interior_ranks()) {
        assert_eq!(r, 2 * r0);
    }
}

#[test]
fn exact_add_rank_sum_rule() {
    let shape = vec_shape(32);
    let a = TensorTrain::random(&shape, 2, 2, ScalarKind::Real);
    let b = TensorTrain::random(&shape, 3, 3, ScalarKind::Real);
    let sum = add(&ApproxPolicy::Exact, &[&a, &b]).unwrap();
    for ((&r, &ra), &rb) in sum
        .interior_ranks()
        .iter()
        .zip(a.interior_ranks())
        .zip(b.interior_ranks())
    {
        assert_eq!(r, ra + rb);
    }
}

#[test]
fn exact_add_three_trains_matches_dense() {
    let shape = TrainShape::new(vec![dim(30)], None).unwrap();
    let a = TensorTrain::random(&shape, 2, 4, ScalarKind::Real);
    let b = TensorTrain::random(&shape, 2, 5, ScalarKind::Complex);
    let d = TensorTrain::random(&shape, 3, 6, ScalarKind::Real);
    let sum = add(&ApproxPolicy::Exact, &[&a, &b, &d]).unwrap();
    assert_eq!(sum.kind(), ScalarKind::Complex);
    assert!(rel_dist(&dense(&sum), &dense_sum(&[&a, &b, &d])) < 1e-12);
}

#[test]
fn add_shape_mismatch_rejected() {
    let a = TensorTrain::random(&vec_shape(16), 2, 0, ScalarKind::Real);
    let b = TensorTrain::random(&vec_shape(8), 2, 0, ScalarKind::Real);
    assert!(matches!(
        add(&ApproxPolicy::Exact, &[&a, &b]),
        Err(Error::Shape(_))
    ));
}

// ------------------------------------------------------------- einsum

#[test]
fn matvec_interleaved_matches_dense() {
    let m = TensorTrain::random(&mat_shape(8, 8), 2, 7, ScalarKind::Real);
    let v = TensorTrain::random(&vec_shape(8), 2, 8, ScalarKind::Real);
    let out = einsum(&ApproxPolicy::Exact, "ij,j->i", &[&m, &v]).unwrap();
    let expected = dense_matvec(&dense(&m), &dense(&v));
    assert!(rel_dist(&dense(&out), &expected) < 1e-12);
}

#[test]
fn matvec_block_layout_matches_dense() {
    let shape = TrainShape::new(vec![dim(8), dim(8)], Some(GroupMode::Block)).unwrap();
    let m = TensorTrain::random(&shape, 2, 17, ScalarKind::Complex);
    let v = TensorTrain::random(&vec_shape(8), 3, 18, ScalarKind::Real);
    let out = einsum(&ApproxPolicy::Exact, "ij,j->i", &[&m, &v]).unwrap();
    let expected = dense_matvec(&dense(&m), &dense(&v));
    assert!(rel_dist(&dense(&out), &expected) < 1e-12);
}

#[test]
fn full_contraction_is_squared_norm() {
    let t = TensorTrain::random(&vec_shape(24), 3, 9, ScalarKind::Real);
    let s = einsum(&ApproxPolicy::Exact, "i,i->", &[&t, &t]).unwrap();
    let val = s.value_at(&[0]).unwrap();
    let norm = t.frobenius_norm();
    assert!((val.re - norm * norm).abs() < 1e-12 * norm * norm);
    assert!(val.im.abs() < 1e-10);
}

#[test]
fn hadamard_rank_product_and_values() {
    let shape = vec_shape(32);
    let a = TensorTrain::random(&shape, 2, 10, ScalarKind::Real);
    let b = TensorTrain::random(&shape, 3, 11, ScalarKind::Real);
    let out = einsum(&ApproxPolicy::Exact, "i,i->i", &[&a, &b]).unwrap();
    for ((&r, &ra), &rb) in out
        .interior_ranks()
        .iter()
        .zip(a.interior_ranks())
        .zip(b.interior_ranks())
    {
        assert_eq!(r, ra * rb);
    }
    let expected = dense_hadamard(&dense(&a), &dense(&b));
    assert!(rel_dist(&dense(&out), &expected) < 1e-12);
}

#[test]
fn matmul_matches_dense() {
    let a = TensorTrain::random(&mat_shape(8, 12), 2, 12, ScalarKind::Real);
    let b = TensorTrain::random(&mat_shape(12, 8), 2, 13, ScalarKind::Complex);
    let out = einsum(&ApproxPolicy::Exact, "ij,jk->ik", &[&a, &b]).unwrap();
    let expected = dense_matmul(&dense(&a), &dense(&b));
    assert!(rel_dist(&dense(&out), &expected) < 1e-12);
}

#[test]
fn matmul_block_layouts_match_dense() {
    let a = TensorTrain::random(
        &TrainShape::new(vec![dim(4), dim(6)], Some(GroupMode::Block)).unwrap(),
        2,
        14,
        ScalarKind::Real,
    );
    let b = TensorTrain::random(
        &TrainShape::new(vec![dim(6), dim(9)], Some(GroupMode::Block)).unwrap(),
        2,
        15,
        ScalarKind::Real,
    );
    let out = einsum(&ApproxPolicy::Exact, "ij,jk->ik", &[&a, &b]).unwrap();
    let expected = dense_matmul(&dense(&a), &dense(&b));
    assert!(rel_dist(&dense(&out), &expected) < 1e-12);
}

#[test]
fn outer_product_einsum() {
    let a = TensorTrain::random(&vec_shape(6), 2, 20, ScalarKind::Real);
    let b = TensorTrain::random(&vec_shape(10), 2, 21, ScalarKind::Real);
    let out = einsum(&ApproxPolicy::Exact, "i,j->ij", &[&a, &b]).unwrap();
    let da = dense(&a);
    let db = dense(&b);
    let dout = dense(&out);
    for i in 0..6 {
        for j in 0..10 {
            let expect = da[IxDyn(&[i])] * db[IxDyn(&[j])];
            assert!((dout[IxDyn(&[i, j])] - expect).norm() < 1e-13);
        }
    }
}

#[test]
fn single_operand_sum_and_transpose() {
    let m = TensorTrain::random(&mat_shape(8, 8), 2, 22, ScalarKind::Real);
    let dm = dense(&m);

    let row_sums = einsum(&ApproxPolicy::Exact, "ij->i", &[&m]).unwrap();
    let drs = dense(&row_sums);
    for i in 0..8 {
        let expect: Complex64 = (0..8).map(|j| dm[IxDyn(&[i, j])]).sum();
        assert!((drs[IxDyn(&[i])] - expect).norm() < 1e-12);
    }

    let transposed = einsum(&ApproxPolicy::Exact, "ij->ji", &[&m]).unwrap();
    let dt = dense(&transposed);
    for i in 0..8 {
        for j in 0..8 {
            assert!((dt[IxDyn(&[j, i])] - dm[IxDyn(&[i, j])]).norm() < 1e-13);
        }
    }
}

#[test]
fn chained_einsum_reduces_pairwise() {
    let a = TensorTrain::random(&mat_shape(8, 8), 2, 23, ScalarKind::Real);
    let b = TensorTrain::random(&mat_shape(8, 8), 2, 24, ScalarKind::Real);
    let v = TensorTrain::random(&vec_shape(8), 2, 25, ScalarKind::Real);
    let out = einsum(&ApproxPolicy::Exact, "ij,jl,l->i", &[&a, &b, &v]).unwrap();
    let expected = dense_matvec(&dense(&a), &dense_matvec(&dense(&b), &dense(&v)));
    assert!(rel_dist(&dense(&out), &expected) < 1e-12);
}

// ------------------------------------------------- conformance errors

#[test]
fn mismatched_window_lengths_rejected() {
    // j spread over two cores in A, but over one core in B.
    let a = TensorTrain::random(
        &TrainShape::new(vec![dim(4), dim(4)], Some(GroupMode::Block)).unwrap(),
        2,
        30,
        ScalarKind::Real,
    );
    let b_shape = TrainShape::new(
        vec![dim(4)],
        Some(GroupMode::Explicit(vec![vec![
            qtt_core::DigitRef { dim: 0, pos: 0 },
            qtt_core::DigitRef { dim: 0, pos: 1 },
        ]])),
    )
    .unwrap();
    let b = TensorTrain::random(&b_shape, 1, 31, ScalarKind::Real);
    match einsum(&ApproxPolicy::Exact, "ij,j->i", &[&a, &b]) {
        Err(Error::Conformance { letter, .. }) => assert_eq!(letter, 'j'),
        other => panic!("expected conformance error, got {other:?}"),
    }
}

#[test]
fn differently_factorized_dimension_rejected() {
    let a = TensorTrain::random(&mat_shape(8, 8), 2, 32, ScalarKind::Real);
    let odd = TrainShape::new(vec![Dimension::from_bases(&[8]).unwrap()], None).unwrap();
    let b = TensorTrain::random(&odd, 1, 33, ScalarKind::Real);
    assert!(matches!(
        einsum(&ApproxPolicy::Exact, "ij,j->i", &[&a, &b]),
        Err(Error::Conformance { letter: 'j', .. })
    ));
}

#[test]
fn nonlinear_result_rejected() {
    // Both operands extend right of the shared window.
    let a_shape = TrainShape::new(
        vec![dim(4), dim(4)],
        Some(GroupMode::Explicit(vec![
            vec![qtt_core::DigitRef { dim: 1, pos: 0 }],
            vec![qtt_core::DigitRef { dim: 1, pos: 1 }],
            vec![qtt_core::DigitRef { dim: 0, pos: 0 }],
            vec![qtt_core::DigitRef { dim: 0, pos: 1 }],
        ])),
    )
    .unwrap();
    let a = TensorTrain::random(&a_shape, 2, 34, ScalarKind::Real);
    let b = TensorTrain::random(
        &TrainShape::new(vec![dim(4), dim(4)], Some(GroupMode::Block)).unwrap(),
        2,
        35,
        ScalarKind::Real,
    );
    assert!(matches!(
        einsum(&ApproxPolicy::Exact, "ij,jk->ik", &[&a, &b]),
        Err(Error::Conformance { .. })
    ));
}

// ------------------------------------------------------- truncation

#[test]
fn truncate_redundant_representation_to_rank_one() {
    let shape = vec_shape(16);
    let ones = {
        let cores = (0..shape.ncores())
            .map(|q| {
                let mut dims = vec![1usize];
                dims.extend(shape.group_bases(q));
                dims.push(1);
                ndarray::ArrayD::from_elem(IxDyn(&dims), 0.5f64)
            })
            .collect();
        TensorTrain::from_real_cores(shape.clone(), cores).unwrap()
    };
    // Rank-2 representation of a rank-1 tensor.
    let redundant = add(&ApproxPolicy::Exact, &[&ones, &ones]).unwrap();
    assert!(redundant.interior_ranks().iter().all(|&r| r == 2));
    let policy = ApproxPolicy::decomposition(TruncationRule::new(None, 1e-13).unwrap());
    let reduced = truncate(&policy, &redundant).unwrap();
    assert!(reduced.interior_ranks().iter().all(|&r| r == 1));
    assert!(rel_dist(&dense(&reduced), &dense(&redundant)) < 1e-12);
}

#[test]
fn truncate_cutoff_zero_is_identity() {
    let t = TensorTrain::random(&vec_shape(36), 3, 40, ScalarKind::Complex);
    let policy = ApproxPolicy::decomposition(TruncationRule::exact());
    let out = truncate(&policy, &t).unwrap();
    assert!(rel_dist(&dense(&out), &dense(&t)) < 1e-13);
}

#[test]
fn truncate_to_rank_one_error_equals_discarded_weight() {
    // Two-core train: the single split is a global SVD, so the reported
    // discarded weight must equal the true rank-1 distance.
    let shape = TrainShape::new(vec![Dimension::from_bases(&[4, 4]).unwrap()], None).unwrap();
    let t = TensorTrain::random(&shape, 2, 41, ScalarKind::Real);
    let policy = ApproxPolicy::decomposition(TruncationRule::with_max_rank(1));
    let (out, report) = qtt_core::arithmetic::truncate_report(&policy, &t).unwrap();
    let err = fro_dist(&dense(&out), &dense(&t));
    assert!((err - report.discarded_weight).abs() < 1e-10);

    // Dense best rank-1 oracle via SVD of the unfolding.
    let d = dense(&t);
    let m = ndarray::Array2::from_shape_fn((4, 4), |(i, j)| d[IxDyn(&[i * 4 + j])]);
    let svd = qtt_core::decomp::truncated_svd(m.view(), &TruncationRule::with_max_rank(1)).unwrap();
    assert!((err - svd.discarded_weight).abs() < 1e-10);
}

#[test]
fn zipup_window_variants_agree_with_exact() {
    let m = TensorTrain::random(&mat_shape(16, 16), 2, 50, ScalarKind::Real);
    let v = TensorTrain::random(&vec_shape(16), 2, 51, ScalarKind::Real);
    let exact = einsum(&ApproxPolicy::Exact, "ij,j->i", &[&m, &v]).unwrap();
    for window in [1, 2, 4] {
        let policy = ApproxPolicy::Decomposition {
            rule: TruncationRule::exact(),
            window,
        };
        let out = einsum(&policy, "ij,j->i", &[&m, &v]).unwrap();
        assert!(
            rel_dist(&dense(&out), &dense(&exact)) < 1e-13,
            "window {window}"
        );
    }
}

#[test]
fn zipup_error_bounded_by_discarded_weights() {
    for seed in 0..10 {
        let m = TensorTrain::random(&mat_shape(16, 16), 3, 60 + seed, ScalarKind::Real);
        let v = TensorTrain::random(&vec_shape(16), 3, 80 + seed, ScalarKind::Real);
        let exact = einsum(&ApproxPolicy::Exact, "ij,j->i", &[&m, &v]).unwrap();
        let policy = ApproxPolicy::Decomposition {
            rule: TruncationRule::new(Some(3), 1e-4).unwrap(),
            window: 2,
        };
        let (out, report) = qtt_core::arithmetic::einsum_report(&policy, "ij,j->i", &[&m, &v]).unwrap();
        let err = fro_dist(&dense(&out), &dense(&exact));
        assert!(
            err <= report.discarded_weight + 1e-12,
            "seed {seed}: {err} > {}",
            report.discarded_weight
        );
    }
}

// ------------------------------------------------------- variational

#[test]
fn variational_identity_fit_reproduces_input() {
    let t = TensorTrain::random(&vec_shape(64), 3, 70, ScalarKind::Real);
    let policy = ApproxPolicy::Variational {
        rule: TruncationRule::new(Some(8), 1e-12).unwrap(),
        ncores: 2,
        nsweeps: 2,
    };
    let out = truncate(&policy, &t).unwrap();
    assert!(rel_dist(&dense(&out), &dense(&t)) < 1e-10);
}

#[test]
fn variational_matvec_converges_and_is_monotone() {
    let m = TensorTrain::random(&mat_shape(16, 16), 2, 71, ScalarKind::Real);
    let v = TensorTrain::random(&vec_shape(16), 2, 72, ScalarKind::Real);
    let exact = einsum(&ApproxPolicy::Exact, "ij,j->i", &[&m, &v]).unwrap();
    let policy = ApproxPolicy::Variational {
        rule: TruncationRule::new(Some(8), 0.0).unwrap(),
        ncores: 2,
        nsweeps: 2,
    };
    let (out, report) = qtt_core::arithmetic::einsum_report(&policy, "ij,j->i", &[&m, &v]).unwrap();
    assert!(fro_dist(&dense(&out), &dense(&exact)) < 1e-10);
    for w in report.distances.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "distances not monotone: {:?}", report.distances);
    }
}

// ------------------------------------------------------------ cross policy

#[test]
fn cross_policy_matvec_matches_dense() {
    let m = TensorTrain::random(&mat_shape(16, 16), 2, 90, ScalarKind::Real);
    let v = TensorTrain::random(&vec_shape(16), 2, 91, ScalarKind::Real);
    let expected = dense_matvec(&dense(&m), &dense(&v));
    let policy = ApproxPolicy::Cross {
        max_rank: 8,
        eps: 1e-10,
        nsweeps: 6,
        seed: 3,
    };
    let out = einsum(&policy, "ij,j->i", &[&m, &v]).unwrap();
    assert!(rel_dist(&dense(&out), &expected) < 1e-8);
}

#[test]
fn exact_equals_cutoff_zero_decomposition() {
    let a = TensorTrain::random(&vec_shape(48), 3, 95, ScalarKind::Complex);
    let b = TensorTrain::random(&vec_shape(48), 2, 96, ScalarKind::Complex);
    let exact = einsum(&ApproxPolicy::Exact, "i,i->i", &[&a, &b]).unwrap();
    let zip = einsum(
        &ApproxPolicy::decomposition(TruncationRule::exact()),
        "i,i->i",
        &[&a, &b],
    )
    .unwrap();
    assert!(rel_dist(&dense(&zip), &dense(&exact)) < 1e-13);
}
