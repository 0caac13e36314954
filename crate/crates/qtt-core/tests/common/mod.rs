//! Dense reference computations shared by the integration tests. These
//! stay independent of the train code paths they check: everything here
//! works on fully expanded arrays.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use num_complex::Complex64;
use qtt_core::TensorTrain;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn dense(t: &TensorTrain) -> ArrayD<Complex64> {
    t.to_tensor().expect("dense expansion within guard")
}

pub fn fro(a: &ArrayD<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn fro_dist(a: &ArrayD<Complex64>, b: &ArrayD<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "dense shapes differ");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn rel_dist(a: &ArrayD<Complex64>, b: &ArrayD<Complex64>) -> f64 {
    fro_dist(a, b) / fro(b).max(1e-300)
}

pub fn as_matrix(a: &ArrayD<Complex64>) -> Array2<Complex64> {
    assert_eq!(a.ndim(), 2);
    Array2::from_shape_fn((a.shape()[0], a.shape()[1]), |(i, j)| a[IxDyn(&[i, j])])
}

pub fn as_vector(a: &ArrayD<Complex64>) -> Array1<Complex64> {
    assert_eq!(a.ndim(), 1);
    Array1::from_shape_fn(a.shape()[0], |i| a[IxDyn(&[i])])
}

pub fn dense_matvec(m: &ArrayD<Complex64>, v: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    as_matrix(m).dot(&as_vector(v)).into_dyn()
}

pub fn dense_matmul(a: &ArrayD<Complex64>, b: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    as_matrix(a).dot(&as_matrix(b)).into_dyn()
}

pub fn dense_hadamard(a: &ArrayD<Complex64>, b: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    assert_eq!(a.shape(), b.shape());
    let mut out = a.clone();
    out.zip_mut_with(b, |x, y| *x *= *y);
    out
}

pub fn dense_sum(trains: &[&TensorTrain]) -> ArrayD<Complex64> {
    let mut acc = dense(trains[0]);
    for t in &trains[1..] {
        acc += &dense(t);
    }
    acc
}
