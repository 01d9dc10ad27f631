//! Minimal dense tensor and the scalar abstraction that lets the same
//! forward/backward code run in f32 (training) and f64 (gradient checks).

use std::fmt::Debug;

use num_traits::{Float, NumAssign};

/// Floating-point element type with a GEMM kernel.
pub trait Scalar: Float + NumAssign + Send + Sync + Debug + Default + 'static {
    /// C(m x n) = A * B + beta * C with explicit row/column strides for A
    /// and B (C is row-major contiguous). Shapes are the caller's contract.
    #[allow(clippy::too_many_arguments)]
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );

    /// C = A(m x k) * B(k x n) + beta * C, all row-major.
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]) {
        Self::gemm_strided(m, k, n, a, k as isize, 1, b, n as isize, 1, beta, c);
    }

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    fn from_count(v: usize) -> Self {
        Self::from_f64(v as f64)
    }
}

impl Scalar for f32 {
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        beta: f32,
        c: &mut [f32],
    ) {
        assert!(c.len() >= m * n);
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    fn from_f64(v: f64) -> f32 {
        v as f32
    }

    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        beta: f64,
        c: &mut [f64],
    ) {
        assert!(c.len() >= m * n);
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    fn from_f64(v: f64) -> f64 {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn map_into<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}
