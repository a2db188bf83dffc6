//! Minimal float64 tensors with tape-based reverse-mode differentiation.

pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
pub mod optim;
mod tape;

pub use tape::{sigmoid, softmax_in_place, Gradients, Tape, Var, LAYER_NORM_EPS};

use crate::error::{Error, Result};

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                detail: format!("shape {shape:?} needs {want} values, got {}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "tensor" });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::kernels::{conv2d_naive, conv_transpose2d_naive, ConvGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&[3, 4], &mut rng);
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::eye(3));
        let av = tape.constant(a.clone());
        let out = tape.matmul(i, av).unwrap();
        assert_eq!(tape.value(out), &a);
    }

    #[test]
    fn uniform_softmax() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[1, 3], 4.2));
        let y = tape.softmax(x).unwrap();
        for v in tape.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[5, 7], (0..35).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap());
        let y = tape.softmax(x).unwrap();
        for row in tape.value(y).data().chunks(7) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_quadruple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[1, 4, 4], &mut rng);
        let w = random(&[1, 1, 2, 2], &mut rng);
        let b = random(&[1], &mut rng);
        let mut tape = Tape::new();
        let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
        let y = tape.conv2d(xv, wv, bv, 1, 0).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 3, 3]);
        let mut want = vec![0.0; 9];
        for oy in 0..3 {
            for ox in 0..3 {
                let mut acc = b.data()[0];
                for ky in 0..2 {
                    for kx in 0..2 {
                        acc += x.data()[(oy + ky) * 4 + ox + kx] * w.data()[ky * 2 + kx];
                    }
                }
                want[oy * 3 + ox] = acc;
            }
        }
        for (a, b) in tape.value(y).data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn conv_variants_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&[3, 7, 6], &mut rng);
        let w = random(&[5, 3, 3, 3], &mut rng);
        let b = random(&[5], &mut rng);
        let mut tape = Tape::new();
        let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
        let y = tape.conv2d(xv, wv, bv, 2, 1).unwrap();
        let g = ConvGeometry::new(3, 7, 6, 3, 2, 1).unwrap();
        let want = conv2d_naive(x.data(), w.data(), b.data(), 5, &g);
        assert!(tape.value(y).data().iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));

        let x = random(&[3, 4, 4], &mut rng);
        let w = random(&[3, 2, 3, 3], &mut rng);
        let b = random(&[2], &mut rng);
        let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
        let y = tape.conv_transpose2d(xv, wv, bv, 2, 1, 1).unwrap();
        assert_eq!(tape.value(y).shape(), &[2, 8, 8]);
        let want = conv_transpose2d_naive(x.data(), w.data(), b.data(), 3, 4, 4, 2, 3, 2, 1, 8, 8);
        assert!(tape.value(y).data().iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap());
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).data(), &[1.0; 6]);
    }

    #[test]
    fn quadratic_gradient_is_identity() {
        let vals = vec![0.3, -1.2, 2.5, 4.0];
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[4], vals.clone()).unwrap());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq).unwrap();
        let half = tape.scale(s, 0.5).unwrap();
        let g = tape.backward(half).unwrap();
        assert_eq!(g.wrt(x).data(), vals.as_slice());
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(&[2], 1.0));
        let unused = tape.param(Tensor::filled(&[3], 1.0));
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(unused), Tensor::zeros(&[3]));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(&[2], 1.0));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn non_finite_output_trips() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[1], 1e300));
        let err = tape.scale(x, 1e300).unwrap_err();
        assert!(err.is_numeric());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
    }
}
