//! Dense kernels with hand-written backward passes.
//!
//! Values live in memory as `f64`; the on-disk formats of the std companion
//! crate store `f32`. Vectors are plain `Vec<f64>` / `&[f64]`, matrices are
//! row-major [`Matrix`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// Probabilities are clamped to this floor before taking a logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Entries drawn i.i.d. uniform in `[-limit, limit]`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| uniform_symmetric(limit, rng))
            .collect();
        Matrix { rows, cols, data }
    }

    /// Glorot/Xavier uniform init: limit `sqrt(6 / (rows + cols))`.
    pub fn xavier<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (rows + cols) as f64);
        Matrix::uniform(rows, cols, limit, rng)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Copies column `col` out of the row-major storage.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Dense `self · x`, summing every product including the zero ones.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim(
                "matvec",
                format!("matrix has {} columns, x has {}", self.cols, x.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect())
    }

    /// `selfᵀ · v`.
    pub fn matvec_transposed(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::dim(
                "matvec_transposed",
                format!("matrix has {} rows, v has {}", self.rows, v.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += w * vr;
            }
        }
        Ok(out)
    }

    /// `self += scale · (u ⊗ v)`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) -> Result<()> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(Error::dim(
                "add_outer",
                format!(
                    "{}x{} matrix, u has {}, v has {}",
                    self.rows,
                    self.cols,
                    u.len(),
                    v.len()
                ),
            ));
        }
        for (r, &ur) in u.iter().enumerate() {
            let s = ur * scale;
            if s == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (m, &vc) in row.iter_mut().zip(v) {
                *m += s * vc;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn uniform_symmetric<R: Rng + ?Sized>(limit: f64, rng: &mut R) -> f64 {
    // gen::<f64>() is in [0, 1); map onto [-limit, limit).
    (rng.gen::<f64>() * 2.0 - 1.0) * limit
}

/// Index of the first maximal entry.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Elementwise nonlinearity of the encoding and hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }

    pub fn forward(self, x: &[f64]) -> Vec<f64> {
        match self {
            Activation::Tanh => tanh_forward(x),
        }
    }

    /// Backward expressed through the forward output.
    pub fn backward(self, y_out: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        match self {
            Activation::Tanh => tanh_backward(y_out, upstream),
        }
    }
}

/// Gradients of `W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub weight: Matrix,
    pub input: Vec<f64>,
    pub bias: Vec<f64>,
}

/// `W·x + b`.
pub fn affine_forward(weight: &Matrix, x: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    if weight.cols() != x.len() {
        return Err(Error::dim(
            "affine_forward",
            format!("W is {}x{} but x has {}", weight.rows(), weight.cols(), x.len()),
        ));
    }
    if bias.len() != weight.rows() {
        return Err(Error::dim(
            "affine_forward",
            format!("W has {} rows but b has {}", weight.rows(), bias.len()),
        ));
    }
    let mut out = weight.matvec(x)?;
    for (o, b) in out.iter_mut().zip(bias) {
        *o += b;
    }
    Ok(out)
}

/// Backward of [`affine_forward`] given `∂L/∂(Wx+b)`.
pub fn affine_backward(weight: &Matrix, x: &[f64], upstream: &[f64]) -> Result<AffineGrads> {
    if weight.cols() != x.len() {
        return Err(Error::dim(
            "affine_backward",
            format!("W is {}x{} but x has {}", weight.rows(), weight.cols(), x.len()),
        ));
    }
    if upstream.len() != weight.rows() {
        return Err(Error::dim(
            "affine_backward",
            format!(
                "W has {} rows but upstream gradient has {}",
                weight.rows(),
                upstream.len()
            ),
        ));
    }
    let mut gw = Matrix::zeros(weight.rows(), weight.cols());
    gw.add_outer(upstream, x, 1.0)?;
    Ok(AffineGrads {
        weight: gw,
        input: weight.matvec_transposed(upstream)?,
        bias: upstream.to_vec(),
    })
}

pub fn tanh_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| libm::tanh(v)).collect()
}

/// Backward of tanh expressed through its output: `upstream ⊙ (1 − y²)`.
pub fn tanh_backward(y_out: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    if y_out.len() != upstream.len() {
        return Err(Error::dim(
            "tanh_backward",
            format!("output has {}, upstream has {}", y_out.len(), upstream.len()),
        ));
    }
    Ok(y_out
        .iter()
        .zip(upstream)
        .map(|(y, u)| u * (1.0 - y * y))
        .collect())
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Parameter(format!(
            "temperature must be finite and > 0, got {temperature}"
        )));
    }
    Ok(())
}

/// Softmax of `z / temperature`, stabilised by subtracting `max(z)`.
pub fn softmax_t(z: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if z.is_empty() {
        return Err(Error::dim("softmax_t", "empty logit vector"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z
        .iter()
        .map(|&v| libm::exp((v - max) / temperature))
        .collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// `−Σ tᵢ log yᵢ` with `yᵢ` clamped at [`LOG_FLOOR`]. Terms with `tᵢ = 0`
/// contribute nothing.
pub fn cross_entropy(y: &[f64], t: &[f64]) -> Result<f64> {
    if y.len() != t.len() {
        return Err(Error::dim(
            "cross_entropy",
            format!("prediction has {}, target has {}", y.len(), t.len()),
        ));
    }
    if t.iter().any(|&ti| ti.is_nan() || ti < 0.0) {
        return Err(Error::Parameter("target entries must be >= 0".into()));
    }
    Ok(y.iter()
        .zip(t)
        .filter(|(_, &ti)| ti > 0.0)
        .map(|(&yi, &ti)| -ti * libm::log(yi.max(LOG_FLOOR)))
        .sum())
}

/// Gradient of `cross_entropy(softmax_t(z, T), t)` with respect to `z`:
/// `(softmax_t(z, T) − t) / T`. The target must be a distribution.
pub fn softmax_ce_backward(z: &[f64], t: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if z.len() != t.len() {
        return Err(Error::dim(
            "softmax_ce_backward",
            format!("logits have {}, target has {}", z.len(), t.len()),
        ));
    }
    let total: f64 = t.iter().sum();
    if (total - 1.0).abs() > 1e-6 || t.iter().any(|&ti| ti.is_nan() || ti < 0.0) {
        return Err(Error::Parameter(format!(
            "target must be a distribution (sum {total})"
        )));
    }
    let y = softmax_t(z, temperature)?;
    Ok(y.iter()
        .zip(t)
        .map(|(yi, ti)| (yi - ti) / temperature)
        .collect())
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 − rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(dim: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(vec![1.0; dim]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..dim)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// One-hot distribution of length `n` at `index`.
pub fn one_hot(n: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, max_relative_error, STEP, TOLERANCE};
    use crate::seeded_rng;
    use proptest::prelude::*;

    fn random_vec(n: usize, rng: &mut crate::Rng) -> Vec<f64> {
        (0..n).map(|_| uniform_symmetric(1.0, rng)).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn affine_identity_and_zero_weight() {
        let y = affine_forward(&Matrix::identity(3), &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        let y = affine_forward(&Matrix::zeros(2, 3), &[7.0, -1.0, 0.5], &[5.0, -1.0]).unwrap();
        assert_eq!(y, vec![5.0, -1.0]);
    }

    #[test]
    fn affine_matches_triple_loop() {
        let mut rng = seeded_rng(11);
        let w = Matrix::uniform(4, 3, 1.0, &mut rng);
        let x = random_vec(3, &mut rng);
        let b = random_vec(4, &mut rng);
        let y = affine_forward(&w, &x, &b).unwrap();
        for r in 0..4 {
            let mut acc = b[r];
            for c in 0..3 {
                acc += w.data()[r * 3 + c] * x[c];
            }
            assert!((y[r] - acc).abs() <= 1e-6 * acc.abs().max(1.0));
        }
    }

    #[test]
    fn affine_shape_errors_name_operands() {
        let err = affine_forward(&Matrix::zeros(2, 3), &[1.0, 2.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Dimension { op: "affine_forward", .. }));
        let msg = alloc::string::ToString::to_string(&err);
        assert!(msg.contains("x has 2"), "{msg}");
        let err = affine_forward(&Matrix::zeros(2, 3), &[1.0; 3], &[0.0]).unwrap_err();
        assert!(alloc::string::ToString::to_string(&err).contains("b has 1"));
        assert!(affine_backward(&Matrix::zeros(2, 3), &[1.0; 3], &[1.0]).is_err());
    }

    #[test]
    fn affine_backward_trivial_cases() {
        let mut rng = seeded_rng(3);
        let w = Matrix::uniform(3, 2, 1.0, &mut rng);
        let g = affine_backward(&w, &[0.3, -0.2], &[0.0; 3]).unwrap();
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.input.iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));

        let w = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let g = affine_backward(&w, &[3.0], &[1.0]).unwrap();
        assert_eq!(g.weight.data(), &[3.0]);
        assert_eq!(g.input, vec![2.0]);
        assert_eq!(g.bias, vec![1.0]);
    }

    #[test]
    fn affine_backward_matches_finite_differences() {
        let mut rng = seeded_rng(5);
        for _ in 0..20 {
            let w = Matrix::uniform(5, 4, 1.0, &mut rng);
            let x = random_vec(4, &mut rng);
            let b = random_vec(5, &mut rng);
            let probe = random_vec(5, &mut rng);
            let g = affine_backward(&w, &x, &probe).unwrap();

            let num_w = central_difference(
                |wd| {
                    let wm = Matrix::from_vec(5, 4, wd.to_vec()).unwrap();
                    dot(&affine_forward(&wm, &x, &b).unwrap(), &probe)
                },
                w.data(),
                STEP,
            );
            let num_x = central_difference(
                |xd| dot(&affine_forward(&w, xd, &b).unwrap(), &probe),
                &x,
                STEP,
            );
            let num_b = central_difference(
                |bd| dot(&affine_forward(&w, &x, bd).unwrap(), &probe),
                &b,
                STEP,
            );
            assert!(max_relative_error(g.weight.data(), &num_w) < TOLERANCE);
            assert!(max_relative_error(&g.input, &num_x) < TOLERANCE);
            assert!(max_relative_error(&g.bias, &num_b) < TOLERANCE);
        }
    }

    #[test]
    fn tanh_examples() {
        assert_eq!(tanh_forward(&[0.0]), vec![0.0]);
        assert_eq!(tanh_backward(&[0.0, 0.0], &[0.7, -2.0]).unwrap(), vec![0.7, -2.0]);
        let y = tanh_forward(&[20.0, -20.0]);
        assert!((y[0] - 1.0).abs() < 1e-8 && (y[1] + 1.0).abs() < 1e-8);
        assert!(tanh_backward(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tanh_backward_matches_finite_differences() {
        let mut rng = seeded_rng(8);
        for _ in 0..20 {
            let x: Vec<f64> = (0..6).map(|_| uniform_symmetric(2.0, &mut rng)).collect();
            let probe = random_vec(6, &mut rng);
            let y = tanh_forward(&x);
            let analytic = tanh_backward(&y, &probe).unwrap();
            let numeric = central_difference(|xd| dot(&tanh_forward(xd), &probe), &x, STEP);
            assert!(max_relative_error(&analytic, &numeric) < TOLERANCE);
        }
    }

    #[test]
    fn softmax_examples() {
        let y = softmax_t(&[0.0; 3], 2.5).unwrap();
        assert!(close(&y, &[1.0 / 3.0; 3], 1e-12));

        let z: Vec<f64> = [0.95f64, 0.04, 0.01].iter().map(|p| p.ln()).collect();
        let y = softmax_t(&z, 1.0).unwrap();
        assert!(close(&y, &[0.95, 0.04, 0.01], 1e-6));
        let y = softmax_t(&z, 3.0).unwrap();
        assert!(close(&y, &[0.64, 0.22, 0.14], 0.005), "{y:?}");
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        for t in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(softmax_t(&[1.0, 2.0], t), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let y = softmax_t(&[1000.0, 999.0, -1000.0], 1.0).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        let t = one_hot(5, 0);
        assert_eq!(cross_entropy(&[1.0, 0.0, 0.0, 0.0, 0.0], &t).unwrap(), 0.0);
        let uniform = [0.2; 5];
        assert!((cross_entropy(&uniform, &t).unwrap() - 5f64.ln()).abs() < 1e-12);
        // clamped rather than infinite
        let l = cross_entropy(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((l + LOG_FLOOR.ln()).abs() < 1e-9);
        assert!(cross_entropy(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn cross_entropy_matches_negative_log_of_true_class() {
        let mut rng = seeded_rng(21);
        for k in 0..50 {
            let raw: Vec<f64> = (0..5).map(|_| rand::Rng::gen::<f64>(&mut rng) + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            let y: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let class = k % 5;
            let loss = cross_entropy(&y, &one_hot(5, class)).unwrap();
            assert!((loss - (-y[class].ln())).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_ce_backward_examples() {
        let g = softmax_ce_backward(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!(close(&g, &[-0.5, 0.5], 1e-15));

        let z = [0.3, -1.2, 2.0];
        let t = softmax_t(&z, 2.0).unwrap();
        let g = softmax_ce_backward(&z, &t, 2.0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));

        assert!(matches!(
            softmax_ce_backward(&z, &[0.5, 0.2, 0.2], 1.0),
            Err(Error::Parameter(_))
        ));
        assert!(softmax_ce_backward(&z, &[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn softmax_ce_backward_matches_finite_differences() {
        let mut rng = seeded_rng(34);
        for i in 0..20 {
            let z: Vec<f64> = (0..5).map(|_| uniform_symmetric(3.0, &mut rng)).collect();
            let temperature = [1.0, 2.0, 3.0, 0.5][i % 4];
            let t = if i % 2 == 0 {
                one_hot(5, i % 5)
            } else {
                let raw: Vec<f64> = (0..5).map(|_| rand::Rng::gen::<f64>(&mut rng) + 0.01).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            };
            let analytic = softmax_ce_backward(&z, &t, temperature).unwrap();
            let numeric = central_difference(
                |zd| cross_entropy(&softmax_t(zd, temperature).unwrap(), &t).unwrap(),
                &z,
                STEP,
            );
            assert!(max_relative_error(&analytic, &numeric) < TOLERANCE);
        }
    }

    #[test]
    fn dropout_examples() {
        let mut rng = seeded_rng(1);
        assert_eq!(dropout_mask(7, 0.0, &mut rng).unwrap(), vec![1.0; 7]);

        let mask = dropout_mask(100_000, 0.5, &mut seeded_rng(99)).unwrap();
        let zeros = mask.iter().filter(|&&m| m == 0.0).count() as f64 / 1e5;
        assert!((0.495..=0.505).contains(&zeros), "{zeros}");
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));

        let again = dropout_mask(100_000, 0.5, &mut seeded_rng(99)).unwrap();
        assert_eq!(mask, again);

        for bad in [1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(dropout_mask(3, bad, &mut rng), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn dropout_mask_has_unit_mean() {
        let mask = dropout_mask(200_000, 0.3, &mut seeded_rng(5)).unwrap();
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    fn logits() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-20.0f64..20.0, 1..8)
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_permutation_equivariant(z in logits(), t in 0.1f64..10.0, rot in 0usize..8) {
            let y = softmax_t(&z, t).unwrap();
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let k = rot % z.len();
            let mut zr = z.clone();
            zr.rotate_left(k);
            let mut yr = y.clone();
            yr.rotate_left(k);
            let y2 = softmax_t(&zr, t).unwrap();
            prop_assert!(close(&y2, &yr, 1e-12));
        }

        #[test]
        fn softmax_is_shift_invariant(z in logits(), t in 0.1f64..10.0, c in -100.0f64..100.0) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            prop_assert!(close(&softmax_t(&z, t).unwrap(), &softmax_t(&shifted, t).unwrap(), 1e-6));
        }

        #[test]
        fn softmax_preserves_argmax(z in logits(), t in 0.05f64..50.0) {
            prop_assert_eq!(argmax(&softmax_t(&z, t).unwrap()), argmax(&z));
        }

        #[test]
        fn peak_probability_falls_with_temperature(z in logits()) {
            let peaks: Vec<f64> = [1.0, 2.0, 3.0, 5.0, 10.0]
                .iter()
                .map(|&t| softmax_t(&z, t).unwrap().into_iter().fold(0.0, f64::max))
                .collect();
            for w in peaks.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
