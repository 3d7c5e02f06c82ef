//! Intra-modal channel enhancement: rotation-branch attention for image
//! features (ICE), channel self-attention for point features (PCE), and
//! residual fusion of enhanced with original features.

use ndarray::{Array2, Array3, ArrayD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("empty tensor")]
    EmptyTensor,
    #[error("kernel must be (2, k, k) with k odd, got {0:?}")]
    BadKernelShape(Vec<usize>),
    #[error("non-finite parameter")]
    NonFiniteParam,
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("projection is {got}x{got2}, features have {expected} channels")]
    ProjectionMismatch {
        expected: usize,
        got: usize,
        got2: usize,
    },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
}

/// Image enhancement parameters: one (2, k, k) convolution kernel and one
/// affine normalization (scale, shift) per rotation branch.
#[derive(Debug, Clone, PartialEq)]
pub struct IceParams {
    pub kernels: [Array3<f64>; 3],
    pub norm: [(f64, f64); 3],
    pub kernel_size: usize,
}

impl IceParams {
    pub fn new(kernels: [Array3<f64>; 3], norm: [(f64, f64); 3]) -> Result<Self, EnhanceError> {
        let k = kernels[0].dim().1;
        for ker in &kernels {
            let (planes, kh, kw) = ker.dim();
            if planes != 2 || kh != k || kw != k || k % 2 == 0 {
                return Err(EnhanceError::BadKernelShape(ker.shape().to_vec()));
            }
            if ker.iter().any(|v| !v.is_finite()) {
                return Err(EnhanceError::NonFiniteParam);
            }
        }
        if norm.iter().any(|(s, b)| !s.is_finite() || !b.is_finite()) {
            return Err(EnhanceError::NonFiniteParam);
        }
        Ok(Self {
            kernels,
            norm,
            kernel_size: k,
        })
    }

    /// All-zero kernels and shifts: every attention value is sigmoid(0) = 0.5.
    pub fn zeros(kernel_size: usize) -> Result<Self, EnhanceError> {
        let z = || Array3::zeros((2, kernel_size, kernel_size));
        Self::new([z(), z(), z()], [(1.0, 0.0); 3])
    }

    /// Seeded Gaussian kernels with identity normalization, for reproducible
    /// runs without learned parameters.
    pub fn seeded(kernel_size: usize, sigma: f64, seed: u64) -> Result<Self, EnhanceError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|_| EnhanceError::NonFiniteParam)?;
        let mut gen = || Array3::from_shape_fn((2, kernel_size, kernel_size), |_| normal.sample(&mut rng));
        Self::new([gen(), gen(), gen()], [(1.0, 0.0); 3])
    }
}

/// Point enhancement parameters: C×C query/key/value projections and the
/// attention scale factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PceParams {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub scale: f64,
}

impl PceParams {
    pub fn new(
        w_q: Array2<f64>,
        w_k: Array2<f64>,
        w_v: Array2<f64>,
        scale: f64,
    ) -> Result<Self, EnhanceError> {
        for w in [&w_q, &w_k, &w_v] {
            if w.dim() != w_q.dim() || w.dim().0 != w.dim().1 {
                return Err(EnhanceError::ProjectionMismatch {
                    expected: w_q.dim().0,
                    got: w.dim().0,
                    got2: w.dim().1,
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(EnhanceError::NonFiniteParam);
            }
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(EnhanceError::BadScale(scale));
        }
        Ok(Self { w_q, w_k, w_v, scale })
    }

    /// Identity projections with the default scale C^-0.5.
    pub fn identity(channels: usize) -> Result<Self, EnhanceError> {
        let eye = Array2::eye(channels);
        Self::new(eye.clone(), eye.clone(), eye, (channels as f64).powf(-0.5))
    }

    /// Seeded Gaussian projections scaled like a standard linear init.
    pub fn seeded(channels: usize, seed: u64) -> Result<Self, EnhanceError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (channels as f64).sqrt()).expect("valid sigma");
        let mut gen = || Array2::from_shape_fn((channels, channels), |_| normal.sample(&mut rng));
        Self::new(gen(), gen(), gen(), (channels as f64).powf(-0.5))
    }
}

/// Residual mixing coefficients: `alpha`/`beta` weight the image original and
/// enhanced features, `lambda`/`mu` the point features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl FusionParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64, mu: f64) -> Result<Self, EnhanceError> {
        if ![alpha, beta, lambda, mu].iter().all(|v| v.is_finite()) {
            return Err(EnhanceError::NonFiniteParam);
        }
        Ok(Self { alpha, beta, lambda, mu })
    }

    pub fn image_weights(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn point_weights(&self) -> (f64, f64) {
        (self.lambda, self.mu)
    }
}

impl Default for FusionParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.5, lambda: 1.0, mu: 0.5 }
    }
}

/// Stacked max-and-mean pooling over the leading dimension: output has
/// leading dimension 2 (slice 0 = max, slice 1 = mean), trailing shape
/// preserved.
pub fn go_pool(t: &ArrayD<f64>) -> Result<ArrayD<f64>, EnhanceError> {
    if t.shape().is_empty() || t.shape()[0] == 0 || t.len() == 0 {
        return Err(EnhanceError::EmptyTensor);
    }
    let maxed = t.map_axis(Axis(0), |lane| {
        lane.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    });
    let meaned = t.map_axis(Axis(0), |lane| {
        lane.iter().sum::<f64>() / lane.len() as f64
    });
    let mut shape = vec![2];
    shape.extend_from_slice(maxed.shape());
    let mut out = ArrayD::zeros(shape);
    out.index_axis_mut(Axis(0), 0).assign(&maxed);
    out.index_axis_mut(Axis(0), 1).assign(&meaned);
    Ok(out)
}

fn go_pool3(t: &Array3<f64>) -> Array3<f64> {
    let (_, a, b) = t.dim();
    let mut out = Array3::zeros((2, a, b));
    for i in 0..a {
        for j in 0..b {
            let mut mx = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for d in 0..t.dim().0 {
                let v = t[[d, i, j]];
                mx = mx.max(v);
                sum += v;
            }
            out[[0, i, j]] = mx;
            out[[1, i, j]] = sum / t.dim().0 as f64;
        }
    }
    out
}

/// Same-padding 2D convolution of a (2, a, b) tensor with a (2, k, k) kernel
/// down to a single (a, b) plane. Borders are zero-padded.
fn conv2d_same(input: &Array3<f64>, kernel: &Array3<f64>) -> Array2<f64> {
    let (planes, a, b) = input.dim();
    let k = kernel.dim().1;
    let half = (k / 2) as isize;
    let mut out = Array2::zeros((a, b));
    for y in 0..a as isize {
        for x in 0..b as isize {
            let mut acc = 0.0;
            for p in 0..planes {
                for dy in 0..k as isize {
                    for dx in 0..k as isize {
                        let sy = y + dy - half;
                        let sx = x + dx - half;
                        if sy >= 0 && sy < a as isize && sx >= 0 && sx < b as isize {
                            acc += input[[p, sy as usize, sx as usize]]
                                * kernel[[p, dy as usize, dx as usize]];
                        }
                    }
                }
            }
            out[[y as usize, x as usize]] = acc;
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// 90° counterclockwise rotation in the (axis0, axis1) plane:
/// (p, q, r) -> (q, p, r). Four applications are the identity.
pub(crate) fn rotate01(t: &Array3<f64>) -> Array3<f64> {
    let (p, q, r) = t.dim();
    Array3::from_shape_fn((q, p, r), |(i, j, k)| t[[j, q - 1 - i, k]])
}

pub(crate) fn unrotate01(t: &Array3<f64>) -> Array3<f64> {
    let (q, p, r) = t.dim();
    Array3::from_shape_fn((p, q, r), |(a, b, k)| t[[q - 1 - b, a, k]])
}

/// 90° counterclockwise rotation in the (axis0, axis2) plane:
/// (p, q, r) -> (r, q, p).
pub(crate) fn rotate02(t: &Array3<f64>) -> Array3<f64> {
    let (p, q, r) = t.dim();
    Array3::from_shape_fn((r, q, p), |(i, j, k)| t[[k, j, r - 1 - i]])
}

pub(crate) fn unrotate02(t: &Array3<f64>) -> Array3<f64> {
    let (r, q, p) = t.dim();
    Array3::from_shape_fn((p, q, r), |(a, b, c)| t[[r - 1 - c, b, a]])
}

/// One attention branch: pool the leading dimension, convolve, normalize,
/// squash to (0,1), and rescale the input elementwise.
fn ice_branch(t: &Array3<f64>, kernel: &Array3<f64>, norm: (f64, f64)) -> Array3<f64> {
    let pooled = go_pool3(t);
    let conv = conv2d_same(&pooled, kernel);
    let att = conv.mapv(|v| sigmoid(norm.0 * v + norm.1));
    let (d0, a, b) = t.dim();
    let mut out = Array3::zeros((d0, a, b));
    for d in 0..d0 {
        for i in 0..a {
            for j in 0..b {
                out[[d, i, j]] = t[[d, i, j]] * att[[i, j]];
            }
        }
    }
    out
}

/// Image Channel Enhancement: averages three attention branches — unrotated,
/// rotated to interact channels with height, and rotated to interact channels
/// with width — each rotated back before averaging. Input and output are
/// (C, H, W).
pub fn ice_forward(features: &Array3<f64>, params: &IceParams) -> Result<Array3<f64>, EnhanceError> {
    if features.len() == 0 {
        return Err(EnhanceError::EmptyTensor);
    }
    let b1 = ice_branch(features, &params.kernels[0], params.norm[0]);
    let b2 = unrotate01(&ice_branch(&rotate01(features), &params.kernels[1], params.norm[1]));
    let b3 = unrotate02(&ice_branch(&rotate02(features), &params.kernels[2], params.norm[2]));
    Ok((b1 + b2 + b3) / 3.0)
}

/// Point Channel Enhancement: project to query/key/value, form a row-softmax
/// attention matrix from scaled inner products, and mix the values.
pub fn pce_forward(features: &Array2<f64>, params: &PceParams) -> Result<Array2<f64>, EnhanceError> {
    let (n, c) = features.dim();
    if n == 0 || c == 0 {
        return Err(EnhanceError::EmptyTensor);
    }
    if params.w_q.dim().0 != c {
        return Err(EnhanceError::ProjectionMismatch {
            expected: c,
            got: params.w_q.dim().0,
            got2: params.w_q.dim().1,
        });
    }
    let q = features.dot(&params.w_q);
    let k = features.dot(&params.w_k);
    let v = features.dot(&params.w_v);
    let factor = params.scale / (c as f64).sqrt();
    let logits = q.dot(&k.t()) * factor;
    let attention = row_softmax(&logits);
    Ok(attention.dot(&v))
}

/// Rowwise softmax with max-shift for stability; every output row sums to 1.
pub fn row_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Weighted residual mix `w0 * original + w1 * enhanced`; shapes must agree.
pub fn residual_fuse<D: ndarray::Dimension>(
    original: &ndarray::Array<f64, D>,
    enhanced: &ndarray::Array<f64, D>,
    weights: (f64, f64),
) -> Result<ndarray::Array<f64, D>, EnhanceError> {
    if original.shape() != enhanced.shape() {
        return Err(EnhanceError::ShapeMismatch(
            original.shape().to_vec(),
            enhanced.shape().to_vec(),
        ));
    }
    Ok(original * weights.0 + enhanced * weights.1)
}
