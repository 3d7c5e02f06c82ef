//! Cross-modal channel filtering: instance normalization, second-moment
//! statistics, cross-modal covariance of those statistics, masking of the
//! most modality-sensitive channel pairs, and the filter loss over the
//! masked entries.

use ndarray::Array2;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sample has zero rows")]
    ZeroRows,
    #[error("channel count mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("batch size mismatch: {0} vs {1}")]
    BatchMismatch(usize, usize),
    #[error("iteration count mismatch: {0} vs {1}")]
    IterationMismatch(usize, usize),
    #[error("iteration count must be >= 1")]
    ZeroIterations,
    #[error("eps must be positive")]
    BadEps,
    #[error("need at least 2 channels to mask pairs")]
    TooFewChannels,
}

/// B feature matrices of one modality sharing a channel count. Image samples
/// are flattened to (H·W)×C, point samples are N×C.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBatch {
    samples: Vec<Array2<f64>>,
}

impl ModalityBatch {
    pub fn new(samples: Vec<Array2<f64>>) -> Result<Self, FilterError> {
        if samples.is_empty() {
            return Err(FilterError::EmptyBatch);
        }
        let c = samples[0].dim().1;
        for s in &samples {
            if s.dim().0 == 0 {
                return Err(FilterError::ZeroRows);
            }
            if s.dim().1 != c {
                return Err(FilterError::ChannelMismatch(c, s.dim().1));
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.samples[0].dim().1
    }

    pub fn samples(&self) -> &[Array2<f64>] {
        &self.samples
    }
}

/// C×C matrix (1/n)·F̂ᵀF̂ of an instance-normalized sample; symmetric by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMomentMatrix {
    pub values: Array2<f64>,
}

/// Elementwise spread of the per-sample second moments across the two
/// modalities; every entry is a mean of squares, hence nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossModalCovariance {
    pub values: Array2<f64>,
}

/// Binary C×C mask whose support lies in the strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMask {
    pub values: Array2<f64>,
}

impl ChannelMask {
    /// Masked (i, j) pairs in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let (r, c) = self.values.dim();
        let mut out = Vec::new();
        for i in 0..r {
            for j in 0..c {
                if self.values[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Normalizes each channel to zero mean and unit spread over the sample's
/// rows: `(x - mean) / (std + eps)` with the population std convention.
/// A constant channel maps to zeros.
pub fn instance_normalize(sample: &Array2<f64>, eps: f64) -> Result<Array2<f64>, FilterError> {
    if !(eps > 0.0) {
        return Err(FilterError::BadEps);
    }
    let (n, c) = sample.dim();
    if n == 0 {
        return Err(FilterError::ZeroRows);
    }
    let mut out = sample.clone();
    for t in 0..c {
        let col = sample.column(t);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let denom = var.sqrt() + eps;
        for i in 0..n {
            out[[i, t]] = (sample[[i, t]] - mean) / denom;
        }
    }
    Ok(out)
}

/// (1/rows)·F̂ᵀF̂ of a normalized sample.
pub fn second_moment(normalized: &Array2<f64>) -> Result<SecondMomentMatrix, FilterError> {
    let (n, _c) = normalized.dim();
    if n == 0 {
        return Err(FilterError::ZeroRows);
    }
    let values = normalized.t().dot(normalized) / n as f64;
    Ok(SecondMomentMatrix { values })
}

/// Elementwise covariance of the two modalities' second-moment batches:
/// `mu = (1/2B) sum_b (V_I(b) + V_P(b))`,
/// `Cov = (1/2B) sum_b ((V_I(b) - mu)^2 + (V_P(b) - mu)^2)`.
pub fn cross_modal_covariance(
    v_image: &[SecondMomentMatrix],
    v_point: &[SecondMomentMatrix],
) -> Result<CrossModalCovariance, FilterError> {
    if v_image.is_empty() {
        return Err(FilterError::EmptyBatch);
    }
    if v_image.len() != v_point.len() {
        return Err(FilterError::BatchMismatch(v_image.len(), v_point.len()));
    }
    let dim = v_image[0].values.dim();
    for m in v_image.iter().chain(v_point.iter()) {
        if m.values.dim() != dim {
            return Err(FilterError::ChannelMismatch(dim.0, m.values.dim().0));
        }
    }
    let b = v_image.len() as f64;
    let mut mu = Array2::<f64>::zeros(dim);
    for m in v_image.iter().chain(v_point.iter()) {
        mu = mu + &m.values;
    }
    mu /= 2.0 * b;
    let mut cov = Array2::<f64>::zeros(dim);
    for (vi, vp) in v_image.iter().zip(v_point.iter()) {
        let di = &vi.values - &mu;
        let dp = &vp.values - &mu;
        cov = cov + &di * &di + &dp * &dp;
    }
    cov /= 2.0 * b;
    Ok(CrossModalCovariance { values: cov })
}

/// Splits the covariance value range into three equal-width groups and masks
/// entries in the highest group, restricted to the strict upper triangle.
/// An all-equal covariance (width ~ 0) yields the empty mask.
pub fn build_mask(cov: &CrossModalCovariance) -> Result<ChannelMask, FilterError> {
    let (r, c) = cov.values.dim();
    if r < 2 || c < 2 {
        return Err(FilterError::TooFewChannels);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in cov.values.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let width = hi - lo;
    let degenerate = !(width > 1e-12 * lo.abs().max(hi.abs()).max(1.0));
    let threshold = lo + 2.0 * width / 3.0;
    let mut values = Array2::zeros((r, c));
    if !degenerate {
        for i in 0..r {
            for j in (i + 1)..c {
                if cov.values[[i, j]] >= threshold {
                    values[[i, j]] = 1.0;
                }
            }
        }
    }
    Ok(ChannelMask { values })
}

/// Mean over iterations of the masked L1 mass of both modalities' moments:
/// `L_f = (1/X) sum_x (||V_I^x . M_x||_1 + ||V_P^x . M_x||_1)`.
pub fn filter_loss(
    v_image: &[SecondMomentMatrix],
    v_point: &[SecondMomentMatrix],
    masks: &[ChannelMask],
) -> Result<f64, FilterError> {
    let x = masks.len();
    if x == 0 {
        return Err(FilterError::ZeroIterations);
    }
    if v_image.len() != x || v_point.len() != x {
        return Err(FilterError::IterationMismatch(v_image.len(), x));
    }
    let mut total = 0.0;
    for i in 0..x {
        total += masked_l1(&v_image[i].values, &masks[i].values)?;
        total += masked_l1(&v_point[i].values, &masks[i].values)?;
    }
    Ok(total / x as f64)
}

fn masked_l1(m: &Array2<f64>, mask: &Array2<f64>) -> Result<f64, FilterError> {
    if m.dim() != mask.dim() {
        return Err(FilterError::ChannelMismatch(m.dim().0, mask.dim().0));
    }
    Ok(m.iter().zip(mask.iter()).map(|(v, k)| v.abs() * k).sum())
}

/// Gradient of [`filter_loss`] with respect to one iteration's moment
/// entries, holding the masks fixed: `(1/X)·M[i,j]·sign(V[i,j])`.
pub fn filter_loss_grad(
    moments: &SecondMomentMatrix,
    mask: &ChannelMask,
    iterations: usize,
) -> Array2<f64> {
    let mut grad = Array2::zeros(moments.values.dim());
    for ((g, &v), &m) in grad
        .iter_mut()
        .zip(moments.values.iter())
        .zip(mask.values.iter())
    {
        *g = m * v.signum() / iterations as f64;
    }
    grad
}

/// Settings for the full filtering stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmcfConfig {
    pub iterations: usize,
    pub fuse_weight: f64,
    pub eps: f64,
}

impl Default for CmcfConfig {
    fn default() -> Self {
        Self {
            iterations: 1,
            fuse_weight: 0.5,
            eps: 1e-5,
        }
    }
}

/// Per-iteration record of what the filter saw and did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiag {
    pub masked_pairs: Vec<(usize, usize)>,
    pub cov_min: f64,
    pub cov_max: f64,
    pub loss_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmcfDiagnostics {
    pub iterations: Vec<IterationDiag>,
    pub loss: f64,
}

impl fmt::Display for CmcfDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iter masked_pairs cov_min cov_max loss_term")?;
        for (i, d) in self.iterations.iter().enumerate() {
            let pairs: Vec<String> = d
                .masked_pairs
                .iter()
                .map(|(a, b)| format!("{a}-{b}"))
                .collect();
            let pairs = if pairs.is_empty() {
                "-".to_string()
            } else {
                pairs.join(",")
            };
            writeln!(
                f,
                "{} {} {:.6e} {:.6e} {:.6e}",
                i + 1,
                pairs,
                d.cov_min,
                d.cov_max,
                d.loss_term
            )?;
        }
        writeln!(f, "filter_loss {:.6e}", self.loss)
    }
}

/// Output of the filtering stage: fused features per sample for both
/// modalities, the filter loss, and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcfOutput {
    pub image: Vec<Array2<f64>>,
    pub point: Vec<Array2<f64>>,
    pub loss: f64,
    pub diagnostics: CmcfDiagnostics,
}

/// Removes the co-activation of masked channel pairs: for each masked (i, j),
/// the least-squares component of channel j explained by channel i is
/// subtracted, sequentially in row-major pair order.
fn suppress_pairs(sample: &mut Array2<f64>, pairs: &[(usize, usize)]) {
    let n = sample.dim().0;
    for &(i, j) in pairs {
        let mut dot_ij = 0.0;
        let mut dot_ii = 0.0;
        for r in 0..n {
            dot_ij += sample[[r, i]] * sample[[r, j]];
            dot_ii += sample[[r, i]] * sample[[r, i]];
        }
        if dot_ii <= f64::EPSILON {
            continue;
        }
        let rho = dot_ij / dot_ii;
        for r in 0..n {
            let vi = sample[[r, i]];
            sample[[r, j]] -= rho * vi;
        }
    }
}

/// Full cross-modal filtering: per iteration, instance-normalize both
/// batches, compute per-sample second moments, build the covariance mask,
/// and suppress the masked channel pairs; finally fuse the filtered features
/// with the originals as `fuse_weight·filtered + (1−fuse_weight)·original`.
///
/// The loss is accumulated from the batch-mean second moments recorded
/// before suppression.
pub fn cmcf_apply(
    image: &ModalityBatch,
    point: &ModalityBatch,
    config: &CmcfConfig,
) -> Result<CmcfOutput, FilterError> {
    if config.iterations == 0 {
        return Err(FilterError::ZeroIterations);
    }
    if image.len() != point.len() {
        return Err(FilterError::BatchMismatch(image.len(), point.len()));
    }
    if image.channels() != point.channels() {
        return Err(FilterError::ChannelMismatch(
            image.channels(),
            point.channels(),
        ));
    }

    let mut cur_image: Vec<Array2<f64>> = image.samples().to_vec();
    let mut cur_point: Vec<Array2<f64>> = point.samples().to_vec();
    let mut mean_v_image = Vec::new();
    let mut mean_v_point = Vec::new();
    let mut masks = Vec::new();
    let mut diags = Vec::new();

    for _ in 0..config.iterations {
        let norm_image: Vec<Array2<f64>> = cur_image
            .iter()
            .map(|s| instance_normalize(s, config.eps))
            .collect::<Result<_, _>>()?;
        let norm_point: Vec<Array2<f64>> = cur_point
            .iter()
            .map(|s| instance_normalize(s, config.eps))
            .collect::<Result<_, _>>()?;
        let v_image: Vec<SecondMomentMatrix> = norm_image
            .iter()
            .map(second_moment)
            .collect::<Result<_, _>>()?;
        let v_point: Vec<SecondMomentMatrix> = norm_point
            .iter()
            .map(second_moment)
            .collect::<Result<_, _>>()?;
        let cov = cross_modal_covariance(&v_image, &v_point)?;
        let mask = build_mask(&cov)?;
        let pairs = mask.pairs();

        let mut filtered_image = norm_image;
        let mut filtered_point = norm_point;
        for s in filtered_image.iter_mut().chain(filtered_point.iter_mut()) {
            suppress_pairs(s, &pairs);
        }

        let vi_mean = batch_mean(&v_image);
        let vp_mean = batch_mean(&v_point);
        let loss_term = masked_l1(&vi_mean.values, &mask.values)?
            + masked_l1(&vp_mean.values, &mask.values)?;
        let (cov_min, cov_max) = cov
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        diags.push(IterationDiag {
            masked_pairs: pairs,
            cov_min,
            cov_max,
            loss_term,
        });
        mean_v_image.push(vi_mean);
        mean_v_point.push(vp_mean);
        masks.push(mask);

        cur_image = filtered_image;
        cur_point = filtered_point;
    }

    let loss = filter_loss(&mean_v_image, &mean_v_point, &masks)?;
    let w = config.fuse_weight;
    let fused_image: Vec<Array2<f64>> = cur_image
        .iter()
        .zip(image.samples())
        .map(|(filt, orig)| filt * w + orig * (1.0 - w))
        .collect();
    let fused_point: Vec<Array2<f64>> = cur_point
        .iter()
        .zip(point.samples())
        .map(|(filt, orig)| filt * w + orig * (1.0 - w))
        .collect();
    Ok(CmcfOutput {
        image: fused_image,
        point: fused_point,
        loss,
        diagnostics: CmcfDiagnostics {
            iterations: diags,
            loss,
        },
    })
}

fn batch_mean(ms: &[SecondMomentMatrix]) -> SecondMomentMatrix {
    let mut acc = Array2::<f64>::zeros(ms[0].values.dim());
    for m in ms {
        acc = acc + &m.values;
    }
    SecondMomentMatrix {
        values: acc / ms.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_constant_channel_is_zero() {
        let s = array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]];
        let out = instance_normalize(&s, 1e-5).unwrap();
        assert!(out.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_two_values_population_std() {
        let s = array![[1.0], [3.0]];
        let out = instance_normalize(&s, 1e-5).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], -1.0, epsilon = 2e-5);
        assert_abs_diff_eq!(out[[1, 0]], 1.0, epsilon = 2e-5);
    }

    #[test]
    fn normalize_idempotent_on_normalized_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = Array2::from_shape_fn((64, 3), |_| rng.random::<f64>() * 4.0 - 2.0);
        let once = instance_normalize(&raw, 1e-8).unwrap();
        let twice = instance_normalize(&once, 1e-8).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn normalized_channels_are_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = Array2::from_shape_fn((50, 4), |_| rng.random::<f64>() * 10.0);
        let out = instance_normalize(&raw, 1e-5).unwrap();
        for t in 0..4 {
            let mean = out.column(t).sum() / 50.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn second_moment_orthonormal_columns() {
        // Columns orthogonal with norm sqrt(n) give the identity.
        let n = 4;
        let f = array![
            [1.0, 1.0],
            [1.0, -1.0],
            [-1.0, 1.0],
            [-1.0, -1.0]
        ];
        let m = second_moment(&f).unwrap();
        let eye = Array2::eye(2);
        for (a, b) in m.values.iter().zip(eye.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let _ = n;
    }

    #[test]
    fn second_moment_identity_rows() {
        let f = array![[1.0, 0.0], [0.0, 1.0]];
        let m = second_moment(&f).unwrap();
        assert_eq!(m.values, array![[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn second_moment_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Array2::from_shape_fn((7, 5), |_| rng.random::<f64>());
        let m = second_moment(&f).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.values[[i, j]], m.values[[j, i]]);
            }
        }
    }

    #[test]
    fn covariance_zero_for_identical_equal_batches() {
        let v = SecondMomentMatrix {
            values: array![[1.0, 0.2], [0.2, 1.0]],
        };
        let cov = cross_modal_covariance(
            &[v.clone(), v.clone()],
            &[v.clone(), v.clone()],
        )
        .unwrap();
        assert!(cov.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn covariance_scalar_hand_case() {
        let vi = SecondMomentMatrix { values: array![[2.0]] };
        let vp = SecondMomentMatrix { values: array![[0.0]] };
        let cov = cross_modal_covariance(&[vi], &[vp]).unwrap();
        assert_eq!(cov.values[[0, 0]], 1.0);
    }

    #[test]
    fn covariance_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mk = |rng: &mut ChaCha8Rng| SecondMomentMatrix {
            values: Array2::from_shape_fn((3, 3), |_| rng.random::<f64>()),
        };
        let vi = vec![mk(&mut rng), mk(&mut rng)];
        let vp = vec![mk(&mut rng), mk(&mut rng)];
        let cov = cross_modal_covariance(&vi, &vp).unwrap();

        // Brute-force loop over batch entries.
        let b = 2;
        for i in 0..3 {
            for j in 0..3 {
                let mut mu = 0.0;
                for k in 0..b {
                    mu += vi[k].values[[i, j]] + vp[k].values[[i, j]];
                }
                mu /= 2.0 * b as f64;
                let mut c = 0.0;
                for k in 0..b {
                    c += (vi[k].values[[i, j]] - mu).powi(2)
                        + (vp[k].values[[i, j]] - mu).powi(2);
                }
                c /= 2.0 * b as f64;
                assert_abs_diff_eq!(cov.values[[i, j]], c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mask_selects_top_interval_upper_triangle() {
        let cov = CrossModalCovariance {
            values: array![[0.1, 0.9], [0.9, 0.5]],
        };
        let mask = build_mask(&cov).unwrap();
        assert_eq!(mask.values, array![[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(mask.pairs(), vec![(0, 1)]);
    }

    #[test]
    fn mask_constant_covariance_is_empty() {
        let cov = CrossModalCovariance {
            values: Array2::from_elem((3, 3), 0.7),
        };
        let mask = build_mask(&cov).unwrap();
        assert!(mask.is_empty());
    }

    #[test]
    fn mask_diagonal_top_entries_excluded() {
        // Only diagonal entries reach the top interval.
        let cov = CrossModalCovariance {
            values: array![[1.0, 0.1], [0.1, 1.0]],
        };
        let mask = build_mask(&cov).unwrap();
        assert!(mask.is_empty());
    }

    #[test]
    fn filter_loss_hand_case() {
        let vi = SecondMomentMatrix {
            values: array![[0.0, 0.3], [0.3, 0.0]],
        };
        let vp = SecondMomentMatrix {
            values: array![[0.0, -0.2], [-0.2, 0.0]],
        };
        let mask = ChannelMask {
            values: array![[0.0, 1.0], [0.0, 0.0]],
        };
        let l = filter_loss(&[vi], &[vp], &[mask]).unwrap();
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn filter_loss_zero_masks() {
        let vi = SecondMomentMatrix {
            values: array![[1.0, 1.0], [1.0, 1.0]],
        };
        let mask = ChannelMask {
            values: Array2::zeros((2, 2)),
        };
        assert_eq!(filter_loss(&[vi.clone()], &[vi], &[mask]).unwrap(), 0.0);
    }

    #[test]
    fn cmcf_identical_batches_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Array2::from_shape_fn((20, 4), |_| rng.random::<f64>());
        let image = ModalityBatch::new(vec![s.clone()]).unwrap();
        let point = ModalityBatch::new(vec![s]).unwrap();
        let out = cmcf_apply(&image, &point, &CmcfConfig::default()).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.diagnostics.iterations[0].masked_pairs.is_empty());
    }

    #[test]
    fn cmcf_fuse_weight_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = Array2::from_shape_fn((10, 3), |_| rng.random::<f64>());
        let b = Array2::from_shape_fn((12, 3), |_| rng.random::<f64>());
        let image = ModalityBatch::new(vec![a.clone()]).unwrap();
        let point = ModalityBatch::new(vec![b.clone()]).unwrap();
        let cfg = CmcfConfig {
            fuse_weight: 0.0,
            ..CmcfConfig::default()
        };
        let out = cmcf_apply(&image, &point, &cfg).unwrap();
        assert_eq!(out.image[0], a);
        assert_eq!(out.point[0], b);
    }

    #[test]
    fn cmcf_dominant_pair_is_masked() {
        // Craft a batch where image channels 0 and 1 are strongly coupled but
        // the point channels are independent: the (0,1) covariance dominates.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let mut img = Array2::zeros((n, 3));
        let mut pnt = Array2::zeros((n, 3));
        for r in 0..n {
            let a: f64 = rng.random::<f64>() * 2.0 - 1.0;
            img[[r, 0]] = a;
            img[[r, 1]] = a; // perfectly correlated pair
            img[[r, 2]] = rng.random::<f64>() * 2.0 - 1.0;
            pnt[[r, 0]] = rng.random::<f64>() * 2.0 - 1.0;
            pnt[[r, 1]] = rng.random::<f64>() * 2.0 - 1.0;
            pnt[[r, 2]] = rng.random::<f64>() * 2.0 - 1.0;
        }
        let image = ModalityBatch::new(vec![img]).unwrap();
        let point = ModalityBatch::new(vec![pnt]).unwrap();
        let out = cmcf_apply(&image, &point, &CmcfConfig::default()).unwrap();
        assert!(out.diagnostics.iterations[0]
            .masked_pairs
            .contains(&(0, 1)));
        assert!(out.loss > 0.0);
    }

    proptest! {
        #[test]
        fn covariance_entries_nonnegative(seed in 0u64..100, b in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mk = |rng: &mut ChaCha8Rng| SecondMomentMatrix {
                values: Array2::from_shape_fn((3, 3), |_| rng.random::<f64>() * 4.0 - 2.0),
            };
            let vi: Vec<_> = (0..b).map(|_| mk(&mut rng)).collect();
            let vp: Vec<_> = (0..b).map(|_| mk(&mut rng)).collect();
            let cov = cross_modal_covariance(&vi, &vp).unwrap();
            prop_assert!(cov.values.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn mask_support_strictly_upper(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>());
            let sym = (&raw + &raw.t()) / 2.0;
            let mask = build_mask(&CrossModalCovariance { values: sym }).unwrap();
            for i in 0..4 {
                for j in 0..=i {
                    prop_assert_eq!(mask.values[[i, j]], 0.0);
                }
            }
        }

        #[test]
        fn filter_loss_homogeneous(seed in 0u64..50, scale in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vi = SecondMomentMatrix {
                values: Array2::from_shape_fn((3, 3), |_| rng.random::<f64>() - 0.5),
            };
            let vp = SecondMomentMatrix {
                values: Array2::from_shape_fn((3, 3), |_| rng.random::<f64>() - 0.5),
            };
            let mut mask = Array2::zeros((3, 3));
            mask[[0, 1]] = 1.0;
            mask[[1, 2]] = 1.0;
            let mask = ChannelMask { values: mask };
            let l1 = filter_loss(&[vi.clone()], &[vp.clone()], &[mask.clone()]).unwrap();
            let scaled_i = SecondMomentMatrix { values: &vi.values * scale };
            let scaled_p = SecondMomentMatrix { values: &vp.values * scale };
            let l2 = filter_loss(&[scaled_i], &[scaled_p], &[mask]).unwrap();
            prop_assert!((l2 - scale * l1).abs() < 1e-9 * (1.0 + l1.abs()));
        }
    }
}
