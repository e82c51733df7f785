//! Feature distribution matching: move a source sample set onto the mean and
//! covariance of a target sample set while keeping the per-sample layout.
//!
//! With source stats `(m_s, U_s, S_s)` and target stats `(m_t, U_t, S_t)` the
//! map is
//!
//! ```text
//! F_out = (F_s - m_s) * U_s * S_s^(-1/2) * S_t^(1/2) * U_t^T + m_t
//! ```
//!
//! i.e. PCA whitening of the centered source, recoloring with the target
//! spectrum and a shift to the target mean. The three middle factors are
//! folded into one `c x c` matrix before touching the samples.

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::stats::{compute_stats, ChannelStats, FeatureMatrix, Matrix};
use crate::tensor::FeatureTensor;

/// Affine map `x -> (x - source_mean) * linear + target_mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmTransform {
    pub source_mean: Vec<f64>,
    pub linear: Matrix,
    pub target_mean: Vec<f64>,
}

impl FdmTransform {
    pub fn from_stats(source: &ChannelStats, target: &ChannelStats) -> Result<Self> {
        check_channels(source.n_channels(), target.n_channels())?;
        let ratio: Vec<f64> = source
            .eigenvalues()
            .iter()
            .zip(target.eigenvalues())
            .map(|(ls, lt)| (lt / ls).sqrt())
            .collect();
        let linear = source
            .eigenvectors()
            .scale_columns(&ratio)
            .matmul(&target.eigenvectors().transpose());
        Ok(Self {
            source_mean: source.mean.clone(),
            linear,
            target_mean: target.mean.clone(),
        })
    }

    pub fn n_channels(&self) -> usize {
        self.source_mean.len()
    }

    pub fn apply(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        let c = self.n_channels();
        check_channels(features.n_channels(), c)?;
        let mut out = Vec::with_capacity(features.as_slice().len());
        let mut centered = vec![0.0; c];
        let mut row_out = vec![0.0; c];
        for row in features.rows() {
            for ((d, v), m) in centered.iter_mut().zip(row).zip(&self.source_mean) {
                *d = v - m;
            }
            row_out.copy_from_slice(&self.target_mean);
            for (k, &d) in centered.iter().enumerate() {
                for (o, &l) in row_out.iter_mut().zip(self.linear.row(k)) {
                    *o += d * l;
                }
            }
            out.extend_from_slice(&row_out);
        }
        FeatureMatrix::new(out, features.n_samples(), c)
    }
}

fn check_channels(source_channels: usize, target_channels: usize) -> Result<()> {
    if source_channels != target_channels {
        return Err(Error::ChannelMismatch {
            source_channels,
            target_channels,
        });
    }
    Ok(())
}

/// Matches the mean and covariance of `source` to those of `target`.
///
/// `epsilon` is the relative eigenvalue floor used for both spectra.
pub fn fdm_features(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    epsilon: f64,
) -> Result<FeatureMatrix> {
    check_channels(source.n_channels(), target.n_channels())?;
    let source_stats = compute_stats(source, epsilon)?;
    let target_stats = compute_stats(target, epsilon)?;
    FdmTransform::from_stats(&source_stats, &target_stats)?.apply(source)
}

/// FDM on pixel values. Returns the quantized image (source dimensions) and
/// the float result it was quantized from.
pub fn fdm_image(
    source: &Image,
    target: &Image,
    epsilon: f64,
    clamp: bool,
) -> Result<(Image, FeatureMatrix)> {
    check_channels(source.channels(), target.channels())?;
    let matched = fdm_features(
        &source.to_feature_matrix()?,
        &target.to_feature_matrix()?,
        epsilon,
    )?;
    let image = Image::from_feature_matrix(&matched, source.height(), source.width(), clamp)?;
    Ok((image, matched))
}

/// FDM on layer responses. All leading dimensions are flattened into samples,
/// the last dimension is the channel axis. No clamping.
pub fn fdm_tensor(
    source: &FeatureTensor,
    target: &FeatureTensor,
    epsilon: f64,
) -> Result<FeatureTensor> {
    check_channels(source.channels(), target.channels())?;
    let matched = fdm_features(
        &source.to_feature_matrix()?,
        &target.to_feature_matrix()?,
        epsilon,
    )?;
    let data = matched.as_slice().iter().map(|&v| v as f32).collect();
    FeatureTensor::new(source.shape().to_vec(), data)
}
