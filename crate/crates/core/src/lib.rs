//! Image and feature statistics matching for domain adaptation.
//!
//! Two pairwise transforms move a source image towards a target image:
//!
//! * [`fdm`]: feature distribution matching, which gives the source samples
//!   the target mean and covariance through PCA whitening and recoloring.
//!   Works on pixels ([`fdm::fdm_image`]) and on arbitrary layer responses
//!   ([`fdm::fdm_tensor`]).
//! * [`histmatch`]: per-channel histogram specification.
//!
//! [`pipeline`] pairs whole datasets with a seeded generator and runs the
//! transforms in parallel with outputs that do not depend on thread count.

pub mod error;
pub mod fdm;
pub mod histmatch;
pub mod pipeline;
pub mod raster;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use fdm::{fdm_features, fdm_image, fdm_tensor, FdmTransform};
pub use histmatch::{build_mapping, compute_cdf, hm_image, ChannelCdf, IntensityMap};
pub use pipeline::{
    build_plan, execute_plan, transform_pair, ConcreteMethod, DatasetRef, ExecuteOptions, Method,
    PairingPlan, RunReport,
};
pub use raster::Image;
pub use stats::{compute_covariance, compute_mean, compute_stats, eig_sym_psd, ChannelStats, FeatureMatrix, Matrix};
pub use tensor::FeatureTensor;
