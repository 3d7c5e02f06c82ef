//! Image-to-point-cloud registration with channel-adaptive feature adjustment
//! and optimal-transport match selection.
//!
//! The pipeline matches a dense 2D feature grid against a set of 3D point
//! descriptors, then recovers the rigid transform aligning the point cloud to
//! the camera:
//!
//! 1. [`enhance`] — intra-modal channel enhancement (image rotation-branch
//!    attention, point channel self-attention) with residual fusion.
//! 2. [`filter`] — cross-modal channel filtering: instance normalization,
//!    second-moment statistics, covariance-based channel-pair masking.
//! 3. [`matching`] — cosine score map, entropy-regularized optimal transport
//!    (log-domain Sinkhorn), mutual-argmax coarse selection, coarse-to-fine
//!    densification.
//! 4. [`pose`] — PnP inside a seeded RANSAC loop, Gauss-Newton refinement.
//! 5. [`metrics`] — inlier ratio, feature matching recall, registration
//!    recall, patch inlier ratio, and an MMD modality-gap diagnostic.
//!
//! Feature bundles are loaded from disk ([`bundle`]) or produced by the
//! synthetic scene generator ([`synth`]), which provides ground truth for
//! end-to-end verification. [`pipeline`] ties the stages together and backs
//! the `ca-i2p` command-line tool.

pub mod bundle;
pub mod enhance;
pub mod features;
pub mod filter;
pub mod losses;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod pose;
pub mod synth;

pub use bundle::{Bundle, BundleError, SceneBundle, TensorData};
pub use features::{
    fourier_embed, CameraIntrinsics, FeatureError, FeatureGrid, Level, PatchGeometry,
    PointFeatureSet, PositionalProjection,
};
pub use matching::{CorrespondenceSet, ScoreMap, TransportPlan};
pub use pose::{RansacConfig, RigidTransform};
pub use synth::{NoiseSpec, SceneSample};
