//! placeholder
pub struct RigidTransform;
pub struct RansacConfig;
