//! placeholder
pub struct NoiseSpec;
pub struct SceneSample;
