//! placeholder
use ndarray::Array2;
pub struct TensorData { pub shape: Vec<usize>, pub values: Vec<f64> }
pub struct Bundle;
#[derive(Debug, thiserror::Error)]
pub enum BundleError { #[error("todo")] Todo }
pub struct SceneBundle { pub depth: Option<Array2<f64>> }
