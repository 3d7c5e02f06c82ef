//! Core data model: dense image feature grids, point descriptor sets, camera
//! intrinsics, Fourier positional embedding, and patch geometry.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Errors from feature construction and positional embedding.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
    #[error("empty dimension: {0}")]
    EmptyDimension(&'static str),
    #[error("embedding octave count must be >= 1")]
    ZeroOctaves,
    #[error("non-finite embedding input")]
    NonFiniteInput,
    #[error("projection maps to {got} channels, features have {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("projection expects {expected} embedding dims, got {got}")]
    EmbeddingDimMismatch { expected: usize, got: usize },
    #[error("descriptor rows ({descriptors}) and position rows ({positions}) disagree")]
    PointCountMismatch { descriptors: usize, positions: usize },
    #[error("positions must have 3 columns, got {0}")]
    BadPositionWidth(usize),
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(&'static str),
    #[error("patch geometry: {0}")]
    BadGeometry(String),
}

/// Resolution level of a feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Coarse,
    Fine,
}

/// Dense H×W×C image feature map. Pixel coordinates are the implicit
/// (row, col) lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    values: Array3<f64>,
    level: Level,
}

impl FeatureGrid {
    /// Builds a grid from an (H, W, C) array, rejecting empty dims and
    /// non-finite values.
    pub fn new(values: Array3<f64>, level: Level) -> Result<Self, FeatureError> {
        let (h, w, c) = values.dim();
        if h == 0 {
            return Err(FeatureError::EmptyDimension("height"));
        }
        if w == 0 {
            return Err(FeatureError::EmptyDimension("width"));
        }
        if c == 0 {
            return Err(FeatureError::EmptyDimension("channels"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self { values, level })
    }

    pub fn height(&self) -> usize {
        self.values.dim().0
    }

    pub fn width(&self) -> usize {
        self.values.dim().1
    }

    pub fn channels(&self) -> usize {
        self.values.dim().2
    }

    pub fn level(&self) -> Level {
        self.level
    }

    /// (H, W, C) view.
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Channel-first (C, H, W) copy, the layout the image enhancement unit
    /// operates in.
    pub fn to_chw(&self) -> Array3<f64> {
        let (h, w, c) = self.values.dim();
        let mut out = Array3::zeros((c, h, w));
        for r in 0..h {
            for col in 0..w {
                for ch in 0..c {
                    out[[ch, r, col]] = self.values[[r, col, ch]];
                }
            }
        }
        out
    }

    /// Rebuilds a grid from a (C, H, W) tensor.
    pub fn from_chw(chw: &Array3<f64>, level: Level) -> Result<Self, FeatureError> {
        let (c, h, w) = chw.dim();
        let mut out = Array3::zeros((h, w, c));
        for ch in 0..c {
            for r in 0..h {
                for col in 0..w {
                    out[[r, col, ch]] = chw[[ch, r, col]];
                }
            }
        }
        Self::new(out, level)
    }

    /// Rows = pixels in row-major order, columns = channels.
    pub fn flatten(&self) -> Array2<f64> {
        let (h, w, c) = self.values.dim();
        let flat: Vec<f64> = self.values.iter().copied().collect();
        Array2::from_shape_vec((h * w, c), flat).expect("row-major layout")
    }

    /// Inverse of [`flatten`](Self::flatten) for known grid dims.
    pub fn from_flat(
        flat: &Array2<f64>,
        height: usize,
        width: usize,
        level: Level,
    ) -> Result<Self, FeatureError> {
        let (rows, c) = flat.dim();
        if rows != height * width {
            return Err(FeatureError::BadGeometry(format!(
                "flat rows {rows} != {height}x{width}"
            )));
        }
        let values =
            Array3::from_shape_vec((height, width, c), flat.iter().copied().collect())
                .expect("row-major layout");
        Self::new(values, level)
    }
}

/// N point descriptors paired with N 3D positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatureSet {
    descriptors: Array2<f64>,
    positions: Array2<f64>,
}

impl PointFeatureSet {
    pub fn new(descriptors: Array2<f64>, positions: Array2<f64>) -> Result<Self, FeatureError> {
        let (n, _c) = descriptors.dim();
        let (np, k) = positions.dim();
        if n == 0 {
            return Err(FeatureError::EmptyDimension("points"));
        }
        if descriptors.dim().1 == 0 {
            return Err(FeatureError::EmptyDimension("channels"));
        }
        if n != np {
            return Err(FeatureError::PointCountMismatch {
                descriptors: n,
                positions: np,
            });
        }
        if k != 3 {
            return Err(FeatureError::BadPositionWidth(k));
        }
        if let Some(i) = descriptors.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self {
            descriptors,
            positions,
        })
    }

    pub fn count(&self) -> usize {
        self.descriptors.dim().0
    }

    pub fn channels(&self) -> usize {
        self.descriptors.dim().1
    }

    /// (N, C) descriptor matrix.
    pub fn descriptors(&self) -> &Array2<f64> {
        &self.descriptors
    }

    /// (N, 3) positions in meters.
    pub fn positions(&self) -> &Array2<f64> {
        &self.positions
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        [
            self.positions[[i, 0]],
            self.positions[[i, 1]],
            self.positions[[i, 2]],
        ]
    }

    /// Same positions, new descriptors.
    pub fn with_descriptors(&self, descriptors: Array2<f64>) -> Result<Self, FeatureError> {
        Self::new(descriptors, self.positions.clone())
    }

    /// Subset of rows, order preserved.
    pub fn select(&self, indices: &[usize]) -> Result<Self, FeatureError> {
        let c = self.channels();
        let mut desc = Array2::zeros((indices.len(), c));
        let mut pos = Array2::zeros((indices.len(), 3));
        for (row, &i) in indices.iter().enumerate() {
            desc.row_mut(row).assign(&self.descriptors.row(i));
            pos.row_mut(row).assign(&self.positions.row(i));
        }
        Self::new(desc, pos)
    }
}

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, FeatureError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(FeatureError::BadIntrinsics("focal lengths must be positive"));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(FeatureError::BadIntrinsics(
                "principal point outside image bounds",
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Projects a camera-frame point to pixel (u, v); `None` behind the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        if p[2] <= 0.0 {
            return None;
        }
        Some((
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        ))
    }

    /// Lifts pixel (u, v) with a depth (meters) to a camera-frame 3D point.
    pub fn lift(&self, u: f64, v: f64, depth: f64) -> [f64; 3] {
        [
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        ]
    }
}

/// Fourier embedding of a scalar: `[x, sin(2^0 x), cos(2^0 x), ...,
/// sin(2^{L-1} x), cos(2^{L-1} x)]`, length 2L+1.
pub fn fourier_embed(x: f64, octaves: usize) -> Result<Vec<f64>, FeatureError> {
    if octaves == 0 {
        return Err(FeatureError::ZeroOctaves);
    }
    if !x.is_finite() {
        return Err(FeatureError::NonFiniteInput);
    }
    let mut out = Vec::with_capacity(2 * octaves + 1);
    out.push(x);
    for l in 0..octaves {
        let arg = (1u64 << l) as f64 * x;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    Ok(out)
}

/// Linear map from concatenated per-coordinate Fourier embeddings to feature
/// channels. The matrix is (coord_dims · (2L+1)) × C.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalProjection {
    matrix: Array2<f64>,
    octaves: usize,
    coord_dims: usize,
}

impl PositionalProjection {
    pub fn new(
        matrix: Array2<f64>,
        octaves: usize,
        coord_dims: usize,
    ) -> Result<Self, FeatureError> {
        if octaves == 0 {
            return Err(FeatureError::ZeroOctaves);
        }
        let expected = coord_dims * (2 * octaves + 1);
        if matrix.dim().0 != expected {
            return Err(FeatureError::EmbeddingDimMismatch {
                expected,
                got: matrix.dim().0,
            });
        }
        Ok(Self {
            matrix,
            octaves,
            coord_dims,
        })
    }

    /// Fixed seeded Gaussian projection so runs are reproducible. Entries are
    /// N(0, 1/sqrt(rows)).
    pub fn seeded(
        coord_dims: usize,
        octaves: usize,
        channels: usize,
        seed: u64,
    ) -> Result<Self, FeatureError> {
        if octaves == 0 {
            return Err(FeatureError::ZeroOctaves);
        }
        let rows = coord_dims * (2 * octaves + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (rows as f64).sqrt()).expect("valid sigma");
        let matrix = Array2::from_shape_fn((rows, channels), |_| normal.sample(&mut rng));
        Self::new(matrix, octaves, coord_dims)
    }

    pub fn octaves(&self) -> usize {
        self.octaves
    }

    pub fn channels(&self) -> usize {
        self.matrix.dim().1
    }

    /// Embeds one normalized coordinate tuple and projects it to channels.
    fn embed(&self, coords: &[f64]) -> Result<Vec<f64>, FeatureError> {
        debug_assert_eq!(coords.len(), self.coord_dims);
        let mut stacked = Vec::with_capacity(self.matrix.dim().0);
        for &c in coords {
            stacked.extend(fourier_embed(c, self.octaves)?);
        }
        let c_out = self.matrix.dim().1;
        let mut out = vec![0.0; c_out];
        for (i, &e) in stacked.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += e * self.matrix[[i, j]];
            }
        }
        Ok(out)
    }
}

/// Maps an index range [0, n) onto [-1, 1]; a single element maps to 0.
fn normalize_index(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// Adds the projected positional embedding of each pixel's (row, col) lattice
/// coordinate, normalized to [-1, 1] per axis.
pub fn add_positional_grid(
    grid: &FeatureGrid,
    proj: &PositionalProjection,
) -> Result<FeatureGrid, FeatureError> {
    let (h, w, c) = grid.values().dim();
    if proj.channels() != c {
        return Err(FeatureError::ChannelMismatch {
            expected: c,
            got: proj.channels(),
        });
    }
    if proj.coord_dims != 2 {
        return Err(FeatureError::EmbeddingDimMismatch {
            expected: 2 * (2 * proj.octaves + 1),
            got: proj.matrix.dim().0,
        });
    }
    let mut values = grid.values().clone();
    for r in 0..h {
        for col in 0..w {
            let add = proj.embed(&[normalize_index(r, h), normalize_index(col, w)])?;
            for ch in 0..c {
                values[[r, col, ch]] += add[ch];
            }
        }
    }
    FeatureGrid::new(values, grid.level())
}

/// Adds the projected positional embedding of each point's 3D position,
/// normalized to [-1, 1] per axis over the set's bounding box.
pub fn add_positional_points(
    points: &PointFeatureSet,
    proj: &PositionalProjection,
) -> Result<PointFeatureSet, FeatureError> {
    let c = points.channels();
    if proj.channels() != c {
        return Err(FeatureError::ChannelMismatch {
            expected: c,
            got: proj.channels(),
        });
    }
    if proj.coord_dims != 3 {
        return Err(FeatureError::EmbeddingDimMismatch {
            expected: 3 * (2 * proj.octaves + 1),
            got: proj.matrix.dim().0,
        });
    }
    let pos = points.positions();
    let n = points.count();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in 0..n {
        for a in 0..3 {
            lo[a] = lo[a].min(pos[[i, a]]);
            hi[a] = hi[a].max(pos[[i, a]]);
        }
    }
    let norm = |v: f64, a: usize| -> f64 {
        if hi[a] - lo[a] <= 0.0 {
            0.0
        } else {
            -1.0 + 2.0 * (v - lo[a]) / (hi[a] - lo[a])
        }
    };
    let mut desc = points.descriptors().clone();
    for i in 0..n {
        let coords = [
            norm(pos[[i, 0]], 0),
            norm(pos[[i, 1]], 1),
            norm(pos[[i, 2]], 2),
        ];
        let add = proj.embed(&coords)?;
        for ch in 0..c {
            desc[[i, ch]] += add[ch];
        }
    }
    points.with_descriptors(desc)
}

/// How coarse patches relate to fine pixels and points: the image coarse grid
/// is a lattice of `cell_size`-pixel cells; each point belongs to its nearest
/// coarse point.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGeometry {
    pub cell_size: usize,
    pub coarse_rows: usize,
    pub coarse_cols: usize,
    /// Indices into the full point set naming the coarse point centers.
    pub coarse_points: Vec<usize>,
    /// Per-point index into `coarse_points` of the patch each point joins.
    pub assignments: Vec<usize>,
    /// Point indices per coarse patch, derived from `assignments`.
    pub members: Vec<Vec<usize>>,
    /// Mean nearest-neighbor distance among coarse centers (meters); the
    /// default correctness radius for the patch inlier ratio.
    pub coarse_spacing: f64,
}

impl PatchGeometry {
    pub fn new(
        cell_size: usize,
        coarse_rows: usize,
        coarse_cols: usize,
        coarse_points: Vec<usize>,
        assignments: Vec<usize>,
        positions: &Array2<f64>,
    ) -> Result<Self, FeatureError> {
        if cell_size == 0 || coarse_rows == 0 || coarse_cols == 0 {
            return Err(FeatureError::BadGeometry("zero-sized coarse grid".into()));
        }
        if coarse_points.is_empty() {
            return Err(FeatureError::BadGeometry("no coarse points".into()));
        }
        let n = positions.dim().0;
        if assignments.len() != n {
            return Err(FeatureError::BadGeometry(format!(
                "assignments {} != point count {}",
                assignments.len(),
                n
            )));
        }
        if let Some(&bad) = coarse_points.iter().find(|&&i| i >= n) {
            return Err(FeatureError::BadGeometry(format!(
                "coarse point index {bad} out of range"
            )));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= coarse_points.len()) {
            return Err(FeatureError::BadGeometry(format!(
                "assignment {bad} exceeds coarse patch count"
            )));
        }
        let mut members = vec![Vec::new(); coarse_points.len()];
        for (point, &slot) in assignments.iter().enumerate() {
            members[slot].push(point);
        }
        let coarse_spacing = mean_nn_distance(&coarse_points, positions);
        Ok(Self {
            cell_size,
            coarse_rows,
            coarse_cols,
            coarse_points,
            assignments,
            members,
            coarse_spacing,
        })
    }

    pub fn patch_count(&self) -> usize {
        self.coarse_points.len()
    }

    /// Pixel window (row range, col range) of coarse image cell `m`, clipped
    /// to the fine image bounds.
    pub fn cell_window(
        &self,
        m: usize,
        fine_height: usize,
        fine_width: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let r = m / self.coarse_cols;
        let c = m % self.coarse_cols;
        let r0 = (r * self.cell_size).min(fine_height);
        let r1 = ((r + 1) * self.cell_size).min(fine_height);
        let c0 = (c * self.cell_size).min(fine_width);
        let c1 = ((c + 1) * self.cell_size).min(fine_width);
        (r0..r1, c0..c1)
    }

    /// Center pixel (row, col) of coarse image cell `m`.
    pub fn cell_center(&self, m: usize) -> (f64, f64) {
        let r = m / self.coarse_cols;
        let c = m % self.coarse_cols;
        (
            (r * self.cell_size) as f64 + (self.cell_size as f64 - 1.0) / 2.0,
            (c * self.cell_size) as f64 + (self.cell_size as f64 - 1.0) / 2.0,
        )
    }
}

fn mean_nn_distance(coarse_points: &[usize], positions: &Array2<f64>) -> f64 {
    if coarse_points.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for &i in coarse_points {
        let mut best = f64::INFINITY;
        for &j in coarse_points {
            if i == j {
                continue;
            }
            let mut d2 = 0.0;
            for a in 0..3 {
                let d = positions[[i, a]] - positions[[j, a]];
                d2 += d * d;
            }
            best = best.min(d2);
        }
        total += best.sqrt();
    }
    total / coarse_points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn fourier_embed_at_zero() {
        let e = fourier_embed(0.0, 2).unwrap();
        assert_eq!(e, vec![0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn fourier_embed_quarter_period() {
        let e = fourier_embed(std::f64::consts::FRAC_PI_2, 1).unwrap();
        assert_eq!(e.len(), 3);
        assert_abs_diff_eq!(e[0], std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-15);
        assert!(e[2].abs() < 1e-15);
    }

    #[test]
    fn fourier_embed_matches_reference_trig() {
        // Frozen from an extended-precision evaluation of sin/cos at 1 and 2.
        let e = fourier_embed(1.0, 2).unwrap();
        let expected = [
            1.0,
            0.8414709848078965,  // sin 1
            0.5403023058681398,  // cos 1
            0.9092974268256817,  // sin 2
            -0.4161468365471424, // cos 2
        ];
        for (got, want) in e.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn fourier_embed_rejects_bad_input() {
        assert!(fourier_embed(f64::NAN, 2).is_err());
        assert!(fourier_embed(1.0, 0).is_err());
    }

    #[test]
    fn zero_projection_is_identity() {
        let grid = FeatureGrid::new(
            Array3::from_shape_fn((2, 2, 4), |(r, c, ch)| (r + 2 * c + ch) as f64),
            Level::Coarse,
        )
        .unwrap();
        let proj = PositionalProjection::new(Array2::zeros((2 * 5, 4)), 2, 2).unwrap();
        let out = add_positional_grid(&grid, &proj).unwrap();
        assert_eq!(out.values(), grid.values());
    }

    #[test]
    fn single_point_projection_matches_dense_multiply() {
        // One point at the origin normalizes to coords (0,0,0); its embedding
        // per axis is [0, 0, 1] for L=1 so a column of ones adds the count of
        // cos terms to each channel.
        let points = PointFeatureSet::new(array![[1.0, 2.0]], array![[0.0, 0.0, 0.0]]).unwrap();
        let proj = PositionalProjection::new(Array2::ones((3 * 3, 2)), 1, 3).unwrap();
        let out = add_positional_points(&points, &proj).unwrap();
        // embedding = [0,0,1, 0,0,1, 0,0,1]; ones column sums to 3.
        assert_abs_diff_eq!(out.descriptors()[[0, 0]], 4.0);
        assert_abs_diff_eq!(out.descriptors()[[0, 1]], 5.0);
    }

    #[test]
    fn grid_positional_matches_per_pixel_oracle() {
        let h = 2;
        let w = 2;
        let c = 4;
        let octaves = 2;
        let grid = FeatureGrid::new(
            Array3::from_shape_fn((h, w, c), |(r, col, ch)| {
                (1 + r) as f64 * 0.3 - col as f64 * 0.7 + ch as f64
            }),
            Level::Fine,
        )
        .unwrap();
        let proj = PositionalProjection::seeded(2, octaves, c, 7).unwrap();
        let out = add_positional_grid(&grid, &proj).unwrap();

        // Brute-force per-pixel recomputation.
        for r in 0..h {
            for col in 0..w {
                let rn = normalize_index(r, h);
                let cn = normalize_index(col, w);
                let mut emb = fourier_embed(rn, octaves).unwrap();
                emb.extend(fourier_embed(cn, octaves).unwrap());
                for ch in 0..c {
                    let mut add = 0.0;
                    for (i, &e) in emb.iter().enumerate() {
                        add += e * proj.matrix[[i, ch]];
                    }
                    assert_abs_diff_eq!(
                        out.values()[[r, col, ch]],
                        grid.values()[[r, col, ch]] + add,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let grid =
            FeatureGrid::new(Array3::zeros((2, 2, 4)), Level::Coarse).unwrap();
        let proj = PositionalProjection::seeded(2, 1, 3, 0).unwrap();
        assert!(matches!(
            add_positional_grid(&grid, &proj),
            Err(FeatureError::ChannelMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn grid_rejects_non_finite() {
        let mut v = Array3::zeros((1, 1, 2));
        v[[0, 0, 1]] = f64::INFINITY;
        assert!(FeatureGrid::new(v, Level::Fine).is_err());
    }

    #[test]
    fn chw_round_trip() {
        let grid = FeatureGrid::new(
            Array3::from_shape_fn((3, 4, 5), |(r, c, ch)| (r * 20 + c * 5 + ch) as f64),
            Level::Coarse,
        )
        .unwrap();
        let back = FeatureGrid::from_chw(&grid.to_chw(), Level::Coarse).unwrap();
        assert_eq!(back.values(), grid.values());
    }

    #[test]
    fn intrinsics_project_lift_round_trip() {
        let k = CameraIntrinsics::new(70.0, 72.0, 32.0, 24.0, 64, 48).unwrap();
        let p = [0.2, -0.1, 1.5];
        let (u, v) = k.project(p).unwrap();
        let q = k.lift(u, v, p[2]);
        for a in 0..3 {
            assert_abs_diff_eq!(p[a], q[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn cell_window_and_center() {
        let pos = array![[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let geom =
            PatchGeometry::new(8, 2, 3, vec![0, 1, 2], vec![0, 1, 2], &pos).unwrap();
        let (rows, cols) = geom.cell_window(4, 16, 24);
        assert_eq!((rows.start, rows.end), (8, 16));
        assert_eq!((cols.start, cols.end), (8, 16));
        assert_eq!(geom.cell_center(0), (3.5, 3.5));
        assert!(geom.coarse_spacing > 0.0);
    }

    proptest! {
        #[test]
        fn fourier_embed_length(x in -10.0f64..10.0, octaves in 1usize..8) {
            let e = fourier_embed(x, octaves).unwrap();
            prop_assert_eq!(e.len(), 2 * octaves + 1);
        }

        #[test]
        fn zero_projection_identity_on_points(n in 1usize..6, c in 1usize..5) {
            let desc = Array2::from_shape_fn((n, c), |(i, j)| (i * 7 + j) as f64 * 0.1);
            let pos = Array2::from_shape_fn((n, 3), |(i, j)| i as f64 + j as f64);
            let points = PointFeatureSet::new(desc.clone(), pos).unwrap();
            let proj = PositionalProjection::new(Array2::zeros((3 * 3, c)), 1, 3).unwrap();
            let out = add_positional_points(&points, &proj).unwrap();
            prop_assert_eq!(out.descriptors(), &desc);
        }
    }
}
