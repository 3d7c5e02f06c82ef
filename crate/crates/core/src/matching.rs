//! Score-map construction, global correspondence selection via
//! entropy-regularized optimal transport, and coarse-to-fine densification.

use crate::features::{FeatureGrid, PatchGeometry, PointFeatureSet};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("channel mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("cost matrix contains non-finite values")]
    NonFiniteCost,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("empty problem: {0}x{1}")]
    EmptyProblem(usize, usize),
    #[error("plan is {0}x{1} but score map is {2}x{3}")]
    PlanScoreMismatch(usize, usize, usize, usize),
    #[error("top-k requires k >= 1")]
    ZeroK,
    #[error("coarse pair ({0}, {1}) out of range for the patch geometry")]
    PairOutOfRange(usize, usize),
}

/// M×N cosine similarity map between flattened image features (rows) and
/// point features (columns); values lie in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    values: Array2<f64>,
}

impl ScoreMap {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.dim().0
    }

    pub fn cols(&self) -> usize {
        self.values.dim().1
    }

    /// Similarity cost matrix `1 - S` fed to the transport solver.
    pub fn cost(&self) -> Array2<f64> {
        self.values.mapv(|s| 1.0 - s)
    }
}

/// Nonnegative M×N matrix with uniform marginals 1/M per row and 1/N per
/// column, produced by the Sinkhorn solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    values: Array2<f64>,
    epsilon: f64,
    iterations: usize,
}

impl TransportPlan {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Full row+column updates performed before the stop condition.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn row_marginal(&self) -> f64 {
        1.0 / self.values.dim().0 as f64
    }

    pub fn col_marginal(&self) -> f64 {
        1.0 / self.values.dim().1 as f64
    }

    /// Largest absolute deviation of any row or column sum from its
    /// prescribed marginal.
    pub fn max_marginal_violation(&self) -> f64 {
        max_violation(&self.values)
    }

    /// Transport cost `<T, C>` against a cost matrix of the same shape.
    pub fn transport_cost(&self, cost: &Array2<f64>) -> f64 {
        self.values
            .iter()
            .zip(cost.iter())
            .map(|(t, c)| t * c)
            .sum()
    }
}

fn max_violation(plan: &Array2<f64>) -> f64 {
    let (m, n) = plan.dim();
    let a = 1.0 / m as f64;
    let b = 1.0 / n as f64;
    let mut worst: f64 = 0.0;
    for row in plan.rows() {
        worst = worst.max((row.sum() - a).abs());
    }
    for col in plan.columns() {
        worst = worst.max((col.sum() - b).abs());
    }
    worst
}

/// Patch-level or pixel-level correspondences. Coarse pairs index the score
/// map; fine pairs name an image pixel and a point index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub coarse: Vec<CoarseMatch>,
    pub fine: Vec<FineMatch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseMatch {
    pub image: usize,
    pub point: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineMatch {
    pub row: usize,
    pub col: usize,
    pub point: usize,
    pub confidence: f64,
}

impl CorrespondenceSet {
    /// One record per pair: level, indices, pixel coordinates, 3D point,
    /// confidence. Stable order for byte-stable reports.
    pub fn export_text(&self, points: &PointFeatureSet) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "level image_or_pixel point xyz confidence");
        for c in &self.coarse {
            let _ = writeln!(
                out,
                "coarse {} {} - {:.6}",
                c.image, c.point, c.confidence
            );
        }
        for f in &self.fine {
            let p = points.position(f.point);
            let _ = writeln!(
                out,
                "fine {},{} {} {:.6},{:.6},{:.6} {:.6}",
                f.row, f.col, f.point, p[0], p[1], p[2], f.confidence
            );
        }
        out
    }

    /// Count of image patches (rows) that share their matched point with
    /// another image patch.
    pub fn many_to_one_count(&self) -> usize {
        let mut per_point: BTreeMap<usize, usize> = BTreeMap::new();
        for c in &self.coarse {
            *per_point.entry(c.point).or_insert(0) += 1;
        }
        self.coarse
            .iter()
            .filter(|c| per_point[&c.point] > 1)
            .count()
    }
}

/// Cosine similarity between every image-feature row and point-feature row.
/// Zero-norm rows score 0 by convention.
pub fn cosine_score_map(
    image_features: &Array2<f64>,
    point_features: &Array2<f64>,
) -> Result<ScoreMap, MatchError> {
    let (m, ci) = image_features.dim();
    let (n, cp) = point_features.dim();
    if ci != cp {
        return Err(MatchError::ChannelMismatch(ci, cp));
    }
    if m == 0 || n == 0 {
        return Err(MatchError::EmptyProblem(m, n));
    }
    let img_norms: Vec<f64> = image_features
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let pnt_norms: Vec<f64> = point_features
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let mut values = image_features.dot(&point_features.t());
    for i in 0..m {
        for j in 0..n {
            let d = img_norms[i] * pnt_norms[j];
            values[[i, j]] = if d > 0.0 { values[[i, j]] / d } else { 0.0 };
        }
    }
    Ok(ScoreMap { values })
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = terms.collect();
    let mx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    mx + vals.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

struct SinkhornState {
    f: Vec<f64>,
    g: Vec<f64>,
    epsilon: f64,
}

impl SinkhornState {
    /// Potentials chosen so the initial plan is the Gibbs kernel normalized
    /// to unit total mass.
    fn new(cost: &Array2<f64>, epsilon: f64) -> Self {
        let (m, n) = cost.dim();
        let total = log_sum_exp(cost.iter().map(|&c| -c / epsilon));
        let c0 = -epsilon * total / 2.0;
        Self {
            f: vec![c0; m],
            g: vec![c0; n],
            epsilon,
        }
    }

    fn plan(&self, cost: &Array2<f64>) -> Array2<f64> {
        let (m, n) = cost.dim();
        Array2::from_shape_fn((m, n), |(i, j)| {
            ((self.f[i] + self.g[j] - cost[[i, j]]) / self.epsilon).exp()
        })
    }

    /// One full row-then-column scaling update in the log domain.
    fn update(&mut self, cost: &Array2<f64>) {
        let (m, n) = cost.dim();
        let log_a = -(m as f64).ln();
        let log_b = -(n as f64).ln();
        for i in 0..m {
            let lse = log_sum_exp((0..n).map(|j| (self.g[j] - cost[[i, j]]) / self.epsilon));
            self.f[i] = self.epsilon * (log_a - lse);
        }
        for j in 0..n {
            let lse = log_sum_exp((0..m).map(|i| (self.f[i] - cost[[i, j]]) / self.epsilon));
            self.g[j] = self.epsilon * (log_b - lse);
        }
    }
}

fn check_cost(cost: &Array2<f64>, epsilon: f64) -> Result<(), MatchError> {
    let (m, n) = cost.dim();
    if m == 0 || n == 0 {
        return Err(MatchError::EmptyProblem(m, n));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(MatchError::NonFiniteCost);
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(MatchError::BadEpsilon(epsilon));
    }
    Ok(())
}

/// Snaps a nonnegative plan onto the exact marginal polytope: scale rows and
/// columns down where they overshoot, then distribute the remaining deficit
/// as a rank-one correction. Cost changes by at most the pre-rounding
/// violation times the cost range.
fn round_to_marginals(plan: &mut Array2<f64>) {
    let (m, n) = plan.dim();
    let a = 1.0 / m as f64;
    let b = 1.0 / n as f64;
    for mut row in plan.rows_mut() {
        let s = row.sum();
        if s > a {
            row *= a / s;
        }
    }
    for mut col in plan.columns_mut() {
        let s = col.sum();
        if s > b {
            col *= b / s;
        }
    }
    let err_r: Vec<f64> = plan.rows().into_iter().map(|r| a - r.sum()).collect();
    let err_c: Vec<f64> = plan.columns().into_iter().map(|c| b - c.sum()).collect();
    let deficit: f64 = err_r.iter().sum();
    if deficit > 0.0 {
        for i in 0..m {
            for j in 0..n {
                plan[[i, j]] += err_r[i] * err_c[j] / deficit;
            }
        }
    }
}

/// Entropy-regularized optimal transport with uniform marginals (1/M rows,
/// 1/N columns), solved by log-domain Sinkhorn scaling. Stops after
/// `max_iters` full updates or once the worst marginal violation drops below
/// `tol`; the returned plan is then rounded onto the exact marginal polytope.
pub fn sinkhorn(
    cost: &Array2<f64>,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<TransportPlan, MatchError> {
    check_cost(cost, epsilon)?;
    let mut state = SinkhornState::new(cost, epsilon);
    let mut iterations = 0;
    if max_violation(&state.plan(cost)) >= tol {
        for it in 1..=max_iters {
            state.update(cost);
            iterations = it;
            if max_violation(&state.plan(cost)) < tol {
                break;
            }
        }
    }
    let mut values = state.plan(cost);
    round_to_marginals(&mut values);
    Ok(TransportPlan {
        values,
        epsilon,
        iterations,
    })
}

/// Like [`sinkhorn`] but always runs exactly `iters` updates and records the
/// worst marginal violation after every update; entry 0 is the violation of
/// the mass-normalized kernel before any scaling.
pub fn sinkhorn_trace(
    cost: &Array2<f64>,
    epsilon: f64,
    iters: usize,
) -> Result<(TransportPlan, Vec<f64>), MatchError> {
    check_cost(cost, epsilon)?;
    let mut state = SinkhornState::new(cost, epsilon);
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(max_violation(&state.plan(cost)));
    for _ in 0..iters {
        state.update(cost);
        trace.push(max_violation(&state.plan(cost)));
    }
    Ok((
        TransportPlan {
            values: state.plan(cost),
            epsilon,
            iterations: iters,
        },
        trace,
    ))
}

/// How coarse pairs are read off the plan/score map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMode {
    /// Keep (m, n) iff n is the argmax of plan row m and m is the argmax of
    /// plan column n. Injective on both sides.
    MutualArgmax,
    /// Per image patch, keep the k highest score entries (the local
    /// selection baseline).
    TopK(usize),
}

/// Reads coarse correspondences from the transport plan (mutual argmax) or
/// the raw score map (top-k baseline).
pub fn extract_coarse(
    plan: &TransportPlan,
    score: &ScoreMap,
    mode: ExtractionMode,
) -> Result<CorrespondenceSet, MatchError> {
    let (m, n) = plan.values.dim();
    if (m, n) != score.values.dim() {
        return Err(MatchError::PlanScoreMismatch(
            m,
            n,
            score.values.dim().0,
            score.values.dim().1,
        ));
    }
    if m == 0 || n == 0 {
        return Err(MatchError::EmptyProblem(m, n));
    }
    let coarse = match mode {
        ExtractionMode::MutualArgmax => {
            let row_best: Vec<usize> = (0..m)
                .map(|i| argmax((0..n).map(|j| plan.values[[i, j]])))
                .collect();
            let col_best: Vec<usize> = (0..n)
                .map(|j| argmax((0..m).map(|i| plan.values[[i, j]])))
                .collect();
            let mut out = Vec::new();
            for (i, &j) in row_best.iter().enumerate() {
                if col_best[j] == i {
                    let row_mass: f64 = plan.values.row(i).sum();
                    let confidence = if row_mass > 0.0 {
                        plan.values[[i, j]] / row_mass
                    } else {
                        0.0
                    };
                    out.push(CoarseMatch {
                        image: i,
                        point: j,
                        confidence,
                    });
                }
            }
            out
        }
        ExtractionMode::TopK(k) => {
            if k == 0 {
                return Err(MatchError::ZeroK);
            }
            let mut out = Vec::new();
            for i in 0..m {
                let mut cols: Vec<usize> = (0..n).collect();
                cols.sort_by(|&a, &b| {
                    score.values[[i, b]]
                        .partial_cmp(&score.values[[i, a]])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                for &j in cols.iter().take(k) {
                    out.push(CoarseMatch {
                        image: i,
                        point: j,
                        confidence: score.values[[i, j]],
                    });
                }
            }
            out
        }
    };
    Ok(CorrespondenceSet {
        coarse,
        fine: Vec::new(),
    })
}

fn argmax(vals: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in vals.enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Diagnostics from densification: coarse pairs skipped for lacking a pixel
/// window or point subset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineDiagnostics {
    pub skipped_pairs: Vec<(usize, usize)>,
}

/// Densifies coarse pairs: inside each matched cell window and point subset,
/// every fine pixel takes its nearest point descriptor by cosine similarity;
/// pairs below `accept_threshold` are dropped and pixel-level duplicates keep
/// the highest confidence.
pub fn refine_fine(
    coarse: &CorrespondenceSet,
    fine_image: &FeatureGrid,
    fine_points: &PointFeatureSet,
    geometry: &PatchGeometry,
    accept_threshold: f64,
) -> Result<(CorrespondenceSet, RefineDiagnostics), MatchError> {
    let (h, w, c) = fine_image.values().dim();
    if c != fine_points.channels() {
        return Err(MatchError::ChannelMismatch(c, fine_points.channels()));
    }
    let cell_total = geometry.coarse_rows * geometry.coarse_cols;
    let mut best: BTreeMap<(usize, usize), FineMatch> = BTreeMap::new();
    let mut diag = RefineDiagnostics::default();

    for pair in &coarse.coarse {
        if pair.image >= cell_total || pair.point >= geometry.patch_count() {
            return Err(MatchError::PairOutOfRange(pair.image, pair.point));
        }
        let (rows, cols) = geometry.cell_window(pair.image, h, w);
        let members = &geometry.members[pair.point];
        if rows.is_empty() || cols.is_empty() || members.is_empty() {
            diag.skipped_pairs.push((pair.image, pair.point));
            continue;
        }
        for r in rows.clone() {
            for col in cols.clone() {
                let pixel = fine_image.values().slice(ndarray::s![r, col, ..]);
                let pnorm = pixel.dot(&pixel).sqrt();
                let mut best_sim = f64::NEG_INFINITY;
                let mut best_point = usize::MAX;
                for &p in members {
                    let desc = fine_points.descriptors().row(p);
                    let dnorm = desc.dot(&desc).sqrt();
                    let denom = pnorm * dnorm;
                    let sim = if denom > 0.0 {
                        pixel.dot(&desc) / denom
                    } else {
                        0.0
                    };
                    if sim > best_sim {
                        best_sim = sim;
                        best_point = p;
                    }
                }
                if best_sim >= accept_threshold && best_point != usize::MAX {
                    let cand = FineMatch {
                        row: r,
                        col,
                        point: best_point,
                        confidence: best_sim,
                    };
                    best.entry((r, col))
                        .and_modify(|cur| {
                            if cand.confidence > cur.confidence {
                                *cur = cand;
                            }
                        })
                        .or_insert(cand);
                }
            }
        }
    }

    Ok((
        CorrespondenceSet {
            coarse: coarse.coarse.clone(),
            fine: best.into_values().collect(),
        },
        diag,
    ))
}
