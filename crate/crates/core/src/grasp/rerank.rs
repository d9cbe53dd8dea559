use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::types::{Grasp, GraspSet};
use crate::geometry::{dq_error_components, UnitDualQuaternion, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReRankParams {
    /// Translation weight, 1/m. `None` uses the inverse of the largest
    /// translation error in the selected set.
    pub lambda_t: Option<f64>,
    /// Rotation weight, 1/rad.
    pub lambda_r: f64,
    pub n_nearest: usize,
}

impl Default for ReRankParams {
    fn default() -> Self {
        Self { lambda_t: None, lambda_r: 1.0 / PI, n_nearest: 100 }
    }
}

impl ReRankParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_t.is_some_and(|l| !(l > 0.0 && l.is_finite())) || !(self.lambda_r > 0.0 && self.lambda_r.is_finite()) {
            return Err(Error::InvalidParameter("re-rank weights must be positive".into()));
        }
        if self.n_nearest == 0 {
            return Err(Error::InvalidParameter("n_nearest must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reranking {
    /// The input set with dynamic scores filled in, sorted by them.
    pub grasps: GraspSet,
    pub best: usize,
    /// Ids of the grasps that were scored this cycle.
    pub selected: Vec<usize>,
    pub lambda_t: f64,
}

/// Indices of the `n` grasps whose wrist is closest to `position`, nearest
/// first, ties by id.
pub fn nearest_grasps(grasps: &[Grasp], position: &Vec3, n: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize, usize)> =
        grasps.iter().enumerate().map(|(i, g)| ((g.position() - position).norm_squared(), g.id, i)).collect();
    let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if n < keyed.len() {
        keyed.select_nth_unstable_by(n, cmp);
        keyed.truncate(n);
    }
    keyed.sort_by(cmp);
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Pose-dependent scores `r' = r·(max d − d)/(max d − min d)` with
/// `d = (λ_t·t·l̂)² + (λ_r·θ)²` from the screw error between grasp and hand.
/// Grasps outside the nearest set get `r' = 0`.
pub fn rerank(set: &GraspSet, hand: &UnitDualQuaternion, params: &ReRankParams) -> Result<Reranking> {
    params.validate()?;
    if set.is_empty() {
        return Err(Error::EmptyInput);
    }
    let selected = nearest_grasps(&set.grasps, &hand.translation(), params.n_nearest);
    let errors: Vec<_> = selected.iter().map(|&i| dq_error_components(&set.grasps[i].pose, hand)).collect();
    let lambda_t = params.lambda_t.unwrap_or_else(|| {
        let max_t = errors.iter().map(|e| e.translation.norm()).fold(0.0, f64::max);
        if max_t > 0.0 { 1.0 / max_t } else { 1.0 }
    });
    let d: Vec<f64> = errors
        .iter()
        .map(|e| (lambda_t * e.translation.dot(&e.axis)).powi(2) + (params.lambda_r * e.angle).powi(2))
        .collect();
    let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    let mut out = set.clone();
    for g in &mut out.grasps {
        g.dynamic_score = 0.0;
    }
    for (&i, &di) in selected.iter().zip(&d) {
        let factor = if hi > lo { ((hi - di) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
        out.grasps[i].dynamic_score = factor * out.grasps[i].score;
    }
    out.sort_by_dynamic_score();
    let best = out.grasps[0].id;
    let selected = selected.iter().map(|&i| set.grasps[i].id).collect();
    Ok(Reranking { grasps: out, best, selected, lambda_t })
}
