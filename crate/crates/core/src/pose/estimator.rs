use serde::{Deserialize, Serialize};

use nalgebra::Rotation3;

use crate::geometry::{PointNormalCloud, RigidTransform, Vec3};
use crate::spherical::{
    compute_egi, sample_rotations, sht_forward_real, RotationSampling, SphereGrid, SphericalCoeffs, So3Correlator,
};
use crate::volumetric::{TranslationEstimate, TranslationEstimator};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseEstimatorConfig {
    pub bandwidth: usize,
    pub l_max: usize,
    /// Voxel edge ℛ in metres.
    pub resolution: f64,
    /// Rotation threshold tc_r as a fraction of the correlation maximum.
    pub tc_r_fraction: f64,
    pub max_rotation_candidates: usize,
    pub top_k: usize,
    pub low_score_threshold: f64,
    /// OBB inflation for segmentation; `None` means 1.5ℛ.
    pub segmentation_margin: Option<f64>,
    /// Number of best-ranked hypotheses whose rotation is locally refined.
    pub refine_top: usize,
    /// Step halvings of the local search, starting at a quarter of the Euler
    /// grid's α spacing.
    pub refine_levels: usize,
}

impl Default for PoseEstimatorConfig {
    fn default() -> Self {
        Self {
            bandwidth: 16,
            l_max: 15,
            resolution: 0.005,
            tc_r_fraction: 0.7,
            max_rotation_candidates: 30,
            top_k: 5,
            low_score_threshold: 0.1,
            segmentation_margin: None,
            refine_top: 3,
            refine_levels: 2,
        }
    }
}

impl PoseEstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        SphereGrid::new(self.bandwidth)?;
        if self.l_max >= self.bandwidth {
            return Err(Error::Undersampled { l_max: self.l_max, bandwidth: self.bandwidth });
        }
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidParameter("resolution must be positive".into()));
        }
        if !(self.tc_r_fraction > 0.0 && self.tc_r_fraction <= 1.0) {
            return Err(Error::InvalidParameter("tc_r_fraction must lie in (0, 1]".into()));
        }
        if self.max_rotation_candidates == 0 || self.top_k == 0 {
            return Err(Error::InvalidParameter("candidate counts must be positive".into()));
        }
        if let Some(m) = self.segmentation_margin {
            if !(m >= 0.0) {
                return Err(Error::InvalidParameter("segmentation margin must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn margin(&self) -> f64 {
        self.segmentation_margin.unwrap_or(1.5 * self.resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseHypothesis {
    pub rank: usize,
    /// Model frame to scene frame: `p ↦ R·p + T`.
    pub transform: RigidTransform,
    pub rotation_correlation: f64,
    pub delta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseEstimate {
    /// Sorted by `delta_max`, descending.
    pub hypotheses: Vec<PoseHypothesis>,
    pub rotation_candidates: usize,
    pub score: f64,
    pub warning: Option<String>,
}

impl PoseEstimate {
    pub fn best(&self) -> Option<&PoseHypothesis> {
        self.hypotheses.first()
    }
}

/// Score of the best hypothesis (its δ_max, clamped to [0, 1]) and whether it
/// falls below the warning threshold. An empty list always warns.
pub fn alignment_score(hypotheses: &[PoseHypothesis], low_score_threshold: f64) -> (f64, bool) {
    match hypotheses.first() {
        Some(h) => {
            let s = h.delta_max.clamp(0.0, 1.0);
            (s, s < low_score_threshold)
        }
        None => (0.0, true),
    }
}

/// Reusable estimator; holds the Wigner tables for its bandwidth.
#[derive(Debug, Clone)]
pub struct PoseEstimator {
    cfg: PoseEstimatorConfig,
    grid: SphereGrid,
    correlator: So3Correlator,
}

impl PoseEstimator {
    pub fn new(cfg: PoseEstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = SphereGrid::new(cfg.bandwidth)?;
        let correlator = So3Correlator::new(cfg.bandwidth, cfg.l_max)?;
        Ok(Self { cfg, grid, correlator })
    }

    pub fn config(&self) -> &PoseEstimatorConfig {
        &self.cfg
    }

    fn spectrum(&self, cloud: &PointNormalCloud) -> Result<SphericalCoeffs> {
        sht_forward_real(&compute_egi(cloud, &self.grid).density(), &self.grid, self.cfg.l_max)
    }

    pub fn estimate(&self, scene: &PointNormalCloud, model: &PointNormalCloud) -> Result<PoseEstimate> {
        scene.ensure_non_empty()?;
        model.ensure_non_empty()?;
        let map = self.correlator.correlate(&self.spectrum(scene)?, &self.spectrum(model)?)?;
        let sampling = RotationSampling { non_max_suppression: true, max_candidates: Some(self.cfg.max_rotation_candidates) };
        let candidates = sample_rotations(&map, map.fraction_of_max(self.cfg.tc_r_fraction), sampling);
        if candidates.is_empty() {
            return Ok(PoseEstimate {
                hypotheses: Vec::new(),
                rotation_candidates: 0,
                score: 0.0,
                warning: Some("no rotation candidate above threshold".into()),
            });
        }

        let centroid = model.centroid().unwrap_or_default();
        let radius = model.points().iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
        let estimator = TranslationEstimator::new(scene.points(), self.cfg.resolution, radius)?;
        let rotations: Vec<_> = candidates.candidates.iter().map(|c| c.rotation).collect();
        let estimates = estimator.estimate_many(model.points(), &rotations)?;

        let mut ranked: Vec<(usize, PoseHypothesis)> = estimates
            .into_iter()
            .zip(&candidates.candidates)
            .enumerate()
            .map(|(i, (t, c))| {
                (i, PoseHypothesis { rank: 0, transform: t.transform, rotation_correlation: c.correlation, delta_max: t.delta_max })
            })
            .collect();
        let by_peak = |a: &(usize, PoseHypothesis), b: &(usize, PoseHypothesis)| {
            b.1.delta_max.total_cmp(&a.1.delta_max).then(a.0.cmp(&b.0))
        };
        ranked.sort_by(by_peak);
        for (_, h) in ranked.iter_mut().take(self.cfg.refine_top) {
            let refined = self.refine(&estimator, model, TranslationEstimate {
                transform: h.transform,
                delta_max: h.delta_max,
                shift: [0; 3],
            })?;
            h.transform = refined.transform;
            h.delta_max = refined.delta_max;
        }
        ranked.sort_by(by_peak);
        let hypotheses: Vec<PoseHypothesis> = ranked
            .into_iter()
            .take(self.cfg.top_k)
            .enumerate()
            .map(|(rank, (_, mut h))| {
                h.rank = rank;
                h
            })
            .collect();
        let (score, low) = alignment_score(&hypotheses, self.cfg.low_score_threshold);
        let warning = low.then(|| format!("low alignment score {score:.3}; object may be absent"));
        if let Some(w) = &warning {
            log::warn!("{w}");
        }
        Ok(PoseEstimate { hypotheses, rotation_candidates: candidates.len(), score, warning })
    }
}

impl PoseEstimator {
    /// Greedy search over small rotations about the scene axes, keeping any
    /// move that raises the phase-correlation peak.
    fn refine(
        &self,
        estimator: &TranslationEstimator,
        model: &PointNormalCloud,
        start: TranslationEstimate,
    ) -> Result<TranslationEstimate> {
        let mut best = start;
        let mut step = std::f64::consts::PI / (4.0 * self.cfg.bandwidth as f64);
        for _ in 0..self.cfg.refine_levels {
            for _ in 0..4 {
                let mut moved = false;
                for axis in [Vec3::x_axis(), Vec3::y_axis(), Vec3::z_axis()] {
                    for sign in [1.0, -1.0] {
                        let r = Rotation3::from_axis_angle(&axis, sign * step) * best.transform.rotation;
                        let e = estimator.estimate(model.points(), &r)?;
                        if e.delta_max > best.delta_max {
                            best = e;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    break;
                }
            }
            step /= 2.0;
        }
        Ok(best)
    }
}

pub fn estimate_pose(scene: &PointNormalCloud, model: &PointNormalCloud, cfg: &PoseEstimatorConfig) -> Result<PoseEstimate> {
    PoseEstimator::new(cfg.clone())?.estimate(scene, model)
}
