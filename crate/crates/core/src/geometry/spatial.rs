use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use super::Vec3;

/// Static k-d tree over a point set, answering neighbour queries by index.
pub struct PointIndex {
    tree: Option<ImmutableKdTree<f64, 3>>,
    len: usize,
}

impl PointIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = (!raw.is_empty()).then(|| ImmutableKdTree::new_from_slice(&raw).expect("k-d tree construction"));
        Self { tree, len: points.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Up to `k` nearest indices, closest first, with squared distances.
    pub fn nearest(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let (Some(k), Some(tree)) = (NonZero::new(k.min(self.len)), &self.tree) else {
            return Vec::new();
        };
        tree
            .query(&[q.x, q.y, q.z])
            .nearest_n::<SquaredEuclidean<f64>>(k)
            .execute()
            .into_iter()
            .map(|r| (r.item as usize, r.distance))
            .collect()
    }

    pub fn nearest_one(&self, q: &Vec3) -> Option<(usize, f64)> {
        let r = self.tree.as_ref()?.query(&[q.x, q.y, q.z]).nearest_one::<SquaredEuclidean<f64>>().execute();
        Some((r.item as usize, r.distance))
    }

    /// Indices within `radius` (inclusive), closest first.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let Some(tree) = &self.tree else {
            return Vec::new();
        };
        tree.query(&[q.x, q.y, q.z])
            .within::<SquaredEuclidean<f64>>(radius * radius)
            .execute()
            .into_iter()
            .map(|r| r.item as usize)
            .collect()
    }
}
