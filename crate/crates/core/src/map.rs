//! Sampled maps from a point cloud into a geodesic target.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::space::PointCloudSpace;
use crate::target::{GeodesicTarget, TargetPoint};

/// One target point per domain index.
#[derive(Debug, Clone)]
pub struct MetricMap<'a> {
    space: &'a PointCloudSpace,
    target: &'a GeodesicTarget,
    values: Vec<TargetPoint>,
}

impl<'a> MetricMap<'a> {
    /// Validates and canonicalizes every value.
    pub fn new(
        space: &'a PointCloudSpace,
        target: &'a GeodesicTarget,
        values: Vec<TargetPoint>,
    ) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::MapLength {
                expected: space.len(),
                found: values.len(),
            });
        }
        let values = values
            .iter()
            .map(|v| target.check_point(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricMap {
            space,
            target,
            values,
        })
    }

    /// Builds `x ↦ f(i)` over all indices.
    pub fn from_fn(
        space: &'a PointCloudSpace,
        target: &'a GeodesicTarget,
        f: impl FnMut(usize) -> TargetPoint,
    ) -> Result<Self> {
        Self::new(space, target, (0..space.len()).map(f).collect())
    }

    /// Real-valued map into `euclidean(1)`; `target` must be that target.
    pub fn scalar(space: &'a PointCloudSpace, target: &'a GeodesicTarget, f: &[f64]) -> Result<Self> {
        Self::new(
            space,
            target,
            f.iter().map(|&x| TargetPoint::Euclidean(vec![x])).collect(),
        )
    }

    pub fn from_json(space: &'a PointCloudSpace, target: &'a GeodesicTarget, values: &[Value]) -> Result<Self> {
        let values = values
            .iter()
            .map(|v| target.point_from_json(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, target, values)
    }

    pub fn to_json(&self) -> Vec<Value> {
        self.values.iter().map(|v| self.target.point_to_json(v)).collect()
    }

    pub fn space(&self) -> &'a PointCloudSpace {
        self.space
    }

    pub fn target(&self) -> &'a GeodesicTarget {
        self.target
    }

    pub fn values(&self) -> &[TargetPoint] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &TargetPoint {
        &self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `d_Y(u(i), u(j))`.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.target.dist(&self.values[i], &self.values[j])
    }

    /// Pointwise geodesic interpolation `x ↦ γ_{u(x), v(x)}(s)`.
    pub fn interpolate(&self, other: &MetricMap<'_>, s: f64) -> Result<MetricMap<'a>> {
        if other.len() != self.len() {
            return Err(Error::MapLength {
                expected: self.len(),
                found: other.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(other.values())
            .map(|(a, b)| self.target.geodesic_point(a, b, s))
            .collect();
        Ok(MetricMap {
            space: self.space,
            target: self.target,
            values,
        })
    }

    /// Pointwise target distance `x ↦ d_Y(u(x), v(x))`.
    pub fn pointwise_distance(&self, other: &MetricMap<'_>) -> Vec<f64> {
        self.values
            .iter()
            .zip(other.values())
            .map(|(a, b)| self.target.dist(a, b))
            .collect()
    }
}
