use nalgebra::{Matrix3, Vector3};

use super::vec::{centroid, cross, dot, norm, scale, sub};
use crate::io::Vec3;

/// Orthonormal frame anchored at `origin`; rows of `axes` are the basis
/// vectors, forming a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFrame {
    pub origin: Vec3,
    pub axes: [Vec3; 3],
}

impl RigidFrame {
    pub fn identity() -> Self {
        RigidFrame {
            origin: [0.0; 3],
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn to_local(&self, p: Vec3) -> Vec3 {
        let d = sub(p, self.origin);
        [dot(self.axes[0], d), dot(self.axes[1], d), dot(self.axes[2], d)]
    }

    pub fn to_global(&self, q: Vec3) -> Vec3 {
        let mut out = self.origin;
        for (k, axis) in self.axes.iter().enumerate() {
            for c in 0..3 {
                out[c] += q[k] * axis[c];
            }
        }
        out
    }
}

/// Frame determined by the point cloud alone: centroid origin, principal
/// axes by decreasing variance, each axis signed so the third moment of the
/// projections is non-negative, and the last axis completing a right-handed
/// basis. It moves rigidly with the points whenever the principal variances
/// are distinct and the skewness along the first two axes is non-zero.
pub fn pocket_frame(points: &[Vec3]) -> RigidFrame {
    if points.is_empty() {
        return RigidFrame::identity();
    }
    let origin = centroid(points);
    let mut cov = Matrix3::zeros();
    for &p in points {
        let d = Vector3::from(sub(p, origin));
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axis = |k: usize| {
        let c = eig.eigenvectors.column(order[k]);
        let mut e = [c[0], c[1], c[2]];
        let skew: f64 = points.iter().map(|&p| dot(sub(p, origin), e).powi(3)).sum();
        if skew < 0.0 {
            e = scale(e, -1.0);
        }
        e
    };
    let e1 = axis(0);
    let e2 = axis(1);
    let e3 = cross(e1, e2);
    let e3 = scale(e3, 1.0 / norm(e3));
    RigidFrame {
        origin,
        axes: [e1, e2, e3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pts = [[0.0, 0.0, 0.0], [3.0, 0.1, 0.0], [0.5, 1.0, 0.2], [4.0, 2.0, 1.0], [1.0, -1.0, 2.0]];
        let f = pocket_frame(&pts);
        for &p in &pts {
            let back = f.to_global(f.to_local(p));
            for c in 0..3 {
                assert!((back[c] - p[c]).abs() < 1e-12);
            }
        }
        let det = dot(cross(f.axes[0], f.axes[1]), f.axes[2]);
        assert!((det - 1.0).abs() < 1e-12);
    }
}
