//! Linear least-squares 2D trilateration.
//!
//! Each 3D range is projected onto the horizontal plane using the known vertical
//! separation, then the circle equations are differenced against the last anchor
//! to give the overdetermined linear system `A [x y]^T = b`, solved through the
//! 2x2 normal equations.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trilateration {
    pub position: Vector2<f64>,
    /// Horizontal ranges actually used, m.
    pub ranges: Vec<f64>,
    /// Anchors whose projected squared range went negative and was clamped to 0.
    pub low_confidence: Vec<bool>,
}

/// Solves for the receiver's `(x, y)` from 3D ranges to anchors at known 3D
/// positions, given the receiver height `z_r`.
pub fn trilaterate_2d(anchors: &[Vector3<f64>], distances: &[f64], z_r: f64) -> Result<Trilateration> {
    if anchors.len() != distances.len() {
        return Err(Error::invalid(format!(
            "{} anchors but {} distances",
            anchors.len(),
            distances.len()
        )));
    }
    if anchors.len() < 3 {
        return Err(Error::TooFewAnchors { needed: 3, got: anchors.len() });
    }

    let mut ranges_sq = Vec::with_capacity(anchors.len());
    let mut low_confidence = Vec::with_capacity(anchors.len());
    for (a, &d) in anchors.iter().zip(distances) {
        if !d.is_finite() {
            return Err(Error::invalid("non-finite distance"));
        }
        let dz = z_r - a.z;
        let r2 = d * d - dz * dz;
        low_confidence.push(r2 < 0.0);
        ranges_sq.push(r2.max(0.0));
    }

    let last = anchors.len() - 1;
    let (xn, yn, rn2) = (anchors[last].x, anchors[last].y, ranges_sq[last]);
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for i in 0..last {
        let (xi, yi) = (anchors[i].x, anchors[i].y);
        let row = Vector2::new(2.0 * (xi - xn), 2.0 * (yi - yn));
        let rhs = rn2 - ranges_sq[i] + xi * xi - xn * xn + yi * yi - yn * yn;
        ata += row * row.transpose();
        atb += row * rhs;
    }

    let det = ata.determinant();
    let scale = ata.trace();
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(Error::DegenerateGeometry);
    }
    let position = Vector2::new(
        (ata[(1, 1)] * atb.x - ata[(0, 1)] * atb.y) / det,
        (ata[(0, 0)] * atb.y - ata[(1, 0)] * atb.x) / det,
    );
    Ok(Trilateration { position, ranges: ranges_sq.iter().map(|r| r.sqrt()).collect(), low_confidence })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table_anchors() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.25, 1.0, 0.0),
            Vector3::new(1.0, 1.75, 0.0),
            Vector3::new(1.75, 1.0, 0.0),
            Vector3::new(1.0, 0.25, 0.0),
        ]
    }

    #[test]
    fn symmetric_center_is_exact() {
        let anchors = table_anchors();
        let rx = Vector3::new(1.0, 1.0, 1.3);
        let d: Vec<f64> = anchors.iter().map(|a| (rx - a).norm()).collect();
        let sol = trilaterate_2d(&anchors, &d, rx.z).unwrap();
        assert_eq!(sol.position, Vector2::new(1.0, 1.0));
        assert!(sol.low_confidence.iter().all(|c| !c));
    }

    #[test]
    fn exact_ranges_recover_interior_point() {
        let anchors = table_anchors();
        let rx = Vector3::new(0.61, 1.37, 0.9);
        let d: Vec<f64> = anchors.iter().map(|a| (rx - a).norm()).collect();
        let sol = trilaterate_2d(&anchors, &d, rx.z).unwrap();
        assert!((sol.position - rx.xy()).norm() < 1e-9);
    }

    #[test]
    fn collinear_anchors_are_degenerate() {
        let anchors = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(2.0, 2.0, 0.0),
        ];
        let err = trilaterate_2d(&anchors, &[1.0, 1.0, 1.0], 0.5).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry));
    }

    #[test]
    fn too_few_anchors() {
        let anchors = &table_anchors()[..2];
        assert!(matches!(
            trilaterate_2d(anchors, &[1.0, 1.0], 0.5),
            Err(Error::TooFewAnchors { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn negative_projected_range_clamps_and_flags() {
        let anchors = table_anchors();
        let sol = trilaterate_2d(&anchors, &[0.5, 1.2, 1.2, 1.2], 1.0).unwrap();
        assert_eq!(sol.low_confidence, vec![true, false, false, false]);
        assert_eq!(sol.ranges[0], 0.0);
    }
}
