//! Safety certificate for a planned deformation.
//!
//! If every agent stays within `delta` of its global desired position and
//! the smallest singular value of the Jacobian never drops below
//! `lambda_min`, the team is collision free, followers stay inside the
//! leading triangle and every agent stays inside the bounding triangle.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::formation::{FormationSpec, HomogeneousTransform, TimedTransform};
use crate::geom::{self, Mat2, Vec2};

/// Slack allowed when comparing singular values against `lambda_min`.
pub const CERTIFICATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SafetyMargins {
    /// Smallest initial distance between any two agents (m).
    pub min_separation: f64,
    /// Smallest initial distance from a follower to the leading-triangle
    /// boundary (m). Infinite when there are no followers.
    pub min_boundary_distance: f64,
    /// Offset between parallel sides of the leading and bounding triangles,
    /// `delta + epsilon` (m).
    pub bounding_offset: f64,
    pub delta_max: f64,
    pub lambda_min: f64,
}

pub fn compute_margins(spec: &FormationSpec) -> Result<SafetyMargins> {
    let eps = spec.epsilon();
    let positions: Vec<(crate::AgentId, Vec2)> =
        spec.initial_positions().iter().map(|(&id, &p)| (id, p)).collect();

    let mut min_separation = f64::INFINITY;
    for (i, (_, a)) in positions.iter().enumerate() {
        for (_, b) in &positions[i + 1..] {
            min_separation = min_separation.min(a.distance(*b));
        }
    }

    let leading = spec.leader_initial();
    let mut min_boundary_distance = f64::INFINITY;
    for &f in spec.followers() {
        let d = geom::signed_distance_to_triangle(spec.initial_position(f)?, &leading);
        if d <= 0.0 {
            return Err(Error::FollowerOutsideTriangle(f));
        }
        min_boundary_distance = min_boundary_distance.min(d);
    }

    let delta_max = ((min_separation - 2.0 * eps) / 2.0).min(min_boundary_distance - eps);
    if !(delta_max > 0.0) {
        return Err(Error::InfeasibleMargins { delta_max });
    }
    let lambda_min = (spec.delta() + eps) / (delta_max + eps);
    Ok(SafetyMargins {
        min_separation,
        min_boundary_distance,
        bounding_offset: spec.delta() + eps,
        delta_max,
        lambda_min,
    })
}

/// Singular values of `q` in ascending order, from the closed-form
/// eigenvalues of `qᵀq`.
pub fn singular_values(q: &Mat2) -> Result<(f64, f64)> {
    if !q.is_finite() {
        return Err(Error::NonFinite("jacobian"));
    }
    let det = q.det();
    if libm::fabs(det) < 1e-12 {
        return Err(Error::SingularTransform { det });
    }
    let [[q11, q12], [q21, q22]] = q.rows;
    let a = q11 * q11 + q21 * q21;
    let b = q11 * q12 + q21 * q22;
    let c = q12 * q12 + q22 * q22;
    if b == 0.0 {
        let (s1, s2) = (libm::sqrt(a), libm::sqrt(c));
        return Ok(if s1 <= s2 { (s1, s2) } else { (s2, s1) });
    }
    let mean = 0.5 * (a + c);
    let radius = libm::hypot(0.5 * (a - c), b);
    let largest = libm::sqrt(mean + radius);
    // the product of the singular values is |det|; this avoids cancellation
    // in mean - radius for the small one
    Ok((libm::fabs(det) / largest, largest))
}

/// Eigenvalues of `(QᵀQ)^{1/2}`, i.e. the singular values of the Jacobian.
pub fn deformation_eigenvalues(t: &HomogeneousTransform) -> Result<(f64, f64)> {
    singular_values(t.jacobian())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertificateSample {
    pub t: f64,
    pub min_singular_value: f64,
    pub holds: bool,
}

/// What a passing certificate guarantees, assuming every agent stays within
/// `deviation_bound` of its global desired position.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Guarantees {
    pub deviation_bound: f64,
    /// Agent centers stay at least this far apart (2ε).
    pub min_separation: f64,
    /// Followers stay at least this far inside the leading triangle (ε).
    pub containment_margin: f64,
    /// Every agent stays inside the leading triangle dilated by this (δ+ε).
    pub bounding_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertificateReport {
    pub margins: SafetyMargins,
    pub samples: Vec<CertificateSample>,
    pub passed: bool,
    /// Sample with the smallest singular value.
    pub worst: CertificateSample,
    /// `worst.min_singular_value - lambda_min`.
    pub worst_margin: f64,
    pub first_violation: Option<f64>,
    /// Shortest leader-triangle edge over the plan (m).
    pub min_leader_edge: f64,
    pub guarantees: Option<Guarantees>,
}

pub fn certify_plan(spec: &FormationSpec, transforms: &[TimedTransform]) -> Result<CertificateReport> {
    let margins = compute_margins(spec)?;
    if transforms.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let leaders = spec.leader_initial();
    let mut samples = Vec::with_capacity(transforms.len());
    let mut min_leader_edge = f64::INFINITY;
    for tt in transforms {
        let (lo, _) = deformation_eigenvalues(&tt.transform)?;
        samples.push(CertificateSample {
            t: tt.t,
            min_singular_value: lo,
            holds: lo >= margins.lambda_min - CERTIFICATE_SLACK,
        });
        let tri = leaders.map(|p| tt.transform.apply(p));
        for i in 0..3 {
            min_leader_edge = min_leader_edge.min(tri[i].distance(tri[(i + 1) % 3]));
        }
    }
    let worst = *samples
        .iter()
        .min_by(|a, b| a.min_singular_value.total_cmp(&b.min_singular_value))
        .expect("non-empty");
    let passed = samples.iter().all(|s| s.holds);
    let first_violation = samples.iter().find(|s| !s.holds).map(|s| s.t);
    let eps = spec.epsilon();
    Ok(CertificateReport {
        margins,
        worst,
        worst_margin: worst.min_singular_value - margins.lambda_min,
        first_violation,
        min_leader_edge,
        guarantees: passed.then_some(Guarantees {
            deviation_bound: spec.delta(),
            min_separation: 2.0 * eps,
            containment_margin: eps,
            bounding_offset: margins.bounding_offset,
        }),
        samples,
        passed,
    })
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.margins;
        writeln!(f, "safety certificate")?;
        writeln!(f, "  D_s (min separation)       {:.4} m", m.min_separation)?;
        writeln!(f, "  D_b (min boundary dist.)   {:.4} m", m.min_boundary_distance)?;
        writeln!(f, "  D_l (bounding offset)      {:.4} m", m.bounding_offset)?;
        writeln!(f, "  delta_max                  {:.4} m", m.delta_max)?;
        writeln!(f, "  lambda_min                 {:.6}", m.lambda_min)?;
        writeln!(
            f,
            "  min singular value         {:.6} at t = {:.3} s (margin {:+.3e})",
            self.worst.min_singular_value, self.worst.t, self.worst_margin
        )?;
        writeln!(f, "  min leader edge            {:.4} m", self.min_leader_edge)?;
        writeln!(f, "  samples                    {}", self.samples.len())?;
        match (&self.guarantees, self.first_violation) {
            (Some(g), _) => {
                writeln!(f, "  result                     PASS")?;
                writeln!(
                    f,
                    "  while every agent stays within {:.3} m of its global desired position:",
                    g.deviation_bound
                )?;
                writeln!(f, "    - agents stay at least {:.3} m apart", g.min_separation)?;
                writeln!(
                    f,
                    "    - followers stay at least {:.3} m inside the leading triangle",
                    g.containment_margin
                )?;
                write!(
                    f,
                    "    - all agents stay inside the bounding triangle (offset {:.3} m)",
                    g.bounding_offset
                )
            }
            (None, Some(t)) => write!(f, "  result                     FAIL (first violation at t = {t:.3} s)"),
            (None, None) => write!(f, "  result                     FAIL"),
        }
    }
}

/// Outer envelope around the leading triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingTriangle {
    pub vertices: [Vec2; 3],
    /// Distance between side `i` (from vertex `i` to `i + 1`) and the
    /// corresponding leading-triangle side.
    pub side_offsets: [f64; 3],
}

impl BoundingTriangle {
    pub fn centroid(&self) -> Vec2 {
        geom::centroid(&self.vertices)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        geom::point_in_triangle(p, &self.vertices)
    }
}

/// Dilates `leading` about its centroid so that its sides stay parallel and
/// the closest side moves out by exactly `offset`; the other sides move out
/// by at least `offset`. For equilateral triangles all three offsets equal
/// `offset`.
pub fn bounding_triangle(leading: &[Vec2; 3], offset: f64) -> Result<BoundingTriangle> {
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "offset",
            reason: "must be non-negative",
        });
    }
    let area = geom::triangle_area(leading);
    if !(area >= crate::formation::COLLINEAR_AREA) {
        return Err(Error::CollinearLeaders { area });
    }
    let center = geom::centroid(leading);
    // centroid-to-side distance is a third of the altitude on that side
    let side_gap = |i: usize| {
        let (a, b) = (leading[i], leading[(i + 1) % 3]);
        2.0 * area / a.distance(b) / 3.0
    };
    let gaps = [side_gap(0), side_gap(1), side_gap(2)];
    let nearest = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + offset / nearest;
    Ok(BoundingTriangle {
        vertices: leading.map(|v| center + (v - center) * scale),
        side_offsets: gaps.map(|g| (scale - 1.0) * g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::{AgentId, FollowerDef};

    fn equilateral(edge: f64) -> [Vec2; 3] {
        [
            Vec2::new(0.0, 0.0),
            Vec2::new(edge, 0.0),
            Vec2::new(0.5 * edge, 0.5 * libm::sqrt(3.0) * edge),
        ]
    }

    fn team(followers: Vec<Vec2>, leaders: [Vec2; 3], eps: f64, delta: f64) -> Result<FormationSpec> {
        let leaders = [
            (AgentId(1), leaders[0]),
            (AgentId(2), leaders[1]),
            (AgentId(3), leaders[2]),
        ];
        let defs = followers
            .into_iter()
            .enumerate()
            .map(|(i, p)| FollowerDef {
                id: AgentId(4 + i as u32),
                neighbors: [AgentId(1), AgentId(2), AgentId(3)],
                position: Some(p),
                weights: None,
            })
            .collect();
        FormationSpec::new(leaders, defs, eps, delta)
    }

    #[test]
    fn centroid_follower_boundary_distance_is_inradius() {
        // equilateral with circumradius R has inradius R/2
        let r = 2.0;
        let edge = r * libm::sqrt(3.0);
        let tri = equilateral(edge);
        let spec = team(alloc::vec![geom::centroid(&tri)], tri, 0.1, 0.1).unwrap();
        let m = compute_margins(&spec).unwrap();
        assert!((m.min_boundary_distance - r / 2.0).abs() < 1e-12);
    }

    #[test]
    fn touching_agents_are_infeasible() {
        let tri = equilateral(4.0);
        let eps = 0.25;
        let f1 = Vec2::new(1.5, 1.0);
        let f2 = Vec2::new(1.5 + 2.0 * eps, 1.0);
        let spec = team(alloc::vec![f1, f2], tri, eps, 0.1).unwrap();
        assert!(matches!(
            compute_margins(&spec),
            Err(Error::InfeasibleMargins { delta_max }) if delta_max <= 0.0
        ));
    }

    #[test]
    fn follower_outside_is_rejected() {
        let tri = equilateral(4.0);
        let spec = team(alloc::vec![Vec2::new(-1.0, 1.0)], tri, 0.1, 0.1).unwrap();
        assert!(matches!(
            compute_margins(&spec),
            Err(Error::FollowerOutsideTriangle(AgentId(4)))
        ));
    }

    #[test]
    fn eigenvalue_examples() {
        let id = HomogeneousTransform::IDENTITY;
        assert_eq!(deformation_eigenvalues(&id).unwrap(), (1.0, 1.0));
        let s = 0.788;
        let t = HomogeneousTransform::new(Mat2::scalar(s), Vec2::ZERO).unwrap();
        assert_eq!(deformation_eigenvalues(&t).unwrap(), (s, s));
        assert!(matches!(
            singular_values(&Mat2::new(1.0, 2.0, 2.0, 4.0)),
            Err(Error::SingularTransform { .. })
        ));
    }

    #[test]
    fn identity_plan_certifies() {
        let spec = FormationSpec::reference_team();
        let plan: Vec<TimedTransform> = (0..10)
            .map(|k| TimedTransform {
                t: k as f64 * 0.01,
                transform: HomogeneousTransform::IDENTITY,
            })
            .collect();
        let report = certify_plan(&spec, &plan).unwrap();
        assert!(report.passed);
        assert!(report.guarantees.is_some());
        assert_eq!(report.worst.min_singular_value, 1.0);
        assert!(certify_plan(&spec, &[]).is_err());
    }

    #[test]
    fn zero_offset_is_identity() {
        let tri = [Vec2::new(0.0, 0.0), Vec2::new(5.0, 1.0), Vec2::new(1.0, 3.0)];
        let b = bounding_triangle(&tri, 0.0).unwrap();
        for (u, v) in b.vertices.iter().zip(tri.iter()) {
            assert!((*u - *v).norm() < 1e-15);
        }
    }

    #[test]
    fn equilateral_offset_edge() {
        let l = 3.72;
        let dl = 0.68;
        let b = bounding_triangle(&equilateral(l), dl).unwrap();
        let edge = b.vertices[0].distance(b.vertices[1]);
        assert!((edge - (l + 2.0 * libm::sqrt(3.0) * dl)).abs() < 1e-12);
        for o in b.side_offsets {
            assert!((o - dl).abs() < 1e-12);
        }
    }

    #[test]
    fn bounding_rejects_bad_input() {
        let line = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        assert!(matches!(
            bounding_triangle(&line, 1.0),
            Err(Error::CollinearLeaders { .. })
        ));
        assert!(bounding_triangle(&equilateral(1.0), -1.0).is_err());
    }
}
