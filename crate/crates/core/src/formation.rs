//! Homogeneous transformations of the team and the leader–follower
//! acquisition law.
//!
//! A planar homogeneous transformation maps every agent's initial position
//! `r0` to its global desired position `Q r0 + d`. Three non-collinear
//! leaders determine `(Q, d)` uniquely. Each follower keeps constant
//! barycentric weights over three in-neighbors, so a weighted sum of the
//! neighbors' positions reproduces the transformation for the follower.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::geom::{self, Mat2, Vec2};
use crate::linalg;

/// Triangles with a smaller area (m²) are treated as collinear.
pub const COLLINEAR_AREA: f64 = 1e-9;

/// Tolerance on weight sums and on reproducing initial positions.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

/// `r ↦ Q r + d` with an orientation-preserving Jacobian `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HomogeneousTransform {
    jacobian: Mat2,
    displacement: Vec2,
}

impl HomogeneousTransform {
    pub const IDENTITY: HomogeneousTransform = HomogeneousTransform {
        jacobian: Mat2::IDENTITY,
        displacement: Vec2::ZERO,
    };

    pub fn new(jacobian: Mat2, displacement: Vec2) -> Result<Self> {
        if !jacobian.is_finite() || !displacement.is_finite() {
            return Err(Error::NonFinite("homogeneous transform"));
        }
        let det = jacobian.det();
        if libm::fabs(det) < 1e-12 {
            return Err(Error::SingularTransform { det });
        }
        if det < 0.0 {
            return Err(Error::OrientationReversed { det });
        }
        Ok(Self {
            jacobian,
            displacement,
        })
    }

    pub fn jacobian(&self) -> &Mat2 {
        &self.jacobian
    }

    pub fn displacement(&self) -> Vec2 {
        self.displacement
    }

    #[inline]
    pub fn apply(&self, r0: Vec2) -> Vec2 {
        self.jacobian * r0 + self.displacement
    }
}

impl Default for HomogeneousTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// A transform tagged with the time (s) it applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimedTransform {
    pub t: f64,
    pub transform: HomogeneousTransform,
}

pub fn apply_transform(t: &HomogeneousTransform, r0: Vec2) -> Vec2 {
    t.apply(r0)
}

fn check_triangle(tri: &[Vec2; 3]) -> core::result::Result<(), f64> {
    if !tri.iter().all(|v| v.is_finite()) {
        return Err(f64::NAN);
    }
    let area = geom::triangle_area(tri);
    if area < COLLINEAR_AREA {
        Err(area)
    } else {
        Ok(())
    }
}

/// Recovers the transform that carries the initial leader triangle onto
/// the current one.
pub fn transform_from_leaders(
    initial: &[Vec2; 3],
    current: &[Vec2; 3],
) -> Result<HomogeneousTransform> {
    check_triangle(initial).map_err(|area| Error::CollinearLeaders { area })?;
    if !current.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("leader positions"));
    }
    // Q [e1 e2] = [f1 f2] with edges taken from the first leader; this is
    // the same linear system as the Kronecker form, reduced by eliminating d.
    let edges0 = Mat2::from_columns(initial[1] - initial[0], initial[2] - initial[0]);
    let edges = Mat2::from_columns(current[1] - current[0], current[2] - current[0]);
    let inv = edges0.inverse().ok_or(Error::CollinearLeaders { area: 0.0 })?;
    let q = edges * inv;
    let d = current[0] - q * initial[0];
    HomogeneousTransform::new(q, d)
}

/// Barycentric weights of a follower over its three in-neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Weights(pub [f64; 3]);

impl Weights {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// All weights strictly inside (0, 1): the follower lies inside its
    /// neighbor triangle.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0 && w < 1.0)
    }

    pub fn combine(&self, points: &[Vec2; 3]) -> Vec2 {
        points[0] * self.0[0] + points[1] * self.0[1] + points[2] * self.0[2]
    }
}

/// Barycentric coordinates of `follower_initial` in the triangle of
/// `neighbor_initial`. A follower outside its neighbor triangle gets a
/// negative weight; that is allowed but logged.
pub fn communication_weights(neighbor_initial: &[Vec2; 3], follower_initial: Vec2) -> Result<Weights> {
    barycentric(neighbor_initial, follower_initial).map_err(|area| Error::CollinearNeighbors {
        follower: None,
        area,
    })
}

fn barycentric(tri: &[Vec2; 3], p: Vec2) -> core::result::Result<Weights, f64> {
    check_triangle(tri)?;
    let edges = Mat2::from_columns(tri[1] - tri[0], tri[2] - tri[0]);
    let inv = edges.inverse().ok_or(0.0)?;
    let w = inv * (p - tri[0]);
    let weights = Weights([1.0 - w.x - w.y, w.x, w.y]);
    if !weights.is_interior() {
        log::warn!(
            "follower at {} lies outside its neighbor triangle (weights {:?})",
            p,
            weights.0
        );
    }
    Ok(weights)
}

/// Weighted sum of the neighbors' (actual or last received) positions.
pub fn local_desired_position(weights: &Weights, neighbor_positions: &[Vec2; 3]) -> Vec2 {
    weights.combine(neighbor_positions)
}

/// A follower's in-neighbors and its constant weights over them.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FollowerLink {
    pub neighbors: [AgentId; 3],
    pub weights: Weights,
}

/// Input description of one follower. Either the position or the weights
/// may be left out; positions left out are solved from the weights of all
/// such followers jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerDef {
    pub id: AgentId,
    pub neighbors: [AgentId; 3],
    pub position: Option<Vec2>,
    pub weights: Option<Weights>,
}

/// Validated team description.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FormationSpec {
    leaders: [AgentId; 3],
    followers: Vec<AgentId>,
    initial_positions: BTreeMap<AgentId, Vec2>,
    topology: BTreeMap<AgentId, FollowerLink>,
    epsilon: f64,
    delta: f64,
}

impl FormationSpec {
    pub fn new(
        leaders: [(AgentId, Vec2); 3],
        followers: Vec<FollowerDef>,
        epsilon: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: "must be positive",
            });
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "must be positive",
            });
        }

        let mut positions = BTreeMap::new();
        for (id, p) in leaders {
            if !p.is_finite() {
                return Err(Error::NonFinite("leader position"));
            }
            if positions.insert(id, p).is_some() {
                return Err(Error::InvalidFormation(format!("duplicate id {}", id.0)));
            }
        }
        let leader_tri = [leaders[0].1, leaders[1].1, leaders[2].1];
        check_triangle(&leader_tri).map_err(|area| Error::CollinearLeaders { area })?;

        let mut ids: Vec<AgentId> = leaders.iter().map(|l| l.0).collect();
        for f in &followers {
            if ids.contains(&f.id) {
                return Err(Error::InvalidFormation(format!("duplicate id {}", f.id.0)));
            }
            ids.push(f.id);
        }
        for f in &followers {
            for n in f.neighbors {
                if n == f.id {
                    return Err(Error::InvalidFormation(format!(
                        "{} lists itself as an in-neighbor",
                        f.id
                    )));
                }
                if !ids.contains(&n) {
                    return Err(Error::UnknownAgent(n));
                }
            }
            if f.neighbors[0] == f.neighbors[1]
                || f.neighbors[1] == f.neighbors[2]
                || f.neighbors[0] == f.neighbors[2]
            {
                return Err(Error::InvalidFormation(format!(
                    "{} needs three distinct in-neighbors",
                    f.id
                )));
            }
            if let Some(p) = f.position {
                if !p.is_finite() {
                    return Err(Error::NonFinite("follower position"));
                }
                positions.insert(f.id, p);
            }
        }

        solve_unplaced(&followers, &mut positions)?;

        let mut topology = BTreeMap::new();
        for f in &followers {
            let tri = f.neighbors.map(|n| positions[&n]);
            let own = positions[&f.id];
            let weights = match f.weights {
                Some(w) => {
                    check_triangle(&tri).map_err(|area| Error::CollinearNeighbors {
                        follower: Some(f.id),
                        area,
                    })?;
                    let sum = w.sum();
                    if !(libm::fabs(sum - 1.0) <= WEIGHT_TOLERANCE) {
                        return Err(Error::WeightSum {
                            follower: f.id,
                            sum,
                        });
                    }
                    let residual = w.combine(&tri).distance(own);
                    if !(residual <= WEIGHT_TOLERANCE) {
                        return Err(Error::WeightMismatch {
                            follower: f.id,
                            residual,
                        });
                    }
                    if !w.is_interior() {
                        log::warn!("{} lies outside its neighbor triangle", f.id);
                    }
                    w
                }
                None => barycentric(&tri, own).map_err(|area| Error::CollinearNeighbors {
                    follower: Some(f.id),
                    area,
                })?,
            };
            topology.insert(
                f.id,
                FollowerLink {
                    neighbors: f.neighbors,
                    weights,
                },
            );
        }

        Ok(Self {
            leaders: leaders.map(|l| l.0),
            followers: followers.iter().map(|f| f.id).collect(),
            initial_positions: positions,
            topology,
            epsilon,
            delta,
        })
    }

    /// The bundled five-vehicle team: an
    /// equilateral leader triangle with 4.72 m edges and two followers
    /// placed by the weights (0.5, 0.134, 0.366) over (1, 3, 5) and
    /// (2, 3, 4); ε = 0.28 m, δ = 0.40 m.
    pub fn reference_team() -> Self {
        let edge = 4.72;
        let leaders = [
            (AgentId(1), Vec2::new(0.0, 0.0)),
            (AgentId(2), Vec2::new(edge, 0.0)),
            (AgentId(3), Vec2::new(0.5 * edge, 0.5 * libm::sqrt(3.0) * edge)),
        ];
        let weights = Weights([0.5, 0.134, 0.366]);
        let followers = alloc::vec![
            FollowerDef {
                id: AgentId(4),
                neighbors: [AgentId(1), AgentId(3), AgentId(5)],
                position: None,
                weights: Some(weights),
            },
            FollowerDef {
                id: AgentId(5),
                neighbors: [AgentId(2), AgentId(3), AgentId(4)],
                position: None,
                weights: Some(weights),
            },
        ];
        Self::new(leaders, followers, 0.28, 0.40).expect("reference team is valid")
    }

    /// Same team with a different deviation bound.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "must be positive",
            });
        }
        Ok(Self {
            delta,
            ..self.clone()
        })
    }

    pub fn leaders(&self) -> [AgentId; 3] {
        self.leaders
    }

    pub fn followers(&self) -> &[AgentId] {
        &self.followers
    }

    /// Leaders first, then followers, in declaration order.
    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.leaders.iter().copied().chain(self.followers.iter().copied())
    }

    pub fn agent_count(&self) -> usize {
        3 + self.followers.len()
    }

    pub fn is_leader(&self, id: AgentId) -> bool {
        self.leaders.contains(&id)
    }

    pub fn initial_position(&self, id: AgentId) -> Result<Vec2> {
        self.initial_positions
            .get(&id)
            .copied()
            .ok_or(Error::UnknownAgent(id))
    }

    pub fn initial_positions(&self) -> &BTreeMap<AgentId, Vec2> {
        &self.initial_positions
    }

    pub fn leader_initial(&self) -> [Vec2; 3] {
        self.leaders.map(|id| self.initial_positions[&id])
    }

    pub fn link(&self, follower: AgentId) -> Option<&FollowerLink> {
        self.topology.get(&follower)
    }

    pub fn topology(&self) -> &BTreeMap<AgentId, FollowerLink> {
        &self.topology
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Position of agent `id` in `self.agents()` order.
    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.agents().position(|a| a == id)
    }
}

/// Fills in follower positions left unspecified by solving
/// `r_i - Σ_{j unplaced} w_ij r_j = Σ_{j placed} w_ij r_j`.
fn solve_unplaced(followers: &[FollowerDef], positions: &mut BTreeMap<AgentId, Vec2>) -> Result<()> {
    let unplaced: Vec<&FollowerDef> = followers.iter().filter(|f| f.position.is_none()).collect();
    if unplaced.is_empty() {
        return Ok(());
    }
    let n = unplaced.len();
    let mut a = alloc::vec![alloc::vec![0.0; n]; n];
    let mut b = alloc::vec![Vec2::ZERO; n];
    for (row, f) in unplaced.iter().enumerate() {
        let w = f.weights.ok_or_else(|| {
            Error::InvalidFormation(format!("{} needs a position or weights", f.id))
        })?;
        a[row][row] = 1.0;
        for (k, n_id) in f.neighbors.iter().enumerate() {
            match unplaced.iter().position(|u| u.id == *n_id) {
                Some(col) => a[row][col] -= w.0[k],
                None => b[row] += positions[n_id] * w.0[k],
            }
        }
    }
    let solved = linalg::solve_planar(a, b).ok_or_else(|| {
        Error::InvalidFormation("follower weights do not determine positions".into())
    })?;
    for (f, p) in unplaced.iter().zip(solved) {
        positions.insert(f.id, p);
    }
    Ok(())
}

/// Global desired position of every agent under `t`.
pub fn global_desired_positions(
    spec: &FormationSpec,
    t: &HomogeneousTransform,
) -> BTreeMap<AgentId, Vec2> {
    spec.initial_positions
        .iter()
        .map(|(&id, &r0)| (id, t.apply(r0)))
        .collect()
}
