//! Per-edge boundary conditions and the row role they assign to each node.

use crate::error::{CmcError, Result};
use crate::spectral::{Grid, NodeKind};

/// Condition imposed on the normal displacement along one logical edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCondition {
    /// `φ = 0`: the boundary curve is held fixed.
    Dirichlet,
    /// Zero outward derivative of `φ` across the edge.
    Neumann,
    /// No edge at all; the direction is periodic.
    Periodic,
}

/// Which condition a node shared by two constrained edges takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerPolicy {
    /// Dirichlet whenever either adjacent edge is Dirichlet.
    #[default]
    DirichletWins,
    /// Neumann whenever either adjacent edge is Neumann.
    NeumannWins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    U,
    V,
}

/// The equation a node's row carries in the residual and Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRole {
    /// Mean-curvature equation `2H − λ = 0`.
    Interior,
    Dirichlet,
    /// `outward · ∂_axis φ = 0`, with `outward = ±1`.
    Neumann { axis: Axis, outward: f64 },
}

impl NodeRole {
    pub fn is_interior(&self) -> bool {
        matches!(self, NodeRole::Interior)
    }
}

/// Conditions on the edges `u = +l_u`, `u = −l_u`, `v = +l_v`, `v = −l_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryConditionSet {
    pub u_plus: EdgeCondition,
    pub u_minus: EdgeCondition,
    pub v_plus: EdgeCondition,
    pub v_minus: EdgeCondition,
    pub corners: CornerPolicy,
}

impl BoundaryConditionSet {
    pub fn new(
        u_plus: EdgeCondition,
        u_minus: EdgeCondition,
        v_plus: EdgeCondition,
        v_minus: EdgeCondition,
        corners: CornerPolicy,
    ) -> Result<Self> {
        let set = Self {
            u_plus,
            u_minus,
            v_plus,
            v_minus,
            corners,
        };
        for (a, b, name) in [(u_plus, u_minus, "u"), (v_plus, v_minus, "v")] {
            if (a == EdgeCondition::Periodic) != (b == EdgeCondition::Periodic) {
                return Err(CmcError::InvalidArgument(format!(
                    "periodic condition must hold on both {name} edges or neither"
                )));
            }
        }
        Ok(set)
    }

    /// Dirichlet on every edge.
    pub fn dirichlet() -> Self {
        Self {
            u_plus: EdgeCondition::Dirichlet,
            u_minus: EdgeCondition::Dirichlet,
            v_plus: EdgeCondition::Dirichlet,
            v_minus: EdgeCondition::Dirichlet,
            corners: CornerPolicy::DirichletWins,
        }
    }

    fn periodic_u(&self) -> bool {
        self.u_plus == EdgeCondition::Periodic
    }

    fn periodic_v(&self) -> bool {
        self.v_plus == EdgeCondition::Periodic
    }

    /// Checks that periodic directions use Fourier nodes and vice versa.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        for (periodic, kind, name) in [
            (self.periodic_u(), grid.kind_u, "u"),
            (self.periodic_v(), grid.kind_v, "v"),
        ] {
            if periodic != (kind == NodeKind::Fourier) {
                return Err(CmcError::InvalidArgument(format!(
                    "{name} direction: periodic conditions require Fourier nodes and vice versa"
                )));
            }
        }
        Ok(())
    }

    /// Row role of every node, in vectorized order.
    pub fn roles(&self, grid: &Grid) -> Result<Vec<NodeRole>> {
        self.check_grid(grid)?;
        let pu = grid.points_u();
        let pv = grid.points_v();
        let mut roles = Vec::with_capacity(grid.len());
        for i in 0..pu {
            // Chebyshev nodes run from +l to −l
            let u_edge = if self.periodic_u() {
                None
            } else if i == 0 {
                Some((self.u_plus, 1.0))
            } else if i == pu - 1 {
                Some((self.u_minus, -1.0))
            } else {
                None
            };
            for j in 0..pv {
                let v_edge = if self.periodic_v() {
                    None
                } else if j == 0 {
                    Some((self.v_plus, 1.0))
                } else if j == pv - 1 {
                    Some((self.v_minus, -1.0))
                } else {
                    None
                };
                let from_u = u_edge.map(|(c, s)| role_for(c, Axis::U, s));
                let from_v = v_edge.map(|(c, s)| role_for(c, Axis::V, s));
                let role = match (from_u, from_v) {
                    (None, None) => NodeRole::Interior,
                    (Some(r), None) | (None, Some(r)) => r,
                    (Some(a), Some(b)) => self.resolve_corner(a, b),
                };
                roles.push(role);
            }
        }
        Ok(roles)
    }

    fn resolve_corner(&self, a: NodeRole, b: NodeRole) -> NodeRole {
        let a_dir = matches!(a, NodeRole::Dirichlet);
        let b_dir = matches!(b, NodeRole::Dirichlet);
        match self.corners {
            CornerPolicy::DirichletWins if a_dir || b_dir => NodeRole::Dirichlet,
            CornerPolicy::NeumannWins if !a_dir => a,
            CornerPolicy::NeumannWins if !b_dir => b,
            _ => a,
        }
    }
}

fn role_for(cond: EdgeCondition, axis: Axis, outward: f64) -> NodeRole {
    match cond {
        EdgeCondition::Dirichlet => NodeRole::Dirichlet,
        EdgeCondition::Neumann => NodeRole::Neumann { axis, outward },
        EdgeCondition::Periodic => NodeRole::Interior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_roles() {
        let grid = Grid::chebyshev(4, 6, 0.2, 1.0).unwrap();
        let bc = BoundaryConditionSet::new(
            EdgeCondition::Dirichlet,
            EdgeCondition::Dirichlet,
            EdgeCondition::Neumann,
            EdgeCondition::Neumann,
            CornerPolicy::DirichletWins,
        )
        .unwrap();
        let roles = bc.roles(&grid).unwrap();
        assert_eq!(roles[grid.index(0, 0)], NodeRole::Dirichlet);
        assert_eq!(roles[grid.index(4, 6)], NodeRole::Dirichlet);
        assert_eq!(roles[grid.index(0, 3)], NodeRole::Dirichlet);
        assert_eq!(
            roles[grid.index(2, 0)],
            NodeRole::Neumann {
                axis: Axis::V,
                outward: 1.0
            }
        );
        assert_eq!(
            roles[grid.index(2, 6)],
            NodeRole::Neumann {
                axis: Axis::V,
                outward: -1.0
            }
        );
        assert_eq!(roles.iter().filter(|r| r.is_interior()).count(), 3 * 5);
    }

    #[test]
    fn periodic_direction_has_no_edges() {
        let grid = Grid::new(4, 8, 0.5, std::f64::consts::PI, NodeKind::Chebyshev, NodeKind::Fourier)
            .unwrap();
        let bc = BoundaryConditionSet::new(
            EdgeCondition::Dirichlet,
            EdgeCondition::Dirichlet,
            EdgeCondition::Periodic,
            EdgeCondition::Periodic,
            CornerPolicy::DirichletWins,
        )
        .unwrap();
        let roles = bc.roles(&grid).unwrap();
        assert_eq!(roles.iter().filter(|r| r.is_interior()).count(), 3 * 8);
        assert!(BoundaryConditionSet::dirichlet().roles(&grid).is_err());
    }

    #[test]
    fn one_sided_periodic_rejected() {
        assert!(BoundaryConditionSet::new(
            EdgeCondition::Dirichlet,
            EdgeCondition::Dirichlet,
            EdgeCondition::Periodic,
            EdgeCondition::Neumann,
            CornerPolicy::DirichletWins,
        )
        .is_err());
    }
}
