//! Discrete velocity sphere `V = R·S^{d-1}` with quadrature.
//!
//! The velocity set carries the surface measure, so `|V| = 2πR` for d = 2 and
//! `|V| = 4πR²` for d = 3. This normalisation is what makes the relaxation
//! rate `σ = R²/d` produce a unit diffusion tensor for uniform equilibria.
//!
//! Node families are antipodally symmetric and integrate quadratics in `v`
//! exactly:
//!
//! - d = 2: `N` equally spaced nodes on the circle (N even, N ≥ 4), equal
//!   weights `|V|/N`;
//! - d = 3: octahedron vertices (N = 6) or icosahedron vertices (N = 12),
//!   equal weights.

use crate::error::Error;
use crate::linalg::{self, Mat3, Vec3};
use crate::Result;

/// Relative tolerance used by the structural invariants of the grid.
pub const GRID_TOL: f64 = 1e-12;

/// Minimum allowed ratio `min M / max M` for user equilibrium tables. The
/// perturbation kernels divide by `M(v*)`, which becomes numerically fragile
/// for nearly vanishing equilibria.
pub const EQUILIBRIUM_RATIO_FLOOR: f64 = 1e-6;

/// Quadrature nodes and weights on the sphere of radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    dim: usize,
    radius: f64,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    measure: f64,
    /// Index of `-v_k` for each node `k`.
    antipode: Vec<usize>,
    /// Index of the node with the first component flipped (specular wall).
    mirror_x: Vec<usize>,
    /// Index of the node with the second component flipped.
    mirror_y: Vec<usize>,
}

/// Build the discrete velocity set.
///
/// For d = 2 any even `N ≥ 4` is accepted (odd node counts cannot be closed
/// under `v -> -v`). For d = 3 the supported antipodal designs are `N = 6`
/// (octahedron) and `N = 12` (icosahedron).
pub fn build_velocity_grid(dim: usize, radius: f64, n: usize) -> Result<VelocityGrid> {
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter {
            name: "radius".into(),
            constraint: "must be positive and finite".into(),
        });
    }
    let nodes: Vec<Vec3> = match dim {
        2 => {
            if n < 4 {
                return Err(Error::InvalidNodeCount {
                    dim,
                    n,
                    reason: "at least 4 nodes are needed to integrate v⊗v exactly".into(),
                });
            }
            if n % 2 != 0 {
                return Err(Error::InvalidNodeCount {
                    dim,
                    n,
                    reason: "node count must be even so the set is closed under v -> -v".into(),
                });
            }
            (0..n)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [radius * phi.cos(), radius * phi.sin(), 0.0]
                })
                .collect()
        }
        3 => match n {
            6 => {
                let mut v = Vec::with_capacity(6);
                for axis in 0..3 {
                    for sign in [1.0, -1.0] {
                        let mut node = [0.0; 3];
                        node[axis] = sign * radius;
                        v.push(node);
                    }
                }
                v
            }
            12 => icosahedron_nodes(radius),
            _ => {
                return Err(Error::InvalidNodeCount {
                    dim,
                    n,
                    reason: "supported antipodal designs for d=3 are N=6 (octahedron) and N=12 (icosahedron)".into(),
                })
            }
        },
        _ => unreachable!(),
    };

    let measure = match dim {
        2 => 2.0 * std::f64::consts::PI * radius,
        _ => 4.0 * std::f64::consts::PI * radius * radius,
    };
    let w = measure / nodes.len() as f64;
    let weights = vec![w; nodes.len()];
    let antipode = pair_map(&nodes, radius, |v| [-v[0], -v[1], -v[2]])?;
    let mirror_x = pair_map(&nodes, radius, |v| [-v[0], v[1], v[2]])?;
    let mirror_y = pair_map(&nodes, radius, |v| [v[0], -v[1], v[2]])?;

    let grid = VelocityGrid {
        dim,
        radius,
        nodes,
        weights,
        measure,
        antipode,
        mirror_x,
        mirror_y,
    };
    grid.check_invariants()?;
    Ok(grid)
}

/// Icosahedron vertices scaled to radius `r`: cyclic permutations of
/// `(0, ±1, ±φ)` with `φ` the golden ratio.
fn icosahedron_nodes(r: f64) -> Vec<Vec3> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let s = r / (1.0 + phi * phi).sqrt();
    let mut nodes = Vec::with_capacity(12);
    for &a in &[1.0, -1.0] {
        for &b in &[phi, -phi] {
            nodes.push([0.0, a * s, b * s]);
            nodes.push([a * s, b * s, 0.0]);
            nodes.push([b * s, 0.0, a * s]);
        }
    }
    nodes
}

/// For each node, find the index of `map(node)`. Fails if the set is not
/// closed under `map`.
fn pair_map(nodes: &[Vec3], radius: f64, map: impl Fn(&Vec3) -> Vec3) -> Result<Vec<usize>> {
    let tol = 1e-9 * radius;
    nodes
        .iter()
        .map(|v| {
            let target = map(v);
            nodes
                .iter()
                .position(|w| {
                    (w[0] - target[0]).abs() < tol
                        && (w[1] - target[1]).abs() < tol
                        && (w[2] - target[2]).abs() < tol
                })
                .ok_or_else(|| Error::InvalidNodeCount {
                    dim: 0,
                    n: nodes.len(),
                    reason: "node set is not closed under the required symmetry".into(),
                })
        })
        .collect()
}

impl VelocityGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Total measure `|V|` of the velocity set.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, k: usize) -> &Vec3 {
        &self.nodes[k]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Index of `-v_k`.
    pub fn antipode(&self, k: usize) -> usize {
        self.antipode[k]
    }

    /// Index of the node obtained by flipping the first velocity component;
    /// used by specular reflection at walls normal to x.
    pub fn mirror_x(&self, k: usize) -> usize {
        self.mirror_x[k]
    }

    /// Same for the second component (walls normal to y).
    pub fn mirror_y(&self, k: usize) -> usize {
        self.mirror_y[k]
    }

    fn check_invariants(&self) -> Result<()> {
        for v in &self.nodes {
            if (linalg::norm(v) - self.radius).abs() > GRID_TOL * self.radius {
                return Err(Error::InvalidNodeCount {
                    dim: self.dim,
                    n: self.nodes.len(),
                    reason: "a node is off the sphere".into(),
                });
            }
        }
        let wsum: f64 = self.weights.iter().sum();
        if (wsum - self.measure).abs() > GRID_TOL * self.measure {
            return Err(Error::InvalidNodeCount {
                dim: self.dim,
                n: self.nodes.len(),
                reason: "weights do not sum to |V|".into(),
            });
        }
        let ones = vec![1.0; self.len()];
        let odd = self.first_moment(&ones)?;
        if linalg::norm(&odd) > GRID_TOL * self.measure * self.radius {
            return Err(Error::InvalidNodeCount {
                dim: self.dim,
                n: self.nodes.len(),
                reason: "discrete odd moment does not vanish".into(),
            });
        }
        Ok(())
    }

    fn check_len(&self, f: &[f64], what: &'static str) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `⟨f⟩ = Σ_k w_k f_k`.
    pub fn moment(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f, "moment integrand")?;
        Ok(self
            .weights
            .iter()
            .zip(f)
            .map(|(w, fk)| w * fk)
            .sum())
    }

    /// `⟨ g(v) f ⟩` for a scalar weight function evaluated at the nodes.
    pub fn moment_with(&self, f: &[f64], weight: impl Fn(&Vec3) -> f64) -> Result<f64> {
        self.check_len(f, "moment integrand")?;
        Ok(self
            .weights
            .iter()
            .zip(&self.nodes)
            .zip(f)
            .map(|((w, v), fk)| w * weight(v) * fk)
            .sum())
    }

    /// `⟨ v f ⟩`.
    pub fn first_moment(&self, f: &[f64]) -> Result<Vec3> {
        self.check_len(f, "moment integrand")?;
        let mut out = linalg::ZERO_VEC;
        for ((w, v), fk) in self.weights.iter().zip(&self.nodes).zip(f) {
            linalg::add_assign(&mut out, &linalg::scale(v, w * fk));
        }
        Ok(out)
    }

    /// `⟨ v ⊗ v f ⟩`.
    pub fn second_moment(&self, f: &[f64]) -> Result<Mat3> {
        self.check_len(f, "moment integrand")?;
        let mut out = linalg::ZERO_MAT;
        for ((w, v), fk) in self.weights.iter().zip(&self.nodes).zip(f) {
            linalg::outer_add_assign(&mut out, v, v, w * fk, self.dim);
        }
        Ok(out)
    }
}

/// Velocity distribution at equilibrium: positive, unit mass, zero flux.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    values: Vec<f64>,
}

impl Equilibrium {
    /// The uniform equilibrium `M ≡ 1/|V|`.
    pub fn uniform(grid: &VelocityGrid) -> Self {
        Equilibrium {
            values: vec![1.0 / grid.measure(); grid.len()],
        }
    }

    /// Validate a user-supplied table against the equilibrium invariants:
    /// strict positivity, `⟨M⟩ = 1`, `⟨vM⟩ = 0`, and a floor on
    /// `min M / max M`. Violations are hard errors.
    pub fn from_table(grid: &VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "equilibrium table",
                expected: grid.len(),
                got: values.len(),
            });
        }
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for (k, &m) in values.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidEquilibrium(format!(
                    "M(v_{k}) = {m} is not strictly positive"
                )));
            }
            min = min.min(m);
            max = max.max(m);
        }
        if min < EQUILIBRIUM_RATIO_FLOOR * max {
            return Err(Error::InvalidEquilibrium(format!(
                "min M / max M = {:.3e} is below the floor {EQUILIBRIUM_RATIO_FLOOR:.0e}",
                min / max
            )));
        }
        let mass = grid.moment(&values)?;
        if (mass - 1.0).abs() > GRID_TOL {
            return Err(Error::InvalidEquilibrium(format!(
                "⟨M⟩ = {mass:.15} differs from 1"
            )));
        }
        let flux = grid.first_moment(&values)?;
        if linalg::norm(&flux) > GRID_TOL {
            return Err(Error::InvalidEquilibrium(format!(
                "⟨vM⟩ = {flux:?} does not vanish"
            )));
        }
        Ok(Equilibrium { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }
}
