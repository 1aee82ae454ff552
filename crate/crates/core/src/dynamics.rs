//! Reduced octahedral six-body dynamics.
//!
//! Six equal masses `m = 1/2` sit in symmetric pairs on the coordinate axes at
//! `(±x, 0, 0)`, `(0, ±y, 0)`, `(0, 0, ±z)`. The configuration is the single
//! point `X = (x, y, z)` in the closed positive cone, with
//!
//! ```text
//! K = ½ (ẋ² + ẏ² + ż²)
//! U = 1/√(x²+y²) + 1/√(x²+z²) + 1/√(y²+z²) + (1/x + 1/y + 1/z) / 8
//! ```
//!
//! and equations of motion `Ẍ = ∇U(X)`.
//!
//! Potential and energies are total functions: a collision yields `+∞` for `U`
//! (and the matching infinities for the energies). Gradients and the vector
//! field are only defined in the open cone and return [`Error::Singular`]
//! on the boundary.

use crate::error::{Error, Result};
use serde::Serialize;

/// Plain 3-vector.
pub type Vec3 = [f64; 3];

/// Coordinates at or below this magnitude are treated as an exact zero.
pub const ZERO_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Configuration {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Kind of collision represented by a configuration on the boundary of the cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollisionKind {
    None,
    Double,
    Quadruple,
    Total,
}

impl Configuration {
    /// Validated constructor: every coordinate must be finite and nonnegative.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let c = Configuration { x, y, z };
        c.check_cone()?;
        Ok(c)
    }

    pub fn from_array(p: Vec3) -> Result<Self> {
        Self::new(p[0], p[1], p[2])
    }

    pub fn to_array(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.to_array())
    }

    fn check_cone(&self) -> Result<()> {
        for (name, v) in [("x", self.x), ("y", self.y), ("z", self.z)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::Domain(format!("{name} = {v} is negative")));
            }
        }
        Ok(())
    }

    fn zero_count(&self) -> usize {
        self.to_array().iter().filter(|v| v.abs() <= ZERO_THRESHOLD).count()
    }

    pub fn is_collision(&self) -> bool {
        self.zero_count() > 0
    }

    pub fn collision_kind(&self) -> CollisionKind {
        match self.zero_count() {
            0 => CollisionKind::None,
            1 => CollisionKind::Double,
            2 => CollisionKind::Quadruple,
            _ => CollisionKind::Total,
        }
    }
}

/// Position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State {
    pub config: Configuration,
    pub velocity: Vec3,
}

impl State {
    pub fn new(config: Configuration, velocity: Vec3) -> Self {
        State { config, velocity }
    }
}

/// Energies of a state together with the cluster splittings
/// `U = U_x + U_0 = U_{x,y} + U_1` and `K = K_x + K_0 = K_{x,y} + K_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub lagrangian: f64,
    pub hamiltonian: f64,
    /// Self-interaction of the x pair, `1/(8x)`.
    pub u_x: f64,
    /// Energy of the x pair, `ẋ²/2 − 1/(8x)`.
    pub h_x: f64,
    pub k0: f64,
    pub u0: f64,
    /// Self-interaction of the x, y quadruple.
    pub u_xy: f64,
    pub h_xy: f64,
    pub k1: f64,
    pub u1: f64,
}

pub(crate) fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn inv(v: f64) -> f64 {
    if v.abs() <= ZERO_THRESHOLD {
        f64::INFINITY
    } else {
        1.0 / v
    }
}

/// `U` for a point assumed to lie in the cone. Returns `+∞` on the boundary.
#[inline]
pub(crate) fn potential_raw(p: &Vec3) -> f64 {
    let [x, y, z] = *p;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let mutual = inv((x2 + y2).sqrt()) + inv((x2 + z2).sqrt()) + inv((y2 + z2).sqrt());
    mutual + 0.125 * (inv(x) + inv(y) + inv(z))
}

/// `∇U` for a point assumed strictly interior.
#[inline]
pub(crate) fn gradient_raw(p: &Vec3) -> Vec3 {
    let [x, y, z] = *p;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let rxy = (x2 + y2).powf(-1.5);
    let rxz = (x2 + z2).powf(-1.5);
    let ryz = (y2 + z2).powf(-1.5);
    [
        -x * (rxy + rxz) - 0.125 / x2,
        -y * (rxy + ryz) - 0.125 / y2,
        -z * (rxz + ryz) - 0.125 / z2,
    ]
}

/// Potential `U(X)`; `+∞` at any collision.
pub fn potential(c: &Configuration) -> Result<f64> {
    c.check_cone()?;
    Ok(potential_raw(&c.to_array()))
}

/// Analytic gradient of `U`.
pub fn potential_gradient(c: &Configuration) -> Result<Vec3> {
    c.check_cone()?;
    if c.is_collision() {
        return Err(Error::Singular(format!(
            "gradient requested at collision ({}, {}, {})",
            c.x, c.y, c.z
        )));
    }
    Ok(gradient_raw(&c.to_array()))
}

pub fn kinetic(v: &Vec3) -> f64 {
    0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

/// All energies of a state. Singular terms are reported as infinities.
pub fn energy_breakdown(s: &State) -> EnergyBreakdown {
    let [x, y, z] = s.config.to_array();
    let [vx, vy, vz] = s.velocity;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let m_xy = inv((x2 + y2).sqrt());
    let m_xz = inv((x2 + z2).sqrt());
    let m_yz = inv((y2 + z2).sqrt());
    let (sx, sy, sz) = (0.125 * inv(x), 0.125 * inv(y), 0.125 * inv(z));

    let kinetic = kinetic(&s.velocity);
    let potential = potential_raw(&[x, y, z]);

    let k_x = 0.5 * vx * vx;
    let k0 = 0.5 * (vy * vy + vz * vz);
    let u0 = m_xy + m_xz + m_yz + sy + sz;

    let k_xy = 0.5 * (vx * vx + vy * vy);
    let u_xy = sx + sy + m_xy;
    let k1 = 0.5 * vz * vz;
    let u1 = m_xz + m_yz + sz;

    EnergyBreakdown {
        kinetic,
        potential,
        lagrangian: kinetic + potential,
        hamiltonian: kinetic - potential,
        u_x: sx,
        h_x: k_x - sx,
        k0,
        u0,
        u_xy,
        h_xy: k_xy - u_xy,
        k1,
        u1,
    }
}

/// Hamiltonian `K − U` of a state.
pub fn hamiltonian(s: &State) -> f64 {
    kinetic(&s.velocity) - potential_raw(&s.config.to_array())
}

/// First-order vector field: returns `(Ẋ, Ẍ) = (V, ∇U(X))`.
pub fn eom_rhs(s: &State) -> Result<(Vec3, Vec3)> {
    let acc = potential_gradient(&s.config)?;
    Ok((s.velocity, acc))
}

/// `Ï_x = 4 h_x + 2 U_x + 2 x ∂U_0/∂x` for the moment of inertia `I_x = x²`
/// of the x pair.
pub fn lagrange_jacobi_xdd(s: &State, h_x: f64) -> Result<f64> {
    s.config.check_cone()?;
    let Configuration { x, y, z } = s.config;
    if y <= ZERO_THRESHOLD || z <= ZERO_THRESHOLD {
        return Err(Error::Domain(
            "x-cluster Lagrange-Jacobi relation requires y > 0 and z > 0".into(),
        ));
    }
    let u_x = 0.125 * inv(x);
    let du0_dx = -x * ((x * x + y * y).powf(-1.5) + (x * x + z * z).powf(-1.5));
    Ok(4.0 * h_x + 2.0 * u_x + 2.0 * x * du0_dx)
}

/// `Ï_{x,y} = 4 h_{x,y} + 2 U_{x,y} + 2 (x, y)·∇_{x,y} U_1` for `I_{x,y} = x² + y²`.
pub fn lagrange_jacobi_xy(s: &State, h_xy: f64) -> Result<f64> {
    s.config.check_cone()?;
    let Configuration { x, y, z } = s.config;
    if z <= ZERO_THRESHOLD {
        return Err(Error::Domain(
            "xy-cluster Lagrange-Jacobi relation requires z > 0".into(),
        ));
    }
    let u_xy = 0.125 * (inv(x) + inv(y)) + inv((x * x + y * y).sqrt());
    let du1_dx = -x * (x * x + z * z).powf(-1.5);
    let du1_dy = -y * (y * y + z * z).powf(-1.5);
    Ok(4.0 * h_xy + 2.0 * u_xy + 2.0 * (x * du1_dx + y * du1_dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(x: f64, y: f64, z: f64) -> Configuration {
        Configuration::new(x, y, z).unwrap()
    }

    #[test]
    fn potential_at_unit_point() {
        // 3/√2 + 3/8, term by term
        let expected = 3.0 / 2f64.sqrt() + 3.0 / 8.0;
        assert_relative_eq!(potential(&cfg(1.0, 1.0, 1.0)).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(expected, 2.4963203, epsilon = 1e-7);
    }

    #[test]
    fn potential_singular_and_homogeneous() {
        assert_eq!(potential(&cfg(0.0, 1.0, 1.0)).unwrap(), f64::INFINITY);
        assert_eq!(potential(&cfg(0.0, 0.0, 0.0)).unwrap(), f64::INFINITY);
        let u1 = potential(&cfg(1.0, 1.0, 1.0)).unwrap();
        let u2 = potential(&cfg(2.0, 2.0, 2.0)).unwrap();
        assert_relative_eq!(u2, u1 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn negative_coordinate_is_domain_error() {
        assert!(matches!(Configuration::new(-1.0, 1.0, 1.0), Err(Error::Domain(_))));
        let c = Configuration { x: 1.0, y: -0.5, z: 1.0 };
        assert!(matches!(potential(&c), Err(Error::Domain(_))));
    }

    #[test]
    fn tiny_coordinates_count_as_collisions() {
        let c = cfg(1e-301, 1.0, 2.0);
        assert_eq!(c.collision_kind(), CollisionKind::Double);
        assert_eq!(potential(&c).unwrap(), f64::INFINITY);
        assert_eq!(cfg(0.0, 0.0, 1.0).collision_kind(), CollisionKind::Quadruple);
        assert_eq!(cfg(0.0, 0.0, 0.0).collision_kind(), CollisionKind::Total);
        assert_eq!(cfg(1e-200, 1.0, 1.0).collision_kind(), CollisionKind::None);
    }

    #[test]
    fn gradient_matches_frozen_central_difference() {
        // value obtained from central differences of `potential`, step 1e-6
        let g = potential_gradient(&cfg(1.0, 1.0, 1.0)).unwrap();
        for gi in g {
            assert_relative_eq!(gi, -0.8321068, epsilon = 1e-7);
        }
    }

    #[test]
    fn gradient_at_central_configuration_is_radial() {
        for c in [0.3, 1.0, 2.5] {
            let g = potential_gradient(&cfg(c, c, c)).unwrap();
            let lambda = -(1.0 + 2f64.powf(2.5)) / (8.0 * c * c * c);
            for gi in g {
                assert_relative_eq!(gi, lambda * c, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn gradient_is_permutation_equivariant() {
        let g = potential_gradient(&cfg(0.3, 0.9, 1.7)).unwrap();
        let gp = potential_gradient(&cfg(1.7, 0.3, 0.9)).unwrap();
        assert_eq!([g[2], g[0], g[1]], gp);
    }

    #[test]
    fn gradient_rejects_collision() {
        assert!(matches!(potential_gradient(&cfg(0.0, 1.0, 1.0)), Err(Error::Singular(_))));
    }

    #[test]
    fn kinetic_examples() {
        assert_eq!(kinetic(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(kinetic(&[1.0, 0.0, 0.0]), 0.5);
        assert_eq!(kinetic(&[1.0, 2.0, 2.0]), 4.5);
    }

    #[test]
    fn energy_breakdown_at_rest() {
        let s = State::new(cfg(1.0, 1.0, 1.0), [0.0; 3]);
        let e = energy_breakdown(&s);
        assert_relative_eq!(e.hamiltonian, -2.4963203, epsilon = 1e-7);
        assert_relative_eq!(e.lagrangian, 2.4963203, epsilon = 1e-7);
        assert_eq!(e.h_x, -0.125);
        assert_relative_eq!(e.u_x + e.u0, e.potential, max_relative = 1e-15);
        assert_relative_eq!(e.u_xy + e.u1, e.potential, max_relative = 1e-15);
    }

    #[test]
    fn eom_passes_velocity_through() {
        let s = State::new(cfg(1.0, 1.0, 1.0), [0.1, -0.2, 0.3]);
        let (v, a) = eom_rhs(&s).unwrap();
        assert_eq!(v, s.velocity);
        for ai in a {
            assert_relative_eq!(ai, -0.8321068, epsilon = 1e-7);
        }
        let c = State::new(cfg(1.0, 0.0, 1.0), [0.0; 3]);
        assert!(eom_rhs(&c).is_err());
    }

    #[test]
    fn lagrange_jacobi_blows_up_at_x_collision() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..12 {
            let x = 10f64.powi(-k);
            let s = State::new(cfg(x, 1.0, 1.2), [0.0; 3]);
            let v = lagrange_jacobi_xdd(&s, -0.3).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev > 1e10);
        let s = State::new(cfg(0.5, 0.0, 1.0), [0.0; 3]);
        assert!(matches!(lagrange_jacobi_xdd(&s, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lagrange_jacobi_is_yz_symmetric() {
        let s = State::new(cfg(0.4, 0.8, 1.3), [0.2, 0.1, -0.4]);
        let t = State::new(cfg(0.4, 1.3, 0.8), [0.2, -0.4, 0.1]);
        let hs = energy_breakdown(&s).h_x;
        let ht = energy_breakdown(&t).h_x;
        assert_eq!(lagrange_jacobi_xdd(&s, hs).unwrap(), lagrange_jacobi_xdd(&t, ht).unwrap());
    }
}
